"""Worldline sampler tests.

Exact free-spin formulas anchor the decoupled limit:
M2 = (2/(beta delta)) tanh(beta delta / 2) and <sigma_x> = tanh(beta delta / 2).
Coupled baths are checked against exact diagonalization in the acceptance
suite; here a cheap one-mode instance guards the weight convention.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rabimc import (ModelParams, Schedule, SpectralDensity, Worldline, build_kernel_table,
                    cluster_sweep, diagonalize, init_worldline, measure, metropolis_sweep,
                    new_chain, run_chain, thermal_observables)
from rabimc.ed import DiscretizedBath, FockSpec
from rabimc.wlmc import _attempt_remove, load_checkpoint, save_checkpoint


def free_params(beta):
    return ModelParams(delta=1.0, omega0=0.75, g=0.0, alpha_cav=0.0, omega_c=10.0, beta=beta)


@pytest.fixture(scope="module")
def free_table():
    return build_kernel_table(SpectralDensity.structured(free_params(10.0)), 10.0)


def free_m2(beta_delta):
    return 2.0 * math.tanh(beta_delta / 2) / beta_delta


class TestWorldline:
    def test_init(self):
        wl = init_worldline(free_params(10.0))
        assert wl.n_kinks() == 0 and wl.base_sign == 1
        assert wl.magnetization() == 1.0

    def test_measure_zero_kinks(self):
        s = measure(init_worldline(free_params(10.0)), free_params(10.0))
        assert s.m == 1.0 and s.n_kinks == 0 and s.sigma_x_est == 0.0

    def test_measure_symmetric_pair(self):
        beta = 8.0
        wl = Worldline(beta=beta, base_sign=1, kinks=np.array([beta / 4, 3 * beta / 4]))
        s = measure(wl, free_params(beta))
        assert s.m == pytest.approx(0.0, abs=1e-15)
        assert s.n_kinks == 2 and s.m2 == s.m * s.m

    def test_estimator_identity(self):
        # hq = -(delta/2) sigma_x holds per sample, exactly
        p = free_params(10.0)
        wl = Worldline(beta=10.0, kinks=np.sort(np.random.default_rng(0).uniform(0.01, 9.99, 6)))
        s = measure(wl, p)
        assert s.hq_est == -(p.delta / 2) * s.sigma_x_est

    def test_sign_reconstruction(self):
        wl = Worldline(beta=10.0, base_sign=1, kinks=np.array([2.0, 5.0, 6.0, 9.0]))
        assert wl.sign_at(1.0) == 1
        assert wl.sign_at(3.0) == -1
        assert wl.sign_at(5.5) == 1
        assert wl.sign_at(7.0) == -1
        assert wl.sign_at(9.5) == 1

    def test_validate_rejects_odd_or_unsorted(self):
        with pytest.raises(ValueError):
            Worldline(beta=10.0, kinks=np.array([1.0])).validate()
        with pytest.raises(ValueError):
            Worldline(beta=10.0, kinks=np.array([5.0, 1.0])).validate()


@given(kinks=st.lists(st.floats(0.01, 9.99), min_size=0, max_size=8, unique=True),
       base=st.sampled_from([-1, 1]))
@settings(max_examples=200, deadline=None)
def test_magnetization_matches_direct_integration(kinks, base):
    if len(kinks) % 2:
        kinks = kinks[:-1]
    wl = Worldline(beta=10.0, base_sign=base, kinks=np.sort(np.array(kinks, dtype=float)))
    # direct Riemann evaluation of (1/beta) int sigma(tau) dtau
    taus = (np.arange(200000) + 0.5) * (10.0 / 200000)
    flips = np.searchsorted(wl.kinks, taus, side="right")
    signs = base * np.where(flips % 2, -1, 1)
    assert wl.magnetization() == pytest.approx(signs.mean(), abs=1e-3)
    assert -1.0 <= wl.magnetization() <= 1.0


class TestInvariantsUnderUpdates:
    @pytest.mark.parametrize("family", ["cluster", "metropolis"])
    def test_invariants_hold_with_coupling(self, family):
        modes = [(0.9, 0.45)]
        p = ModelParams(delta=1.0, omega0=0.75, g=0.0, alpha_cav=0.2, omega_c=10.0, beta=6.0)
        sd = SpectralDensity.discrete(p, modes)
        kt = build_kernel_table(sd, 6.0)
        state = new_chain(p, seed=5)
        step = cluster_sweep if family == "cluster" else metropolis_sweep
        for _ in range(300):
            step(state, kt, p)
            state.worldline.validate()
            s = measure(state.worldline, p)
            assert -1.0 <= s.m <= 1.0 and 0.0 <= s.m2 <= 1.0

    def test_delta_zero_cluster(self):
        p = ModelParams(delta=0.0, omega0=0.75, g=0.0, alpha_cav=0.0, omega_c=10.0, beta=10.0)
        kt = build_kernel_table(SpectralDensity.structured(p), 10.0)
        state = new_chain(p, seed=1)
        ms = []
        for _ in range(64):
            cluster_sweep(state, kt, p)
            s = measure(state.worldline, p)
            assert s.m2 == 1.0 and s.n_kinks == 0
            ms.append(s.m)
        assert {1.0, -1.0} == set(ms)       # global flips do occur

    def test_removal_on_zero_kinks_rejected(self, free_table):
        p = free_params(10.0)
        state = new_chain(p, seed=2)
        assert not _attempt_remove(state, free_table, p)
        assert state.worldline.n_kinks() == 0 and state.worldline.base_sign == 1


class TestFreeSpin:
    def test_cluster_matches_analytic(self, free_table):
        p = free_params(10.0)
        res = run_chain(p, free_table, Schedule(n_therm=500, n_sweeps=24000, bin_len=120,
                                                seed=301, family="cluster"))
        assert res.m2.compatible(free_m2(10.0))
        assert res.sigma_x.compatible(math.tanh(5.0))
        assert res.m.compatible(0.0)
        assert res.delta_eff is not None and res.delta_eff.compatible(1.0)

    def test_metropolis_matches_analytic(self, free_table):
        p = free_params(10.0)
        res = run_chain(p, free_table, Schedule(n_therm=500, n_sweeps=16000, bin_len=120,
                                                seed=302, family="metropolis"))
        assert res.sigma_x.compatible(math.tanh(5.0))      # -> 0.999909
        assert res.m2.compatible(free_m2(10.0))

    def test_hq_identity_at_estimate_level(self, free_table):
        p = free_params(10.0)
        res = run_chain(p, free_table, Schedule(n_therm=200, n_sweeps=4000, bin_len=80,
                                                seed=303, family="cluster"))
        assert res.hq.mean == pytest.approx(-(p.delta / 2) * res.sigma_x.mean, rel=1e-12)


class TestKinkDistribution:
    def test_cluster_samples_even_poisson_law(self):
        # with K = 0 the stationary kink-count law is P(n) ∝ x^n / n! over even
        # n with x = beta delta / 2; checks the measure, not just its mean
        beta = 3.0
        p = ModelParams(delta=1.0, omega0=0.75, g=0.0, alpha_cav=0.0, omega_c=10.0, beta=beta)
        kt = build_kernel_table(SpectralDensity.structured(p), beta)
        state = new_chain(p, seed=140)
        counts = {}
        n_samp = 40000
        for _ in range(200):
            cluster_sweep(state, kt, p)
        for _ in range(n_samp):
            cluster_sweep(state, kt, p)
            n = state.worldline.n_kinks()
            counts[n] = counts.get(n, 0) + 1

        x = beta / 2
        norm = math.cosh(x)
        tau_pad = 4.0      # generous effective-sample deflation for autocorrelation
        for n in (0, 2, 4, 6):
            p_n = x**n / math.factorial(n) / norm
            expect = n_samp * p_n
            sigma = math.sqrt(n_samp * p_n * (1 - p_n) * tau_pad)
            assert abs(counts.get(n, 0) - expect) <= 4 * sigma, (
                f"n={n}: observed {counts.get(n, 0)}, expected {expect:.0f} ± {sigma:.0f}")


class TestFamilyConsistency:
    def test_one_mode_bath_both_families_and_ed(self):
        # one strongly coupled mode: wrong weight conventions fail loudly here
        modes = [(0.8, 0.4)]
        beta = 6.0
        p = ModelParams(delta=1.0, omega0=0.75, g=0.0, alpha_cav=0.2, omega_c=10.0, beta=beta)
        sd = SpectralDensity.discrete(p, modes)
        kt = build_kernel_table(sd, beta)
        exact = thermal_observables(diagonalize(1.0, DiscretizedBath(tuple(modes)), FockSpec((12,))), beta)
        res_c = run_chain(p, kt, Schedule(n_therm=800, n_sweeps=30000, bin_len=150,
                                          seed=41, family="cluster"))
        res_m = run_chain(p, kt, Schedule(n_therm=800, n_sweeps=12000, bin_len=150,
                                          seed=42, family="metropolis"))
        assert res_c.m2.compatible(exact["m2"])
        assert res_m.m2.compatible(exact["m2"])
        assert res_c.sigma_x.compatible(exact["sigma_x"])
        assert res_m.sigma_x.compatible(exact["sigma_x"])
        assert res_c.m2.compatible(res_m.m2)
        assert res_c.sigma_x.compatible(res_m.sigma_x)
        assert res_c.m.compatible(0.0) and res_m.m.compatible(0.0)   # no-field symmetry


class TestDeepCoupling:
    def test_ordered_phase_at_low_temperature(self):
        # far above the transition at beta*delta = 1000 the squared
        # magnetization saturates toward 1 while the kink estimator keeps
        # <H_Q> strictly away from zero
        beta = 1000.0
        p = ModelParams(delta=1.0, omega0=0.75, g=1.2, alpha_cav=0.2, omega_c=10.0, beta=beta)
        kt = build_kernel_table(SpectralDensity.structured(p), beta, tol=1e-6)
        res = run_chain(p, kt, Schedule(n_therm=200, n_sweeps=800, bin_len=40,
                                        seed=606, family="cluster"))
        assert res.m2.mean > 0.9
        assert res.hq.mean < 0.0 and abs(res.hq.mean) > 5 * res.hq.std_error


class TestCheckpointing:
    def test_roundtrip_bit_exact(self, tmp_path, free_table):
        p = free_params(10.0)
        sched = Schedule(n_therm=100, n_sweeps=400, bin_len=20, seed=77, family="cluster")
        full = run_chain(p, free_table, sched)

        half_state = new_chain(p, np.random.SeedSequence(77))
        # replay the first half manually, checkpoint, then resume
        while half_state.sweep < 250:
            cluster_sweep(half_state, free_table, p)
            if half_state.sweep > sched.n_therm:
                half_state.record(measure(half_state.worldline, p))
        path = tmp_path / "chain.ckpt"
        save_checkpoint(half_state, path, {"tag": "test"})
        loaded, meta = load_checkpoint(path)
        assert meta == {"tag": "test"}
        resumed = run_chain(p, free_table, sched, state=loaded)

        assert resumed.state.samples_m == full.state.samples_m
        assert resumed.state.samples_n == full.state.samples_n
        assert np.array_equal(resumed.state.worldline.kinks, full.state.worldline.kinks)
        assert resumed.state.worldline.base_sign == full.state.worldline.base_sign
        assert resumed.m2.mean == full.m2.mean and resumed.m2.std_error == full.m2.std_error

    def test_checkpoint_preserves_rng_stream(self, tmp_path, free_table):
        p = free_params(10.0)
        state = new_chain(p, seed=9)
        for _ in range(50):
            cluster_sweep(state, free_table, p)
        path = tmp_path / "c.ckpt"
        save_checkpoint(state, path, {})
        twin, _ = load_checkpoint(path)
        for _ in range(50):
            cluster_sweep(state, free_table, p)
            cluster_sweep(twin, free_table, p)
        assert np.array_equal(state.worldline.kinks, twin.worldline.kinks)
        assert state.rng.bit_generator.state == twin.rng.bit_generator.state


class TestRunResult:
    def test_delta_eff_undefined_at_delta_zero(self):
        p = ModelParams(delta=0.0, omega0=0.75, g=0.0, alpha_cav=0.0, omega_c=10.0, beta=10.0)
        kt = build_kernel_table(SpectralDensity.structured(p), 10.0)
        res = run_chain(p, kt, Schedule(n_therm=10, n_sweeps=200, bin_len=10, seed=1))
        assert res.delta_eff is None and "delta" in res.delta_eff_reason
        assert res.m2.mean == 1.0

    def test_undersampled_flag(self, free_table):
        p = free_params(10.0)
        res = run_chain(p, free_table, Schedule(n_therm=100, n_sweeps=2000, bin_len=2, seed=3))
        assert res.sigma_x.undersampled       # bin_len 2 < 20 * tau_int
