"""Run orchestration: parameter sweeps, persistence, result tables, fit reports.

Configuration is flat ``key = value`` text with typed keys and a version tag.
Outputs are split into a deterministic set (CSV table + results JSON, byte
identical for identical config and seed) and a run log (wall times, thread
counts) that is allowed to vary between runs.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import CheckpointMismatchError, ConfigError
from .spectral import (KernelGrid, KernelTable, ModelParams, SpectralDensity,
                       alpha_eff, build_kernel_table, save_kernel_table, total_ohmic_coupling)
from .stats import MCEstimate
from .wlmc import Schedule, estimates_from_chains, load_checkpoint, run_chain

THREADS_ENV_VAR = "RABIMC_THREADS"

_BOOL = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def _parse_modes(text: str) -> list[tuple[float, float]]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        w_str, _, l_str = tok.partition(":")
        out.append((float(w_str), float(l_str)))
    return out


# key -> (parser, default); None default means required-if-used
_CONFIG_KEYS: dict = {
    "config_version": (int, None),
    "delta": (float, 1.0),
    "omega0": (float, 0.75),
    "alpha_cav": (float, 0.2),
    "alpha_q": (float, 0.0),
    "omega_c": (float, 10.0),
    "bath": (str, "structured"),
    "modes": (_parse_modes, []),
    "g_list": (_parse_float_list, []),
    "alpha_list": (_parse_float_list, []),
    "beta_list": (_parse_float_list, []),
    "n_therm": (int, 10000),
    "n_sweeps": (int, 0),
    "bin_len": (int, 100),
    "n_chains": (int, 8),
    "seed": (int, None),
    "family": (str, "cluster"),
    "checkpoint_every": (int, 0),
    "kernel_tol": (float, 1e-7),
    "kernel_tau_points": (int, 2048),
    "ed_n_modes": (int, 2),
    "ed_n_max": (_parse_int_list, [10, 8]),
    "ed_beta": (float, 5.0),
    "ed_h": (float, 1e-3),
    "ed_t_max": (float, 20.0),
    "ed_t_points": (int, 401),
    "wlmc_compare": (lambda s: _BOOL[s.lower()], False),
}

CONFIG_VERSION = 1


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    source: str = "<memory>"

    def __getattr__(self, name):
        try:
            return self.values[name]
        except KeyError:
            raise AttributeError(name)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        values = {k: (list(d) if isinstance(d, list) else d) for k, (_p, d) in _CONFIG_KEYS.items()}
        seen = set()
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                key, eq, val = line.partition("=")
                key, val = key.strip(), val.strip()
                if not eq or not key:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
                if key not in _CONFIG_KEYS:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                if key in seen:
                    raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
                seen.add(key)
                parser, _default = _CONFIG_KEYS[key]
                try:
                    values[key] = parser(val)
                except (ValueError, KeyError) as exc:
                    raise ConfigError(f"{path}:{lineno}: key {key!r}: cannot parse {val!r} ({exc})")
        for key in ("config_version", "seed"):
            if values.get(key) is None:
                raise ConfigError(f"{path}: missing required key {key!r}")
        if values["config_version"] != CONFIG_VERSION:
            raise ConfigError(f"{path}: unsupported config_version {values['config_version']}")
        if values["bath"] not in ("structured", "pure_ohmic", "discrete"):
            raise ConfigError(f"{path}: bath must be structured|pure_ohmic|discrete")
        if values["family"] not in ("cluster", "metropolis"):
            raise ConfigError(f"{path}: family must be cluster|metropolis")
        cfg = cls(values=values, source=str(path))
        return cfg

    def echo(self) -> dict:
        """String echo of every key, serialized into all outputs."""
        out = {}
        for key, val in sorted(self.values.items()):
            if isinstance(val, list):
                if key == "modes":
                    out[key] = ";".join(f"{w!r}:{l!r}" for w, l in val)
                else:
                    out[key] = ",".join(repr(v) for v in val)
            else:
                out[key] = repr(val) if isinstance(val, float) else str(val)
        return out


@dataclass(frozen=True)
class PointSpec:
    """One sweep grid point before beta is attached."""

    index: int
    g: float
    alpha_q: float
    label: str


def grid_points(cfg: RunConfig) -> list[PointSpec]:
    bath = cfg.bath
    if bath == "structured":
        if not cfg.g_list:
            raise ConfigError("structured sweep requires g_list")
        return [PointSpec(i, g, cfg.alpha_q, f"g={g!r}") for i, g in enumerate(cfg.g_list)]
    if bath == "pure_ohmic":
        if not cfg.alpha_list:
            raise ConfigError("pure_ohmic sweep requires alpha_list")
        return [PointSpec(i, 0.0, a, f"alpha={a!r}") for i, a in enumerate(cfg.alpha_list)]
    if not cfg.modes:
        raise ConfigError("discrete bath requires modes")
    return [PointSpec(0, 0.0, 0.0, "discrete")]


def make_params(cfg: RunConfig, point: PointSpec, beta: float) -> ModelParams:
    return ModelParams(delta=cfg.delta, omega0=cfg.omega0, g=point.g, alpha_cav=cfg.alpha_cav,
                       omega_c=cfg.omega_c, beta=beta, alpha_q=point.alpha_q)


def make_density(cfg: RunConfig, params: ModelParams) -> SpectralDensity:
    if cfg.bath == "structured":
        return SpectralDensity.structured(params)
    if cfg.bath == "pure_ohmic":
        return SpectralDensity.pure_ohmic(params)
    return SpectralDensity.discrete(params, cfg.modes)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


CSV_COLUMNS = [
    "g", "beta", "alpha_eff", "alpha_total",
    "m2_mean", "m2_err", "m2_tau_int",
    "sigma_x_mean", "sigma_x_err", "sigma_x_tau_int",
    "hq_mean", "hq_err",
    "delta_eff_mean", "delta_eff_err",
    "n_samples",
]


@dataclass
class ResultRow:
    g: float
    beta: float
    alpha_eff: float
    alpha_total: float
    m2: MCEstimate
    sigma_x: MCEstimate
    hq: MCEstimate
    delta_eff: MCEstimate | None
    delta_eff_reason: str | None
    n_samples: int
    wall_time_s: float

    def csv_cells(self) -> list[str]:
        de_mean = self.delta_eff.mean if self.delta_eff else float("nan")
        de_err = self.delta_eff.std_error if self.delta_eff else float("nan")
        vals = [self.g, self.beta, self.alpha_eff, self.alpha_total,
                self.m2.mean, self.m2.std_error, self.m2.tau_int,
                self.sigma_x.mean, self.sigma_x.std_error, self.sigma_x.tau_int,
                self.hq.mean, self.hq.std_error, de_mean, de_err]
        return [_fmt(v) for v in vals] + [str(self.n_samples)]

    def json_payload(self) -> dict:
        def est(e: MCEstimate | None):
            if e is None:
                return None
            return {"mean": e.mean, "std_error": e.std_error, "tau_int": e.tau_int,
                    "undersampled": e.undersampled}

        return {"g": self.g, "beta": self.beta, "alpha_eff": self.alpha_eff,
                "alpha_total": self.alpha_total, "m2": est(self.m2), "sigma_x": est(self.sigma_x),
                "hq": est(self.hq), "delta_eff": est(self.delta_eff),
                "delta_eff_reason": self.delta_eff_reason, "n_samples": self.n_samples}


def _checkpoint_meta(cfg: RunConfig, point: PointSpec, beta: float, chain: int) -> dict:
    meta = {
        "delta": repr(cfg.delta), "omega0": repr(cfg.omega0), "g": repr(point.g),
        "alpha_cav": repr(cfg.alpha_cav), "alpha_q": repr(point.alpha_q),
        "omega_c": repr(cfg.omega_c), "beta": repr(beta), "bath": cfg.bath,
        "n_therm": str(cfg.n_therm), "n_sweeps": str(cfg.n_sweeps),
        "bin_len": str(cfg.bin_len), "seed": str(cfg.seed), "family": cfg.family,
        "chain": str(chain), "point": str(point.index),
    }
    if cfg.bath == "discrete":
        meta["modes"] = ";".join(f"{w!r},{l!r}" for w, l in cfg.modes)
    return meta


def _chain_task(args):
    """Worker: run (or resume) one chain; returns its sample stream."""
    (cfg_values, point, beta, chain_idx, kt, ckpt_path, resume, master_seed) = args
    cfg = RunConfig(values=cfg_values)
    params = make_params(cfg, point, beta)
    meta = _checkpoint_meta(cfg, point, beta, chain_idx)
    state = None
    if resume and ckpt_path and os.path.exists(ckpt_path):
        state, found = load_checkpoint(ckpt_path)
        diff = {k: (found.get(k), meta[k]) for k in meta if found.get(k) != meta[k]}
        extra = {k: (found[k], None) for k in found if k not in meta}
        diff.update(extra)
        if diff:
            raise CheckpointMismatchError(f"checkpoint {ckpt_path} does not match configuration", diff)
    seed_seq = np.random.SeedSequence(master_seed,
                                      spawn_key=(point.index, int(round(beta * 1e6)) % (2**31), chain_idx))
    schedule = Schedule(n_therm=cfg.n_therm, n_sweeps=cfg.n_sweeps, bin_len=cfg.bin_len,
                        seed=master_seed, family=cfg.family,
                        checkpoint_path=ckpt_path, checkpoint_every=cfg.checkpoint_every)
    if state is None:
        from .wlmc import new_chain

        state = new_chain(params, seed_seq)
    t0 = time.monotonic()
    result = run_chain(params, kt, schedule, state=state, checkpoint_meta=meta)
    elapsed = time.monotonic() - t0
    st = result.state
    return (point.index, beta, chain_idx, np.asarray(st.samples_m),
            np.asarray(st.samples_n, dtype=float), elapsed)


def cmd_sweep(cfg: RunConfig, out_dir, resume: bool = False, threads: int = 1,
              overrides: dict | None = None) -> list[ResultRow]:
    """Run the (coupling, beta) grid and write results.csv / results.json / run_log.json."""
    if cfg.n_sweeps <= 0:
        raise ConfigError("sweep requires n_sweeps > 0")
    if not cfg.beta_list:
        raise ConfigError("sweep requires beta_list")
    os.makedirs(out_dir, exist_ok=True)
    ckpt_dir = os.path.join(out_dir, "checkpoints")
    os.makedirs(ckpt_dir, exist_ok=True)

    points = grid_points(cfg)
    tasks = []
    tables: dict[tuple[int, float], KernelTable] = {}
    for point in points:
        for beta in cfg.beta_list:
            params = make_params(cfg, point, beta)
            sd = make_density(cfg, params)
            kt = build_kernel_table(sd, beta, KernelGrid(n_points=cfg.kernel_tau_points),
                                    tol=cfg.kernel_tol)
            tables[(point.index, beta)] = kt
            for chain in range(cfg.n_chains):
                ckpt = os.path.join(ckpt_dir, f"point{point.index:03d}_beta{beta:g}_chain{chain:02d}.ckpt")
                tasks.append((cfg.values, point, beta, chain, kt, ckpt, resume, cfg.seed))

    t0 = time.monotonic()
    point_times: dict[tuple[int, float], float] = {}
    streams: dict[tuple[int, float], dict[int, tuple[np.ndarray, np.ndarray]]] = {}
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_chain_task, tasks))
    else:
        results = [_chain_task(t) for t in tasks]
    for p_idx, beta, chain_idx, m_arr, n_arr, elapsed in results:
        streams.setdefault((p_idx, beta), {})[chain_idx] = (m_arr, n_arr)
        point_times[(p_idx, beta)] = point_times.get((p_idx, beta), 0.0) + elapsed
    wall_total = time.monotonic() - t0

    rows: list[ResultRow] = []
    for point in points:
        for beta in cfg.beta_list:
            params = make_params(cfg, point, beta)
            per_chain = streams[(point.index, beta)]
            series = [per_chain[c] for c in sorted(per_chain)]    # deterministic chain order
            res = estimates_from_chains(series, params, cfg.bin_len, cfg.n_therm, cfg.seed)
            rows.append(ResultRow(
                g=point.g, beta=beta, alpha_eff=alpha_eff(params),
                alpha_total=total_ohmic_coupling(params),
                m2=res.m2, sigma_x=res.sigma_x, hq=res.hq,
                delta_eff=res.delta_eff, delta_eff_reason=res.delta_eff_reason,
                n_samples=res.m2.n_samples,
                wall_time_s=point_times.get((point.index, beta), 0.0)))

    _write_rows(cfg, out_dir, rows, overrides or {})
    # wall times are real-time measurements and live only in the run log,
    # keeping results.csv/results.json byte-reproducible
    log = {"total_wall_time_s": wall_total, "threads_used": threads,
           "n_tasks": len(tasks), "package_version": __version__,
           "rows": [{"g": r.g, "beta": r.beta, "wall_time_s": r.wall_time_s} for r in rows]}
    with open(os.path.join(out_dir, "run_log.json"), "w") as fh:
        json.dump(log, fh, indent=2, sort_keys=True)
    return rows


def _write_rows(cfg: RunConfig, out_dir, rows: list[ResultRow], overrides: dict) -> None:
    csv_path = os.path.join(out_dir, "results.csv")
    with open(csv_path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(row.csv_cells()) + "\n")
    payload = {
        "format": "sweep-results/1",
        "package_version": __version__,
        "config": cfg.echo(),
        "overrides": {k: str(v) for k, v in sorted(overrides.items())},
        "rows": [r.json_payload() for r in rows],
    }
    with open(os.path.join(out_dir, "results.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def cmd_kernel_table(cfg: RunConfig, out_dir) -> list[str]:
    """Build, certify and export one kernel table per (coupling, beta) grid point."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    index = []
    for point in grid_points(cfg):
        for beta in cfg.beta_list:
            params = make_params(cfg, point, beta)
            sd = make_density(cfg, params)
            kt = build_kernel_table(sd, beta, KernelGrid(n_points=cfg.kernel_tau_points),
                                    tol=cfg.kernel_tol)
            name = f"kernel_point{point.index:03d}_beta{beta:g}.txt"
            save_kernel_table(kt, os.path.join(out_dir, name))
            written.append(name)
            index.append({"file": name, "point": point.label, "beta": beta,
                          "tol_certified": kt.tol, "k_total": kt.k_total})
    with open(os.path.join(out_dir, "kernel_index.json"), "w") as fh:
        json.dump({"format": "kernel-index/1", "tables": index, "config": cfg.echo()},
                  fh, indent=2, sort_keys=True)
    return written


def read_results_csv(path) -> list[dict]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = []
        for line in fh:
            if not line.strip():
                continue
            cells = line.strip().split(",")
            rows.append({k: (int(v) if k == "n_samples" else float(v)) for k, v in zip(header, cells)})
    return rows


def cmd_bkt_fit(result_paths: list, out_dir, n_boot: int = 500, seed: int = 0) -> dict:
    """Crossing fit over the rows of one or more sweep CSVs; JSON report + G-curve CSV."""
    from .bkt import PsiPoint, find_critical, fit_beta0

    os.makedirs(out_dir, exist_ok=True)
    points = []
    for path in result_paths:
        for row in read_results_csv(path):
            est = MCEstimate(mean=row["m2_mean"], std_error=row["m2_err"],
                             tau_int=row["m2_tau_int"], n_samples=row["n_samples"], n_therm=0)
            points.append(PsiPoint(g=row["g"], alpha_eff=row["alpha_total"], beta=row["beta"], m2=est))
    if not points:
        raise ConfigError("no rows found in the given results files")
    fit = find_critical(points, n_boot=n_boot, seed=seed)

    # refit beta0 from the two couplings bracketing the crossing
    near = sorted({p.alpha_eff for p in points}, key=lambda a: abs(a - fit.alpha_c))[:2]
    sel = [p for p in points if p.alpha_eff in near]
    try:
        b0fit = fit_beta0(np.array([p.beta for p in sel]),
                          np.array([p.alpha_eff * p.m2.mean for p in sel]),
                          np.array([p.alpha_eff * p.m2.std_error for p in sel]))
    except Exception as exc:   # diagnostics only; the crossing-level beta0 stands
        b0fit = {"error": str(exc)}

    report = {
        "format": "bkt-fit/1",
        "alpha_c": fit.alpha_c, "alpha_c_err": fit.alpha_c_err,
        "g_c": fit.g_c, "g_c_err": fit.g_c_err,
        "beta0": fit.beta0, "beta0_err": fit.beta0_err,
        "psi_c": fit.psi_c, "psi_c_err": fit.psi_c_err,
        "n_boot": fit.n_boot,
        "covariance": fit.covariance,
        "slopes": {f"{a:.12g}": {"slope": s, "err": e} for a, (s, e) in sorted(fit.slopes.items())},
        "beta0_form_fit": {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in b0fit.items()},
        "excluded": [list(map(str, e)) for e in fit.excluded],
    }
    with open(os.path.join(out_dir, "bkt_fit.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    with open(os.path.join(out_dir, "g_curves.csv"), "w") as fh:
        fh.write("g,alpha_eff,beta,psi,psi_err,g_value,g_err,usable\n")
        for g, a, beta, gp in fit.g_curves:
            fh.write(",".join([_fmt(g), _fmt(a), _fmt(beta), _fmt(gp.psi), _fmt(gp.psi_err),
                               _fmt(gp.value), _fmt(gp.err), str(int(gp.usable))]) + "\n")
    return report


DEFAULT_TWO_MODE_BATH = ((0.743, 0.301), (1.337, 0.452))


def cmd_ed_check(cfg: RunConfig, out_dir) -> dict:
    """Exact-diagonalization identity suite, optionally compared against WLMC."""
    from . import ed

    os.makedirs(out_dir, exist_ok=True)
    modes = tuple(cfg.modes) if cfg.modes else DEFAULT_TWO_MODE_BATH
    bath = ed.DiscretizedBath(modes, provenance="ed-check config")
    fock = ed.FockSpec(tuple(cfg.ed_n_max[: len(modes)]) if len(cfg.ed_n_max) >= len(modes)
                       else tuple([cfg.ed_n_max[0]] * len(modes)))
    beta = cfg.ed_beta
    spectrum = ed.diagonalize(cfg.delta, bath, fock)
    obs = ed.thermal_observables(spectrum, beta)
    eps = 1e-3 * cfg.delta
    z_grid = np.linspace(0.05 * cfg.delta, 4.0 * cfg.delta, 160) + 1j * eps

    mori_yy_expected = 2.0 * obs["sigma_x"] / (beta * cfg.delta)
    residuals = {
        "completeness": spectrum.completeness_residual(),
        "sum_rule": ed.sum_rule_residual(spectrum, beta),
        "relaxation_identity": ed.relaxation_identity_residual(spectrum, beta, z_grid),
        "mori_zz_vs_m2": abs(obs["mori_zz"] - obs["m2"]),
        "mori_yy_vs_kink_estimator": abs(obs["mori_yy"] - mori_yy_expected),
    }

    sus = ed.susceptibility(spectrum, beta, z_grid)
    with open(os.path.join(out_dir, "susceptibility.csv"), "w") as fh:
        fh.write("omega,re_relax,im_relax,re_chi,im_chi\n")
        for z, rel, chi in zip(z_grid, sus["relax_z"], sus["chi"]):
            fh.write(",".join(_fmt(v) for v in
                              (z.real, rel.real, rel.imag, chi.real, chi.imag)) + "\n")
    conv = ed.fock_convergence(cfg.delta, bath, fock, beta)
    checks = {
        "completeness": residuals["completeness"] <= 1e-8,
        "sum_rule": residuals["sum_rule"] <= 1e-8,
        "relaxation_identity": residuals["relaxation_identity"] <= 1e-8,
        "mori_zz_vs_m2": residuals["mori_zz_vs_m2"] <= 1e-10,
        "mori_yy_vs_kink_estimator": residuals["mori_yy_vs_kink_estimator"] <= 1e-10,
        "fock_converged": conv["converged"],
    }
    report = {
        "format": "ed-check/1",
        "beta": beta,
        "modes": [list(m) for m in modes],
        "n_max": list(fock.n_max),
        "observables": obs,
        "residuals": residuals,
        "fock_convergence": {"converged": conv["converged"], "max_shift": conv["max_shift"]},
        "checks": checks,
    }

    if cfg.wlmc_compare:
        params = ModelParams(delta=cfg.delta, omega0=cfg.omega0, g=0.0, alpha_cav=cfg.alpha_cav,
                             omega_c=cfg.omega_c, beta=beta, alpha_q=0.0)
        sd = SpectralDensity.discrete(params, modes)
        kt = build_kernel_table(sd, beta, tol=cfg.kernel_tol)
        schedule = Schedule(n_therm=cfg.n_therm, n_sweeps=cfg.n_sweeps or 20000,
                            bin_len=cfg.bin_len, seed=cfg.seed, family=cfg.family)
        mc = run_chain(params, kt, schedule)
        comp = {}
        for key, est in (("m2", mc.m2), ("sigma_x", mc.sigma_x)):
            pull = (est.mean - obs[key]) / est.std_error if est.std_error > 0 else float("inf")
            comp[key] = {"wlmc": est.mean, "wlmc_err": est.std_error, "ed": obs[key], "pull": pull,
                         "pass": abs(pull) <= 3.0}
        if mc.delta_eff is not None:
            pull = (mc.delta_eff.mean - obs["delta_eff"]) / mc.delta_eff.std_error
            comp["delta_eff"] = {"wlmc": mc.delta_eff.mean, "wlmc_err": mc.delta_eff.std_error,
                                 "ed": obs["delta_eff"], "pull": pull, "pass": abs(pull) <= 3.0}
        report["wlmc_comparison"] = comp
        checks.update({f"wlmc_{k}": v["pass"] for k, v in comp.items()})

    with open(os.path.join(out_dir, "ed_check.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=float)
    return report


def cmd_relax(cfg: RunConfig, out_dir) -> list[str]:
    """Relaxation traces over the g grid at exact-diagonalization scale."""
    from . import ed

    os.makedirs(out_dir, exist_ok=True)
    if not cfg.g_list:
        raise ConfigError("relax requires g_list")
    t_grid = np.linspace(0.0, cfg.ed_t_max, cfg.ed_t_points)
    written = []
    summary = []
    for i, g in enumerate(cfg.g_list):
        params = ModelParams(delta=cfg.delta, omega0=cfg.omega0, g=g, alpha_cav=cfg.alpha_cav,
                             omega_c=cfg.omega_c, beta=cfg.ed_beta, alpha_q=cfg.alpha_q)
        if g > 0:
            sd = SpectralDensity.structured(params)
            bath = ed.discretize_bath(sd, cfg.ed_n_modes)
        else:
            bath = ed.DiscretizedBath(())
        if bath.n_modes() == 0:
            n_max = ()
        elif len(cfg.ed_n_max) >= bath.n_modes():
            n_max = tuple(cfg.ed_n_max[: bath.n_modes()])
        else:
            n_max = tuple([cfg.ed_n_max[0]] * bath.n_modes())
        trace = ed.relax_sigma_z(cfg.delta, bath, ed.FockSpec(n_max), h=cfg.ed_h * cfg.delta,
                                 t_grid=t_grid)
        name = f"relax_point{i:03d}.csv"
        with open(os.path.join(out_dir, name), "w") as fh:
            fh.write("t,sigma_z\n")
            for t, v in zip(trace.times, trace.values):
                fh.write(f"{_fmt(t)},{_fmt(v)}\n")
        written.append(name)
        summary.append({"file": name, "g": g, "h": trace.h,
                        "linearity_residual": trace.linearity_residual,
                        "nonlinear": trace.nonlinear})
    with open(os.path.join(out_dir, "relax_index.json"), "w") as fh:
        json.dump({"format": "relax/1", "traces": summary, "config": cfg.echo()},
                  fh, indent=2, sort_keys=True)
    return written


def resistance_estimate(alpha_cav: float) -> float:
    """Shunt resistance (kilo-ohm) realizing a given dimensionless damping."""
    if alpha_cav <= 0.0:
        raise ValueError("alpha_cav must be positive")
    return 0.24 / alpha_cav
