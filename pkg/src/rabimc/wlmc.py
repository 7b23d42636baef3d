"""Continuous-time worldline Monte Carlo for a spin in a retarded bosonic bath.

Configurations are piecewise-constant sigma_z(tau) trajectories on the
imaginary-time circle [0, beta), weighted by

    (delta/2)^n  *  exp[ (1/2) int int sigma(tau) K(tau - tau') sigma(tau') ]

with n the number of kinks (spin flips).  The bath attraction is
ferromagnetic: aligned stretches of worldline raise the weight.  Two update
families with the same stationary distribution are provided: a
Swendsen-Wang-style cluster sweep over segments cut by an auxiliary Poisson
process of rate delta/2, and local Metropolis kink-pair insertions/removals.
The pair used together or separately cross-validate each other.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import KernelDomainError
from .spectral import KernelTable, ModelParams
from .stats import MCEstimate, bin_series, bootstrap_transform, integrated_autocorr_time, jackknife_mean

__all__ = [
    "Worldline",
    "ObservableSample",
    "ChainState",
    "Schedule",
    "RunResult",
    "init_worldline",
    "measure",
    "cluster_sweep",
    "metropolis_kink_pair",
    "metropolis_sweep",
    "run_chain",
    "estimates_from_chains",
    "save_checkpoint",
    "load_checkpoint",
]

_SCIPY_BOND_THRESHOLD = 2048

_TRIU_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _triu_cache(n: int) -> tuple[np.ndarray, np.ndarray]:
    pair = _TRIU_CACHE.get(n)
    if pair is None:
        pair = np.triu_indices(n, k=1)
        if len(_TRIU_CACHE) < 4096:
            _TRIU_CACHE[n] = pair
    return pair


@dataclass
class Worldline:
    """sigma_z(tau) on the circle: ordered flip times plus the sign after tau = 0."""

    beta: float
    base_sign: int = 1
    kinks: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=float))

    def n_kinks(self) -> int:
        return len(self.kinks)

    def validate(self) -> None:
        if self.base_sign not in (-1, 1):
            raise ValueError("base_sign must be +1 or -1")
        k = self.kinks
        if len(k) % 2:
            raise ValueError("kink count must be even on the circle")
        if len(k) and not (np.all(np.diff(k) > 0) and k[0] > 0.0 and k[-1] < self.beta):
            raise ValueError("kinks must be strictly increasing inside (0, beta)")

    def sign_at(self, tau: float) -> int:
        """Sign of sigma_z at tau (taken just after tau when tau is a kink)."""
        flips = int(np.searchsorted(self.kinks, tau, side="right"))
        return self.base_sign * (-1 if flips % 2 else 1)

    def segments(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(starts, lengths, signs) of the constant-sign segments, circle unwrapped once.

        With no kinks the single segment starts at 0; otherwise segment j
        starts at kink j and the last one wraps to kinks[0] + beta.
        """
        k = self.kinks
        if len(k) == 0:
            return (np.array([0.0]), np.array([self.beta]), np.array([self.base_sign]))
        starts = k
        lengths = np.diff(np.append(k, k[0] + self.beta))
        signs = self.base_sign * np.where(np.arange(1, len(k) + 1) % 2, -1, 1)
        return starts, lengths, signs

    def magnetization(self) -> float:
        """Time-averaged sigma_z: (1/beta) * sum of signed segment lengths."""
        _s, lengths, signs = self.segments()
        return float(np.dot(lengths, signs) / self.beta)


def init_worldline(params: ModelParams, seed=None) -> Worldline:
    """Fresh zero-kink worldline with base_sign = +1 (a valid configuration)."""
    return Worldline(beta=params.beta)


@dataclass(frozen=True)
class ObservableSample:
    """Single-configuration estimators.

    sigma_x_est = 2 n / (beta delta) is the kink-count estimator of <sigma_x>;
    hq_est = -n / beta so that hq_est = -(delta/2) sigma_x_est holds exactly.
    """

    m: float
    m2: float
    n_kinks: int
    sigma_x_est: float
    hq_est: float


def measure(wl: Worldline, params: ModelParams) -> ObservableSample:
    m = wl.magnetization()
    n = wl.n_kinks()
    sx = 2.0 * n / (wl.beta * params.delta) if params.delta > 0 else 0.0
    return ObservableSample(m=m, m2=m * m, n_kinks=n, sigma_x_est=sx, hq_est=-n / wl.beta)


@dataclass
class ChainState:
    """One chain's full resumable state: worldline, RNG, counters, recorded samples."""

    worldline: Worldline
    rng: np.random.Generator
    sweep: int = 0
    samples_m: list = field(default_factory=list)
    samples_n: list = field(default_factory=list)

    def record(self, sample: ObservableSample) -> None:
        self.samples_m.append(sample.m)
        self.samples_n.append(sample.n_kinks)


def new_chain(params: ModelParams, seed) -> ChainState:
    """Chain with an independent PCG64 stream derived from the seed material."""
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ChainState(worldline=init_worldline(params), rng=np.random.Generator(np.random.PCG64(seq)))


# --- cluster update --------------------------------------------------------


def _component_labels(n_seg: int, bi: np.ndarray, bj: np.ndarray) -> np.ndarray:
    """Connected-component labels (deterministic first-seen numbering)."""
    if len(bi) > _SCIPY_BOND_THRESHOLD:
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components

        adj = coo_matrix((np.ones(len(bi), dtype=np.int8), (bi, bj)), shape=(n_seg, n_seg))
        _n, labels = connected_components(adj, directed=False)
        return labels
    parent = list(range(n_seg))
    for a, b in zip(bi.tolist(), bj.tolist()):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a != b:
            parent[b] = a
    labels = np.empty(n_seg, dtype=np.int64)
    seen: dict[int, int] = {}
    for i in range(n_seg):
        r = i
        while parent[r] != r:
            r = parent[r]
        labels[i] = seen.setdefault(r, len(seen))
    return labels


def cluster_sweep(state: ChainState, kt: KernelTable, params: ModelParams) -> ChainState:
    """One Swendsen-Wang-style cluster update of the whole worldline.

    Auxiliary cut times from a Poisson process of rate delta/2 join the kinks
    in partitioning the circle into segments.  Equal-sign segment pairs (i, j)
    bond with probability 1 - exp(-2 J_ij), J_ij the kernel integral over the
    pair rectangle (W second differences); opposite signs never bond and
    segments never bond to themselves.  Each connected component flips with
    probability 1/2; boundaries separating equal signs are discarded.
    """
    wl = state.worldline
    rng = state.rng
    beta = wl.beta
    if kt.beta != beta:
        raise KernelDomainError(f"kernel table beta {kt.beta} != worldline beta {beta}")

    n_cuts = int(rng.poisson(0.5 * params.delta * beta))
    cuts = rng.uniform(0.0, beta, n_cuts)
    cuts = cuts[(cuts > 0.0) & (cuts < beta)]
    bounds = np.unique(np.concatenate((wl.kinks, cuts)))

    if len(bounds) == 0:
        if rng.random() < 0.5:
            wl.base_sign = -wl.base_sign
        state.sweep += 1
        return state

    starts = bounds
    ends = np.append(bounds[1:], bounds[0] + beta)
    flips = np.searchsorted(wl.kinks, bounds, side="right")
    signs = wl.base_sign * np.where(flips % 2, -1, 1)

    n_seg = len(bounds)
    iu, ju = _triu_cache(n_seg)
    # pair couplings J_ij over the upper triangle only (i < j orders the
    # segments around the circle, so all four separations lie in [0, beta])
    args = np.stack([ends[ju] - starts[iu], starts[ju] - starts[iu],
                     ends[ju] - ends[iu], starts[ju] - ends[iu]])
    ph = kt.w_at(args)
    coupl = np.maximum(ph[0] - ph[1] - ph[2] + ph[3], 0.0)
    prob = -np.expm1(-2.0 * coupl)
    r = rng.random(len(iu))
    bonded = (r < prob) & (signs[iu] == signs[ju])
    labels = _component_labels(n_seg, iu[bonded], ju[bonded])

    n_comp = int(labels.max()) + 1 if n_seg else 0
    flip = rng.random(n_comp) < 0.5
    new_signs = np.where(flip[labels], -signs, signs)

    keep = new_signs != np.roll(new_signs, 1)   # boundary k sits between segments k-1 and k
    wl.kinks = bounds[keep]
    wl.base_sign = int(new_signs[-1])           # tau = 0 lies in the wrap segment
    state.sweep += 1
    return state


# --- Metropolis kink-pair update -------------------------------------------


def _arc_flip_log_weight(kt: KernelTable, wl: Worldline, a: float, arc_len: float, s_arc: int) -> float:
    """Change of the quadratic bath exponent when flipping the arc [a, a + arc_len)."""
    starts, lengths, signs = wl.segments()
    sh = a + np.mod(starts - a, wl.beta)
    ends = sh + lengths
    b = a + arc_len
    rect = kt.w_at(ends - a) - kt.w_at(sh - a) - kt.w_at(ends - b) + kt.w_at(sh - b)
    return -2.0 * s_arc * float(np.dot(signs, rect)) + 4.0 * float(kt.w_at(arc_len))


def _attempt_insert(state: ChainState, kt: KernelTable, params: ModelParams) -> bool:
    wl, rng = state.worldline, state.rng
    beta = wl.beta
    a, b = rng.uniform(0.0, beta, 2)
    accept_draw = rng.random()
    if params.delta <= 0.0 or a == b or a == 0.0 or b == 0.0:
        return False
    k = wl.kinks
    if a < b:
        inside = np.searchsorted(k, b, "left") - np.searchsorted(k, a, "right")
        wraps = False
        arc_len = b - a
    else:
        inside = (len(k) - np.searchsorted(k, a, "right")) + np.searchsorted(k, b, "left")
        wraps = True
        arc_len = beta - a + b
    if inside > 0 or a in k or b in k:
        return False                            # reverse move (adjacent-pair removal) would not exist
    s_arc = wl.sign_at(a)
    d_s = _arc_flip_log_weight(kt, wl, a, arc_len, s_arc)
    n_new = len(k) + 2
    log_ratio = 2.0 * np.log(0.5 * params.delta) + 2.0 * np.log(beta) - np.log(n_new) + d_s
    if np.log(accept_draw) >= log_ratio:
        return False
    wl.kinks = np.sort(np.append(k, (a, b)))
    if wraps:
        wl.base_sign = -wl.base_sign
    return True


def _attempt_remove(state: ChainState, kt: KernelTable, params: ModelParams) -> bool:
    wl, rng = state.worldline, state.rng
    n = wl.n_kinks()
    if n == 0:
        return False                            # nothing to remove; state unchanged
    idx = int(rng.integers(n))
    accept_draw = rng.random()
    if params.delta <= 0.0:
        return False
    beta = wl.beta
    a = wl.kinks[idx]
    b = wl.kinks[(idx + 1) % n]
    wraps = idx == n - 1
    arc_len = (b - a) if not wraps else (beta - a + b)
    s_arc = wl.sign_at(a)
    d_s = _arc_flip_log_weight(kt, wl, a, arc_len, s_arc)
    log_ratio = -2.0 * np.log(0.5 * params.delta) - 2.0 * np.log(beta) + np.log(n) + d_s
    if np.log(accept_draw) >= log_ratio:
        return False
    wl.kinks = np.delete(wl.kinks, [idx, (idx + 1) % n])
    if wraps:
        wl.base_sign = -wl.base_sign
    return True


def metropolis_kink_pair(state: ChainState, kt: KernelTable, params: ModelParams) -> ChainState:
    """One Metropolis proposal: insert a uniform kink pair or remove an adjacent pair.

    Insertion draws both times uniformly on [0, beta) and flips the forward
    arc from the first to the second; removal picks a uniformly random
    adjacent kink pair.  Proposal densities enter the acceptance ratio, so the
    stationary distribution is identical to the cluster sweep's.
    """
    if state.rng.random() < 0.5:
        _attempt_insert(state, kt, params)
    else:
        _attempt_remove(state, kt, params)
    return state


def metropolis_sweep(state: ChainState, kt: KernelTable, params: ModelParams,
                     n_proposals: int | None = None) -> ChainState:
    """A sweep of kink-pair proposals plus one costless global-flip move.

    The global spin flip leaves the weight invariant (no field), keeping the
    magnetization distribution symmetric without relying on long excursions.
    """
    if n_proposals is None:
        n_proposals = max(8, int(round(params.delta * state.worldline.beta)))
    for _ in range(n_proposals):
        metropolis_kink_pair(state, kt, params)
    if state.rng.random() < 0.5:
        state.worldline.base_sign = -state.worldline.base_sign
    state.sweep += 1
    return state


# --- chain driver -----------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    """Run schedule: thermalization, recorded sweeps, binning and seeding."""

    n_therm: int
    n_sweeps: int
    bin_len: int
    seed: int
    family: str = "cluster"          # "cluster" | "metropolis"
    checkpoint_path: str | None = None
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.n_therm < 0 or self.n_sweeps <= 0 or self.bin_len <= 0:
            raise ValueError("schedule entries must be positive")
        if self.family not in ("cluster", "metropolis"):
            raise ValueError(f"unknown update family {self.family!r}")


@dataclass
class RunResult:
    m: MCEstimate
    m2: MCEstimate
    sigma_x: MCEstimate
    hq: MCEstimate
    delta_eff: MCEstimate | None
    delta_eff_reason: str | None
    state: ChainState | None = None


def _sweep_fn(family: str):
    return cluster_sweep if family == "cluster" else metropolis_sweep


def run_chain(params: ModelParams, kt: KernelTable, schedule: Schedule,
              state: ChainState | None = None, checkpoint_meta: dict | None = None) -> RunResult:
    """Drive one chain to schedule.n_therm + schedule.n_sweeps total sweeps.

    Passing a previously checkpointed ``state`` resumes mid-run and reproduces
    the uninterrupted sample stream bit-exactly (worldline + RNG state fully
    determine the future).  Samples are recorded once per sweep after
    thermalization.
    """
    if state is None:
        state = new_chain(params, schedule.seed)
    sweep = _sweep_fn(schedule.family)
    total = schedule.n_therm + schedule.n_sweeps
    while state.sweep < total:
        sweep(state, kt, params)
        if state.sweep > schedule.n_therm:
            state.record(measure(state.worldline, params))
        if (schedule.checkpoint_path and schedule.checkpoint_every
                and state.sweep % schedule.checkpoint_every == 0):
            save_checkpoint(state, schedule.checkpoint_path, checkpoint_meta or {})
    if schedule.checkpoint_path:
        save_checkpoint(state, schedule.checkpoint_path, checkpoint_meta or {})
    result = estimates_from_chains([(np.asarray(state.samples_m), np.asarray(state.samples_n, dtype=float))],
                                   params, schedule.bin_len, schedule.n_therm, schedule.seed)
    result.state = state
    return result


def estimates_from_chains(series: list[tuple[np.ndarray, np.ndarray]], params: ModelParams,
                          bin_len: int, n_therm: int, seed: int, n_boot: int = 1000) -> RunResult:
    """Merge per-chain (m, n_kinks) streams into binned estimates.

    Bins are formed per chain and concatenated in chain-index order (a
    deterministic fold); tau_int is the mean of per-chain estimates.  The
    effective-gap ratio is estimated per bootstrap resample of the joint bins.
    """
    beta, delta = params.beta, params.delta

    def derived(m_arr, n_arr):
        m2 = m_arr * m_arr
        sx = 2.0 * n_arr / (beta * delta) if delta > 0 else np.zeros_like(n_arr)
        hq = -n_arr / beta
        return m2, sx, hq

    cols = {"m": [], "m2": [], "sx": [], "hq": []}
    taus = {"m": [], "m2": [], "sx": [], "hq": []}
    n_total = 0
    for m_arr, n_arr in series:
        m2, sx, hq = derived(m_arr, n_arr)
        n_total += len(m_arr)
        for key, arr in (("m", m_arr), ("m2", m2), ("sx", sx), ("hq", hq)):
            cols[key].append(bin_series(arr, bin_len))
            taus[key].append(integrated_autocorr_time(arr))
    bins = {k: np.concatenate(v) for k, v in cols.items()}
    tau = {k: float(np.mean(v)) for k, v in taus.items()}

    def est(key):
        mean, err = jackknife_mean(bins[key])
        return MCEstimate(mean=mean, std_error=err, tau_int=tau[key], n_samples=n_total,
                          n_therm=n_therm, bin_len=bin_len,
                          undersampled=bin_len < 20.0 * tau[key])

    m_est, m2_est, sx_est, hq_est = est("m"), est("m2"), est("sx"), est("hq")

    delta_eff = None
    reason = None
    if delta <= 0.0:
        reason = "delta = 0: no tunneling scale to renormalize"
    elif m2_est.mean <= 3.0 * m2_est.std_error:
        reason = "m2 consistent with zero within errors; ratio ill-defined"
    else:
        def ratio(m2_mean, sx_mean):
            if m2_mean <= 0.0 or sx_mean < 0.0:
                return float("nan")
            return float(np.sqrt(2.0 * delta * sx_mean / (beta * m2_mean)))

        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(0xB00D,))))
        center, err = bootstrap_transform([bins["m2"], bins["sx"]], ratio, n_boot=n_boot, rng=rng)
        delta_eff = MCEstimate(mean=center, std_error=err, tau_int=max(tau["m2"], tau["sx"]),
                               n_samples=n_total, n_therm=n_therm, bin_len=bin_len,
                               undersampled=m2_est.undersampled or sx_est.undersampled)

    return RunResult(m=m_est, m2=m2_est, sigma_x=sx_est, hq=hq_est,
                     delta_eff=delta_eff, delta_eff_reason=reason)


# --- checkpointing -----------------------------------------------------------

CHECKPOINT_FORMAT = "wlmc-checkpoint/1"


def save_checkpoint(state: ChainState, path, meta: dict) -> None:
    """Versioned self-describing text checkpoint.

    Kink times and samples are written as hex floats so a resumed chain is
    bit-identical to the uninterrupted one.
    """
    lines = [f"format = {CHECKPOINT_FORMAT}"]
    for key, val in sorted(meta.items()):
        lines.append(f"meta.{key} = {val}")
    lines.append(f"sweep = {state.sweep}")
    lines.append(f"beta = {float(state.worldline.beta).hex()}")
    lines.append(f"base_sign = {state.worldline.base_sign}")
    lines.append(f"rng = {json.dumps(state.rng.bit_generator.state, sort_keys=True)}")
    lines.append(f"n_kinks = {state.worldline.n_kinks()}")
    lines.append(f"n_samples = {len(state.samples_m)}")
    lines.append("begin kinks")
    lines.extend(float(t).hex() for t in state.worldline.kinks)
    lines.append("end kinks")
    lines.append("begin samples")
    lines.extend(f"{float(m).hex()} {int(n)}" for m, n in zip(state.samples_m, state.samples_n))
    lines.append("end samples")
    tmp = str(path) + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    import os

    os.replace(tmp, path)


def load_checkpoint(path) -> tuple[ChainState, dict]:
    header: dict[str, str] = {}
    kinks: list[float] = []
    samples_m: list[float] = []
    samples_n: list[int] = []
    section = None
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("begin "):
                section = line.split()[1]
                continue
            if line.startswith("end "):
                section = None
                continue
            if section == "kinks":
                kinks.append(float.fromhex(line))
            elif section == "samples":
                m_hex, n_str = line.split()
                samples_m.append(float.fromhex(m_hex))
                samples_n.append(int(n_str))
            else:
                key, _, val = line.partition("=")
                header[key.strip()] = val.strip()
    if header.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unrecognized checkpoint format {header.get('format')!r}")
    wl = Worldline(beta=float.fromhex(header["beta"]), base_sign=int(header["base_sign"]),
                   kinks=np.array(kinks, dtype=float))
    wl.validate()
    rng = np.random.Generator(np.random.PCG64())
    rng.bit_generator.state = json.loads(header["rng"])
    state = ChainState(worldline=wl, rng=rng, sweep=int(header["sweep"]),
                       samples_m=samples_m, samples_n=samples_n)
    meta = {k[len("meta."):]: v for k, v in header.items() if k.startswith("meta.")}
    return state, meta
