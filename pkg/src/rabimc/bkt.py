"""Finite-beta crossing analysis of the scaled order parameter.

The transition is located through the scaled order parameter
psi = alpha_eff * m2 and the auxiliary function

    G(alpha_eff, beta) = 1 / (psi - 1) - 2 ln(beta),

which loses its beta dependence exactly at the critical coupling.  For each
coupling the G-vs-ln(beta) slope is fit by weighted least squares; the slope's
zero crossing in the coupling grid gives the critical point, and the level of
the flat curve gives the reference scale beta0 through -G_c / 2 = ln(beta0).
Uncertainties are parametric bootstrap over the Monte Carlo errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketingError, FitDiagnosticError
from .spectral import ModelParams
from .stats import MCEstimate

__all__ = [
    "PsiPoint",
    "GPoint",
    "CriticalFit",
    "psi_value",
    "g_function",
    "find_critical",
    "fit_beta0",
    "gc_from_alpha_c",
]


@dataclass(frozen=True)
class PsiPoint:
    """One (coupling, beta) measurement of the squared magnetization."""

    g: float
    alpha_eff: float
    beta: float
    m2: MCEstimate


@dataclass(frozen=True)
class GPoint:
    value: float
    err: float
    psi: float
    psi_err: float
    beta: float
    usable: bool
    reason: str | None = None


def psi_value(alpha_eff: float, m2: float, m2_err: float = 0.0) -> tuple[float, float]:
    """Scaled order parameter alpha_eff * m2 with propagated error."""
    if not 0.0 <= m2 <= 1.0 + 1e-9:
        raise ValueError(f"m2 = {m2} outside [0, 1]")
    return alpha_eff * m2, alpha_eff * m2_err


def g_function(psi: float, beta: float, psi_err: float = 0.0, n_sigma_pole: float = 3.0) -> GPoint:
    """G = 1/(psi - 1) - 2 ln(beta) with first-order error propagation.

    Points with psi <= 1 + n_sigma_pole * psi_err sit on the wrong side of (or
    too close to) the pole to carry information and come back flagged unusable.
    """
    if psi == 1.0:
        raise ZeroDivisionError("psi = 1 is the pole of G")
    if psi <= 1.0 + n_sigma_pole * psi_err:
        return GPoint(value=float("nan"), err=float("nan"), psi=psi, psi_err=psi_err,
                      beta=beta, usable=False,
                      reason=f"psi = {psi:.6g} within {n_sigma_pole} sigma of the pole at 1")
    val = 1.0 / (psi - 1.0) - 2.0 * math.log(beta)
    err = psi_err / (psi - 1.0) ** 2
    return GPoint(value=val, err=err, psi=psi, psi_err=psi_err, beta=beta, usable=True)


def _weighted_linfit(x: np.ndarray, y: np.ndarray, err: np.ndarray) -> tuple[float, float, float, float]:
    """Weighted least squares y = a + b x; returns (a, b, sigma_a, sigma_b)."""
    w = 1.0 / np.maximum(err, 1e-300) ** 2
    sw, sx, sy = w.sum(), (w * x).sum(), (w * y).sum()
    sxx, sxy = (w * x * x).sum(), (w * x * y).sum()
    det = sw * sxx - sx * sx
    if det <= 0.0:
        raise FitDiagnosticError("degenerate abscissa in weighted line fit")
    a = (sxx * sy - sx * sxy) / det
    b = (sw * sxy - sx * sy) / det
    return a, b, math.sqrt(sxx / det), math.sqrt(sw / det)


@dataclass
class CriticalFit:
    """Crossing-analysis output; couplings in the caller's units.

    ``g_c`` is None when the scan varied alpha_eff directly (no resonator
    coupling to locate).  ``slopes`` maps each scanned coupling to its fitted
    G-vs-ln(beta) slope and error; ``g_curves`` retains the per-point G values
    for plotting.
    """

    alpha_c: float
    alpha_c_err: float
    g_c: float | None
    g_c_err: float | None
    beta0: float
    beta0_err: float
    psi_c: float
    psi_c_err: float
    slopes: dict = field(default_factory=dict)
    g_curves: list = field(default_factory=list)
    n_boot: int = 0
    excluded: list = field(default_factory=list)
    covariance: dict = field(default_factory=dict)   # bootstrap covariances of the fit outputs


def _crossing_from_points(points: list[PsiPoint], min_betas: int):
    """One pass of the crossing construction; returns (alpha_c, g_c, beta0, psi_c, slopes, curves, excluded)."""
    groups: dict[tuple[float, float], list[PsiPoint]] = {}
    for p in points:
        groups.setdefault((p.g, p.alpha_eff), []).append(p)

    keys = sorted(groups, key=lambda k: k[1])           # ascending alpha_eff
    alphas = np.array([k[1] for k in keys])
    gs = np.array([k[0] for k in keys])
    vary_g = len(np.unique(gs)) > 1

    slopes, slope_errs, intercepts = [], [], []
    curves, excluded, kept_keys = [], [], []
    for key in keys:
        pts = sorted(groups[key], key=lambda p: p.beta)
        gp = []
        for p in pts:
            psi, perr = psi_value(key[1], p.m2.mean, p.m2.std_error)
            point = g_function(psi, p.beta, perr)
            curves.append((key[0], key[1], p.beta, point))
            if point.usable:
                gp.append(point)
            else:
                excluded.append((key[0], key[1], p.beta, point.reason))
        if len(gp) < min_betas:
            excluded.append((key[0], key[1], None, f"only {len(gp)} usable beta points"))
            continue
        x = np.log([q.beta for q in gp])
        y = np.array([q.value for q in gp])
        e = np.array([q.err for q in gp])
        a, b, _sa, sb = _weighted_linfit(x, y, e)
        slopes.append(b)
        slope_errs.append(sb)
        intercepts.append(a)
        kept_keys.append(key)

    if len(kept_keys) < 2:
        raise BracketingError("fewer than two couplings with usable G curves", slopes)
    slopes = np.array(slopes)
    kept_alpha = np.array([k[1] for k in kept_keys])
    kept_g = np.array([k[0] for k in kept_keys])

    sign_change = np.nonzero(np.diff(np.sign(slopes)) != 0)[0]
    if len(sign_change) == 0:
        raise BracketingError(
            "G-slope does not change sign across the coupling grid: "
            + ", ".join(f"alpha={a:.4g}: slope={s:+.4g}" for a, s in zip(kept_alpha, slopes)),
            dict(zip(kept_alpha.tolist(), slopes.tolist())))
    i = int(sign_change[0])
    frac = slopes[i] / (slopes[i] - slopes[i + 1])
    alpha_c = kept_alpha[i] + frac * (kept_alpha[i + 1] - kept_alpha[i])
    g_c = float(kept_g[i] + frac * (kept_g[i + 1] - kept_g[i])) if vary_g else None

    # level of the flat curve at the crossing -> beta0; intercepts sit at
    # ln(beta) = 0, so evaluate at the mean ln(beta) to damp slope leverage
    mean_lnb = float(np.mean([math.log(p.beta) for p in points]))
    lvl_i = intercepts[i] + slopes[i] * mean_lnb
    lvl_j = intercepts[i + 1] + slopes[i + 1] * mean_lnb
    g_c_level = lvl_i + frac * (lvl_j - lvl_i)
    beta0 = math.exp(-0.5 * g_c_level)

    # universal-jump diagnostic: psi near the crossing, deflated by the
    # finite-beta form, should scatter around 1
    psi_c_vals = []
    for key in (kept_keys[i], kept_keys[i + 1]):
        for p in groups[key]:
            denom = 2.0 * math.log(p.beta / beta0)
            if denom > 0.5:
                psi, _ = psi_value(key[1], p.m2.mean)
                psi_c_vals.append(psi / (1.0 + 1.0 / denom))
    psi_c = float(np.mean(psi_c_vals)) if psi_c_vals else float("nan")

    slope_map = {float(a): (float(s), float(e)) for a, s, e in zip(kept_alpha, slopes, slope_errs)}
    return float(alpha_c), g_c, float(beta0), psi_c, slope_map, curves, excluded


def find_critical(points: list[PsiPoint], n_boot: int = 500, seed: int = 0,
                  min_betas: int = 3) -> CriticalFit:
    """Locate the coupling where G(alpha_eff, beta) is beta-independent.

    Requires at least three usable beta values per coupling and a slope sign
    change across the grid (BracketingError otherwise, listing the slopes).
    Uncertainties come from a parametric bootstrap over the m2 errors.
    """
    alpha_c, g_c, beta0, psi_c, slopes, curves, excluded = _crossing_from_points(points, min_betas)

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(0xBC7,))))
    boot = {"alpha": [], "g": [], "beta0": [], "psi": []}
    for _ in range(n_boot):
        replica = []
        for p in points:
            m2 = rng.normal(p.m2.mean, p.m2.std_error) if p.m2.std_error > 0 else p.m2.mean
            m2 = min(max(m2, 0.0), 1.0)
            replica.append(PsiPoint(p.g, p.alpha_eff, p.beta,
                                    MCEstimate(m2, p.m2.std_error, p.m2.tau_int,
                                               p.m2.n_samples, p.m2.n_therm, p.m2.bin_len)))
        try:
            a, g, b0, pc, _s, _c, _e = _crossing_from_points(replica, min_betas)
        except (BracketingError, FitDiagnosticError):
            continue
        boot["alpha"].append(a)
        boot["g"].append(g if g is not None else np.nan)
        boot["beta0"].append(b0)
        boot["psi"].append(pc)

    def spread(vals):
        vals = np.asarray([v for v in vals if v is not None and np.isfinite(v)])
        return float(vals.std(ddof=1)) if len(vals) > 2 else float("nan")

    cov: dict = {}
    names = ["alpha_c", "g_c", "beta0"] if g_c is not None else ["alpha_c", "beta0"]
    cols = {"alpha_c": boot["alpha"], "g_c": boot["g"], "beta0": boot["beta0"]}
    stacked = np.array([cols[n] for n in names], dtype=float)
    if stacked.shape[1] > 3 and np.all(np.isfinite(stacked)):
        mat = np.cov(stacked)
        cov = {a: {b: float(mat[i, j]) for j, b in enumerate(names)} for i, a in enumerate(names)}

    return CriticalFit(
        alpha_c=alpha_c, alpha_c_err=spread(boot["alpha"]),
        g_c=g_c, g_c_err=spread(boot["g"]) if g_c is not None else None,
        beta0=beta0, beta0_err=spread(boot["beta0"]),
        psi_c=psi_c, psi_c_err=spread(boot["psi"]),
        slopes=slopes, g_curves=curves, n_boot=len(boot["alpha"]), excluded=excluded,
        covariance=cov)


def fit_beta0(betas: np.ndarray, psis: np.ndarray, psi_errs: np.ndarray,
              fix_psi_c: bool = True) -> dict:
    """Weighted fit of the critical finite-beta form psi = psi_c [1 + 1/(2 ln(beta/beta0))].

    psi_c is pinned to the universal value 1 by default; the free-psi_c
    variant exists for diagnostics only.  Reports reduced chi^2.
    """
    from scipy.optimize import least_squares

    betas = np.asarray(betas, dtype=float)
    psis = np.asarray(psis, dtype=float)
    errs = np.maximum(np.asarray(psi_errs, dtype=float), 1e-12)
    if len(betas) < (1 if fix_psi_c else 2) + 1:
        raise FitDiagnosticError("too few points for the beta0 fit")
    if np.ptp(psis) == 0.0:
        raise FitDiagnosticError("psi has no beta dependence; beta0 unconstrained",
                                 residuals=psis - psis.mean())

    def model(params):
        ln_b0 = params[0]
        psi_c = 1.0 if fix_psi_c else params[1]
        return psi_c * (1.0 + 1.0 / (2.0 * (np.log(betas) - ln_b0)))

    def resid(params):
        return (model(params) - psis) / errs

    x0 = np.array([np.log(betas.min()) - 1.0] if fix_psi_c else [np.log(betas.min()) - 1.0, 1.0])
    sol = least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15)
    if not sol.success:
        raise FitDiagnosticError(f"beta0 fit failed: {sol.message}", residuals=sol.fun)
    dof = max(len(betas) - len(x0), 1)
    chi2 = float(np.sum(sol.fun**2))
    # 1-sigma from the Jacobian (Gauss-Newton covariance)
    jtj = sol.jac.T @ sol.jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        raise FitDiagnosticError("singular beta0 fit", residuals=sol.fun)
    beta0 = float(np.exp(sol.x[0]))
    beta0_err = beta0 * float(np.sqrt(cov[0, 0]))
    out = {"beta0": beta0, "beta0_err": beta0_err, "chi2_reduced": chi2 / dof,
           "residuals": sol.fun * errs}
    if not fix_psi_c:
        out["psi_c"] = float(sol.x[1])
        out["psi_c_err"] = float(np.sqrt(cov[1, 1]))
    return out


def gc_from_alpha_c(params: ModelParams, alpha_c: float) -> float:
    """Critical resonator coupling from the low-frequency criterion.

    Setting alpha_q + 4 g^2 alpha_cav / omega0^2 = alpha_c gives
    g_c = omega0 sqrt((alpha_c - alpha_q) / (4 alpha_cav)).
    """
    if params.alpha_cav <= 0.0:
        raise ValueError("alpha_cav must be positive to mediate the transition")
    if params.alpha_q >= alpha_c:
        raise ValueError(
            f"alpha_q = {params.alpha_q} >= alpha_c = {alpha_c}: transition already reached at g = 0")
    return params.omega0 * math.sqrt((alpha_c - params.alpha_q) / (4.0 * params.alpha_cav))
