"""Effective bath description for a qubit coupled to a damped resonator.

Integrating out the resonator and its Ohmic environment leaves the qubit
coupled through sigma_z to a structured bosonic bath.  This module evaluates
that bath's spectral density J(omega), the imaginary-time interaction kernel

    K(tau) = int_0^inf domega J(omega) cosh[omega (beta/2 - tau)] / sinh(beta omega / 2),

and precomputed tables of K together with its double antiderivative W
(W'' = K, W(0) = W'(0) = 0).  Second differences of W give the interaction
integral of K over any rectangle of imaginary times in O(1), which is what
the worldline sampler consumes.

All energies are in arbitrary common units; beta is an inverse energy.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .errors import KernelDomainError, QuadratureAccuracyError, UnsupportedBathOperation

__all__ = [
    "ModelParams",
    "BathKind",
    "SpectralDensity",
    "KernelGrid",
    "KernelTable",
    "eval_spectral_density",
    "alpha_eff",
    "total_ohmic_coupling",
    "kernel_value",
    "asymptotic_kernel",
    "build_kernel_table",
    "save_kernel_table",
    "load_kernel_table",
]

KERNEL_QUAD_RTOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of one simulation point.

    delta      qubit tunneling gap (sets the energy unit in practice)
    omega0     resonator frequency
    g          qubit-resonator coupling
    alpha_cav  dimensionless resonator-environment coupling
    alpha_q    dimensionless direct qubit-environment coupling
    omega_c    hard frequency cutoff of the environment
    beta       inverse temperature
    """

    delta: float
    omega0: float
    g: float
    alpha_cav: float
    omega_c: float
    beta: float
    alpha_q: float = 0.0

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.omega0 <= 0 or self.beta <= 0:
            raise ValueError("omega0 and beta must be positive")
        if self.omega_c <= self.omega0:
            raise ValueError("omega_c must exceed omega0")
        if self.g < 0 or self.alpha_cav < 0 or self.alpha_q < 0:
            raise ValueError("couplings must be non-negative")

    @property
    def temperature(self) -> float:
        return 1.0 / self.beta


def alpha_eff(params: ModelParams) -> float:
    """Low-frequency Ohmic slope parameter of the resonator-mediated bath.

    The mediated density behaves as (alpha_eff / 2) * omega for
    omega << omega0, with alpha_eff = 4 g^2 alpha_cav / omega0^2.
    """
    return 4.0 * params.g**2 * params.alpha_cav / params.omega0**2


def total_ohmic_coupling(params: ModelParams) -> float:
    """Total low-frequency slope parameter: direct plus resonator-mediated."""
    return params.alpha_q + alpha_eff(params)


class BathKind(enum.Enum):
    STRUCTURED = "structured"
    PURE_OHMIC = "pure_ohmic"
    DISCRETE = "discrete"


@dataclass(frozen=True)
class SpectralDensity:
    """A bath seen by the qubit through sigma_z.

    structured : resonator-mediated Lorentzian-peaked density plus an optional
                 direct Ohmic term (alpha_q / 2) * omega, both cut at omega_c.
    pure_ohmic : (alpha_q / 2) * omega up to omega_c, no resonator channel.
    discrete   : finite list of (frequency, coupling) modes; not pointwise
                 evaluable, kernels are exact mode sums.
    """

    params: ModelParams
    kind: BathKind
    modes: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.kind is BathKind.DISCRETE:
            if not self.modes:
                raise ValueError("discrete bath requires a non-empty mode list")
            for w, _l in self.modes:
                if w <= 0:
                    raise ValueError("discrete mode frequencies must be positive")
        elif self.modes is not None:
            raise ValueError("mode list only valid for the discrete kind")
        if self.kind is BathKind.PURE_OHMIC and self.params.g != 0.0:
            raise ValueError("pure Ohmic bath has no resonator channel; requires g = 0")

    @classmethod
    def structured(cls, params: ModelParams) -> "SpectralDensity":
        return cls(params, BathKind.STRUCTURED)

    @classmethod
    def pure_ohmic(cls, params: ModelParams) -> "SpectralDensity":
        return cls(params, BathKind.PURE_OHMIC)

    @classmethod
    def discrete(cls, params: ModelParams, modes: Sequence[tuple[float, float]]) -> "SpectralDensity":
        return cls(params, BathKind.DISCRETE, tuple((float(w), float(l)) for w, l in modes))

    def is_zero(self) -> bool:
        """True when J vanishes identically."""
        if self.kind is BathKind.DISCRETE:
            return all(l == 0.0 for _w, l in self.modes)
        p = self.params
        if self.kind is BathKind.PURE_OHMIC:
            return p.alpha_q == 0.0
        return p.alpha_q == 0.0 and (p.g == 0.0 or p.alpha_cav == 0.0)


def _density_over_omega(sd: SpectralDensity) -> Callable[[np.ndarray], np.ndarray]:
    """J(omega)/omega for continuous kinds; finite at omega = 0."""
    p = sd.params

    def f(omega):
        omega = np.asarray(omega, dtype=float)
        out = np.zeros_like(omega)
        inside = omega <= p.omega_c
        if sd.kind is BathKind.STRUCTURED and p.g > 0.0 and p.alpha_cav > 0.0:
            denom = (omega**2 - p.omega0**2) ** 2 + (np.pi * p.alpha_cav * p.omega0 * omega) ** 2
            out += np.where(inside, 2.0 * p.g**2 * p.omega0**2 * p.alpha_cav / denom, 0.0)
        if p.alpha_q > 0.0:
            out += np.where(inside, 0.5 * p.alpha_q, 0.0)
        return out

    return f


def eval_spectral_density(sd: SpectralDensity, omega):
    """Pointwise J(omega) for continuous baths.

    Raises UnsupportedBathOperation for the discrete kind, which has no
    pointwise density; its kernel is built directly from the mode sum.
    """
    if sd.kind is BathKind.DISCRETE:
        raise UnsupportedBathOperation("discrete bath has no pointwise density")
    arr = np.asarray(omega, dtype=float)
    if np.any(arr < 0):
        raise ValueError("omega must be non-negative")
    vals = _density_over_omega(sd)(arr) * arr
    return float(vals) if np.isscalar(omega) or arr.ndim == 0 else vals


def asymptotic_kernel(params: ModelParams) -> Callable[[float], float]:
    """Closed-form long-time comparator K(tau) -> s / (2 tau^2), s the total slope.

    Valid for beta -> infinity and 1/omega0 << tau << beta/2; used only for
    validation against the quadrature kernel.
    """
    slope = total_ohmic_coupling(params)

    def k_asym(tau):
        tau = np.asarray(tau, dtype=float)
        val = slope / (2.0 * tau**2)
        return float(val) if val.ndim == 0 else val

    return k_asym


# --- stable integrand building blocks -------------------------------------
#
# With D = 1 - exp(-beta omega) the propagator factor is
#   b_K(omega, tau) = (e^{-omega tau} + e^{-omega (beta - tau)}) / D,
# and its double antiderivative in tau (zero value/slope at tau = 0) is
#   b_W(omega, tau) = tau^2 [phi(-omega tau) + e^{-beta omega} phi(omega tau)] / D,
# with phi(x) = (e^x - 1 - x)/x^2.  These forms avoid overflow at large
# beta*omega and cancellation at small omega*tau.


def _phi(x):
    """(exp(x) - 1 - x) / x^2, stable for all x."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.1
    xs = np.where(small, x, 1.0)
    series = 0.5 + xs / 6.0 + xs**2 / 24.0 + xs**3 / 120.0 + xs**4 / 720.0
    xb = np.where(small, 1.0, x)
    direct = (np.expm1(xb) - xb) / xb**2
    return np.where(small, series, direct)


def _b_kernel(omega, beta, tau):
    omega = np.asarray(omega, dtype=float)
    d = -np.expm1(-beta * omega)
    return (np.exp(-omega * tau) + np.exp(-omega * (beta - tau))) / d


def _b_w(omega, beta, tau):
    omega = np.asarray(omega, dtype=float)
    x = omega * tau
    d = -np.expm1(-beta * omega)
    # e^{-beta omega} phi(x) with the exponentials grouped so e^{x} never
    # materializes (x can exceed 700 while the product stays bounded)
    small = np.abs(x) < 0.1
    xs = np.where(small, x, 1.0)
    series = np.exp(-beta * omega) * (0.5 + xs / 6.0 + xs**2 / 24.0 + xs**3 / 120.0 + xs**4 / 720.0)
    xb = np.where(small, 1.0, x)
    grouped = (np.exp(-omega * (beta - tau)) - np.exp(-beta * omega) * (1.0 + xb)) / xb**2
    phi_plus_damped = np.where(small, series, grouped)
    return tau**2 * (_phi(-x) + phi_plus_damped) / d


def _lorentz_breakpoints(sd: SpectralDensity) -> list[float]:
    """Panel edges resolving the resonator peak of width pi*alpha_cav*omega0."""
    p = sd.params
    if sd.kind is not BathKind.STRUCTURED or p.g == 0.0 or p.alpha_cav == 0.0:
        return []
    w = np.pi * p.alpha_cav * p.omega0
    pts = [p.omega0 + k * w for k in (-5.0, -2.0, -1.0, 1.0, 2.0, 5.0)]
    pts.append(p.omega0)
    return sorted(q for q in pts if 0.0 < q < p.omega_c)


def _discrete_kernel(sd: SpectralDensity, beta: float, tau) -> np.ndarray:
    total = 0.0
    for w, l in sd.modes:
        total = total + l * l * _b_kernel(w, beta, tau)
    return total


def _discrete_w(sd: SpectralDensity, beta: float, tau) -> np.ndarray:
    total = 0.0
    for w, l in sd.modes:
        total = total + l * l * _b_w(w, beta, tau)
    return total


def kernel_value(sd: SpectralDensity, beta: float, tau: float, rel_tol: float = KERNEL_QUAD_RTOL) -> float:
    """K(tau) by adaptive quadrature over [0, omega_c] (exact sum for discrete baths).

    The omega -> 0 endpoint uses the analytic limit 2 J(omega)/(beta omega);
    the integration domain is split at the resonator peak.
    """
    if not 0.0 < tau < beta:
        raise KernelDomainError(f"tau = {tau} outside (0, {beta})")
    if sd.kind is BathKind.DISCRETE:
        return float(_discrete_kernel(sd, beta, tau))
    if sd.is_zero():
        return 0.0
    jov = _density_over_omega(sd)

    def integrand(w):
        if w <= 0.0:
            return float(jov(0.0)) * 2.0 / beta
        return float(jov(w) * w * _b_kernel(w, beta, tau))

    pts = _lorentz_breakpoints(sd)
    val, err = quad(integrand, 0.0, sd.params.omega_c, points=pts or None,
                    limit=400, epsabs=0.0, epsrel=rel_tol)
    if err > 10.0 * rel_tol * max(abs(val), 1e-300):
        raise QuadratureAccuracyError("kernel quadrature did not converge", achieved=err)
    return val


def _w_value_quad(sd: SpectralDensity, beta: float, tau: float, rel_tol: float = 1e-10) -> float:
    """Direct quadrature of W(tau); reference path for table certification."""
    if sd.kind is BathKind.DISCRETE:
        return float(_discrete_w(sd, beta, tau))
    if sd.is_zero() or tau == 0.0:
        return 0.0
    jov = _density_over_omega(sd)

    def integrand(w):
        if w <= 0.0:
            return float(jov(0.0)) * tau**2 / beta
        return float(jov(w) * w * _b_w(w, beta, tau))

    pts = _lorentz_breakpoints(sd)
    val, err = quad(integrand, 0.0, sd.params.omega_c, points=pts or None,
                    limit=400, epsabs=0.0, epsrel=rel_tol)
    if err > 100.0 * rel_tol * max(abs(val), 1e-300):
        raise QuadratureAccuracyError("W quadrature did not converge", achieved=err)
    return val


def _gauss_panels(sd: SpectralDensity, beta: float, n_per_panel: int = 24) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights on [0, omega_c].

    Panels shrink geometrically toward omega = 0 so that exp(-omega tau) is
    resolved for tau up to beta, with extra edges across the resonator peak.
    """
    omega_c = sd.params.omega_c
    edges = {0.0, omega_c}
    a = omega_c
    while a > 0.25 / beta:
        a *= 0.5
        edges.add(a)
    edges.update(_lorentz_breakpoints(sd))
    edges = np.array(sorted(edges))
    x, w = np.polynomial.legendre.leggauss(n_per_panel)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True)
class KernelGrid:
    """Grid specification for kernel tables.

    Geometric spacing from tau_min up to beta/2 (tau = 0 is prepended) keeps
    the short-time structure of K resolved; segment boundaries in the sampler
    can be arbitrarily close.
    """

    tau_min: float | None = None
    n_points: int = 2048

    def resolve(self, params: ModelParams, beta: float) -> np.ndarray:
        tmin = self.tau_min
        if tmin is None:
            tmin = 1e-4 / params.delta if params.delta > 0 else 1e-6 * beta
        tmin = min(tmin, beta / 2 * 1e-3)
        grid = np.geomspace(tmin, beta / 2.0, self.n_points - 1)
        return np.concatenate(([0.0], grid))


@dataclass
class KernelTable:
    """Tabulated K(tau) and W(tau) on [0, beta/2], extended by K(tau) = K(beta - tau).

    ``tol`` is the certified relative interpolation error bound measured
    against direct quadrature at off-grid points.  Instances are immutable
    after construction and safe for concurrent reads.
    """

    beta: float
    tau_grid: np.ndarray
    k_values: np.ndarray
    w_values: np.ndarray
    k_total: float           # int_0^beta K(tau) dtau = int 2 J(omega)/omega domega
    tol: float
    interp_order: str = "cubic"
    meta: dict = field(default_factory=dict)
    _k_spline: CubicSpline = field(init=False, repr=False)
    _w_spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        if not np.all(np.diff(self.tau_grid) > 0):
            raise ValueError("tau_grid must be strictly increasing")
        self._k_spline = CubicSpline(self.tau_grid, self.k_values)
        self._w_spline = CubicSpline(self.tau_grid, self.w_values)

    @property
    def half_beta(self) -> float:
        return 0.5 * self.beta

    @property
    def w_beta(self) -> float:
        """W(beta); the reflection form gives k_total * beta / 2 exactly."""
        return self.k_total * self.beta / 2.0

    def k_at(self, tau):
        """K(tau) on [0, beta], using the symmetric extension beyond beta/2."""
        tau = np.abs(np.asarray(tau, dtype=float))
        folded = np.where(tau > self.half_beta, self.beta - tau, tau)
        vals = self._k_spline(np.clip(folded, 0.0, self.half_beta))
        return vals if vals.ndim else float(vals)

    def w_at(self, x):
        """Double antiderivative of the periodic symmetric kernel, valid on [0, 2 beta]."""
        x = np.abs(np.asarray(x, dtype=float))
        over = x > self.beta
        xr = np.where(over, x - self.beta, x)
        mirrored = xr > self.half_beta
        arg = np.where(mirrored, self.beta - xr, xr)
        core = self._w_spline(np.clip(arg, 0.0, self.half_beta))
        core = np.where(mirrored, self.k_total * (xr - self.half_beta) + core, core)
        out = core + np.where(over, self.w_beta + self.k_total * (x - self.beta), 0.0)
        return out if out.ndim else float(out)

    def rect_integral(self, a, b, c, d):
        """Integral of the periodic kernel K(t - t') over [a, b] x [c, d].

        Coordinates must be unwrapped so that all separations lie in [0, 2 beta].
        """
        return self.w_at(d - a) - self.w_at(c - a) - self.w_at(d - b) + self.w_at(c - b)

    def segment_pair_matrix(self, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
        """All pairwise rectangle integrals for segments [starts_i, ends_i).

        Segments must be disjoint intervals of a window of length beta
        (circle unwrapped once); the diagonal holds 2 W(length_i).
        """
        s = np.asarray(starts, dtype=float)
        e = np.asarray(ends, dtype=float)
        args = np.stack([
            e[None, :] - s[:, None],
            s[None, :] - s[:, None],
            e[None, :] - e[:, None],
            s[None, :] - e[:, None],
        ])
        ph = self.w_at(args)
        return ph[0] - ph[1] - ph[2] + ph[3]


def build_kernel_table(sd: SpectralDensity, beta: float, grid: KernelGrid | None = None,
                       tol: float = 1e-7, n_check: int = 48) -> KernelTable:
    """Build and certify a kernel table for the given bath at inverse temperature beta.

    Values come from composite Gauss-Legendre panels (exact mode sums for
    discrete baths); certification compares cubic interpolation at off-grid
    points against independent adaptive quadrature and stores the measured
    bound.  Raises QuadratureAccuracyError when the requested tol is missed.
    """
    grid = grid or KernelGrid()
    taus = grid.resolve(sd.params, beta)
    meta = _bath_meta(sd, beta)

    if sd.is_zero():
        zeros = np.zeros_like(taus)
        return KernelTable(beta, taus, zeros, zeros.copy(), 0.0, 0.0, meta=meta)

    if sd.kind is BathKind.DISCRETE:
        k_vals = np.array([_discrete_kernel(sd, beta, t) for t in taus])
        w_vals = np.array([_discrete_w(sd, beta, t) for t in taus])
        k_total = sum(2.0 * l * l / w for w, l in sd.modes)
    else:
        nodes, weights = _gauss_panels(sd, beta)
        jn = _density_over_omega(sd)(nodes) * nodes        # J(omega) at the nodes
        bk = _b_kernel(nodes[:, None], beta, taus[None, :])
        bw = _b_w(nodes[:, None], beta, taus[None, :])
        k_vals = np.sum(weights[:, None] * jn[:, None] * bk, axis=0)
        w_vals = np.sum(weights[:, None] * jn[:, None] * bw, axis=0)
        k_total = float(np.sum(weights * 2.0 * _density_over_omega(sd)(nodes)))
    w_vals[0] = 0.0

    table = KernelTable(beta, taus, k_vals, w_vals, float(k_total), tol=0.0, meta=meta)

    # certify interpolation + quadrature against the independent adaptive path
    idx = np.unique(np.linspace(1, len(taus) - 2, n_check).astype(int))
    mid = 0.5 * (taus[idx] + taus[idx + 1])
    worst = 0.0
    for t in mid:
        k_ref = kernel_value(sd, beta, t, rel_tol=1e-10) if t > 0 else 0.0
        w_ref = _w_value_quad(sd, beta, t)
        k_err = abs(table.k_at(t) - k_ref) / max(abs(k_ref), 1e-300)
        w_err = abs(table.w_at(t) - w_ref) / max(abs(w_ref), 1e-300)
        worst = max(worst, k_err, w_err)
    certified = 2.0 * worst
    if certified > tol:
        raise QuadratureAccuracyError(
            f"kernel table certification missed tol={tol:.1e}", achieved=certified)
    table.tol = certified
    return table


def _bath_meta(sd: SpectralDensity, beta: float) -> dict:
    p = sd.params
    meta = {
        "kind": sd.kind.value,
        "delta": repr(p.delta),
        "omega0": repr(p.omega0),
        "g": repr(p.g),
        "alpha_cav": repr(p.alpha_cav),
        "alpha_q": repr(p.alpha_q),
        "omega_c": repr(p.omega_c),
        "beta": repr(beta),
    }
    if sd.kind is BathKind.DISCRETE:
        meta["modes"] = ";".join(f"{w!r},{l!r}" for w, l in sd.modes)
    return meta


TABLE_FORMAT = "kernel-table/1"


def save_kernel_table(table: KernelTable, path) -> None:
    """Write a table as versioned columnar text (header echo + tau/K/W columns)."""
    lines = [f"format = {TABLE_FORMAT}"]
    lines.append(f"beta = {table.beta!r}")
    lines.append(f"k_total = {table.k_total!r}")
    lines.append(f"tol = {table.tol!r}")
    lines.append(f"interp = {table.interp_order}")
    for key, val in sorted(table.meta.items()):
        lines.append(f"meta.{key} = {val}")
    lines.append("columns = tau k w")
    for t, k, w in zip(table.tau_grid, table.k_values, table.w_values):
        lines.append(f"{t:.17g} {k:.17g} {w:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_kernel_table(path) -> KernelTable:
    header: dict[str, str] = {}
    rows = []
    in_data = False
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if in_data:
                rows.append([float(tok) for tok in line.split()])
            elif line.startswith("columns"):
                in_data = True
            else:
                key, _, val = line.partition("=")
                header[key.strip()] = val.strip()
    if header.get("format") != TABLE_FORMAT:
        raise ValueError(f"unrecognized kernel table format: {header.get('format')!r}")
    data = np.array(rows, dtype=float)
    meta = {k[len("meta."):]: v for k, v in header.items() if k.startswith("meta.")}
    return KernelTable(
        beta=float(header["beta"]),
        tau_grid=data[:, 0],
        k_values=data[:, 1],
        w_values=data[:, 2],
        k_total=float(header["k_total"]),
        tol=float(header["tol"]),
        interp_order=header.get("interp", "cubic"),
        meta=meta,
    )
