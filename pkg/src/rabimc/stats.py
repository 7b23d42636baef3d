"""Post-processing of Markov chain samples: binning, autocorrelation, resampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MCEstimate",
    "integrated_autocorr_time",
    "bin_series",
    "jackknife_mean",
    "bootstrap_transform",
]


@dataclass(frozen=True)
class MCEstimate:
    """A post-processed observable: binned mean, jackknife error, autocorrelation.

    ``undersampled`` is set when the bin length used was shorter than
    20 * tau_int, in which case the error bar may be optimistic.
    """

    mean: float
    std_error: float
    tau_int: float
    n_samples: int
    n_therm: int
    bin_len: int = 1
    undersampled: bool = False

    def compatible(self, other: "MCEstimate | float", n_sigma: float = 3.0) -> bool:
        """True when the two estimates agree within n_sigma combined errors."""
        if isinstance(other, MCEstimate):
            diff = self.mean - other.mean
            sig = np.hypot(self.std_error, other.std_error)
        else:
            diff = self.mean - float(other)
            sig = self.std_error
        return abs(diff) <= n_sigma * sig


def integrated_autocorr_time(x: np.ndarray, c: float = 6.0) -> float:
    """Windowed estimate of the integrated autocorrelation time, in sweeps.

    Uses the standard self-consistent window: the smallest W with W >= c * tau(W),
    tau(W) = 1/2 + sum_{t<=W} rho(t).  Returns 0.5 for constant series.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 8:
        return 0.5
    x = x - x.mean()
    var = np.dot(x, x) / n
    if var <= 0.0:
        return 0.5
    # FFT autocovariance
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n].real / np.arange(n, 0, -1)
    rho = acov / acov[0]
    tau = 0.5
    max_w = n // 3
    for w in range(1, max_w):
        tau += rho[w]
        if w >= c * tau:
            break
    return max(tau, 0.5)


def bin_series(x: np.ndarray, bin_len: int) -> np.ndarray:
    """Means of consecutive full bins; the trailing remainder is dropped."""
    x = np.asarray(x, dtype=float)
    n_bins = len(x) // bin_len
    if n_bins == 0:
        raise ValueError(f"series of length {len(x)} shorter than bin_len {bin_len}")
    return x[: n_bins * bin_len].reshape(n_bins, bin_len).mean(axis=1)


def jackknife_mean(bins: np.ndarray) -> tuple[float, float]:
    """Mean and jackknife (leave-one-bin-out) standard error."""
    bins = np.asarray(bins, dtype=float)
    n = len(bins)
    mean = bins.mean()
    if n < 2:
        return float(mean), float("inf")
    loo = (bins.sum() - bins) / (n - 1)
    err = np.sqrt((n - 1) / n * np.sum((loo - mean) ** 2))
    return float(mean), float(err)


def bootstrap_transform(bin_columns: list[np.ndarray], func, n_boot: int = 1000,
                        rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Bootstrap a derived quantity over jointly resampled bins.

    ``func`` maps the column means of one resample to a scalar; returns the
    full-sample value and the bootstrap standard deviation.  Resamples where
    ``func`` returns NaN are discarded.
    """
    rng = rng or np.random.default_rng(0)
    cols = [np.asarray(c, dtype=float) for c in bin_columns]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("bin columns must share a length")
    center = func(*[c.mean() for c in cols])
    reps = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, n, n)
        reps[b] = func(*[c[idx].mean() for c in cols])
    reps = reps[np.isfinite(reps)]
    if len(reps) == 0:
        return float(center), float("nan")
    return float(center), float(reps.std(ddof=1))
