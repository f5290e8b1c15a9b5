"""Power-law fits and oscillation-period detection on population series."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.signal import find_peaks


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    r2: float
    stderr: float
    n_points: int


def fit_powerlaw(t, y, window: tuple[float, float] | None = None) -> PowerLawFit:
    """Least squares of ``log y`` against ``log t`` for ``window[0] <= t <= window[1]``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape:
        raise ValueError("t and y must have the same shape")
    sel = np.ones(t.shape, bool) if window is None else (t >= window[0]) & (t <= window[1])
    tw, yw = t[sel], y[sel]
    if tw.size < 10:
        raise ValueError(f"only {tw.size} points in the window; at least 10 are required")
    if np.any(tw <= 0) or np.any(yw <= 0):
        raise ValueError("power-law fit needs strictly positive t and y in the window")
    res = stats.linregress(np.log(tw), np.log(yw))
    return PowerLawFit(float(res.slope), float(np.exp(res.intercept)), float(res.rvalue ** 2),
                       float(res.stderr), int(tw.size))


def read_series(path, column: str) -> tuple[np.ndarray, np.ndarray]:
    """``(t, column)`` from a series CSV; ``#`` comment lines are skipped."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    header, body = rows[0], np.array(rows[1:], dtype=float)
    if column not in header:
        raise KeyError(f"column {column!r} not in {header}")
    return body[:, header.index("t")], body[:, header.index(column)]


def fit_series_file(path, column: str, window=None) -> PowerLawFit:
    """Fit a column of a series CSV. ``survival`` fits ``1 - p_ion``."""
    if column == "survival":
        t, p = read_series(path, "p_ion")
        return fit_powerlaw(t, 1.0 - p, window)
    t, y = read_series(path, column)
    return fit_powerlaw(t, y, window)


def autocorrelation_period(t, y, detrend_degree: int = 2) -> float:
    """Oscillation period from the first peak of the autocorrelation of ``y``.

    ``t`` must be uniform. A polynomial trend is removed first so that a slow
    drift does not mask the oscillation.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-6):
        raise ValueError("autocorrelation needs a uniform time grid")
    r = y - np.polyval(np.polyfit(t - t[0], y, detrend_degree), t - t[0])
    ac = np.correlate(r, r, "full")[r.size - 1:]
    if ac[0] <= 0:
        raise ValueError("signal is constant after detrending")
    peaks, _ = find_peaks(ac / ac[0])
    if peaks.size == 0:
        raise ValueError("no oscillation found")
    # parabolic refinement of the peak position
    k = peaks[0]
    a, b, c = ac[k - 1], ac[k], ac[k + 1]
    shift = 0.5 * (a - c) / (a - 2 * b + c) if a - 2 * b + c != 0 else 0.0
    return float((k + shift) * dt[0])
