"""Numerical inversion of Laplace transforms in the ``z`` convention.

Transforms are ``F(z) = int_0^inf exp(i z t) f(t) dt`` (analytic for ``Im z > 0``)
and are inverted along the line ``Im z = eta``::

    f(t) = exp(eta t) / (2 pi) int exp(-i x t) F(x + i eta) dx

The line integral is a trapezoid sum; its aliasing period ``2 pi / h`` is chosen
so that the wrapped-around copies are damped by ``exp(-30)``. A fixed-Talbot
contour is provided for transforms that continue analytically into the left
half of the ``s = -i z`` plane (rate equations), where very long horizons are
needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class InversionError(ValueError):
    pass


MAX_AMPLIFICATION = 30.0


@dataclass(frozen=True)
class LaplaceGrid:
    eta: float
    z_real: np.ndarray
    values: np.ndarray
    t_max: float
    asymptote: tuple[float, float, float] | None = None  # (f0, f1, kappa)

    def __post_init__(self):
        if not self.eta > 0:
            raise InversionError("eta must be > 0")
        h = np.diff(self.z_real)
        if self.z_real.size < 3 or np.any(h <= 0) or not np.allclose(h, h[0], rtol=1e-9):
            raise InversionError("z_real must be a uniform increasing grid")
        if h[0] > math.pi / self.t_max:
            raise InversionError(f"Nyquist violated: dz={h[0]:g} > pi/t_max={math.pi / self.t_max:g}")
        if self.eta * self.t_max > MAX_AMPLIFICATION:
            raise InversionError(f"eta*t_max={self.eta * self.t_max:g} exceeds {MAX_AMPLIFICATION}")

    @property
    def step(self) -> float:
        return float(self.z_real[1] - self.z_real[0])


def asymptote_transform(z, f0: float, f1: float, kappa: float):
    """Transform of ``(f0 + (f1 + kappa f0) t) exp(-kappa t)``.

    The function has ``f(0) = f0`` and ``f'(0) = f1``.
    """
    z = np.asarray(z, dtype=complex)
    w = z + 1j * kappa
    return 1j * f0 / w - (f1 + kappa * f0) / (w * w)


def asymptote_time(t, f0: float, f1: float, kappa: float):
    t = np.asarray(t, dtype=float)
    return (f0 + (f1 + kappa * f0) * t) * np.exp(-kappa * t)


def make_grid(F: Callable, t_max: float, x_max: float, eta: float | None = None,
              center: float = 0.0, asymptote: tuple[float, float, float] | None = None,
              max_points: int = 2_000_000) -> LaplaceGrid:
    """Sample ``F`` on the inversion line.

    ``x_max`` is the half-width of the real-part window around ``center``.
    ``eta`` defaults to ``1/t_max``. The spacing puts the aliasing period at
    ``t_max + 30/eta``. If ``asymptote = (f0, f1, kappa)`` is given, the
    matching elementary transform is subtracted before sampling and added back
    analytically in :func:`invert_laplace`.
    """
    if not t_max > 0 or not x_max > 0:
        raise InversionError("t_max and x_max must be > 0")
    if eta is None:
        eta = 1.0 / t_max
    period = t_max + MAX_AMPLIFICATION / eta
    h = 2.0 * math.pi / period
    n = int(math.ceil(x_max / h))
    if 2 * n + 1 > max_points:
        raise InversionError(f"grid would need {2 * n + 1} points (> {max_points})")
    x = center + h * np.arange(-n, n + 1)
    z = x + 1j * eta
    vals = np.asarray(F(z), dtype=complex)
    if asymptote is not None:
        vals = vals - asymptote_transform(z, *asymptote)
    return LaplaceGrid(eta, x, vals, t_max, asymptote)


def invert_laplace(grid: LaplaceGrid, t_grid, return_imag: bool = False, chunk: int = 64):
    """Trapezoid Bromwich sum on the grid; real part is returned.

    With ``return_imag`` the imaginary residue (a quadrature diagnostic) is
    returned too.
    """
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if np.any(t < 0) or np.any(t > grid.t_max * (1 + 1e-12)):
        raise InversionError("target times must lie in [0, t_max]")
    h = grid.step
    x = grid.z_real
    v = grid.values.copy()
    v[0] *= 0.5
    v[-1] *= 0.5
    out = np.empty(t.size, dtype=complex)
    for i0 in range(0, t.size, chunk):
        tt = t[i0:i0 + chunk]
        out[i0:i0 + chunk] = np.exp(-1j * np.outer(tt, x)) @ v
    out *= h / (2.0 * math.pi) * np.exp(grid.eta * t)
    if grid.asymptote is not None:
        out += asymptote_time(t, *grid.asymptote)
    if return_imag:
        return out.real, out.imag
    return out.real


def talbot_invert(F: Callable, t_grid, M: int = 32) -> np.ndarray:
    """Fixed-Talbot inversion of ``F(z)`` (Abate-Valko contour in ``s = -i z``).

    Requires ``F`` to continue analytically to the cut plane with singularities
    only on the negative real ``s`` axis.
    """
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if np.any(t <= 0):
        raise InversionError("Talbot inversion needs t > 0")
    k = np.arange(1, M)
    theta = k * math.pi / M
    cot = 1.0 / np.tan(theta)
    sig = theta + (theta * cot - 1.0) * cot
    out = np.empty(t.size)
    for i, ti in enumerate(t):
        r = 2.0 * M / (5.0 * ti)
        s = r * theta * (cot + 1j)
        vals = np.asarray(F(1j * np.concatenate(([r + 0j], s))), dtype=complex)
        head = 0.5 * vals[0].real * math.exp(r * ti)
        body = np.sum((np.exp(ti * s) * vals[1:] * (1.0 + 1j * sig)).real)
        out[i] = r / M * (head + body)
    return out
