"""Closed-form regimes of the rate-equation dynamics.

Three regimes are covered:

* the long-time power laws ``t^{-5/3}`` (ground state) and ``t^{-2/3}``
  (survival against ionisation), reached after the stochastic ionisation time;
* the near-threshold plateau governed by the spectral moment ``Lambda_Sp``;
* excitation far below threshold, governed by a universal scaling function
  ``f(tau)`` that interpolates between ``t^{-1/2}`` and ``t^{-1/4}`` laws.

Long-time prefactors mix ``S(mean)`` (an inverse energy) with ``gamma t``; they
are meaningful in atomic units, which is how every function here is evaluated.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma as gamma_fn

from .dca import RateSystem
from .laser_noise import NoiseKind, lambda_sp, lambda_sp_pdm
from .qdt import kepler_period


class RegimeWarning(UserWarning):
    """A closed form was evaluated outside its range of validity."""


# ---------------------------------------------------------------------------
# long times


def longtime_prefactors(rates: RateSystem) -> tuple[float, float]:
    """Coefficients ``(A, C)`` of ``rho_gg = A (gamma t)^{-5/3}``, ``1 - P = C (gamma t)^{-2/3}``."""
    ratio = rates.gamma_eff / rates.gamma
    sb = rates.s_bar ** (1.0 / 3.0)
    return (sb * gamma_fn(5.0 / 3.0) / (3.0 * ratio ** 2),
            sb * gamma_fn(2.0 / 3.0) / (3.0 * ratio))


def longtime_laws(rates: RateSystem, t):
    """``(rho_gg, 1 - P_ion)`` from the small-``z`` behaviour of the rate kernel."""
    A, C = longtime_prefactors(rates)
    gt = rates.gamma * np.asarray(t, dtype=float)
    return A * gt ** (-5.0 / 3.0), C * gt ** (-2.0 / 3.0)


def ionization_time(rates: RateSystem) -> float:
    """Stochastic ionisation time ``t_c``, beyond which the long-time laws apply."""
    g, G = rates.gamma, rates.gamma_eff
    if G <= 0:
        raise ValueError("no continuum coupling: the ionisation rate vanishes")
    return math.sqrt((g * gamma_fn(2.0 / 3.0) / G) ** 3 * (8.0 / 27.0) * rates.s_bar) / g


# ---------------------------------------------------------------------------
# near threshold


def spectral_moment(rates: RateSystem) -> float:
    """``Lambda_Sp``; closed form for the Lorentzian, quadrature otherwise."""
    m = rates.model
    if m.kind is NoiseKind.PDM:
        return lambda_sp_pdm(m.bandwidth, rates.system.mean_energy)
    return lambda_sp(m, rates.system.mean_energy)


def threshold_intermediate(rates: RateSystem, t, lam: float | None = None):
    """``(rho_gg, P_ion)`` in the exponential regime near threshold.

    Warns when ``gamma Lambda t > 0.1``, where the expansion is no longer valid.
    """
    if lam is None:
        lam = spectral_moment(rates)
    gt = rates.gamma * np.asarray(t, dtype=float)
    if gt.size and lam * float(np.max(gt)) > 0.1:
        warnings.warn("gamma * Lambda_Sp * t exceeds 0.1; outside the near-threshold regime",
                      RegimeWarning, stacklevel=2)
    grow = np.exp(lam * gt)
    decay = np.exp(-gt)
    rho = (decay + lam * grow) / (1.0 + lam)
    p = rates.gamma_eff / (rates.gamma * (1.0 + lam)) * (grow - decay)
    return rho, p


def plateau_window(rates: RateSystem, lam: float | None = None) -> tuple[float, float]:
    """``[5/gamma, 0.1/(gamma Lambda)]``: after the initial decay, before the slow growth."""
    if lam is None:
        lam = spectral_moment(rates)
    return 5.0 / rates.gamma, 0.1 / (rates.gamma * lam)


# ---------------------------------------------------------------------------
# scaling function


_PHASE = complex(math.cos(-math.pi / 4), math.sin(-math.pi / 4))


def line_integral(zeta):
    """``I(zeta) = int dx / (1 - i zeta (x^2 + x^4))`` over the real line, in closed form.

    With ``c = -i zeta`` the denominator factorises as ``c (x^2 - r1)(x^2 - r2)``;
    the two Lorentz-type integrals are combined so that no cancellation occurs.
    """
    c = -1j * np.asarray(zeta, dtype=complex)
    disc = np.sqrt(1.0 - 4.0 / c)
    qa = -0.5 * (1.0 + disc)
    qb = -0.5 * (1.0 - disc)
    r1 = np.where(np.abs(qa) >= np.abs(qb), qa, qb)
    r2 = (1.0 / c) / r1
    a1 = np.sqrt(-r1)
    a2 = np.sqrt(-r2)
    return math.pi / (c * a1 * a2 * (a1 + a2))


def scaling_direct(tau, step: float = 0.01, v_range: float = 60.0):
    """``(f, f')`` by a log-spaced trapezoid on the rotated ray ``arg zeta = -pi/4``.

    On that ray ``exp(-i zeta tau)`` decays, so both integrals converge
    exponentially fast in the trapezoid step.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau <= 0):
        raise ValueError("tau must be > 0")
    v = np.arange(-v_range, v_range + step / 2, step)
    zeta = np.exp(v) * _PHASE
    dz = zeta * step
    inv_i = 1.0 / line_integral(zeta)
    f = np.empty(tau.size)
    fp = np.empty(tau.size)
    for i0 in range(0, tau.size, 32):
        e = np.exp(-1j * np.outer(tau[i0:i0 + 32], zeta))
        fp[i0:i0 + 32] = -np.imag(e @ (inv_i / zeta * dz))
        f[i0:i0 + 32] = -np.imag((1.0 - e) @ (inv_i / (1j * zeta * zeta) * dz))
    return f, fp


TABLE_TAU = np.geomspace(1e-6, 1e6, 400)


@functools.lru_cache(maxsize=1)
def _table():
    f, fp = scaling_direct(TABLE_TAU)
    lt = np.log(TABLE_TAU)
    return (PchipInterpolator(lt, np.log(f)), PchipInterpolator(lt, np.log(fp)), f, fp)


def scaling_table() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    _, _, f, fp = _table()
    return TABLE_TAU.copy(), f.copy(), fp.copy()


def scaling_f_small(tau):
    return 2.0 * np.sqrt(np.asarray(tau, dtype=float) / math.pi)


def scaling_f_large(tau):
    return 4.0 / (3.0 * math.pi) * gamma_fn(0.25) * np.asarray(tau, dtype=float) ** 0.75


def _lookup(tau, which: int, small, large):
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be >= 0")
    interp = _table()[which]
    out = np.empty(tau.shape)
    lo = tau < TABLE_TAU[0]
    hi = tau > TABLE_TAU[-1]
    mid = ~(lo | hi)
    out[mid] = np.exp(interp(np.log(tau[mid])))
    # outside the table the asymptotes are already accurate to better than 1e-3
    out[lo] = small(tau[lo])
    out[hi] = large(tau[hi])
    return out if out.ndim else float(out)


def scaling_f(tau):
    """Universal scaling function ``f(tau)``, with ``f(0) = 0``."""
    return _lookup(tau, 0, scaling_f_small, scaling_f_large)


def scaling_fprime(tau):
    """Derivative ``f'(tau)``; integrable ``tau^{-1/2}`` singularity at 0."""
    return _lookup(tau, 1,
                   lambda t: 1.0 / np.sqrt(math.pi * t),
                   lambda t: gamma_fn(0.25) / math.pi * t ** -0.25)


# ---------------------------------------------------------------------------
# far below threshold


def scaled_time(rates: RateSystem, t):
    m = rates.model
    T = kepler_period(rates.system.mean_energy)
    return 2.0 * rates.gamma * m.bandwidth * np.asarray(t, dtype=float) / (T * m.cutoff ** 2)


def below_threshold(rates: RateSystem, t):
    """``(rho_gg, P_ion)`` from the scaling function, valid for ``B << |mean|``, ``t << t_c``.

    For phase diffusion only the small-``tau`` branch survives and the
    ``t^{-1/2}`` laws are returned.
    """
    m = rates.model
    e = abs(rates.system.mean_energy)
    T = kepler_period(rates.system.mean_energy)
    if m.kind is NoiseKind.PDM:
        t = np.asarray(t, dtype=float)
        p = 2.0 / (math.pi * e) * np.sqrt(2.0 * rates.gamma * m.bandwidth * t / (math.pi * T))
        return law_minus_half(rates, t), p
    if m.kind is not NoiseKind.OU:
        raise ValueError("the scaling form needs a Lorentzian or OU spectrum")
    tau = scaled_time(rates, t)
    q = m.cutoff / e
    rho = 2.0 / (T * m.cutoff) * scaling_fprime(tau)
    p = (q - math.atan(q)) / math.pi * scaling_f(tau)
    return rho, p


def law_minus_half(rates: RateSystem, t):
    T = kepler_period(rates.system.mean_energy)
    return np.sqrt(2.0 / (math.pi * rates.model.bandwidth * T * rates.gamma * np.asarray(t, float)))


def law_minus_quarter(rates: RateSystem, t):
    m = rates.model
    T = kepler_period(rates.system.mean_energy)
    t = np.asarray(t, dtype=float)
    return gamma_fn(0.25) / math.pi * (8.0 / (T ** 3 * m.cutoff ** 2 * t * rates.gamma * m.bandwidth)) ** 0.25


@dataclass(frozen=True)
class Crossovers:
    t_c: float
    t_pdm: float | None
    t_quarter: float | None
    plateau_start: float
    plateau_end: float


def crossover_times(rates: RateSystem) -> Crossovers:
    m = rates.model
    b, g = m.bandwidth, rates.gamma
    if m.kind is NoiseKind.OU and rates.system.mean_energy < 0:
        T = kepler_period(rates.system.mean_energy)
        t_pdm = T * m.cutoff ** 2 / (200.0 * b * g)
        t_q = T * m.cutoff ** 2 / (2.0 * b * g)
    else:
        t_pdm = t_q = None
    lo, hi = plateau_window(rates)
    return Crossovers(ionization_time(rates), t_pdm, t_q, lo, hi)


@dataclass(frozen=True)
class RegimeReport:
    gamma: float
    gamma_eff_over_gamma: float
    s_bar: float
    lambda_sp: float
    kepler_period: float
    t_c: float
    t_pdm: float | None
    t_quarter: float | None
    plateau_start: float
    plateau_end: float
    rho_prefactor: float
    survival_prefactor: float
    regime: str
    regime_labels: tuple = ()

    def as_dict(self, time_unit: float = 1.0) -> dict:
        """JSON-friendly view; times are divided by ``time_unit`` (e.g. ``1/gamma``)."""
        d = asdict(self)
        for k in ("kepler_period", "t_c", "t_pdm", "t_quarter", "plateau_start", "plateau_end"):
            if d[k] is not None:
                d[k] = d[k] / time_unit
        d["regime_labels"] = [[lo / time_unit, hi / time_unit if math.isfinite(hi) else None, name]
                              for lo, hi, name in self.regime_labels]
        return d


def regime_labels(rates: RateSystem, cr: Crossovers | None = None) -> tuple:
    """Ordered ``(t_start, t_end, name)`` intervals of the dynamical regimes."""
    if cr is None:
        cr = crossover_times(rates)
    g = rates.gamma
    e = rates.system.mean_energy
    out = [(0.0, 1.0 / g, "exponential depletion")]
    if e > -rates.model.bandwidth:
        out.append((1.0 / g, cr.plateau_end, "near-threshold plateau"))
        out.append((cr.plateau_end, cr.t_c, "near-threshold growth"))
    else:
        T = kepler_period(e)
        start = 1.0 / g
        if T > start:
            out.append((start, T, "coherent Kepler"))
            start = T
        if cr.t_pdm is None:
            out.append((start, cr.t_c, "diffusion -1/2"))
        else:
            out.append((start, min(cr.t_pdm, cr.t_c), "diffusion -1/2"))
            start = max(start, cr.t_pdm)
            if cr.t_quarter < cr.t_c:
                out.append((start, cr.t_quarter, "diffusion crossover"))
                out.append((max(start, cr.t_quarter), cr.t_c, "diffusion -1/4"))
            else:
                out.append((start, cr.t_c, "diffusion crossover"))
    out.append((cr.t_c, math.inf, "stochastic ionization"))
    return tuple((float(a), float(b), n) for a, b, n in out if b > a)


def regime_report(rates: RateSystem) -> RegimeReport:
    """Characteristic times and prefactors of every regime for one scenario."""
    cr = crossover_times(rates)
    A, C = longtime_prefactors(rates)
    B = rates.model.bandwidth
    e = rates.system.mean_energy
    if e > -B:
        regime = "near-threshold"
    elif rates.model.kind is NoiseKind.OU:
        regime = "below-threshold"
    else:
        regime = "below-threshold-lorentzian"
    return RegimeReport(rates.gamma, rates.gamma_eff / rates.gamma, rates.s_bar,
                        spectral_moment(rates), kepler_period(e) if e < 0 else math.inf, cr.t_c, cr.t_pdm,
                        cr.t_quarter, cr.plateau_start, cr.plateau_end, A, C, regime,
                        regime_labels(rates, cr))


def asymptotic_series(rates: RateSystem, t) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise ``(rho_gg, P_ion)`` built from the formula of each labelled regime.

    Exponential depletion up to ``1/gamma``, then the near-threshold or
    below-threshold closed forms, and the long-time laws after ``t_c``.
    Near threshold no closed form covers ``0.1/(gamma Lambda) < t < t_c``;
    those entries are NaN.
    """
    t = np.asarray(t, dtype=float)
    g, ratio = rates.gamma, rates.gamma_eff / rates.gamma
    t_c = ionization_time(rates)
    rho = np.exp(-g * t)
    p = ratio * (1.0 - rho)
    mid = (t > 1.0 / g) & (t < t_c)
    if np.any(mid):
        if rates.system.mean_energy > -rates.model.bandwidth:
            lam = spectral_moment(rates)
            gt = g * t[mid]
            valid = lam * gt <= 0.1
            rho[mid] = np.where(valid, (np.exp(-gt) + lam * np.exp(lam * gt)) / (1.0 + lam), np.nan)
            p[mid] = np.where(valid, ratio / (1.0 + lam) * (np.exp(lam * gt) - np.exp(-gt)), np.nan)
        else:
            rho[mid], p[mid] = below_threshold(rates, t[mid])
    late = t >= t_c
    if np.any(late):
        r_late, surv = longtime_laws(rates, t[late])
        rho[late] = r_late
        p[late] = 1.0 - surv
    return rho, p
