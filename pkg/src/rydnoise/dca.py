"""Pauli rate equations for a Rydberg series driven by a broadband laser.

Once the field decorrelates faster than the atom responds, the averaged
populations obey::

    d rho_n / dt = R_n (rho_gg - rho_n),   R_n = 2 pi d_n^2 S(mean - eps_n)
    d P / dt     = Gamma rho_gg

with ``rho_gg`` fixed by probability conservation. The module integrates these
equations in time and also provides their Laplace-domain solution.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp

from . import laplace
from .laser_noise import NoiseModel, effective_bandwidth, spectrum
from .qdt import QdtSystem, effective_gamma, gamma_rate, kepler_period, levels

log = logging.getLogger(__name__)


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RateSystem:
    n: np.ndarray
    energies: np.ndarray
    rates_bound: np.ndarray
    gamma: float
    gamma_eff: float
    system: QdtSystem
    model: NoiseModel
    continuum_energies: np.ndarray | None = None
    rate_ion_density: np.ndarray | None = None

    def __post_init__(self):
        if np.any(self.rates_bound < 0) or self.gamma_eff < 0:
            raise ValueError("rates must be non-negative")

    @property
    def total_bound_rate(self) -> float:
        return float(np.sum(self.rates_bound))

    @property
    def s_bar(self) -> float:
        """``S(mean)/<|eps|^2>``, the normalised spectral density at the mean energy."""
        return spectrum(self.model, self.system.mean_energy) / self.model.mean_intensity


def build_rates(system: QdtSystem, model: NoiseModel,
                continuum: tuple[np.ndarray, np.ndarray] | None = None) -> RateSystem:
    """Golden-rule rates from the ground state to every bound level and the continuum."""
    n, e_n, d_n = levels(system)
    rates = 2.0 * math.pi * d_n ** 2 * spectrum(model, system.mean_energy - e_n)
    ce = cr = None
    if continuum is not None:
        ce = np.asarray(continuum[0], dtype=float)
        cr = 2.0 * math.pi * system.dipole_deps ** 2 * spectrum(model, system.mean_energy - ce)
    return RateSystem(n, e_n, np.asarray(rates, dtype=float), gamma_rate(system, model),
                      effective_gamma(system, model), system, model, ce, cr)


@dataclass
class PopulationSeries:
    times: np.ndarray
    rho_gg: np.ndarray
    p_ion: np.ndarray
    excited_total: np.ndarray
    rho_nn: np.ndarray | None = None  # shape (len(levels), len(times))
    levels: np.ndarray | None = None
    diagnostics: dict | None = None

    @property
    def conservation_error(self) -> float:
        return float(np.max(np.abs(1.0 - (self.rho_gg + self.excited_total + self.p_ion))))


def _generator(rates: RateSystem) -> sparse.csc_matrix:
    # state = (rho_n..., rho_gg, P); arrow-shaped coupling through rho_gg
    R = rates.rates_bound
    N = R.size
    g = N
    rows = np.concatenate([np.arange(N), np.arange(N), np.full(N, g), [g, N + 1]])
    cols = np.concatenate([np.arange(N), np.full(N, g), np.arange(N), [g, g]])
    vals = np.concatenate([-R, R, R, [-R.sum() - rates.gamma_eff, rates.gamma_eff]])
    return sparse.csc_matrix((vals, (rows, cols)), shape=(N + 2, N + 2))


def truncation_check(rates: RateSystem, t_max: float, tol: float = 1e-2) -> float:
    """Warn when the highest retained level still fills appreciably by ``t_max``."""
    edge = float(rates.rates_bound[-1] * t_max)
    if edge > tol:
        warnings.warn(f"level n_max={rates.n[-1]} has R*t_max={edge:.3g} > {tol}; "
                      "raise n_max", TruncationWarning, stacklevel=3)
    return edge


def evolve(rates: RateSystem, t_grid, rtol: float = 1e-8, atol: float = 1e-15,
           store_levels: bool | np.ndarray = False) -> PopulationSeries:
    """Integrate the rate equations from ``rho = |g><g|`` with a stiff BDF solver.

    Conservation is not enforced; its violation is reported in ``diagnostics``.
    ``store_levels`` may be ``True`` (all levels) or an array of principal
    quantum numbers to keep.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or np.any(np.diff(t) <= 0) or t[0] < 0:
        raise ValueError("t_grid must be increasing and non-negative")
    A = _generator(rates)
    N = rates.rates_bound.size
    y0 = np.zeros(N + 2)
    y0[N] = 1.0
    edge = truncation_check(rates, t[-1])
    sol = solve_ivp(lambda _, y: A @ y, (0.0, t[-1]), y0, method="BDF", jac=A,
                    t_eval=t, rtol=rtol, atol=atol)
    if sol.status != 0:
        raise RuntimeError(f"rate-equation integration failed: {sol.message}")
    y = sol.y
    keep = None
    rho_nn = None
    if store_levels is True:
        keep = rates.n
        rho_nn = y[:N]
    elif store_levels is not False:
        keep = np.asarray(store_levels)
        rho_nn = y[keep - rates.n[0]]
    series = PopulationSeries(t, y[N].copy(), y[N + 1].copy(), y[:N].sum(axis=0), rho_nn, keep)
    series.diagnostics = {"nfev": int(sol.nfev), "njev": int(sol.njev),
                          "conservation_error": series.conservation_error,
                          "truncation_edge": edge}
    if series.conservation_error > 1e-6:
        log.warning("rate equations: conservation error %.3g", series.conservation_error)
    return series


def _check_upper(z):
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise ValueError("Laplace-domain quantities need Im z > 0")
    return z


def sigma_kernel(rates: RateSystem, z, _check: bool = True):
    """``sigma(z) = sum_n R_n / (R_n - i z)`` over the bound levels."""
    z = _check_upper(z) if _check else np.asarray(z, dtype=complex)
    R = rates.rates_bound
    flat = np.atleast_1d(z).ravel()
    out = np.empty(flat.size, dtype=complex)
    for i0 in range(0, flat.size, 256):
        zz = flat[i0:i0 + 256]
        out[i0:i0 + 256] = (R[None, :] / (R[None, :] - 1j * zz[:, None])).sum(axis=1)
    return out.reshape(np.shape(z)) if np.ndim(z) else out[0]


def sigma_small_z(rates: RateSystem, z):
    """Leading small-``z`` behaviour of :func:`sigma_kernel` for a smooth spectrum."""
    z = np.asarray(z, dtype=complex)
    return 2.0 * math.pi / (3.0 * math.sqrt(3.0)) * (1j * rates.gamma * rates.s_bar / z) ** (1.0 / 3.0)


def laplace_populations(rates: RateSystem, z, variant: str = "exact", _check: bool = True):
    """Transforms ``(rho_gg(z), P_ion(z))``.

    ``variant="exact"`` keeps the ground population in the conservation sum,
    ``1/(Gamma - i z - i z sigma)``. ``variant="neglected"`` drops it,
    ``1/(Gamma - i z sigma)``, which is accurate only once the ground state is
    a small fraction of the excited population (at late times).
    """
    z = _check_upper(z) if _check else np.asarray(z, dtype=complex)
    sig = sigma_kernel(rates, z, _check=False)
    G = rates.gamma_eff
    if variant == "exact":
        rho = 1.0 / (G - 1j * z - 1j * z * sig)
    elif variant == "neglected":
        rho = 1.0 / (G - 1j * z * sig)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return rho, 1j * G * rho / z


def laplace_series(rates: RateSystem, t_grid, variant: str = "exact", M: int = 32):
    """Populations from the Laplace solution by fixed-Talbot inversion."""
    t = np.asarray(t_grid, dtype=float)
    rho = laplace.talbot_invert(lambda z: laplace_populations(rates, z, variant, _check=False)[0], t, M)
    p = laplace.talbot_invert(lambda z: laplace_populations(rates, z, variant, _check=False)[1], t, M)
    return rho, p


def laplace_series_line(rates: RateSystem, t_grid, x_max: float | None = None,
                        variant: str = "exact"):
    """Populations from the Laplace solution by trapezoid inversion on ``Im z = 1/t_max``."""
    t = np.asarray(t_grid, dtype=float)
    t_max = float(t[-1])
    if x_max is None:
        x_max = 200.0 * max(rates.rates_bound.max(), rates.gamma, 1.0 / t_max)
    kappa = rates.gamma

    def f_rho(z):
        return laplace_populations(rates, z, variant, _check=False)[0]

    def f_p(z):
        return laplace_populations(rates, z, variant, _check=False)[1]

    slope = -(rates.total_bound_rate + rates.gamma_eff)
    g_rho = laplace.make_grid(f_rho, t_max, x_max, asymptote=(1.0, slope, kappa))
    g_p = laplace.make_grid(f_p, t_max, x_max, asymptote=(0.0, rates.gamma_eff, kappa))
    return laplace.invert_laplace(g_rho, t), laplace.invert_laplace(g_p, t)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidityReport:
    bandwidth: float
    rabi_mean: float
    level_spacing: float
    resonant_rate: float
    gamma: float
    ratio_bandwidth_rabi: float     # B^2 / (Omega_R^2 / 2)
    ratio_spacing_rate: float       # spacing / R_res
    ratio_bandwidth_gamma: float    # B / (gamma / pi)
    threshold: float = 10.0

    @property
    def violations(self) -> list[str]:
        out = []
        if self.ratio_bandwidth_rabi < self.threshold:
            out.append("bandwidth not large against mean Rabi frequency")
        if self.ratio_spacing_rate < self.threshold:
            out.append("level spacing not large against resonant rate")
        if self.ratio_bandwidth_gamma < self.threshold:
            out.append("bandwidth not large against gamma/pi")
        return out

    @property
    def ok(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["violations"] = self.violations
        return d


def validity_report(rates: RateSystem, threshold: float = 10.0) -> ValidityReport:
    """Dimensionless checks of the conditions under which the rate equations hold.

    A ratio below ``threshold`` counts as a violation and is logged.
    """
    B = effective_bandwidth(rates.model)
    k = int(np.argmin(np.abs(rates.energies - rates.system.mean_energy)))
    n_res = rates.n[k]
    d_res = rates.system.dipole_deps * (n_res - rates.system.quantum_defect) ** -1.5
    rabi = 2.0 * abs(d_res) * math.sqrt(rates.model.mean_intensity)
    spacing = 1.0 / (n_res - rates.system.quantum_defect) ** 3
    r_res = float(rates.rates_bound[k])
    rep = ValidityReport(float(B), float(rabi), float(spacing), r_res, rates.gamma,
                         float(B * B / (0.5 * rabi * rabi)) if rabi > 0 else math.inf,
                         float(spacing / r_res) if r_res > 0 else math.inf,
                         B / (rates.gamma / math.pi) if rates.gamma > 0 else math.inf,
                         threshold)
    for v in rep.violations:
        log.warning("rate-equation validity: %s", v)
    return rep


def kepler_period_at_mean(rates: RateSystem) -> float:
    return kepler_period(rates.system.mean_energy)


def rates_on_basis(basis, model: NoiseModel, system: QdtSystem) -> RateSystem:
    """Rate equations restricted to a finite basis; continuum bins feed ``Gamma``.

    ``basis`` is a :class:`rydnoise.master.Basis`; bin rates include the bin width
    through their couplings.
    """
    S = spectrum(model, basis.mean_energy - basis.energies) / model.mean_intensity
    R = 2.0 * math.pi * basis.couplings ** 2 * S
    bound = basis.is_bound
    return RateSystem(basis.n[bound], basis.energies[bound], R[bound], gamma_rate(system, model),
                      float(R[~bound].sum()), system, model, basis.energies[~bound], R[~bound])
