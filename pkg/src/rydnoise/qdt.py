"""One-channel quantum-defect model of a Rydberg series coupled to a ground state.

Levels ``eps_n = -1/(2 (n - alpha)^2)`` with dipoles ``d_n = d_eps (n - alpha)^{-3/2}``;
the continuum above threshold is energy normalised with constant dipole ``d_eps``.
Atomic units throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .laser_noise import NoiseModel, effective_bandwidth, spectrum_integral


@dataclass(frozen=True)
class QdtSystem:
    quantum_defect: float
    dipole_deps: float
    mean_energy: float
    stark_shift: float = 0.0
    n_min: int = 2
    n_max: int = 2000

    def __post_init__(self):
        errors = []
        if not 0.0 <= self.quantum_defect < 1.0:
            errors.append("quantum_defect must lie in [0, 1)")
        if self.n_min > self.n_max:
            errors.append("n_min must be <= n_max")
        if not self.n_min - self.quantum_defect > 1.0:
            errors.append("n_min - alpha must exceed 1")
        if self.dipole_deps < 0:
            errors.append("dipole_deps must be >= 0")
        if errors:
            raise ValueError("; ".join(errors))

    @classmethod
    def from_n_res(cls, n_res: float, quantum_defect: float, dipole_deps: float, **kw) -> "QdtSystem":
        """Place the mean laser energy at ``-1/(2 n_res^2)``."""
        return cls(quantum_defect, dipole_deps, -0.5 / n_res ** 2, **kw)

    @property
    def n_res(self) -> float:
        if self.mean_energy >= 0:
            return math.inf
        return (-2.0 * self.mean_energy) ** -0.5

    @property
    def principal_numbers(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)


def _check_n(n, system: QdtSystem):
    arr = np.asarray(n)
    if np.any(arr < system.n_min) or np.any(arr > system.n_max):
        raise IndexError(f"n outside [{system.n_min}, {system.n_max}]")


def level_energy(n, system: QdtSystem):
    _check_n(n, system)
    return -0.5 / (np.asarray(n, dtype=float) - system.quantum_defect) ** 2


def dipole(n, system: QdtSystem):
    _check_n(n, system)
    return system.dipole_deps * (np.asarray(n, dtype=float) - system.quantum_defect) ** -1.5


def levels(system: QdtSystem) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(n, eps_n, d_n)`` over the truncation range."""
    n = system.principal_numbers
    return n, level_energy(n, system), dipole(n, system)


def kepler_period(energy: float) -> float:
    if not energy < 0:
        raise ValueError("Kepler period needs a bound (negative) energy")
    return 2.0 * math.pi * (-2.0 * energy) ** -1.5


def gamma_rate(system: QdtSystem, model: NoiseModel) -> float:
    """Ionisation rate of the ground state by a monochromatic field of equal intensity."""
    return 2.0 * math.pi * system.dipole_deps ** 2 * model.mean_intensity


def effective_gamma(system: QdtSystem, model: NoiseModel) -> float:
    """Rate into the continuum: only spectral components above threshold ionise."""
    return (2.0 * math.pi * system.dipole_deps ** 2
            * spectrum_integral(model, -math.inf, system.mean_energy))


def dipole_for_gamma(gamma: float, model: NoiseModel) -> float:
    return math.sqrt(gamma / (2.0 * math.pi * model.mean_intensity))


def continuum_grid(system: QdtSystem, model: NoiseModel, n_points: int = 4000,
                   e_min_factor: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Log-spaced continuum energies on ``(0, mean + 20 B]`` with trapezoid weights."""
    B = effective_bandwidth(model)
    top = max(system.mean_energy, 0.0) + 20.0 * B
    e = np.geomspace(top * e_min_factor, top, n_points)
    w = np.empty_like(e)
    w[1:-1] = 0.5 * (e[2:] - e[:-2])
    w[0] = 0.5 * (e[1] - e[0]) + e[0]  # absorb (0, e_min]
    w[-1] = 0.5 * (e[-1] - e[-2])
    return e, w


def effective_quantum_number(z, system: QdtSystem):
    # principal sqrt: cut of (-2z)^{-1/2} on positive real z
    return (-2.0 * np.asarray(z, dtype=complex)) ** -0.5 + system.quantum_defect


def self_energy(z, system: QdtSystem, gamma: float):
    """Closed-form self energy of the ground state for the infinite series plus continuum."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise ValueError("self_energy requires Im z > 0")
    nu = effective_quantum_number(z, system)
    return system.stark_shift - 0.5j * gamma + 1j * gamma / (1.0 - np.exp(-2j * math.pi * nu))


def self_energy_direct(z, system: QdtSystem, gamma: float, e_cut: float = 1.0,
                       include_tail: bool = True):
    """Truncated level sum plus continuum integral up to ``e_cut``.

    ``sum_n |eps0 d_n|^2/(z - eps_n) + |eps0 d_eps|^2 int_0^e_cut de/(z - e)``.
    Levels above ``n_max`` are replaced by their quasi-continuum integral when
    ``include_tail`` is set. The result differs from :func:`self_energy` by a
    slowly varying real shift that comes from deep levels and the cutoff.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(z.imag <= 0):
        raise ValueError("self_energy_direct requires Im z > 0")
    n, e_n, d_n = levels(system)
    coup = gamma / (2.0 * math.pi * system.dipole_deps ** 2) if system.dipole_deps > 0 else 0.0
    w = coup * d_n ** 2
    terms = w[None, :] / (z[:, None] - e_n[None, :])
    order = np.argsort(np.abs(terms), axis=1)  # smallest magnitude first
    total = np.take_along_axis(terms, order, axis=1).sum(axis=1)
    g2 = gamma / (2.0 * math.pi)
    if include_tail:
        e_edge = -0.5 / (system.n_max + 0.5 - system.quantum_defect) ** 2
        total += g2 * (np.log(z - e_edge) - np.log(z - e_cut))
    else:
        total += g2 * (np.log(z) - np.log(z - e_cut))
    return total + system.stark_shift
