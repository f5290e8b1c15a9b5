"""Time-domain Lindblad evolution for Lorentzian (phase-diffusion) noise.

For a white-noise phase the averaged density matrix obeys a Lindblad equation
with the single jump operator ``sqrt(2b)|g><g|``: ground-excited coherences
decay at rate ``b``, nothing else is damped.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.integrate import solve_ivp

from .dca import PopulationSeries
from .laser_noise import NoiseModel
from .master import Basis, make_basis
from .qdt import QdtSystem


class BasisTruncationWarning(UserWarning):
    """Population reached the top of the discretised continuum."""


EDGE_TOL = 1e-4
POSITIVITY_TOL = 1e-9


def full_basis(system: QdtSystem, model: NoiseModel, below: int = 25, above: int = 60,
               n_bins: int = 40) -> Basis:
    """Bound levels ``n_res - below .. n_res + above`` plus continuum bins."""
    n_res = int(round(system.n_res + system.quantum_defect))
    lo = max(system.n_min, n_res - below)
    return make_basis(system, model, (lo, n_res + above), n_bins)


def reduced_basis(system: QdtSystem, model: NoiseModel, n_bound: int = 15,
                  n_bins: int = 40) -> Basis:
    """``n_bound`` levels centred on the resonant level plus ``n_bins`` continuum bins."""
    n_res = int(round(system.n_res + system.quantum_defect))
    lo = n_res - n_bound // 2
    return make_basis(system, model, (lo, lo + n_bound - 1), n_bins)


def pdm_lindblad(basis: Basis, bandwidth: float, t_grid, rtol: float = 1e-9,
                 atol: float = 1e-12, store_levels: bool = False) -> PopulationSeries:
    """Integrate the Lindblad equation from ``rho = |g><g|`` with an explicit RK solver."""
    t = np.asarray(t_grid, dtype=float)
    H = basis.hamiltonian(bandwidth)     # H - i b |g><g|
    Hd = H.conj().T
    N1 = basis.size + 1
    b2 = 2.0 * bandwidth

    def rhs(_, y):
        rho = y.view(complex).reshape(N1, N1)
        out = -1j * (H @ rho - rho @ Hd)
        out[0, 0] += b2 * rho[0, 0]
        return out.reshape(-1).view(float)

    rho0 = np.zeros((N1, N1), dtype=complex)
    rho0[0, 0] = 1.0
    sol = solve_ivp(rhs, (0.0, t[-1]), rho0.reshape(-1).view(float), method="DOP853",
                    t_eval=t, rtol=rtol, atol=atol)
    if sol.status != 0:
        raise RuntimeError(f"Lindblad integration failed: {sol.message}")
    y = sol.y.T.copy().view(complex).reshape(t.size, N1, N1)
    pops = np.real(np.einsum("tii->ti", y))
    bound = np.concatenate([[False], basis.is_bound])
    cont = np.concatenate([[False], ~basis.is_bound])
    series = PopulationSeries(t, pops[:, 0], pops[:, cont].sum(axis=1), pops[:, bound].sum(axis=1),
                              pops[:, bound].T if store_levels else None,
                              basis.n[basis.is_bound] if store_levels else None)
    herm = float(np.abs(y - np.conj(np.transpose(y, (0, 2, 1)))).max())
    min_eig = float(np.linalg.eigvalsh(0.5 * (y + np.conj(np.transpose(y, (0, 2, 1))))).min())
    top = 1 + int(np.argmax(basis.energies))
    edge = float(pops[:, top].max()) if not basis.is_bound.all() else 0.0
    if edge > EDGE_TOL:
        warnings.warn(f"population {edge:.2e} in the highest continuum bin; extend the basis",
                      BasisTruncationWarning, stacklevel=2)
    if min_eig < -POSITIVITY_TOL:
        warnings.warn(f"density matrix eigenvalue {min_eig:.2e} below zero; tighten tolerances",
                      RuntimeWarning, stacklevel=2)
    series.diagnostics = {"nfev": int(sol.nfev), "hermiticity_error": herm,
                          "min_eigenvalue": min_eig, "edge_population": edge,
                          "conservation_error": series.conservation_error}
    return series
