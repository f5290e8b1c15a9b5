"""Monte-Carlo oracle: Schroedinger evolution under sampled laser phase paths.

Each realisation propagates the rotating-frame state with a Strang splitting:
half a free step, the exact exponential of the rank-two dipole coupling with
the phase taken at the step midpoint, and another half free step. Ensemble
averages are accumulated over independent seeded batches so results do not
depend on the number of worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dca import PopulationSeries
from .laser_noise import NoiseModel, StepSizeError, phase_increments
from .master import Basis

# the Monte-Carlo basis is the same ground + excited set used by the master solver
TruncatedBasis = Basis


def max_step(basis: Basis, model: NoiseModel) -> float:
    """``0.05`` over the fastest rate among ``beta``, ``b``, ``Omega_R = 2 max|V|``,
    the largest bound-level spacing and the largest detuning in the basis.

    ``1/b`` stands in for ``1/beta`` under phase diffusion. The detuning term
    keeps the splitting error small for high continuum bins.
    """
    scales = [2.0 * float(np.abs(basis.couplings).max(initial=0.0)), model.bandwidth]
    if math.isfinite(model.cutoff):
        scales.append(model.cutoff)
    bound = np.sort(basis.energies[basis.is_bound])
    if bound.size > 1:
        scales.append(float(np.diff(bound).max()))
    scales.append(float(np.abs(basis.energies - basis.mean_energy).max(initial=0.0)))
    fastest = max(scales)
    return math.inf if fastest == 0 else 0.05 / fastest


def check_step(basis: Basis, model: NoiseModel, dt: float) -> None:
    limit = max_step(basis, model)
    if not 0 < dt <= limit:
        raise StepSizeError(f"dt={dt:g} exceeds the resolvable step {limit:g}")


def two_level_basis(detuning: float, coupling: float) -> Basis:
    """Ground state at energy 0 and one excited level at ``detuning``."""
    return Basis(0.0, np.array([float(detuning)]), np.array([float(coupling)]), np.array([1]))


def _propagate(basis: Basis, phases_mid: np.ndarray, dt: float, record: np.ndarray) -> np.ndarray:
    """Evolve ``P`` paths; returns ``|psi|^2`` at the step indices ``record``, shape (R, P, N+1)."""
    P, n_steps = phases_mid.shape
    energies = np.concatenate([[basis.mean_energy], basis.energies])
    half = np.exp(-0.5j * dt * energies)
    norm_v = float(np.linalg.norm(basis.couplings))
    u = basis.couplings / norm_v if norm_v > 0 else basis.couplings
    theta = norm_v * dt
    cth, sth = math.cos(theta), math.sin(theta)
    psi = np.zeros((P, energies.size), dtype=complex)
    psi[:, 0] = 1.0
    out = np.empty((record.size, P, energies.size))
    r = 0
    if record.size and record[0] == 0:
        out[0] = np.abs(psi) ** 2
        r = 1
    for k in range(n_steps):
        psi *= half
        ph = np.exp(-1j * phases_mid[:, k])     # |u> carries exp(-i Phi)
        g = psi[:, 0].copy()
        proj = np.conj(ph) * (psi[:, 1:] @ u)   # <u|psi>
        psi[:, 0] = cth * g + 1j * sth * proj
        psi[:, 1:] += ((cth - 1.0) * proj + 1j * sth * g)[:, None] * (ph[:, None] * u[None, :])
        psi *= half
        while r < record.size and record[r] == k + 1:
            out[r] = np.abs(psi) ** 2
            r += 1
    return out


def evolve_realization(basis: Basis, model: NoiseModel, t_grid, dt: float, seed: int,
                       scheme: str = "exact") -> np.ndarray:
    """Populations ``(len(t_grid), N+1)`` of a single seeded realisation."""
    check_step(basis, model, dt)
    return _batch(basis, model, np.asarray(t_grid, float), dt, 1, seed, scheme)[:, 0, :]


def _batch(basis, model, t, dt, n_paths, seed, scheme):
    record = np.rint(t / dt).astype(int)
    if np.any(np.abs(record * dt - t) > 1e-9 * max(t.max(), dt)):
        raise ValueError("output times must be multiples of dt")
    n_steps = int(record.max())
    rng = np.random.default_rng(seed)
    Phi, _ = phase_increments(model, 0.5 * dt, 2 * n_steps, rng, n_paths, scheme)
    return _propagate(basis, Phi[:, 1::2], dt, record)


def _batch_moments(args):
    basis, model, t, dt, n_paths, seed, scheme = args
    pops = _batch(basis, model, t, dt, n_paths, seed, scheme)
    bound = np.concatenate([[False], basis.is_bound])
    cont = np.concatenate([[False], ~basis.is_bound])
    q = np.stack([pops[..., 0], pops[..., cont].sum(-1), pops[..., bound].sum(-1)])  # (3, R, P)
    drift = float(np.abs(pops.sum(-1) - 1.0).max())
    return q.sum(axis=2), (q * q).sum(axis=2), n_paths, drift


@dataclass
class EnsembleResult:
    series: PopulationSeries
    stderr_rho_gg: np.ndarray
    stderr_p_ion: np.ndarray
    n_paths: int
    seed: int


def ensemble_average(basis: Basis, model: NoiseModel, t_grid, n_paths: int, seed: int,
                     dt: float, batch: int = 2000, scheme: str = "exact",
                     jobs: int = 1) -> EnsembleResult:
    """Mean populations and standard errors over ``n_paths`` realisations.

    Batch ``i`` draws from ``SeedSequence(seed).spawn`` child ``i``, so the
    result is identical for any ``jobs``.
    """
    if n_paths < 100:
        raise ValueError("at least 100 realisations are required")
    check_step(basis, model, dt)
    t = np.asarray(t_grid, dtype=float)
    # cap the sampled phases per batch at about 2**24 numbers
    batch = max(1, min(batch, (1 << 23) // max(1, int(round(t.max() / dt)))))
    sizes = [batch] * (n_paths // batch) + ([n_paths % batch] if n_paths % batch else [])
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    tasks = [(basis, model, t, dt, n, np.random.default_rng(c).integers(2 ** 63), scheme)
             for n, c in zip(sizes, children)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_batch_moments, tasks))
    else:
        parts = [_batch_moments(a) for a in tasks]
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / n_paths
    var = np.maximum(s2 / n_paths - mean ** 2, 0.0) * n_paths / max(n_paths - 1, 1)
    err = np.sqrt(var / n_paths)
    series = PopulationSeries(t, mean[0], mean[1], mean[2])
    series.diagnostics = {"n_paths": n_paths, "seed": seed, "dt": dt, "scheme": scheme,
                          "max_norm_drift": max(p[3] for p in parts),
                          "conservation_error": series.conservation_error}
    return EnsembleResult(series, err[0], err[1], n_paths, seed)
