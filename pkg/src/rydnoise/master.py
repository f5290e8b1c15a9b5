"""Averaged master equation with frequency-noise memory, solved in the Laplace domain.

Averaging over the OU frequency noise turns the Fokker-Planck hierarchy of the
ground-excited coherences into a continued fraction. In the Laplace domain the
coherence ``rho_kg`` is damped by ``b * alpha_k(z)`` and ``rho_gk`` by
``b * conj(alpha_k(-conj z))``, where::

    alpha_k(z) = 1 / (1 + iX + 2r / (2 + iX + 3r / (3 + iX + ...))),
    X = (eps_k - mean - z) / beta,   r = b / beta.

For ``beta -> inf`` the damping is the constant ``b`` (Lindblad form with jump
operator ``sqrt(2b)|g><g|``).

The solver splits the damping into that Lindblad part, solved exactly through
the non-Hermitian ``H_eff = H - i b |g><g|``, and the remainder ``b w_k``
(``w = 1 - alpha``), which couples the coherences through a linear system.
On a finite basis the propagator transforms are evaluated from one
eigen-decomposition of ``H_eff`` plus the star-shaped resolvent of the
ground state. Everything is in the rotating frame and atomic units.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from . import laplace
from .dca import PopulationSeries
from .laser_noise import NoiseKind, NoiseModel, effective_bandwidth
from .qdt import QdtSystem, dipole, level_energy

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# continued fraction


def _cf_eval(X: np.ndarray, ratio: float, depth: int) -> np.ndarray:
    ix = 1j * X
    tail = np.zeros_like(ix)
    for k in range(depth, 1, -1):
        tail = k * ratio / (k + ix + tail)
    return 1.0 / (1.0 + ix + tail)


def continued_fraction(X, ratio: float, tol: float = 1e-8, depth: int = 20,
                       max_depth: int = 1 << 16):
    """``alpha(X)`` for ``r = b/beta``; depth doubles until the change is below ``tol``."""
    X = np.asarray(X, dtype=complex)
    if ratio == 0.0:
        return 1.0 / (1.0 + 1j * X)
    prev = _cf_eval(X, ratio, depth)
    while depth < max_depth:
        depth *= 2
        cur = _cf_eval(X, ratio, depth)
        if np.all(np.abs(cur - prev) <= 0.1 * tol):
            return cur
        prev = cur
    raise RuntimeError("continued fraction did not converge")


def continued_fraction_linear(X: complex, ratio: float, depth: int = 400) -> complex:
    """Same quantity from the truncated hierarchy as a banded linear system.

    In units of ``beta`` the ``j``-th moment obeys
    ``(j + iX) y_j - i s (y_{j-1} + (j+1) y_{j+1}) = delta_{j0}``, ``s = sqrt(r)``;
    then ``alpha = (1/y_0 - iX) / r``.
    """
    s = math.sqrt(ratio)
    j = np.arange(depth)
    main = j + 1j * X
    lower = np.full(depth - 1, -1j * s)
    upper = -1j * s * (j[:-1] + 1)
    A = sparse.diags([lower, main, upper], [-1, 0, 1], format="csc", dtype=complex)
    rhs = np.zeros(depth, dtype=complex)
    rhs[0] = 1.0
    y = spsolve(A, rhs)
    return (1.0 / y[0] - 1j * X) / ratio


def memory_factor(model: NoiseModel, detuning, z) -> np.ndarray:
    """``alpha`` for excited-state detunings ``eps_k - mean`` at every ``z``; shape ``(nz, nk)``."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    det = np.asarray(detuning, dtype=float)
    if model.kind is NoiseKind.PDM:
        return np.ones((z.size, det.size), dtype=complex)
    if model.kind is not NoiseKind.OU:
        raise ValueError("the memory master equation needs PDM or OU noise")
    X = (det[None, :] - z[:, None]) / model.cutoff
    return continued_fraction(X, model.bandwidth / model.cutoff)


# ---------------------------------------------------------------------------
# basis


@dataclass(frozen=True)
class Basis:
    """Ground state plus a finite set of excited states (bound levels and continuum bins)."""

    mean_energy: float
    energies: np.ndarray     # excited-state energies
    couplings: np.ndarray    # eps0 * dipole, real
    n: np.ndarray            # principal quantum number, or -1 for continuum bins
    bin_width: float = 0.0

    @property
    def is_bound(self) -> np.ndarray:
        return self.n >= 0

    @property
    def size(self) -> int:
        return self.energies.size

    def hamiltonian(self, damping: float = 0.0) -> np.ndarray:
        """Rotating-frame Hamiltonian, ground state first; ``damping`` adds ``-i b`` on it."""
        N = self.size
        H = np.zeros((N + 1, N + 1), dtype=complex)
        H[0, 0] = self.mean_energy - 1j * damping
        H[np.arange(1, N + 1), np.arange(1, N + 1)] = self.energies
        H[0, 1:] = -self.couplings
        H[1:, 0] = -self.couplings
        return H


def make_basis(system: QdtSystem, model: NoiseModel, n_range: tuple[int, int],
               n_bins: int = 40, e_top: float | None = None) -> Basis:
    """Bound levels ``n_range[0]..n_range[1]`` plus ``n_bins`` uniform continuum bins.

    Bins cover ``(0, e_top]`` (default ``max(mean, 0) + 20 B``) at their midpoints
    with dipole ``d_eps sqrt(width)``.
    """
    n = np.arange(n_range[0], n_range[1] + 1)
    e_n = level_energy(n, system)
    d_n = dipole(n, system)
    eps0 = math.sqrt(model.mean_intensity)
    if n_bins > 0:
        if e_top is None:
            e_top = max(system.mean_energy, 0.0) + 20.0 * effective_bandwidth(model)
        width = e_top / n_bins
        e_b = (np.arange(n_bins) + 0.5) * width
        d_b = np.full(n_bins, system.dipole_deps * math.sqrt(width))
    else:
        width = 0.0
        e_b = d_b = np.zeros(0)
    return Basis(system.mean_energy, np.concatenate([e_n, e_b]),
                 eps0 * np.concatenate([d_n, d_b]),
                 np.concatenate([n, -np.ones(n_bins, dtype=int)]), width)


# ---------------------------------------------------------------------------
# propagator transforms


@dataclass
class Propagator:
    """Eigen-decomposition of ``H_eff`` and star-graph resolvent of the ground state."""

    basis: Basis
    damping: float
    lam: np.ndarray = field(init=False)
    vr: np.ndarray = field(init=False)
    vi: np.ndarray = field(init=False)

    def __post_init__(self):
        H = self.basis.hamiltonian(self.damping)
        self.lam, self.vr = np.linalg.eig(H)
        self.vi = np.linalg.inv(self.vr)

    def amp(self, a: int, b: int) -> np.ndarray:
        """Residues of ``<a|exp(-i H_eff t)|b>`` at each eigenvalue."""
        return self.vr[a, :] * self.vi[:, b]

    def g_gg(self, w):
        """``<g|(w - H_eff)^{-1}|g>`` from the star structure."""
        w = np.asarray(w, dtype=complex)
        bs = self.basis
        sig = np.sum(bs.couplings ** 2 / (w[..., None] - bs.energies), axis=-1)
        return 1.0 / (w - bs.mean_energy + 1j * self.damping - sig)


def h_abcd(prop: Propagator, a: int, d: int, b: int, c: int, z) -> np.ndarray:
    """Transform of ``<a|U|b> conj(<d|U|c>)``, ``U = exp(-i H_eff t)``, by a double eigen-sum.

    Indices: 0 is the ground state, ``k >= 1`` the excited states. This is the
    reference evaluation; :func:`transfer_blocks` uses the resolvent instead.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    A = prop.amp(a, b)
    C = np.conj(prop.amp(d, c))
    den = z[:, None, None] - prop.lam[None, :, None] + np.conj(prop.lam)[None, None, :]
    return 1j * np.sum(A[None, :, None] * C[None, None, :] / den, axis=(1, 2))


@dataclass
class TransferBlocks:
    """All propagator transforms needed for the populations, batched over ``z``.

    Naming is ``m_<a><d><b><c>`` with ``l``/``n`` running over excited states;
    e.g. ``m_lggg[:, l]`` is the transform of ``<l|U|g> conj(<g|U|g>)``.
    """

    m_gggg: np.ndarray
    m_lggg: np.ndarray
    m_glgg: np.ndarray
    m_ggng: np.ndarray
    m_gggn: np.ndarray
    m_lgng: np.ndarray
    m_lggn: np.ndarray
    m_glng: np.ndarray
    m_glgn: np.ndarray
    m_llgg: np.ndarray
    m_llng: np.ndarray | None = None
    m_llgn: np.ndarray | None = None


def transfer_blocks(prop: Propagator, z, with_memory: bool = True) -> TransferBlocks:
    """Evaluate the propagator transforms at a batch of ``z`` (``Im z > 0``).

    With ``U_dc(t)* = sum_m conj(A^{dc}_m) exp(i conj(lam_m) t)`` each transform
    is a resolvent element at the shifted points ``w_m = z + conj(lam_m)``; the
    star structure expresses every resolvent element through ``G_gg(w)`` and
    ``1/(w - eps_l)``. Blocks coupling to the memory correction are only built
    when ``with_memory`` is set.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    bs = prop.basis
    V = bs.couplings
    vr, vi = prop.vr, prop.vi
    w = z[:, None] + np.conj(prop.lam)[None, :]               # (B, M)
    gm = prop.g_gg(w)                                          # (B, M)
    dinv = 1.0 / (w[:, :, None] - bs.energies[None, None, :])  # (B, M, N)
    c_gg = np.conj(vr[0, :] * vi[:, 0])                        # (M,)
    c_lg = np.conj(vr[1:, :] * vi[:, 0][None, :])              # (N, M): conj A^{lg}_m
    c_gn = np.conj(vr[0, :][:, None] * vi[:, 1:])              # (M, N): conj A^{gn}_m

    q = c_gg[None, :] * gm                                     # (B, M)
    m_gggg = 1j * q.sum(axis=1)
    gd = gm[:, :, None] * dinv                                 # G_gg(w_m)/(w_m - eps_l)
    m_lggg = -1j * V[None, :] * np.einsum("m,bml->bl", c_gg, gd)
    m_glgg = 1j * gm @ c_lg.T
    m_llgg = -1j * V[None, :] * np.einsum("lm,bml->bl", c_lg, gd)
    blocks = dict(m_gggg=m_gggg, m_lggg=m_lggg, m_glgg=m_glgg, m_llgg=m_llgg)
    if not with_memory:
        return TransferBlocks(m_ggng=None, m_gggn=None, m_lgng=None, m_lggn=None,
                              m_glng=None, m_glgn=None, **blocks)
    idx = np.arange(bs.size)
    vv = (V[:, None] * V[None, :])[None]
    dinv_t = dinv.transpose(0, 2, 1)                           # (B, N, M)
    # G_gn(w) = -V_n G_gg/(w - eps_n)
    m_ggng = -1j * V[None, :] * np.einsum("m,bmn->bn", c_gg, gd)
    m_gggn = 1j * gm @ c_gn
    # G_ln = delta_ln/(w - eps_l) + V_l V_n G_gg/((w - eps_l)(w - eps_n))
    m_lgng = 1j * vv * ((dinv_t * q[:, None, :]) @ dinv)
    m_lgng[:, idx, idx] += 1j * np.einsum("m,bml->bl", c_gg, dinv)
    m_lggn = -1j * V[None, :, None] * (gd.transpose(0, 2, 1) @ c_gn)
    m_glng = -1j * V[None, None, :] * (c_lg[None] @ gd)
    cvr = np.conj(vr[1:, :])                                   # (N, M)
    cvi = np.conj(vi[:, 1:])                                   # (M, N); conj A^{ln}_m = cvr[l,m] cvi[m,n]
    m_glgn = 1j * ((cvr[None] * gm[:, None, :]) @ cvi)
    pair = c_lg[None, :, :] * gm[:, None, :]                   # (B, N, M)
    m_llng = 1j * vv * ((pair * dinv_t) @ dinv)
    m_llng[:, idx, idx] += 1j * np.einsum("lm,bml->bl", c_lg, dinv)
    m_llgn = -1j * V[None, :, None] * ((cvr[None] * gd.transpose(0, 2, 1)) @ cvi)
    return TransferBlocks(m_ggng=m_ggng, m_gggn=m_gggn, m_lgng=m_lgng, m_lggn=m_lggn,
                          m_glng=m_glng, m_glgn=m_glgn, m_llng=m_llng, m_llgn=m_llgn, **blocks)


# ---------------------------------------------------------------------------
# coherence equations


@dataclass
class SolverState:
    a: np.ndarray          # rho_lg / (1 + 2 b rho_gg), shape (B, N)
    c: np.ndarray          # rho_gl / (1 + 2 b rho_gg)
    iterations: np.ndarray
    residual: np.ndarray
    fallback: np.ndarray   # True where the direct solve replaced the iteration


def iterate(blocks: TransferBlocks, w: np.ndarray, wp: np.ndarray, b: float,
            tol: float = 1e-8, max_sweeps: int = 50) -> SolverState:
    """Block Gauss-Seidel iteration for the normalised coherences.

    Unknowns obey::

        a_l = m_lggg + b sum_n [m_lgng w_n a_n + m_lggn w'_n c_n]
        c_l = m_glgg + b sum_n [m_glng w_n a_n + m_glgn w'_n c_n]

    Each sweep visits the levels in order, solving the diagonal ``n = l`` 2x2
    system exactly with the off-diagonal sums taken from the latest values
    (starting from zero). A point is converged once a sweep changes nothing by
    more than ``tol`` relative to the source terms; the count includes that
    sweep. Points that do not converge in ``max_sweeps`` are solved directly and
    flagged.
    """
    B, N = blocks.m_lggg.shape
    A11 = b * blocks.m_lgng * w[:, None, :]
    A12 = b * blocks.m_lggn * wp[:, None, :]
    A21 = b * blocks.m_glng * w[:, None, :]
    A22 = b * blocks.m_glgn * wp[:, None, :]
    ra, rc = blocks.m_lggg, blocks.m_glgg
    a = np.zeros((B, N), dtype=complex)
    c = np.zeros((B, N), dtype=complex)
    iters = np.zeros(B, dtype=int)
    resid = np.full(B, np.inf)
    active = np.ones(B, dtype=bool)
    scale = np.maximum(np.abs(ra).max(axis=1), np.abs(rc).max(axis=1)) + 1e-300
    for sweep in range(1, max_sweeps + 1):
        k = np.flatnonzero(active)
        ak, ck = a[k], c[k]
        a0, c0 = ak.copy(), ck.copy()
        for l in range(N):
            d11, d12 = A11[k, l, l], A12[k, l, l]
            d21, d22 = A21[k, l, l], A22[k, l, l]
            sa = (ra[k, l] + np.einsum("bn,bn->b", A11[k, l], ak) - d11 * ak[:, l]
                  + np.einsum("bn,bn->b", A12[k, l], ck) - d12 * ck[:, l])
            sc = (rc[k, l] + np.einsum("bn,bn->b", A21[k, l], ak) - d21 * ak[:, l]
                  + np.einsum("bn,bn->b", A22[k, l], ck) - d22 * ck[:, l])
            det = (1 - d11) * (1 - d22) - d12 * d21
            ak[:, l] = ((1 - d22) * sa + d12 * sc) / det
            ck[:, l] = ((1 - d11) * sc + d21 * sa) / det
        change = np.maximum(np.abs(ak - a0).max(axis=1), np.abs(ck - c0).max(axis=1)) / scale[k]
        a[k], c[k] = ak, ck
        iters[k] = sweep
        resid[k] = change
        active[k] = change > tol
        if not active.any():
            break
    fallback = active.copy()
    for k in np.flatnonzero(fallback):
        M = np.block([[A11[k], A12[k]], [A21[k], A22[k]]])
        u = np.linalg.solve(np.eye(2 * N) - M, np.concatenate([ra[k], rc[k]]))
        a[k], c[k] = u[:N], u[N:]
        resid[k] = 0.0
    if fallback.any():
        log.info("coherence iteration: %d of %d points solved directly", fallback.sum(), B)
    return SolverState(a, c, iters, resid, fallback)


def solve_populations(basis: Basis, model: NoiseModel, z, prop: Propagator | None = None,
                      batch: int = 128, return_state: bool = False):
    """Laplace-domain ``(rho_gg, P_ion, rho_ll)`` on a finite basis.

    ``rho_ll`` has shape ``(nz, N)`` and covers every excited state; ``P_ion``
    sums the continuum bins.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(z.imag <= 0):
        raise ValueError("solve_populations requires Im z > 0")
    b = model.bandwidth
    if prop is None:
        prop = Propagator(basis, b)
    det = basis.energies - basis.mean_energy
    memory = model.kind is not NoiseKind.PDM
    rho_gg = np.empty(z.size, dtype=complex)
    rho_ll = np.empty((z.size, basis.size), dtype=complex)
    iters = np.zeros(z.size, dtype=int)
    resid = np.zeros(z.size)
    for i0 in range(0, z.size, batch):
        zz = z[i0:i0 + batch]
        blk = transfer_blocks(prop, zz, with_memory=memory)
        if memory:
            w = 1.0 - memory_factor(model, det, zz)
            wp = np.conj(1.0 - memory_factor(model, det, -np.conj(zz)))
            st = iterate(blk, w, wp, b)
            wa, wc = w * st.a, wp * st.c
            K = blk.m_gggg + b * (np.sum(blk.m_ggng * wa, axis=1) + np.sum(blk.m_gggn * wc, axis=1))
            pops = blk.m_llgg + b * (np.einsum("bln,bn->bl", blk.m_llng, wa)
                                     + np.einsum("bln,bn->bl", blk.m_llgn, wc))
            iters[i0:i0 + batch] = st.iterations
            resid[i0:i0 + batch] = st.residual
        else:
            K = blk.m_gggg
            pops = blk.m_llgg
        norm = 1.0 / (1.0 - 2.0 * b * K)
        rho_gg[i0:i0 + batch] = K * norm
        rho_ll[i0:i0 + batch] = pops * norm[:, None]
    p_ion = rho_ll[:, ~basis.is_bound].sum(axis=1)
    if return_state:
        return rho_gg, p_ion, rho_ll, {"iterations": iters, "residual": resid}
    return rho_gg, p_ion, rho_ll


def liouville_solve(basis: Basis, model: NoiseModel, z: complex) -> np.ndarray:
    """Reference: solve the full Laplace-domain master equation for the density matrix.

    Builds ``(s + i[H, .] + D(z)) rho = |g><g|`` with ``s = -i z`` in Liouville
    space (row-major vectorisation) and solves it with a sparse LU.
    """
    N1 = basis.size + 1
    H = sparse.csr_matrix(basis.hamiltonian())
    Id = sparse.identity(N1, format="csr")
    s = -1j * z
    L = s * sparse.identity(N1 * N1) + 1j * (sparse.kron(H, Id) - sparse.kron(Id, H.T))
    det = basis.energies - basis.mean_energy
    b = model.bandwidth
    al = memory_factor(model, det, z)[0]
    alp = np.conj(memory_factor(model, det, -np.conj(z))[0])
    k = np.arange(1, N1)
    d = np.zeros(N1 * N1, dtype=complex)
    d[k * N1] = b * al          # (k, g)
    d[k] = b * alp              # (g, k)
    L = (L + sparse.diags(d)).tocsc()
    rhs = np.zeros(N1 * N1, dtype=complex)
    rhs[0] = 1.0
    return spsolve(L, rhs).reshape(N1, N1)


# ---------------------------------------------------------------------------
# time domain


def frequency_span(basis: Basis) -> float:
    e = np.concatenate([basis.energies, [basis.mean_energy]])
    return float(e.max() - e.min())


def master_series(basis: Basis, model: NoiseModel, t_grid, gamma: float,
                  x_max: float | None = None, eta: float | None = None,
                  store_levels: bool = False) -> PopulationSeries:
    """Populations in time by trapezoid Bromwich inversion of :func:`solve_populations`.

    ``gamma`` sets the decay rate of the subtracted short-time asymptote.
    ``eta`` defaults to ``3/t_max``; ``x_max`` to ``1.5`` times the spread of
    basis energies plus ``40 (b + gamma)``.
    """
    t = np.asarray(t_grid, dtype=float)
    t_max = float(t[-1])
    if eta is None:
        eta = 3.0 / t_max
    if x_max is None:
        x_max = 1.5 * frequency_span(basis) + 40.0 * (model.bandwidth + gamma)
    prop = Propagator(basis, model.bandwidth)
    cache = {}

    def solve(zv):
        key = id(zv)
        if key not in cache:
            cache.clear()
            cache[key] = solve_populations(basis, model, zv, prop=prop, return_state=True)
        return cache[key]

    probe = laplace.make_grid(lambda zv: np.zeros_like(zv), t_max, x_max, eta=eta)
    zline = probe.z_real + 1j * eta
    rho_gg, p_ion, rho_ll, diag = solve(zline)
    asym = (1.0, 0.0, gamma)
    g_rho = laplace.LaplaceGrid(eta, probe.z_real,
                                rho_gg - laplace.asymptote_transform(zline, *asym), t_max, asym)
    rho_t, imag = laplace.invert_laplace(g_rho, t, return_imag=True)
    p_t = laplace.invert_laplace(laplace.LaplaceGrid(eta, probe.z_real, p_ion, t_max), t)
    bound = basis.is_bound
    exc = rho_ll[:, bound].sum(axis=1)
    exc_t = laplace.invert_laplace(laplace.LaplaceGrid(eta, probe.z_real, exc, t_max), t)
    levels_t = None
    if store_levels:
        levels_t = np.array([laplace.invert_laplace(
            laplace.LaplaceGrid(eta, probe.z_real, rho_ll[:, j], t_max), t)
            for j in np.flatnonzero(bound)])
    series = PopulationSeries(t, rho_t, p_t, exc_t, levels_t,
                              basis.n[bound] if store_levels else None)
    series.diagnostics = {
        "n_z": int(zline.size), "eta": eta, "x_max": x_max,
        "max_iterations": int(diag["iterations"].max(initial=0)),
        "max_residual": float(diag["residual"].max(initial=0.0)),
        "max_imag_residue": float(np.abs(imag).max()),
        "conservation_error": series.conservation_error,
    }
    return series
