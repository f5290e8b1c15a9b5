import math
import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from rydnoise.laser_noise import NoiseModel
from rydnoise.lindblad import BasisTruncationWarning, full_basis, pdm_lindblad, reduced_basis
from rydnoise.master import Basis
from rydnoise.scenarios import preset, resolve


def two_level(det=0.7, v=0.4):
    return Basis(0.0, np.array([det]), np.array([v]), np.array([1]))


def test_no_coupling_keeps_ground_state():
    bs = Basis(0.0, np.array([-0.3, 0.5]), np.zeros(2), np.array([5, -1]), 1.0)
    s = pdm_lindblad(bs, 0.4, np.linspace(0, 10, 11))
    np.testing.assert_allclose(s.rho_gg, 1.0, atol=1e-12)


def test_two_level_against_liouvillian_exponential():
    det, v, b = 0.7, 0.4, 0.3
    t = np.linspace(0, 15, 31)
    s = pdm_lindblad(two_level(det, v), b, t, rtol=1e-11, atol=1e-13)
    H = np.array([[0, -v], [-v, det]], complex)
    Id = np.eye(2)
    # row-major vec: vec(A rho B) = kron(A, B.T) vec(rho)
    L = -1j * (np.kron(H, Id) - np.kron(Id, H.T))
    P = np.diag([1.0, 0.0])
    L += 2 * b * (np.kron(P, P) - 0.5 * np.kron(P, Id) - 0.5 * np.kron(Id, P))
    r0 = np.array([1, 0, 0, 0], complex)
    ref = np.array([(expm(L * tt) @ r0)[0].real for tt in t])
    np.testing.assert_allclose(s.rho_gg, ref, atol=1e-9)


def test_long_time_two_level_equalises():
    # dephasing drives the two-level populations to 1/2
    s = pdm_lindblad(two_level(0.2, 0.3), 0.5, np.array([0.0, 400.0]))
    assert s.rho_gg[-1] == pytest.approx(0.5, abs=1e-6)


@pytest.fixture(scope="module")
def fig3a_run():
    r = resolve(preset("fig3a_pdm"))
    bs = reduced_basis(r.system, r.model)
    return r, bs, pdm_lindblad(bs, r.model.bandwidth, np.linspace(0, 10, 101) / r.gamma)


def test_reduced_basis_shape(fig3a_run):
    r, bs, _ = fig3a_run
    assert bs.is_bound.sum() == 15 and (~bs.is_bound).sum() == 40
    assert abs(np.median(bs.n[bs.is_bound]) - r.system.n_res) <= 1
    fb = full_basis(r.system, r.model)
    assert fb.size > bs.size


def test_density_matrix_diagnostics(fig3a_run):
    _, _, s = fig3a_run
    d = s.diagnostics
    assert d["hermiticity_error"] < 1e-10
    assert d["min_eigenvalue"] > -1e-9
    assert d["conservation_error"] < 1e-8
    assert np.all(np.diff(s.p_ion) >= -1e-10)


def test_edge_population_warning():
    # strong coupling into a narrow continuum leaves population in the top bin
    bs = Basis(0.0, np.array([0.5, 1.0]), np.array([0.5, 0.5]), np.array([-1, -1]), 0.5)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        s = pdm_lindblad(bs, 0.1, np.linspace(0, 5, 11))
    assert s.diagnostics["edge_population"] > 1e-4
    assert any(issubclass(x.category, BasisTruncationWarning) for x in w)
