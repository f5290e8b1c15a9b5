import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydnoise.laplace import (InversionError, LaplaceGrid, asymptote_time, asymptote_transform,
                              invert_laplace, make_grid, talbot_invert)
from scipy.integrate import quad


def damped_cos(a, w):
    f = lambda t: np.exp(-a * t) * np.cos(w * t)
    F = lambda z: (a - 1j * z) / ((a - 1j * z) ** 2 + w * w)
    return f, F


def test_transform_convention():
    # F(z) = int_0^inf exp(i z t) f(t) dt checked by direct quadrature
    f, F = damped_cos(0.7, 2.0)
    z = 0.3 + 0.2j
    re = quad(lambda t: (np.exp(1j * z * t) * f(t)).real, 0, np.inf, limit=400)[0]
    im = quad(lambda t: (np.exp(1j * z * t) * f(t)).imag, 0, np.inf, limit=400)[0]
    assert complex(re, im) == pytest.approx(complex(F(z)), rel=1e-8)


def test_line_inversion_damped_cosine():
    f, F = damped_cos(0.5, 3.0)
    t = np.linspace(0, 20, 201)
    grid = make_grid(F, 20.0, 4000.0)
    out = invert_laplace(grid, t)
    # the sum converges to the midpoint of the jump at t = 0
    assert out[0] == pytest.approx(0.5, abs=1e-3)
    assert np.abs(out[1:] - f(t[1:])).max() < 1e-3


def test_line_inversion_with_asymptote_subtraction():
    # with f(0) and f'(0) removed analytically the remainder falls off as z^-3
    f, F = damped_cos(0.5, 3.0)
    t = np.linspace(0, 20, 201)
    errs = [np.abs(invert_laplace(make_grid(F, 20.0, x, asymptote=(1.0, -0.5, 1.0)), t) - f(t)).max()
            for x in (60.0, 600.0)]
    assert errs[1] < 1e-6
    assert errs[0] / errs[1] > 50


@settings(max_examples=20, deadline=None)
@given(f0=st.floats(-2, 2), f1=st.floats(-2, 2), kappa=st.floats(0.1, 5))
def test_asymptote_pair(f0, f1, kappa):
    f = lambda t: asymptote_time(t, f0, f1, kappa)
    z = 0.4 + 0.3j
    re = quad(lambda t: (np.exp(1j * z * t) * f(t)).real, 0, np.inf, limit=200)[0]
    im = quad(lambda t: (np.exp(1j * z * t) * f(t)).imag, 0, np.inf, limit=200)[0]
    assert complex(asymptote_transform(z, f0, f1, kappa)) == pytest.approx(complex(re, im),
                                                                           rel=1e-7, abs=1e-9)


@pytest.mark.parametrize("a", [1e-3, 0.1, 10.0])
def test_talbot_exponential(a):
    t = np.geomspace(1e-2, 1e3, 30)
    F = lambda z: 1.0 / (a - 1j * z)
    assert np.abs(talbot_invert(F, t) - np.exp(-a * t)).max() < 1e-9


def test_talbot_power_law_tail():
    # f(t) = 1/sqrt(pi t) has F = 1/sqrt(s) with a branch cut on the negative s axis
    t = np.geomspace(1e-3, 1e6, 20)
    F = lambda z: 1.0 / np.sqrt(-1j * z)
    np.testing.assert_allclose(talbot_invert(F, t), 1 / np.sqrt(math.pi * t), rtol=1e-8)


def test_grid_guards():
    x = np.linspace(-1, 1, 11)
    with pytest.raises(InversionError):
        LaplaceGrid(0.0, x, np.zeros(11, complex), 1.0)
    with pytest.raises(InversionError):
        LaplaceGrid(1.0, x, np.zeros(11, complex), 100.0)  # Nyquist
    with pytest.raises(InversionError):
        LaplaceGrid(40.0, x, np.zeros(11, complex), 1.0)  # amplification
    grid = make_grid(lambda z: 1 / (1 - 1j * z), 5.0, 50.0)
    with pytest.raises(InversionError):
        invert_laplace(grid, [6.0])
    with pytest.raises(InversionError):
        talbot_invert(lambda z: z, [0.0])
