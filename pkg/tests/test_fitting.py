import math

import numpy as np
import pytest

from rydnoise.fitting import (autocorrelation_period, fit_powerlaw, fit_series_file, read_series)


def test_exact_power_law():
    t = np.geomspace(1, 1e4, 50)
    fit = fit_powerlaw(t, t ** (-5 / 3))
    assert fit.exponent == pytest.approx(-5 / 3, abs=1e-6)
    assert fit.r2 == pytest.approx(1.0)


def test_prefactor_and_window():
    t = np.geomspace(1, 1e6, 121)
    y = np.where(t < 1e3, 3 * t ** -0.25, 1.0)
    fit = fit_powerlaw(t, y, window=(1, 500))
    assert fit.exponent == pytest.approx(-0.25, abs=1e-9)
    assert fit.prefactor == pytest.approx(3.0, rel=1e-9)
    assert fit.n_points == np.count_nonzero(t <= 500)


def test_noisy_fit_reports_stderr():
    rng = np.random.default_rng(0)
    t = np.geomspace(1, 1e3, 200)
    y = 2 * t ** -0.5 * np.exp(0.05 * rng.standard_normal(t.size))
    fit = fit_powerlaw(t, y)
    assert abs(fit.exponent + 0.5) < 4 * fit.stderr
    assert 0 < fit.stderr < 0.01


def test_fit_errors():
    t = np.geomspace(1, 10, 20)
    with pytest.raises(ValueError):
        fit_powerlaw(t[:5], t[:5])
    with pytest.raises(ValueError):
        fit_powerlaw(t, -t)
    with pytest.raises(ValueError):
        fit_powerlaw(t, t[:-1])


def test_series_file(tmp_path):
    t = np.geomspace(1, 100, 30)
    path = tmp_path / "s.csv"
    with open(path, "w") as fh:
        fh.write("# config: {}\nt,rho_gg,p_ion\n")
        for a, b in zip(t, t ** -1.5):
            fh.write(f"{float(a)!r},{float(b)!r},{float(1 - 0.5 * a ** -0.5)!r}\n")
    tt, y = read_series(path, "rho_gg")
    np.testing.assert_allclose(tt, t)
    assert fit_series_file(path, "rho_gg").exponent == pytest.approx(-1.5)
    assert fit_series_file(path, "survival").exponent == pytest.approx(-0.5)
    with pytest.raises(KeyError):
        read_series(path, "nope")


@pytest.mark.parametrize("period", [1.7, 2.0, 5.3])
def test_autocorrelation_period(period):
    t = np.linspace(0, 40, 801)
    y = 0.3 * np.exp(-t / 30) * np.cos(2 * math.pi * t / period) + 1 - 0.01 * t
    assert autocorrelation_period(t, y) == pytest.approx(period, rel=0.02)


def test_autocorrelation_needs_uniform_grid():
    with pytest.raises(ValueError):
        autocorrelation_period(np.geomspace(1, 10, 50), np.ones(50))
