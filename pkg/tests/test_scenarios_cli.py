import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from rydnoise.cli import main
from rydnoise.fitting import read_series
from rydnoise.qdt import effective_gamma, kepler_period
from rydnoise.scenarios import PRESETS, ConfigError, ScenarioConfig, preset, resolve


@pytest.mark.parametrize("name", list(PRESETS))
def test_config_roundtrip_idempotent(name):
    cfg = preset(name)
    again = ScenarioConfig.from_dict(json.loads(cfg.to_json()))
    assert again.to_json() == cfg.to_json()
    assert ScenarioConfig.from_dict(again.to_dict()).to_dict() == cfg.to_dict()


def test_empty_config_lists_required_fields():
    with pytest.raises(ConfigError) as exc:
        ScenarioConfig.from_dict({})
    msg = " ".join(exc.value.errors)
    for field in ("b_over_gamma", "n_res", "T_gamma", "t_max_over_gamma"):
        assert field in msg


def test_validation_collects_every_error():
    with pytest.raises(ConfigError) as exc:
        ScenarioConfig.from_dict({"noise": {"b_over_gamma": 5, "foo": 1},
                                  "system": {"n_res": 200, "mean_energy_over_gamma": -3,
                                             "T_gamma": 2},
                                  "run": {"solver": "x"}})
    assert len(exc.value.errors) == 4


def test_preset_resolution_fig3a():
    r = resolve(preset("fig3a_pdm"))
    assert kepler_period(r.system.mean_energy) * r.gamma == pytest.approx(2.0, rel=1e-12)
    assert r.model.bandwidth / r.gamma == pytest.approx(5.0)
    r33 = resolve(preset("fig3a_beta33"))
    assert r33.model.bandwidth / r33.model.cutoff == pytest.approx(0.03)


def test_preset_resolution_fig3b():
    r = resolve(preset("fig3b_pdm"))
    assert r.system.mean_energy / r.gamma == pytest.approx(-63.27, rel=1e-12)
    assert kepler_period(r.system.mean_energy) * r.gamma == pytest.approx(10.0, rel=1e-12)
    ratio = effective_gamma(r.system, r.model) / r.gamma
    assert ratio == pytest.approx(0.5 + math.atan(-63.27 / 120) / math.pi, rel=1e-8)


@pytest.mark.parametrize("name", list(PRESETS))
def test_every_preset_runs_with_dca(tmp_path, name):
    t0 = time.perf_counter()
    assert main(["rates", "--preset", name, "--out", str(tmp_path)]) == 0
    assert time.perf_counter() - t0 < 60
    t, rho = read_series(tmp_path / "series.csv", "rho_gg")
    assert rho[0] == pytest.approx(math.exp(-t[0]), rel=1e-2)
    assert np.all(np.isfinite(rho))
    header = (tmp_path / "series.csv").read_text().splitlines()[:2]
    assert header[0].startswith("# config: ")
    assert header[1] == "t,rho_gg,p_ion"
    cfg = ScenarioConfig.from_dict(json.loads(header[0][len("# config: "):]))
    assert cfg.name == name
    for f in ("regimes.json", "diagnostics.json"):
        assert json.loads((tmp_path / f).read_text())


def test_asymptotics_regimes(tmp_path):
    assert main(["asymptotics", "--preset", "fig3b_pdm", "--out", str(tmp_path)]) == 0
    reg = json.loads((tmp_path / "regimes.json").read_text())
    assert reg["t_c"] == pytest.approx(435.8, rel=1e-3)
    assert reg["plateau_p_ion"] == pytest.approx(0.5 + math.atan(-63.27 / 120) / math.pi,
                                                 rel=1e-8)
    assert reg["time_unit"] == "1/gamma"


def test_fig3a_pdm_kepler_oscillations(tmp_path):
    from rydnoise.fitting import autocorrelation_period
    grid = ["--preset", "fig3a_pdm", "--t-max", "20", "--n-t", "401", "--grid", "linear"]
    assert main(["master", "--out", str(tmp_path / "m")] + grid) == 0
    assert main(["rates", "--out", str(tmp_path / "d")] + grid) == 0
    t, rho = read_series(tmp_path / "m" / "series.csv", "rho_gg")
    _, ref = read_series(tmp_path / "d" / "series.csv", "rho_gg")
    # the oscillation rides on the smooth rate-equation decay
    sel = t >= 1
    period = autocorrelation_period(t[sel], rho[sel] - ref[sel])
    assert period == pytest.approx(2.0, rel=0.05)


def test_mc_cli_writes_stderr_columns(tmp_path):
    args = ["mc", "--preset", "fig3a_pdm", "--out", str(tmp_path), "--t-max", "0.5",
            "--n-t", "6", "--grid", "linear", "--paths", "100", "--seed", "4"]
    assert main(args) == 0
    header = (tmp_path / "series.csv").read_text().splitlines()[1]
    assert header == "t,rho_gg,p_ion,stderr_rho_gg,stderr_p_ion"


def test_spectrum_command(tmp_path):
    assert main(["spectrum", "--preset", "fig3a_beta5", "--out", str(tmp_path)]) == 0
    diag = json.loads((tmp_path / "diagnostics.json").read_text())
    assert diag["normalization"] == pytest.approx(1.0, rel=1e-3)
    assert (tmp_path / "spectrum.csv").exists()


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{}")
    assert main(["rates", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["status"] == "error" and err["kind"] == "config"
    assert len(err["errors"]) >= 3


def test_heavy_solver_horizon_guard(capsys, tmp_path):
    assert main(["master", "--preset", "fig3a_pdm", "--out", str(tmp_path)]) == 2
    assert "t_max_over_gamma" in capsys.readouterr().err


def test_fit_command_and_console_script(tmp_path):
    path = tmp_path / "s.csv"
    t = np.geomspace(1, 100, 20)
    path.write_text("t,rho_gg,p_ion\n" + "".join(f"{float(a)!r},{float(3 * a ** -0.25)!r},0.0\n" for a in t))
    out = subprocess.run([sys.executable, "-m", "rydnoise.cli", "fit", str(path)],
                         capture_output=True, text=True, check=True)
    fit = json.loads(out.stdout)
    assert fit["exponent"] == pytest.approx(-0.25)
    assert fit["prefactor"] == pytest.approx(3.0)
