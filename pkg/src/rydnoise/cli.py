"""Command-line front end: run a scenario and write series, regimes and diagnostics."""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import asymptotics, dca, fitting, laser_noise, lindblad, master, mc
from .scenarios import PRESETS, ConfigError, ScenarioConfig, preset, resolve

# solvers that work on the reduced basis and need a short horizon
HEAVY = ("master", "lindblad", "mc")
HEAVY_T_MAX = 100.0

COMMAND_SOLVER = {"rates": "dca", "master": "master", "lindblad": "lindblad",
                  "mc": "mc", "asymptotics": "asymptotics"}


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def write_series(path: Path, cfg: ScenarioConfig, columns: dict[str, np.ndarray]) -> None:
    """CSV with a ``# config:`` header line, then ``t,rho_gg,p_ion[,stderr...]``."""
    names = list(columns)
    data = np.column_stack([columns[k] for k in names])
    with open(path, "w") as fh:
        fh.write(f"# config: {cfg.to_json()}\n")
        fh.write(",".join(names) + "\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _check_heavy(cfg: ScenarioConfig, resolved) -> None:
    errors = []
    rn = cfg.run
    if rn.t_max_over_gamma > HEAVY_T_MAX:
        errors.append(f"run.t_max_over_gamma must be <= {HEAVY_T_MAX:g} for solver {rn.solver} "
                      "(override with --t-max)")
    if rn.solver == "mc" and rn.grid != "linear":
        errors.append("solver mc needs run.grid = linear")
    if rn.solver == "lindblad" and resolved.model.kind is not laser_noise.NoiseKind.PDM \
            and resolved.model.bandwidth / resolved.model.cutoff > 1e-3:
        errors.append("solver lindblad models phase diffusion; noise.b_over_beta must be <= 1e-3")
    if errors:
        raise ConfigError(errors)


def _mc_step(cfg: ScenarioConfig, basis, model, gamma: float, t: np.ndarray) -> float:
    """Largest step that divides the output spacing and resolves the dynamics."""
    limit = mc.max_step(basis, model)
    if cfg.run.dt_over_gamma is not None:
        limit = min(limit, cfg.run.dt_over_gamma / gamma)
    if math.isfinite(model.cutoff):
        limit = min(limit, 0.1 / model.cutoff)
    spacing = t[1] - t[0]
    return spacing / math.ceil(spacing / limit * (1 + 1e-12))


def run_scenario(cfg: ScenarioConfig, out_dir: Path, jobs: int = 1) -> dict:
    """Run one scenario and write its three output files; returns the diagnostics."""
    res = resolve(cfg)
    g = res.gamma
    solver = cfg.run.solver
    if solver in HEAVY:
        _check_heavy(cfg, res)
    out_dir.mkdir(parents=True, exist_ok=True)
    t = res.t_grid
    t0 = time.perf_counter()
    diag: dict = {"solver": solver, "gamma_au": g}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rates = dca.build_rates(res.system, res.model)
        cols = {"t": t * g}
        if solver == "dca":
            s = dca.evolve(rates, t)
            diag["validity"] = dca.validity_report(rates).as_dict()
        elif solver == "asymptotics":
            rho, p = asymptotics.asymptotic_series(rates, t)
            s = dca.PopulationSeries(t, rho, p, np.full_like(t, np.nan), diagnostics={})
        else:
            basis = lindblad.reduced_basis(res.system, res.model, cfg.run.n_bound, cfg.run.n_bins)
            diag["basis_size"] = basis.size
            if solver == "master":
                s = master.master_series(basis, res.model, t, g)
            elif solver == "lindblad":
                s = lindblad.pdm_lindblad(basis, res.model.bandwidth, t)
            else:
                dt = _mc_step(cfg, basis, res.model, g, t)
                er = mc.ensemble_average(basis, res.model, t, cfg.run.M, cfg.run.seed, dt, jobs=jobs)
                s = er.series
                cols.update(rho_gg=s.rho_gg, p_ion=s.p_ion,
                            stderr_rho_gg=er.stderr_rho_gg, stderr_p_ion=er.stderr_p_ion)
        cols.setdefault("rho_gg", s.rho_gg)
        cols.setdefault("p_ion", s.p_ion)
        report = asymptotics.regime_report(rates)
    diag.update(s.diagnostics or {})
    diag["runtime_s"] = time.perf_counter() - t0
    diag["warnings"] = [f"{w.category.__name__}: {w.message}" for w in caught]
    regimes = report.as_dict(time_unit=1.0 / g)
    for k in ("gamma", "s_bar", "rho_prefactor", "survival_prefactor"):
        regimes.pop(k)
    regimes["plateau_rho_gg"] = regimes["lambda_sp"]
    regimes["plateau_p_ion"] = regimes["gamma_eff_over_gamma"]
    regimes["time_unit"] = "1/gamma"
    write_series(out_dir / cfg.output.series, cfg, cols)
    write_json(out_dir / cfg.output.regimes, regimes)
    write_json(out_dir / cfg.output.diagnostics, diag)
    return diag


def run_spectrum(cfg: ScenarioConfig, out_dir: Path) -> dict:
    """Spectrum on ``|Omega| <= 50 b`` in units of ``gamma``, normalised to unit power."""
    res = resolve(cfg)
    g, m = res.gamma, res.model
    om = np.linspace(-50.0, 50.0, 2001) * m.bandwidth
    s = laser_noise.spectrum(m, om) / m.mean_intensity
    out_dir.mkdir(parents=True, exist_ok=True)
    laser_noise.write_spectrum_csv(out_dir / "spectrum.csv", om / g, s * g)
    diag = {"normalization": laser_noise.spectrum_integral(m) / m.mean_intensity,
            "effective_bandwidth_over_gamma": laser_noise.effective_bandwidth(m) / g}
    write_json(out_dir / cfg.output.diagnostics, diag)
    return diag


def _configs(args) -> list[ScenarioConfig]:
    if args.config and args.preset:
        raise ConfigError(["give either --config or --preset, not both"])
    if args.config:
        cfgs = [ScenarioConfig.load(args.config)]
    elif args.preset:
        names = list(PRESETS) if args.preset == ["all"] else args.preset
        cfgs = [preset(n) for n in names]
    else:
        raise ConfigError(["one of --config or --preset is required"])
    data = []
    for c in cfgs:
        d = c.to_dict()
        if args.command in COMMAND_SOLVER:
            d["run"]["solver"] = COMMAND_SOLVER[args.command]
        if args.seed is not None:
            d["run"]["seed"] = args.seed
        for key, attr in (("t_max_over_gamma", "t_max"), ("n_t", "n_t"), ("grid", "grid"),
                          ("M", "paths")):
            if getattr(args, attr, None) is not None:
                d["run"][key] = getattr(args, attr)
        if getattr(args, "grid", None) == "linear" and args.t_max is not None:
            d["run"]["t_min_over_gamma"] = min(d["run"]["t_min_over_gamma"], 0.5 * args.t_max)
        data.append(ScenarioConfig.from_dict(d))
    return data


def _run_one(command: str, cfg: ScenarioConfig, out_dir: Path, jobs: int) -> dict:
    if command == "spectrum":
        return run_spectrum(cfg, out_dir)
    return run_scenario(cfg, out_dir, jobs)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rydnoise", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("spectrum", "rates", "master", "lindblad", "mc", "asymptotics"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON scenario file")
        sp.add_argument("--preset", action="append", help="preset name, repeatable, or 'all'")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--t-max", type=float, help="override run.t_max_over_gamma")
        sp.add_argument("--n-t", type=int, help="override run.n_t")
        sp.add_argument("--grid", choices=("log", "linear"), help="override run.grid")
        sp.add_argument("--paths", type=int, help="override run.M")
    fp = sub.add_parser("fit")
    fp.add_argument("series", help="series CSV")
    fp.add_argument("--column", default="rho_gg", help="rho_gg, p_ion or survival (1 - p_ion)")
    fp.add_argument("--window", nargs=2, type=float, metavar=("T_LO", "T_HI"))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fit":
            fit = fitting.fit_series_file(args.series, args.column, args.window)
            print(json.dumps({"exponent": fit.exponent, "stderr": fit.stderr,
                              "prefactor": fit.prefactor, "r2": fit.r2, "n_points": fit.n_points}))
            return 0
        cfgs = _configs(args)
        out = Path(args.out)
        dirs = [out if len(cfgs) == 1 else out / c.name for c in cfgs]
        if len(cfgs) > 1 and args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as ex:
                futs = [ex.submit(_run_one, args.command, c, d, 1) for c, d in zip(cfgs, dirs)]
                results = [f.result() for f in futs]
        else:
            results = [_run_one(args.command, c, d, args.jobs) for c, d in zip(cfgs, dirs)]
        print(json.dumps({"status": "ok", "outputs": [str(d) for d in dirs],
                          "runtime_s": [r.get("runtime_s") for r in results]}))
        return 0
    except ConfigError as exc:
        print(json.dumps({"status": "error", "kind": "config", "errors": exc.errors}), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - every failure is reported as JSON
        print(json.dumps({"status": "error", "kind": type(exc).__name__, "errors": [str(exc)]}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
