"""Dimensionless scenario configuration and the shipped presets.

Scenario inputs are ratios in units of the ground-state decay rate ``gamma``.
``resolve`` turns them into a noise model and a quantum-defect system in
atomic units; solver outputs are reported back with times in ``1/gamma``.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .laser_noise import NoiseModel
from .qdt import QdtSystem, kepler_period

SOLVERS = ("dca", "master", "lindblad", "mc", "asymptotics")


class ConfigError(ValueError):
    """Invalid scenario; ``errors`` lists every violated rule."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass
class NoiseBlock:
    b_over_gamma: float | None = None
    b_over_beta: float = 0.0          # 0 means phase diffusion (infinite beta)
    kind: str = "auto"                # auto | pdm | ou
    amplitude: float = 1.0            # |eps0|^2 in atomic units


@dataclass
class SystemBlock:
    alpha: float = 0.1
    n_res: float | None = None
    mean_energy_over_gamma: float | None = None
    T_gamma: float | None = None      # Kepler period at the mean energy times gamma
    d_eps: float | None = None
    stark_shift_over_gamma: float = 0.0
    n_min: int = 2
    n_max: int = 20000


@dataclass
class RunBlock:
    solver: str = "dca"
    t_max_over_gamma: float | None = None
    t_min_over_gamma: float = 1e-3
    n_t: int = 400
    grid: str = "log"                 # log | linear
    seed: int = 0
    M: int = 1000                     # Monte-Carlo realisations
    dt_over_gamma: float | None = None
    n_bound: int = 15                 # reduced basis for master, lindblad, mc
    n_bins: int = 40


@dataclass
class OutputBlock:
    dir: str = "out"
    series: str = "series.csv"
    regimes: str = "regimes.json"
    diagnostics: str = "diagnostics.json"


_BLOCKS = {"noise": NoiseBlock, "system": SystemBlock, "run": RunBlock, "output": OutputBlock}


@dataclass
class ScenarioConfig:
    noise: NoiseBlock = field(default_factory=NoiseBlock)
    system: SystemBlock = field(default_factory=SystemBlock)
    run: RunBlock = field(default_factory=RunBlock)
    output: OutputBlock = field(default_factory=OutputBlock)
    name: str = "custom"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        """Build and validate; unknown keys and missing values are all reported together."""
        if not isinstance(data, dict):
            raise ConfigError(["config must be a mapping"])
        errors = []
        kw = {}
        for key in data:
            if key not in _BLOCKS and key != "name":
                errors.append(f"unknown block {key!r}")
        for key, block in _BLOCKS.items():
            raw = data.get(key, {}) or {}
            if not isinstance(raw, dict):
                errors.append(f"{key} must be a mapping")
                continue
            names = {f.name for f in fields(block)}
            for k in raw:
                if k not in names:
                    errors.append(f"unknown field {key}.{k}")
            kw[key] = block(**{k: v for k, v in raw.items() if k in names})
        cfg = cls(**kw, name=str(data.get("name", "custom")))
        errors += validate(cfg)
        if errors:
            raise ConfigError(errors)
        return cfg

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError([f"cannot parse {path}: {exc}"]) from None
        return cls.from_dict(data)


def _positive(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) and x > 0


def validate(cfg: ScenarioConfig) -> list[str]:
    """Every violated rule of ``cfg``, empty if valid."""
    e = []
    nz, sy, rn = cfg.noise, cfg.system, cfg.run
    if nz.b_over_gamma is None:
        e.append("noise.b_over_gamma is required")
    elif not _positive(nz.b_over_gamma):
        e.append("noise.b_over_gamma must be > 0")
    if not isinstance(nz.b_over_beta, (int, float)) or not nz.b_over_beta >= 0:
        e.append("noise.b_over_beta must be >= 0")
    if nz.kind not in ("auto", "pdm", "ou"):
        e.append("noise.kind must be auto, pdm or ou")
    elif nz.kind == "pdm" and nz.b_over_beta not in (0, 0.0):
        e.append("noise.kind=pdm requires b_over_beta = 0")
    elif nz.kind == "ou" and nz.b_over_beta == 0:
        e.append("noise.kind=ou requires b_over_beta > 0")
    if not _positive(nz.amplitude):
        e.append("noise.amplitude must be > 0")

    if (sy.n_res is None) == (sy.mean_energy_over_gamma is None):
        e.append("exactly one of system.n_res, system.mean_energy_over_gamma is required")
    if (sy.T_gamma is None) == (sy.d_eps is None):
        e.append("exactly one of system.T_gamma, system.d_eps is required")
    if sy.n_res is not None and not _positive(sy.n_res):
        e.append("system.n_res must be > 0")
    if sy.T_gamma is not None and not _positive(sy.T_gamma):
        e.append("system.T_gamma must be > 0")
    if sy.d_eps is not None and not _positive(sy.d_eps):
        e.append("system.d_eps must be > 0")
    if (sy.T_gamma is not None and sy.mean_energy_over_gamma is not None
            and not sy.mean_energy_over_gamma < 0):
        e.append("system.T_gamma needs a bound mean energy (mean_energy_over_gamma < 0)")
    if not isinstance(sy.alpha, (int, float)) or not 0 <= sy.alpha < 1:
        e.append("system.alpha must lie in [0, 1)")
    if not (isinstance(sy.n_min, int) and isinstance(sy.n_max, int) and 1 <= sy.n_min < sy.n_max):
        e.append("system.n_min and system.n_max must be integers with 1 <= n_min < n_max")

    if rn.solver not in SOLVERS:
        e.append(f"run.solver must be one of {', '.join(SOLVERS)}")
    if rn.t_max_over_gamma is None:
        e.append("run.t_max_over_gamma is required")
    elif not _positive(rn.t_max_over_gamma):
        e.append("run.t_max_over_gamma must be > 0")
    if rn.grid not in ("log", "linear"):
        e.append("run.grid must be log or linear")
    if not _positive(rn.t_min_over_gamma):
        e.append("run.t_min_over_gamma must be > 0")
    elif _positive(rn.t_max_over_gamma) and rn.t_min_over_gamma >= rn.t_max_over_gamma:
        e.append("run.t_min_over_gamma must be below run.t_max_over_gamma")
    if not isinstance(rn.n_t, int) or rn.n_t < 2:
        e.append("run.n_t must be an integer >= 2")
    if not isinstance(rn.seed, int) or rn.seed < 0:
        e.append("run.seed must be a nonnegative integer")
    if not isinstance(rn.M, int) or rn.M < 100:
        e.append("run.M must be an integer >= 100")
    if rn.dt_over_gamma is not None and not _positive(rn.dt_over_gamma):
        e.append("run.dt_over_gamma must be > 0")
    if not isinstance(rn.n_bound, int) or rn.n_bound < 1:
        e.append("run.n_bound must be a positive integer")
    if not isinstance(rn.n_bins, int) or rn.n_bins < 0:
        e.append("run.n_bins must be a nonnegative integer")
    return e


@dataclass(frozen=True)
class Resolved:
    """Physical parameters in atomic units."""
    gamma: float
    system: QdtSystem
    model: NoiseModel
    t_grid: np.ndarray


def resolve(cfg: ScenarioConfig) -> Resolved:
    """Convert the dimensionless scenario to atomic units.

    The time scale comes either from ``T_gamma`` (Kepler period at the mean
    energy) or from ``d_eps`` together with the field intensity.
    """
    errors = validate(cfg)
    if errors:
        raise ConfigError(errors)
    nz, sy, rn = cfg.noise, cfg.system, cfg.run
    amp = float(nz.amplitude)
    if sy.d_eps is not None:
        gamma = 2.0 * math.pi * sy.d_eps ** 2 * amp
        mean = (-0.5 / sy.n_res ** 2 if sy.n_res is not None
                else sy.mean_energy_over_gamma * gamma)
    elif sy.n_res is not None:
        mean = -0.5 / sy.n_res ** 2
        gamma = sy.T_gamma / kepler_period(mean)
    else:
        # T(mean) gamma = T_gamma with mean = m gamma fixes gamma in closed form
        m = sy.mean_energy_over_gamma
        gamma = (2.0 * math.pi / (sy.T_gamma * (-2.0 * m) ** 1.5)) ** 2
        mean = m * gamma
    d_eps = math.sqrt(gamma / (2.0 * math.pi * amp))
    b = nz.b_over_gamma * gamma
    model = (NoiseModel.pdm(b, amp) if nz.b_over_beta == 0
             else NoiseModel.ou(b, b / nz.b_over_beta, amp))
    system = QdtSystem(float(sy.alpha), d_eps, mean, sy.stark_shift_over_gamma * gamma,
                       sy.n_min, sy.n_max)
    if rn.grid == "log":
        t = np.geomspace(rn.t_min_over_gamma, rn.t_max_over_gamma, rn.n_t)
    else:
        t = np.linspace(0.0, rn.t_max_over_gamma, rn.n_t)
    return Resolved(gamma, system, model, t / gamma)


def _preset(name, b_over_gamma, b_over_beta, system, run):
    return ScenarioConfig(NoiseBlock(b_over_gamma, b_over_beta), SystemBlock(**system),
                          RunBlock(**run), OutputBlock(), name)


_FIG3A = {"alpha": 0.1, "n_res": 200.0, "T_gamma": 2.0}
_FIG3B = {"alpha": 0.1, "mean_energy_over_gamma": -63.27, "T_gamma": 10.0}
_RUN_A = {"t_max_over_gamma": 1e8, "t_min_over_gamma": 1e-3, "n_t": 661}
_RUN_B = {"t_max_over_gamma": 1e6, "t_min_over_gamma": 1e-2, "n_t": 561}

PRESETS = {
    "fig3a_pdm": _preset("fig3a_pdm", 5.0, 0.0, _FIG3A, _RUN_A),
    "fig3a_beta33": _preset("fig3a_beta33", 5.0, 0.03, _FIG3A, _RUN_A),
    "fig3a_beta5": _preset("fig3a_beta5", 5.0, 0.2, _FIG3A, _RUN_A),
    "fig3b_pdm": _preset("fig3b_pdm", 120.0, 0.0, _FIG3B, _RUN_B),
    "fig3b_beta3": _preset("fig3b_beta3", 120.0, 3.0, _FIG3B, _RUN_B),
    "fig3b_beta10": _preset("fig3b_beta10", 120.0, 10.0, _FIG3B, _RUN_B),
}


def preset(name: str) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError([f"unknown preset {name!r}; choose from {', '.join(PRESETS)}"])
    return copy.deepcopy(PRESETS[name])
