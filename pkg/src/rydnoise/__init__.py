"""Rydberg electron dynamics under fluctuating laser fields.

Rate equations in the decorrelation approximation, their closed-form regimes,
a Laplace-domain memory master equation, a Lindblad solver for phase
diffusion, and a Monte-Carlo stochastic Schroedinger oracle.
"""

from .asymptotics import (asymptotic_series, below_threshold, crossover_times, ionization_time,
                          longtime_laws, regime_report, scaling_f, scaling_fprime,
                          threshold_intermediate)
from .dca import (PopulationSeries, RateSystem, build_rates, evolve, laplace_populations,
                  laplace_series, validity_report)
from .fitting import autocorrelation_period, fit_powerlaw
from .laplace import LaplaceGrid, invert_laplace, talbot_invert
from .laser_noise import (NoiseKind, NoiseModel, PhasePath, correlation, effective_bandwidth,
                          lambda_sp, sample_phase_path, spectrum)
from .lindblad import pdm_lindblad, reduced_basis
from .master import Basis, continued_fraction, make_basis, master_series, solve_populations
from .mc import ensemble_average, evolve_realization, two_level_basis
from .qdt import QdtSystem, level_energy, self_energy
from .scenarios import PRESETS, ConfigError, ScenarioConfig, preset, resolve

__version__ = "0.1.0"
