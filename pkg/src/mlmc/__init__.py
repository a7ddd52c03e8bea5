"""Multilevel Ulam-Galerkin Markov chains: discretization, level transfer,
spectral diagnostics, Szegedy walk simulation and warm-start cost models."""
from .errors import (BadDensityError, CapacityError, ConfigError, InvalidParameter,
                     InvalidResolution, KernelLeakageError, LevelError, MLMCError,
                     OutOfDomainError, QuadratureError, StationaryError, SymmetrizationError)
from .partition import Partition, bin_of, build_partition, children_of, parent_index
from .kernels import KernelSpec, gauss_ar1, grid_defined, kernel_from_config, uniform_window
from .ulam import (DiscreteDensity, PiecewiseConstantDensity, QuadratureSpec, StochasticMatrix,
                   discretize_kernel, interpolate_density, interpolation_error, lump_density)
from .transfer import (coarsen_matrix, lift_matrix, prolong_amplitude, prolong_copy,
                       prolong_mass, restrict_sum)
from .spectral import (dobrushin_tau, overlap, power_iteration, seneta_bound_check,
                       spectral_gap, spectral_report, stationary_density, tau_level_comparison)
from .szegedy import build_walk, discriminant, walk_evolve, walk_spectrum_check
from .multilevel import (LevelSchedule, PipelineReport, build_schedule, level_cost, run_pipeline,
                         total_cost_check, walk_steps_estimate)

__version__ = "0.1.0"
