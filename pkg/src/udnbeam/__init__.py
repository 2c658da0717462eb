"""Coverage and area spectral efficiency of directional ultra-dense networks."""

__version__ = "0.1.0"

from .analytic import (AseResult, CoverageResult, FadingSpec, ase, ase_simplified,
                       coverage_probability, coverage_simplified, laplace_interference_far,
                       laplace_interference_near)
from .asymptotics import (AdaptationSchedule, MuConvention, TailConvention, adapted_ase_slope,
                          adapted_coverage_exact, adapted_coverage_limit,
                          coverage_derivative_near_field, dense_coverage_upper_bound,
                          sinr_density_limit, symmetric_beamwidth)
from .errors import (ConfigError, DivergenceError, DomainError, InfeasibleAdaptationError,
                     NonConvergenceError, PreconditionError)
from .model import (PER_KM2, BeamPattern, DualSlopeModel, GainDistribution, NetworkParams,
                    db_to_linear, default_params, expected_gain, gain_distribution, gamma_moment,
                    linear_to_db, path_loss)
from .montecarlo import SimConfig, estimate_ase, estimate_coverage, sample_snapshot, simulate
from .special import QuadratureSpec, integrate, one_minus_exp_integral, powerlaw_kernel, rho, upper_incomplete_gamma
