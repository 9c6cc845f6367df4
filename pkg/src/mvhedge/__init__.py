"""Mean-variance hedging when only a correlated observation is available."""

from .claims import (
    BUILTIN_CLAIMS,
    Claim,
    ProjectionContext,
    claim_term,
    conditional_dx,
    correction_integrand,
    make_claim,
    project_hperp,
    project_terminal,
)
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .lattice import LatticePolicy, LatticeSpec, dp_coefficients, dp_policy, dp_value
from .montecarlo import (
    HedgeReport,
    ModelParams,
    PathBatch,
    ProbeResult,
    SweepFit,
    optimal_control,
    optimality_probe,
    run_hedge,
    simulate,
    wealth_sweep,
)
from .pde import PdeGrid, ValueSurfaces, closed_form_v1, solve_surfaces, solve_v0, solve_v1, solve_v2
from .value_coeff import DeterministicTheta, NuQuery, solve_nu, v2_closed_form, v2_ode

__version__ = "0.1.0"
