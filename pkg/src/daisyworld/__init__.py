"""Daisyworld: equilibria, bifurcation structure, basin geometry, and
rate-induced tipping of the two-species planetary albedo model."""

from .model import (
    DEFAULT_Q,
    STEFAN_BOLTZMANN,
    LocalClimate,
    Params,
    State,
    climate,
    growth_rate,
    in_simplex,
    planetary_albedo,
    rhs,
)
from .solver import (
    ConvergenceResult,
    IntegratorOptions,
    Trajectory,
    converge_to_attractor,
    integrate_autonomous,
    integrate_forced,
)
from .equilibria import (
    Equilibrium,
    coexistence_analytic,
    enumerate_equilibria,
    jacobian,
    single_species_equilibria,
    stable_attractors,
)
from .continuation import (
    Branch,
    ContinuationOptions,
    FoldPoint,
    QuasistaticResult,
    branch_point_at,
    continue_branch,
    detect_folds,
    quasistatic_ramp,
)
from .geometry import (
    BasinGrid,
    ManifoldCurve,
    basin_grid,
    find_L_BI,
    is_basin_unstable,
    stable_manifold,
)
from .tipping import (
    ForcingSpec,
    TippingDiagram,
    TippingOutcome,
    classify_experiment,
    critical_delta_L,
    critical_rate,
    run_experiment,
    tipping_diagram,
)
from .errors import (
    BracketError,
    ConfigurationError,
    DaisyworldError,
    NonphysicalClimateError,
    SimplexError,
    StiffnessError,
    UnresolvedError,
)

__version__ = "0.1.0"
