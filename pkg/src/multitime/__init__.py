"""Two-charge multi-time action: discretization, canonical form, solvers and a quantum lattice."""

from .action import (
    ActionBreakdown,
    ResidualReport,
    el_residual,
    fokker_action,
    momentum_fields,
    numeric_el_residual,
    numeric_functional_gradient,
    regularized_delta,
)
from .canonical import (
    StationarityReport,
    VelocitySolution,
    canonical_action,
    first_order_hamiltonian,
    generalized_hamiltonian,
    numeric_velocities,
    perturbative_velocities,
    recover_momenta,
    stationarity_residuals,
)
from .config import RunConfig, parse_config
from .errors import *  # noqa: F401,F403
from .quantum import (
    ActionOperator,
    LatticeSpec,
    SpectrumResult,
    build_action_operator,
    build_lattice,
    lowest_eigenvalues,
    stationarity_scan,
)
from .solver import Endpoints, Solution, SolveConfig, coulomb_reference, solve_el, solve_free
from .trajectory import (
    PhaseField,
    SystemParams,
    TimeGrid,
    Trajectory,
    make_grid,
    read_trajectory_csv,
    validate,
    velocity,
    write_trajectory_csv,
)

__version__ = "0.1.0"
