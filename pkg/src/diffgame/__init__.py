"""Zero-sum differential games on a finite horizon.

Grid dynamic programming for the lower and upper values, the player-2
extremal aiming strategy, and a harness that checks the distance and payoff
bounds of extremal play numerically.
"""

from .dynamics import (
    ControlSet,
    GameDynamics,
    Partition,
    PayoffSpec,
    PiecewiseControl,
    RunningPayoff,
    Trajectory,
    bolza_to_mayer,
    derived_constants,
    eval_dynamics,
    integrate,
    mesh,
)
from .errors import (
    ConfigError,
    DiffGameError,
    EmptyLevelSetError,
    InvalidActionError,
    NumericError,
    OutOfBoxError,
    PreconditionError,
)
from .extremal import (
    ExtremalStrategy,
    PairedRun,
    corollary1_bound,
    corollary3_bound,
    extremal_step,
    lemma1_bound,
    paired_trajectories,
    play_vs_control,
    prop_cc_constant,
)
from .games import BUILTINS, Benchmark, get_benchmark
from .harness import ExperimentReport
from .local_game import LocalGameResult, isaacs_gap_report, optimal_action_v, solve_local_game
from .value_dp import (
    LevelSet,
    SpatialGrid,
    ValueGrid,
    check_candidate_properties,
    compute_lower_value,
    compute_upper_value,
    distance_to_set,
    lipschitz_estimate,
    project_to_levelset,
)

__version__ = "0.1.0"
