"""Planning and quasi-static simulation of polygonal cable hitches formed by catenary robots."""

from .geometry import Polygon, WorkPlane, cyclic_index, regular_polygon, validate_polygon
from .hitch import (
    CableSpec,
    HitchConfiguration,
    TailLengths,
    TensionState,
    balanced_configuration,
    feasibility_report,
    robot_positions,
    tail_directions,
    tails_of,
)
from .solver import (
    ForwardProblem,
    ForwardSolution,
    configuration_residual,
    count_unknowns,
    solve_forward,
    vertex_residual,
)
from .actions import (
    ActionParams,
    WaypointPlan,
    compose,
    plan_adjust_cable,
    plan_form,
    plan_move_edge,
    plan_move_vertex,
    swap_trajectory,
)
from .simulator import SimTrace, clearance_report, simulate
from .metrics import ErrorSeries, fit_line, line_intersection, summary_stats, vertex_error_series
from .io import Scenario, export, load_scenario, run_pipeline

__version__ = "0.1.0"
