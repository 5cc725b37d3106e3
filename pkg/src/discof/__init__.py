"""Distributed cooperative pathfinding with limited sensing range.

Robots on a grid plan independently, predict conflicts only with the
robots they can reach over relayed sensing, and resolve them with a joint
local replan when one pays off quickly, or by coupling into a leader-led
group otherwise.  The package ships the simulator, a jointly optimal
solver for small instances, and a benchmark harness.
"""
from .convergence import (
    ContributionLedger,
    JointLocalPlan,
    LedgerStateError,
    converge,
    update_contribution,
)
from .coordination import (
    Closure,
    PredictedConflict,
    SensingConfig,
    compute_ocs,
    sense_conflict,
    sense_window,
)
from .executor import MODES, SafetyViolationError, SimEvent, Trace, run
from .harness import (
    ExperimentConfig,
    InstanceResult,
    approx_run_time,
    generate_instance,
    render,
    render_svg,
    run_experiment,
)
from .model import (
    COLLISION_RESTRICTIONS,
    ConflictReport,
    Fts,
    JointFts,
    JointPlan,
    MalformedTraceError,
    OracleCapacityError,
    PlanRestriction,
    compose,
    minimal_conflict_relations,
    oracle_solve,
    validate_trace,
)
from .pushpull import (
    CouplingGroup,
    InfeasibleGroupError,
    MemberSnapshot,
    assign_subproblems,
    check_decouple,
    compute_priority,
    form_group,
    merge,
    push_and_pull,
)
from .world import (
    Cell,
    Path,
    Scenario,
    ScenarioError,
    WorldError,
    WorldGraph,
    build_grid,
    chebyshev,
    load_scenario,
    save_scenario,
    shortest_path,
)

__version__ = "0.1.0"

__all__ = [
    "COLLISION_RESTRICTIONS",
    "Cell",
    "Closure",
    "ConflictReport",
    "ContributionLedger",
    "CouplingGroup",
    "ExperimentConfig",
    "Fts",
    "InfeasibleGroupError",
    "InstanceResult",
    "JointFts",
    "JointLocalPlan",
    "JointPlan",
    "LedgerStateError",
    "MODES",
    "MalformedTraceError",
    "MemberSnapshot",
    "OracleCapacityError",
    "Path",
    "PlanRestriction",
    "PredictedConflict",
    "SafetyViolationError",
    "Scenario",
    "ScenarioError",
    "SensingConfig",
    "SimEvent",
    "Trace",
    "WorldError",
    "WorldGraph",
    "approx_run_time",
    "assign_subproblems",
    "build_grid",
    "check_decouple",
    "chebyshev",
    "compose",
    "compute_ocs",
    "compute_priority",
    "converge",
    "form_group",
    "generate_instance",
    "load_scenario",
    "merge",
    "minimal_conflict_relations",
    "oracle_solve",
    "push_and_pull",
    "render",
    "render_svg",
    "run",
    "run_experiment",
    "save_scenario",
    "sense_conflict",
    "sense_window",
    "shortest_path",
    "update_contribution",
    "validate_trace",
]
