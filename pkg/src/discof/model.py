"""Transition-system view of the workspace: composition, restrictions, oracle.

A robot is a finite transition system over free cells (self-loop = wait).
The synchronous composition moves every robot one transition per step.
Restrictions rule out joint transitions; the two built-ins forbid two
robots sharing a cell and two robots exchanging cells in one step.
"""
from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterable, Iterator, Sequence

from .world import Cell, Scenario, WorldGraph

JointState = tuple[Cell, ...]

DEFAULT_STATE_BUDGET = 10_000_000
STATE_BUDGET_ENV = "DISCOF_STATE_BUDGET"


class OracleCapacityError(RuntimeError):
    """The joint search visited more states than its budget allows."""


class MalformedTraceError(ValueError):
    """Trace rows are structurally invalid (not a step-by-step walk)."""


# -------- single and composed systems --------


@dataclass
class Fts:
    """Finite transition system of one robot: states, moves, one goal set."""

    states: frozenset[Cell]
    initial: Cell
    successors: dict[Cell, tuple[Cell, ...]]
    goals: frozenset[Cell]

    def __post_init__(self) -> None:
        if self.initial not in self.states:
            raise ValueError(f"initial state {self.initial} not in state set")
        if not self.goals <= self.states:
            raise ValueError("goal states must be states")
        for q, succ in self.successors.items():
            if q not in succ:
                raise ValueError(f"state {q} lacks its self-loop")

    def label(self, q: Cell) -> frozenset[Cell]:
        # One proposition per cell: being at it.
        return frozenset((q,))

    @classmethod
    def from_graph(cls, g: WorldGraph, start: Cell, goal: Cell) -> "Fts":
        succ = {v: (v,) + g.neighbors(v) for v in g.vertices}
        return cls(states=g.vertices, initial=start, successors=succ, goals=frozenset((goal,)))


@dataclass
class JointFts:
    """Synchronous composition; states are enumerated lazily on demand."""

    components: tuple[Fts, ...]

    @property
    def initial(self) -> JointState:
        return tuple(c.initial for c in self.components)

    def state_count(self) -> int:
        n = 1
        for c in self.components:
            n *= len(c.states)
        return n

    def states(self) -> Iterator[JointState]:
        return product(*(sorted(c.states) for c in self.components))

    def successors(self, q: JointState) -> Iterator[JointState]:
        return product(*(c.successors[q[i]] for i, c in enumerate(self.components)))

    def is_goal(self, q: JointState) -> bool:
        return all(q[i] in c.goals for i, c in enumerate(self.components))

    def label(self, q: JointState) -> tuple[frozenset[Cell], ...]:
        return tuple(c.label(q[i]) for i, c in enumerate(self.components))


def compose(systems: Sequence[Fts]) -> JointFts:
    if not systems:
        raise ValueError("cannot compose zero systems")
    return JointFts(components=tuple(systems))


# -------- restrictions and conflict reports --------


@dataclass(frozen=True)
class PlanRestriction:
    """Named predicate returning the minimal violating robot-index sets.

    The callable receives the previous joint state (None at the first row)
    and the next joint state, and returns every minimal set of robot
    indices that violates the restriction in that transition.
    """

    name: str
    violations: Callable[[JointState | None, JointState], list[frozenset[int]]]


def _vertex_violations(prev: JointState | None, cur: JointState) -> list[frozenset[int]]:
    by_cell: dict[Cell, list[int]] = {}
    for i, c in enumerate(cur):
        by_cell.setdefault(c, []).append(i)
    out = []
    for group in by_cell.values():
        if len(group) > 1:
            # Any two co-located robots already violate, so pairs are minimal.
            for a in range(len(group)):
                for b in range(a + 1, len(group)):
                    out.append(frozenset((group[a], group[b])))
    return out


def _swap_violations(prev: JointState | None, cur: JointState) -> list[frozenset[int]]:
    if prev is None:
        return []
    out = []
    for i in range(len(cur)):
        if cur[i] == prev[i]:
            continue
        for j in range(i + 1, len(cur)):
            if cur[i] == prev[j] and cur[j] == prev[i]:
                out.append(frozenset((i, j)))
    return out


VERTEX_COLLISION = PlanRestriction("vertex", _vertex_violations)
SWAP_COLLISION = PlanRestriction("swap", _swap_violations)
COLLISION_RESTRICTIONS: tuple[PlanRestriction, ...] = (VERTEX_COLLISION, SWAP_COLLISION)


@dataclass(frozen=True)
class ConflictReport:
    step: int
    robots: frozenset[int]
    kind: str


def validate_trace(
    trace: Sequence[Sequence[Cell]],
    restrictions: tuple[PlanRestriction, ...] = COLLISION_RESTRICTIONS,
    g: WorldGraph | None = None,
    robot_ids: Sequence[int] | None = None,
) -> list[ConflictReport]:
    """Return every restriction violation in a synchronized joint trace.

    Rows are joint positions, one per step.  When a graph is supplied the
    rows are also checked to form a legal walk; a non-adjacent hop raises
    MalformedTraceError rather than being reported as a conflict.
    """
    if not trace:
        raise MalformedTraceError("empty trace")
    n = len(trace[0])
    ids = tuple(robot_ids) if robot_ids is not None else tuple(range(n))
    if len(ids) != n:
        raise MalformedTraceError("robot id row width mismatch")
    reports: list[ConflictReport] = []
    prev: JointState | None = None
    for k, row in enumerate(trace):
        cur = tuple(row)
        if len(cur) != n:
            raise MalformedTraceError(f"row {k} has width {len(cur)}, expected {n}")
        if g is not None:
            for i, c in enumerate(cur):
                if not g.is_free(c):
                    raise MalformedTraceError(f"row {k}: robot {ids[i]} at non-free cell {c}")
                if prev is not None and c != prev[i] and c not in g.neighbors(prev[i]):
                    raise MalformedTraceError(
                        f"row {k}: robot {ids[i]} jumps {prev[i]} -> {c}"
                    )
        for restriction in restrictions:
            for idx_set in restriction.violations(prev, cur):
                reports.append(
                    ConflictReport(
                        step=k,
                        robots=frozenset(ids[i] for i in idx_set),
                        kind=restriction.name,
                    )
                )
        prev = cur
    return reports


def minimal_conflict_relations(
    plans: dict[int, Sequence[Cell]],
    h: int,
    restrictions: tuple[PlanRestriction, ...] = COLLISION_RESTRICTIONS,
) -> set[frozenset[int]]:
    """Minimal robot sets that conflict within h steps of following `plans`.

    Each plan starts at the robot's current cell (index 0); robots past
    their plan end hold their last cell.
    """
    ids = sorted(plans)
    seqs = [plans[r] for r in ids]

    def at(seq: Sequence[Cell], j: int) -> Cell:
        return seq[j] if j < len(seq) else seq[-1]

    found: set[frozenset[int]] = set()
    prev = tuple(at(s, 0) for s in seqs)
    for j in range(1, h + 1):
        cur = tuple(at(s, j) for s in seqs)
        for restriction in restrictions:
            for idx_set in restriction.violations(prev, cur):
                found.add(frozenset(ids[i] for i in idx_set))
        prev = cur
    return found


# -------- joint-planning oracle --------


@dataclass(frozen=True)
class JointPlan:
    """A synchronized joint plan; steps[0] is the start configuration."""

    robot_ids: tuple[int, ...]
    steps: tuple[JointState, ...]

    @property
    def makespan(self) -> int:
        return len(self.steps) - 1


def default_state_budget() -> int:
    raw = os.environ.get(STATE_BUDGET_ENV)
    if raw is None:
        return DEFAULT_STATE_BUDGET
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{STATE_BUDGET_ENV} must be an integer, got {raw!r}") from None


def oracle_solve(
    scenario: Scenario,
    restrictions: tuple[PlanRestriction, ...] = COLLISION_RESTRICTIONS,
    horizon: int | None = None,
    state_budget: int | None = None,
) -> JointPlan | None:
    """Minimal-makespan joint plan by breadth-first search, or None.

    Returns None when no plan exists within the horizon.  Exceeding the
    visited-state budget raises OracleCapacityError instead, so capacity
    exhaustion is never mistaken for unsolvability.
    """
    scenario.validate()
    budget = default_state_budget() if state_budget is None else state_budget
    ids = scenario.robots
    g = scenario.graph
    start: JointState = tuple(scenario.starts[r] for r in ids)
    goal: JointState = tuple(scenario.goals[r] for r in ids)
    move_options = {v: (v,) + g.neighbors(v) for v in g.vertices}

    if start == goal:
        return JointPlan(robot_ids=ids, steps=(start,))
    parent: dict[JointState, JointState] = {start: start}
    depth = {start: 0}
    queue = deque((start,))
    while queue:
        cur = queue.popleft()
        d = depth[cur]
        if horizon is not None and d >= horizon:
            continue
        for nxt in product(*(move_options[c] for c in cur)):
            if nxt in parent:
                continue
            ok = True
            for restriction in restrictions:
                if restriction.violations(cur, nxt):
                    ok = False
                    break
            if not ok:
                continue
            parent[nxt] = cur
            if len(parent) > budget:
                raise OracleCapacityError(
                    f"oracle exceeded state budget of {budget} states"
                )
            if nxt == goal:
                out = [nxt]
                while out[-1] != start:
                    out.append(parent[out[-1]])
                out.reverse()
                return JointPlan(robot_ids=ids, steps=tuple(out))
            depth[nxt] = d + 1
            queue.append(nxt)
    return None
