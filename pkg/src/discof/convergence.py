"""Optimistic conflict resolution: bounded joint replanning and contributions.

When a conflict is predicted, the involved robots search for a short joint
local plan Q (strictly shorter than the prediction horizon) whose end
positions strictly reduce the summed goal distances, counting each robot's
carried contribution value.  The contribution value gamma tracks how much
of an earlier sacrifice a robot has already won back: while a robot works
through a local plan, gamma = C(local_goal, goal) - C(position, goal), and
it returns to zero when the local plan completes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .coordination import Closure, SensingConfig
from .world import Cell, WorldGraph


class LedgerStateError(RuntimeError):
    """A contribution update was requested for a robot without a local plan."""


@dataclass
class ContributionLedger:
    """Per-robot contribution bookkeeping shared by the coordination stack."""

    gamma: dict[int, int] = field(default_factory=dict)
    gamma_pre: dict[int, int] = field(default_factory=dict)
    local_goal: dict[int, Cell] = field(default_factory=dict)
    q_len: dict[int, int] = field(default_factory=dict)

    def value(self, robot: int) -> int:
        return self.gamma.get(robot, 0)

    def pre_value(self, robot: int) -> int:
        return self.gamma_pre.get(robot, 0)

    def snapshot_pre(self, robots: Sequence[int]) -> None:
        """Freeze the live gamma of each robot as its pre-conflict value."""
        for r in robots:
            self.gamma_pre[r] = self.gamma.get(r, 0)

    def begin_window(self, robot: int, local_goal: Cell, length: int) -> None:
        self.local_goal[robot] = local_goal
        self.q_len[robot] = length

    def has_window(self, robot: int) -> bool:
        return robot in self.local_goal

    def clear_window(self, robot: int) -> None:
        self.local_goal.pop(robot, None)
        self.q_len.pop(robot, None)
        self.gamma[robot] = 0


@dataclass(frozen=True)
class JointLocalPlan:
    """Equal-length action sequences for the participants of one conflict."""

    sequences: dict[int, tuple[Cell, ...]]
    start_step: int
    participants: frozenset[int]

    @property
    def length(self) -> int:
        return len(next(iter(self.sequences.values())))


def update_contribution(
    ledger: ContributionLedger,
    robot: int,
    delta: int,
    position_now: Cell,
    goals: dict[int, Cell],
    g: WorldGraph,
) -> ContributionLedger:
    """Recompute gamma for a robot `delta` steps into its local plan."""
    if not ledger.has_window(robot):
        raise LedgerStateError(f"robot {robot} has no active local plan")
    length = ledger.q_len[robot]
    if not 0 <= delta <= length:
        raise LedgerStateError(f"delta {delta} outside local plan of length {length}")
    field_ = g.distance_field(goals[robot])
    ledger.gamma[robot] = field_[ledger.local_goal[robot]] - field_[position_now]
    return ledger


# -------- the joint local-plan search --------


def _step_legal(
    prev: Sequence[Cell],
    cur: Sequence[Cell],
    others_prev: Sequence[Cell],
    others_cur: Sequence[Cell],
) -> bool:
    """No shared cell and no exchange, among movers and against bystanders."""
    n = len(cur)
    for i in range(n):
        ci = cur[i]
        for j in range(i + 1, n):
            if ci == cur[j]:
                return False
            if ci == prev[j] and cur[j] == prev[i]:
                return False
        for o in range(len(others_cur)):
            if ci == others_cur[o]:
                return False
            if ci == others_prev[o] and others_cur[o] == prev[i]:
                return False
    return True


def converge(
    g: WorldGraph,
    ic: frozenset[int],
    oc: Closure,
    plans: dict[int, Sequence[Cell]],
    positions: dict[int, Cell],
    goals: dict[int, Cell],
    ledger: ContributionLedger,
    cfg: SensingConfig,
    *,
    max_participants: int = 5,
    node_budget: int = 12_000,
) -> JointLocalPlan | None:
    """Search for a joint local plan resolving the predicted conflict.

    Iterative deepening over joint moves of the participants, depth
    1..beta-1, so the first plan found has minimal length.  A leaf is
    accepted when the summed goal distances at the end positions fall
    strictly below the summed pre-conflict potential (current distance
    plus carried gamma).  When no plan exists for the conflicting set,
    nearby OC members are drafted in one at a time; when the whole OC
    fails (or the search budget runs out) the caller must fall back to
    pessimistic coupling.
    """
    beta: int = cfg.beta  # type: ignore[assignment]
    if beta < 2:
        return None  # a local plan must be shorter than the horizon
    phi = sorted(oc.oc)
    participants = sorted(ic)
    conflict_cell = oc.ics[0].cell if oc.ics else positions[participants[0]]
    ref_field = g.distance_field(conflict_cell) if g.is_free(conflict_cell) else None

    def draft_order(r: int) -> tuple[int, int]:
        d = ref_field.get(positions[r], 1 << 30) if ref_field else 0
        return (d, r)

    outsiders = [r for r in phi if r not in participants]
    outsiders.sort(key=draft_order)
    budget = [node_budget]

    while True:
        if len(participants) <= max_participants:
            found = _search(g, participants, phi, plans, positions, goals, ledger, beta, budget)
            if found is not None:
                seqs, length = found
                plan = JointLocalPlan(
                    sequences={r: tuple(seqs[r]) for r in participants},
                    start_step=0,
                    participants=frozenset(participants),
                )
                assert _certifies(g, plan, plans, positions, goals, ledger, phi)
                return plan
        if not outsiders or len(participants) >= max_participants:
            return None
        participants.append(outsiders.pop(0))
        participants.sort()


def _search(
    g: WorldGraph,
    participants: list[int],
    phi: list[int],
    plans: dict[int, Sequence[Cell]],
    positions: dict[int, Cell],
    goals: dict[int, Cell],
    ledger: ContributionLedger,
    beta: int,
    budget: list[int],
) -> tuple[dict[int, list[Cell]], int] | None:
    others = [r for r in phi if r not in participants]
    fields = {r: g.distance_field(goals[r]) for r in participants}
    start = [positions[r] for r in participants]
    target = sum(fields[r][positions[r]] + ledger.pre_value(r) for r in participants)

    def other_cell(r: int, j: int) -> Cell:
        seq = plans.get(r, ())
        if j <= 0:
            return positions[r]
        return seq[j - 1] if j - 1 < len(seq) else (seq[-1] if seq else positions[r])

    option_cache: dict[tuple[int, Cell], list[Cell]] = {}

    def options(r: int, cur: Cell) -> list[Cell]:
        key = (r, cur)
        cells = option_cache.get(key)
        if cells is None:
            f = fields[r]
            cells = sorted([cur, *g.neighbors(cur)], key=lambda c: (f[c], c))
            option_cache[key] = cells
        return cells

    for depth in range(1, beta):
        seen: set[tuple[int, tuple[Cell, ...]]] = set()
        history = [tuple(start)]

        def dfs(level: int) -> list[list[Cell]] | None:
            if budget[0] <= 0:
                return None
            if level == depth:
                end = history[-1]
                if sum(fields[r][end[i]] for i, r in enumerate(participants)) < target:
                    return [list(row) for row in history[1:]]
                return None
            prev = history[-1]
            others_prev = [other_cell(r, level) for r in others]
            others_cur = [other_cell(r, level + 1) for r in others]

            def assign(idx: int, chosen: list[Cell]) -> list[list[Cell]] | None:
                budget[0] -= 1
                if budget[0] <= 0:
                    return None
                if idx == len(participants):
                    cur = tuple(chosen)
                    key = (level + 1, cur)
                    if key in seen:
                        return None
                    seen.add(key)
                    history.append(cur)
                    result = dfs(level + 1)
                    history.pop()
                    return result
                for cell in options(participants[idx], prev[idx]):
                    # prune partial assignments against peers and bystanders
                    ok = True
                    for j in range(idx):
                        if cell == chosen[j]:
                            ok = False
                            break
                        if cell == prev[j] and chosen[j] == prev[idx]:
                            ok = False
                            break
                    if ok:
                        for o in range(len(others)):
                            if cell == others_cur[o]:
                                ok = False
                                break
                            if cell == others_prev[o] and others_cur[o] == prev[idx]:
                                ok = False
                                break
                    if ok:
                        chosen.append(cell)
                        result = assign(idx + 1, chosen)
                        chosen.pop()
                        if result is not None:
                            return result
                return None

            return assign(0, [])

        rows = dfs(0)
        if rows is not None:
            seqs = {r: [row[i] for row in rows] for i, r in enumerate(participants)}
            return seqs, depth
        if budget[0] <= 0:
            return None
    return None


def _certifies(
    g: WorldGraph,
    plan: JointLocalPlan,
    plans: dict[int, Sequence[Cell]],
    positions: dict[int, Cell],
    goals: dict[int, Cell],
    ledger: ContributionLedger,
    phi: list[int],
) -> bool:
    """Re-verify the end-position progress and stepwise conflict-freedom."""
    parts = sorted(plan.participants)
    lhs = rhs = 0
    for r in parts:
        f = g.distance_field(goals[r])
        lhs += f[positions[r]] + ledger.pre_value(r)
        rhs += f[plan.sequences[r][-1]]
    if rhs >= lhs:
        return False
    others = [r for r in phi if r not in plan.participants]

    def other_cell(r: int, j: int) -> Cell:
        seq = plans.get(r, ())
        if j <= 0:
            return positions[r]
        return seq[j - 1] if j - 1 < len(seq) else (seq[-1] if seq else positions[r])

    prev = [positions[r] for r in parts]
    for j in range(plan.length):
        cur = [plan.sequences[r][j] for r in parts]
        for i, r in enumerate(parts):
            if cur[i] != prev[i] and cur[i] not in g.neighbors(prev[i]):
                return False
        if not _step_legal(
            prev,
            cur,
            [other_cell(r, j) for r in others],
            [other_cell(r, j + 1) for r in others],
        ):
            return False
        prev = cur
    return True
