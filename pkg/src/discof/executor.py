"""Asynchronous per-robot execution of the coordination stack.

Robots plan individually and move one plan step at a time; each step takes
a robot-specific duration, so the fleet drifts out of lockstep.  Before
every step a robot synchronizes with the other members of its outer
closure (the robots reachable over relayed sensing), predicts conflicts
within the shared horizon, and resolves them optimistically (a joint local
plan found by `converge`) or pessimistically (coupling under a leader via
`push_and_pull`).  The engine commits the positions of a launched closure
atomically when its slowest member finishes, which keeps the interleaved
timeline equivalent to the per-step synchronization the resolution rules
assume.

Two modes share the engine: "discof" keeps groups coupled until every
member reaches its goal, "discof_plus" additionally dissolves a group as
soon as the members' summed goal distances drop strictly below the summed
potentials recorded at coupling time.
"""
from __future__ import annotations

import heapq
import random
import time
from collections import deque
from dataclasses import dataclass, field

from .convergence import ContributionLedger, converge, update_contribution
from .coordination import Closure, SensingConfig, compute_ocs, sense_conflict
from .pushpull import (
    CouplingGroup,
    InfeasibleGroupError,
    check_decouple,
    form_group,
    push_and_pull,
)
from .world import Cell, Scenario, WorldGraph, shortest_path

MODES = ("discof", "discof_plus")


class SafetyViolationError(RuntimeError):
    """Two robots committed to the same cell or exchanged cells."""


@dataclass(frozen=True)
class SimEvent:
    """One entry of the coordination event log."""

    time: int
    kind: str
    robot: int | None
    detail: str


@dataclass
class Trace:
    """Complete record of one run: per-robot rows plus the event log."""

    scenario: Scenario
    positions: dict[int, list[Cell]] = field(default_factory=dict)
    times: dict[int, list[int]] = field(default_factory=dict)
    oc_ids: dict[int, list[int]] = field(default_factory=dict)
    group_ids: dict[int, list[int]] = field(default_factory=dict)
    events: list[SimEvent] = field(default_factory=list)
    completed: bool = False
    comp_time: float = 0.0
    launches: int = 0

    # -------- step metrics --------

    def steps_to_goal(self, robot: int) -> int | None:
        """Steps after which the robot stayed at its goal for good."""
        goal = self.scenario.goals[robot]
        rows = self.positions[robot]
        if rows[-1] != goal:
            return None
        s = len(rows) - 1
        while s > 0 and rows[s - 1] == goal:
            s -= 1
        return s

    def max_steps(self) -> int | None:
        steps = [self.steps_to_goal(r) for r in self.scenario.robots]
        return None if any(s is None for s in steps) else max(steps)

    def sum_steps(self) -> int | None:
        steps = [self.steps_to_goal(r) for r in self.scenario.robots]
        return None if any(s is None for s in steps) else sum(steps)

    # -------- serialization --------

    def to_csv(self) -> str:
        lines = ["robot_id,step,x,y,sim_time,oc_id,group_id"]
        for r in self.scenario.robots:
            for s, (x, y) in enumerate(self.positions[r]):
                t = self.times[r][s]
                oc = self.oc_ids[r][s]
                grp = self.group_ids[r][s]
                lines.append(f"{r},{s},{x},{y},{t},{oc},{grp}")
        return "\n".join(lines) + "\n"

    def event_log_text(self) -> str:
        out = []
        for e in self.events:
            who = "-" if e.robot is None else str(e.robot)
            out.append(f"t={e.time} {e.kind} robot={who} {e.detail}")
        return "\n".join(out) + "\n"


# -------- step durations --------


def _duration_fn(model: str, robots: list[int], seed: int):
    """Per-robot step duration sampler for a model description string."""
    kind, _, rest = model.partition(":")
    if kind == "uniform":
        try:
            lo_s, hi_s = rest.split(":")
            lo, hi = int(lo_s), int(hi_s)
        except ValueError as exc:
            raise ValueError(f"bad duration model {model!r}") from exc
        if not 1 <= lo <= hi:
            raise ValueError(f"bad duration bounds in {model!r}")
        rngs = {r: random.Random(seed * 1_000_003 + 7919 * r + 17) for r in robots}
        return lambda r: rngs[r].randint(lo, hi)
    if kind == "constant":
        k = int(rest)
        if k < 1:
            raise ValueError(f"bad duration in {model!r}")
        return lambda r: k
    if kind == "fixed":
        vals = [int(x) for x in rest.split(",") if x]
        if not vals or any(v < 1 for v in vals):
            raise ValueError(f"bad duration list in {model!r}")
        index = {r: i for i, r in enumerate(robots)}
        return lambda r: vals[index[r] % len(vals)]
    raise ValueError(f"unknown duration model {model!r}")


# -------- the engine --------


@dataclass
class _Launch:
    ident: int
    barrier: int
    moves: list[tuple[int, Cell, Cell]]  # robot, source, target
    oc_key: int


class _Engine:
    def __init__(
        self,
        scenario: Scenario,
        cfg: SensingConfig,
        mode: str,
        duration_model: str,
        seed: int,
        step_budget: int,
        sync_only_on_conflict: bool,
    ):
        self.g: WorldGraph = scenario.graph
        self.cfg = cfg
        self.mode = mode
        self.sync_only = sync_only_on_conflict
        self.robots = list(scenario.robots)
        self.goals = dict(scenario.goals)
        self.pos = dict(scenario.starts)
        self.budget = step_budget
        self.duration = _duration_fn(duration_model, self.robots, seed)

        self.plans: dict[int, deque[Cell]] = {}
        for r in self.robots:
            path = shortest_path(self.g, self.pos[r], self.goals[r])
            self.plans[r] = deque(path.vertices[1:]) if path else deque()
        self.ledger = ContributionLedger()
        self.groups: dict[int, CouplingGroup] = {}
        self.in_group: dict[int, int] = {}
        self.q_done: dict[int, int] = {}

        self.busy_until = {r: 0 for r in self.robots}
        self.in_flight: dict[int, Cell] = {}
        self.heap: list[tuple[int, int]] = []
        self.pending: dict[int, _Launch] = {}
        self.launch_seq = 0
        self.committed = 0
        self.now = 0
        self.trace = Trace(scenario=scenario)
        for oc in compute_ocs(self.pos, self.g, cfg):
            for r in sorted(oc.oc):
                self.trace.positions[r] = [self.pos[r]]
                self.trace.times[r] = [0]
                self.trace.oc_ids[r] = [min(oc.oc)]
                self.trace.group_ids[r] = [-1]

    # ----- events -----

    def _log(self, t: int, kind: str, robot: int | None, detail: str) -> None:
        self.trace.events.append(SimEvent(time=t, kind=kind, robot=robot, detail=detail))

    # ----- group lifecycle -----

    def _live_gammas(self, members) -> dict[int, int]:
        return {m: self.ledger.value(m) for m in members}

    def _raw_clear_window(self, r: int) -> None:
        self.ledger.local_goal.pop(r, None)
        self.ledger.q_len.pop(r, None)
        self.q_done.pop(r, None)

    def _couple(self, members: set[int], t: int) -> CouplingGroup | None:
        """Form (or re-form) a group over `members` and start an episode."""
        for m in list(members):
            key = self.in_group.get(m)
            if key is not None and key in self.groups:
                members |= self.groups[key].members  # absorb groups whole
        group = form_group(members, self.pos, self._live_gammas(members), self.g, self.goals, t)
        for key in {self.in_group[m] for m in members if m in self.in_group}:
            self.groups.pop(key, None)
        for m in members:
            self.in_group[m] = group.key()
            self._raw_clear_window(m)  # gamma stays live; the window is void
        self.groups[group.key()] = group
        pots = {m: group.snapshot[m].potential for m in sorted(members)}
        self._log(t, "couple", None, f"members={sorted(members)} potentials={pots}")
        return self._new_episode(group, t)

    def _new_episode(self, group: CouplingGroup, t: int) -> CouplingGroup | None:
        """Plan the group's walk home; dissolve instead when nobody needs it."""
        if not group.queue:
            self._dissolve(group, t, "all members at goals")
            return None
        leader = group.queue[0]
        group.leader = leader
        group.delta = 0
        # Cells of sensed outsiders; the group plans around them and lets
        # conflict detection escalate when they cannot be avoided.
        avoid = frozenset(
            self.pos[r]
            for c in compute_ocs(self.pos, self.g, self.cfg)
            if c.oc & group.members
            for r in c.oc
            if r not in group.members
        )
        try:
            plans = push_and_pull(
                self.g,
                group,
                leader,
                self.pos,
                self.goals,
                self.ledger,
                sensing_range=self.cfg.sensing_range,
                avoid=avoid,
            )
        except InfeasibleGroupError:
            # Avoidance failed; couple with every robot the group senses
            # and plan them jointly instead of steering around them.
            phi = set(group.members)
            for c in compute_ocs(self.pos, self.g, self.cfg):
                if c.oc & phi:
                    phi |= c.oc
            if phi == group.members:
                raise
            self._log(t, "absorb", None,
                      f"group {sorted(group.members)} blocked; coupling {sorted(phi)}")
            return self._couple(phi, t)
        for m, seq in plans.items():
            self.plans[m] = deque(seq)
        length = len(next(iter(plans.values()))) if plans else 0
        self._log(t, "pp", leader, f"group={sorted(group.members)} length={length}")
        return group

    def _release(self, m: int) -> None:
        """Replace a released member's plan; group rows must not outlive it.

        A leftover joint-plan tail is only safe while every other robot it
        was choreographed against stays put forever, which nothing
        guarantees once the group is gone.
        """
        if self.pos[m] == self.goals[m]:
            self.plans[m].clear()
        else:
            path = shortest_path(self.g, self.pos[m], self.goals[m])
            self.plans[m] = deque(path.vertices[1:])

    def _dissolve(self, group: CouplingGroup, t: int, reason: str) -> None:
        for m in sorted(group.members):
            self.ledger.gamma[m] = 0
            self._raw_clear_window(m)
            self.in_group.pop(m, None)
            self._release(m)
        self.groups.pop(group.key(), None)
        self._log(t, "dissolve", None, f"members={sorted(group.members)} ({reason})")

    def _decouple(self, group: CouplingGroup, t: int, lhs: int, rhs: int) -> None:
        members = sorted(group.members)
        self._log(t, "decouple", None, f"members={members} potentials={lhs} distances={rhs}")
        self._dissolve(group, t, "contribution target met")

    def _drop_finished(self, group: CouplingGroup, t: int) -> None:
        """Remove members parked on their goals with movement-free plans."""
        dropped = False
        for m in sorted(group.members):
            if self.pos[m] != self.goals[m]:
                continue
            if any(c != self.pos[m] for c in self.plans[m]):
                continue
            group.members.discard(m)
            if m in group.queue:
                group.queue.remove(m)
            self.in_group.pop(m, None)
            self.plans[m].clear()
            self.ledger.gamma[m] = 0
            self._raw_clear_window(m)
            self._log(t, "drop", m, f"left group {sorted(group.members | {m})} at goal")
            dropped = True
        if len(group.members) <= 1:
            self._dissolve(group, t, "single member left")
        elif dropped:
            self._split_if_disconnected(group, t)

    def _split_if_disconnected(self, group: CouplingGroup, t: int) -> None:
        """Re-form a group whose relay graph lost a member as components.

        A dropped robot may have been the relay link between two halves of
        the group; each half becomes its own group with the same carried
        potentials, and the stale joint plans are discarded so the next
        launch starts fresh episodes.
        """
        member_pos = {m: self.pos[m] for m in group.members}
        comps = [set(c.oc) for c in compute_ocs(member_pos, self.g, self.cfg)]
        if len(comps) <= 1:
            return
        key = group.key()
        self.groups.pop(key, None)
        self._log(
            t, "split", None, f"group {sorted(group.members)} -> {sorted(map(sorted, comps))}"
        )
        for comp in sorted(comps, key=min):
            if len(comp) == 1:
                # A lone remainder resumes its own shortest path; conflicts
                # the fresh path recreates are re-detected and re-resolved.
                m = next(iter(comp))
                self.in_group.pop(m, None)
                self.ledger.gamma[m] = 0
                self._raw_clear_window(m)
                self._release(m)
                continue
            for m in comp:
                self.plans[m].clear()
            sub = form_group(comp, self.pos, self._live_gammas(comp), self.g, self.goals, t)
            self.groups[sub.key()] = sub
            for m in comp:
                self.in_group[m] = sub.key()

    # ----- conflict resolution -----

    def _install_window(self, r: int, seq: tuple[Cell, ...], t: int) -> None:
        local_goal = seq[-1]
        self.ledger.begin_window(r, local_goal, len(seq))
        update_contribution(self.ledger, r, 0, self.pos[r], self.goals, self.g)
        self.q_done[r] = 0
        tail: deque[Cell] = deque(seq)
        if local_goal != self.goals[r]:
            path = shortest_path(self.g, local_goal, self.goals[r])
            tail.extend(path.vertices[1:])
        self.plans[r] = tail

    def _resolve(self, members: list[int], t: int) -> None:
        """Bring an all-idle closure to a conflict-free set of plans."""
        for _ in range(2 * len(members) + 6):
            for r in members:
                if r not in self.in_group and not self.plans[r] and self.pos[r] != self.goals[r]:
                    path = shortest_path(self.g, self.pos[r], self.goals[r])
                    self.plans[r] = deque(path.vertices[1:])
                    self._log(t, "replan", r, f"resumed toward {self.goals[r]}")
            for key in sorted({self.in_group[r] for r in members if r in self.in_group}):
                group = self.groups.get(key)
                if group is None:
                    continue  # absorbed into a larger group this round
                if all(not self.plans[m] for m in group.members):
                    refreshed = form_group(
                        set(group.members),
                        self.pos,
                        self._live_gammas(group.members),
                        self.g,
                        self.goals,
                        t,
                    )
                    self.groups[key] = refreshed
                    self._new_episode(refreshed, t)
            closure = Closure(oc=frozenset(members))
            plan_view = {r: tuple(self.plans[r]) for r in members}
            k_now = min(len(self.trace.positions[r]) - 1 for r in members)
            psi, closure = sense_conflict(plan_view, closure, self.pos, k_now, self.cfg)
            if not psi:
                return
            closure.detector = min(psi)
            first = closure.ics[0]
            self._log(
                t,
                "ic",
                closure.detector,
                f"robots={sorted(first.robots)} step={first.step} cell={first.cell}",
            )
            self.ledger.snapshot_pre(members)
            if any(r in self.in_group for r in members):
                coupled = set(members)
                for r in members:
                    if r in self.in_group:
                        coupled |= self.groups[self.in_group[r]].members
                self._couple(coupled, t)
                continue
            local = converge(self.g, first.robots, closure, plan_view, self.pos, self.goals, self.ledger, self.cfg)
            if local is not None:
                target = sum(
                    self.g.distance_field(self.goals[r])[self.pos[r]] + self.ledger.pre_value(r)
                    for r in sorted(local.participants)
                )
                reached = sum(
                    self.g.distance_field(self.goals[r])[local.sequences[r][-1]]
                    for r in sorted(local.participants)
                )
                for r in sorted(local.participants):
                    self._install_window(r, local.sequences[r], t)
                self._log(
                    t,
                    "q",
                    closure.detector,
                    f"robots={sorted(local.participants)} length={local.length} "
                    f"potential={target} after={reached}",
                )
                continue
            self._couple(set(members), t)
        else:
            # Optimistic rounds did not settle; coupling the whole closure
            # always leaves it with one internally conflict-free joint plan.
            self._couple(set(members), t)

    # ----- async-mode solo clearance -----

    def _async_clear(self, r: int, members: list[int]) -> bool:
        """Conservative conflict check against possibly in-flight peers."""
        beta: int = self.cfg.beta  # type: ignore[assignment]
        mine = [self.pos[r], *list(self.plans[r])[: beta + 1]]
        for b in members:
            if b == r:
                continue
            theirs = [self.pos[b]]
            if b in self.in_flight:
                theirs.append(self.in_flight[b])
            theirs.extend(list(self.plans[b])[: beta + 1])

            def their(j: int) -> Cell:
                return theirs[j] if j < len(theirs) else theirs[-1]

            for align in (-1, 0, 1):
                for j in range(1, len(mine)):
                    ja = max(0, j + align)
                    if mine[j] == their(ja):
                        return False
                    if mine[j] == their(max(0, ja - 1)) and mine[j - 1] == their(ja):
                        return False
        return True

    # ----- launches -----

    def _launch(self, movers: list[int], t: int, oc_key: int) -> None:
        moves = []
        barrier = t
        for r in movers:
            target = self.plans[r].popleft()
            d = self.duration(r)
            barrier = max(barrier, t + d)
            moves.append((r, self.pos[r], target))
            self.in_flight[r] = target
        if not moves:
            return
        self.launch_seq += 1
        launch = _Launch(ident=self.launch_seq, barrier=barrier, moves=moves, oc_key=oc_key)
        for r, _, _ in moves:
            self.busy_until[r] = barrier
        self.pending[launch.ident] = launch
        heapq.heappush(self.heap, (barrier, launch.ident))
        self.trace.launches += 1

    def _commit(self, launch: _Launch, t: int) -> None:
        for r, _, dst in launch.moves:
            self.pos[r] = dst
            self.in_flight.pop(r, None)
        self.committed += len(launch.moves)
        groups_stepped = set()
        for r, src, dst in sorted(launch.moves):
            grp_key = self.in_group.get(r, -1)
            self.trace.positions[r].append(dst)
            self.trace.times[r].append(t)
            self.trace.oc_ids[r].append(launch.oc_key)
            self.trace.group_ids[r].append(grp_key)
            if self.ledger.has_window(r):
                self.q_done[r] += 1
                update_contribution(self.ledger, r, self.q_done[r], dst, self.goals, self.g)
                if self.q_done[r] >= self.ledger.q_len[r]:
                    self._log(t, "qdone", r, f"at {dst} gamma={self.ledger.value(r)}")
                    self.ledger.clear_window(r)
                    self.q_done.pop(r, None)
            elif grp_key >= 0:
                group = self.groups[grp_key]
                snap = group.snapshot[r]
                dist = self.g.distance_field(self.goals[r])[dst]
                self.ledger.gamma[r] = snap.potential - dist
            if grp_key >= 0:
                groups_stepped.add(grp_key)
            if dst == self.goals[r] and src != dst and not self.plans[r]:
                self._log(t, "goal", r, f"reached {dst}")
        for key in sorted(groups_stepped):
            group = self.groups.get(key)
            if group is None:
                continue
            group.delta += 1
            self._drop_finished(group, t)
            if key not in self.groups:
                continue
            if self.mode == "discof_plus" and check_decouple(group, self.pos, self.goals, self.g):
                lhs = sum(group.snapshot[m].potential for m in group.members)
                rhs = sum(
                    self.g.distance_field(self.goals[m])[self.pos[m]] for m in group.members
                )
                self._decouple(group, t, lhs, rhs)

    def _verify_occupancy(self, t: int, stepped: list[tuple[int, Cell, Cell]]) -> None:
        seen: dict[Cell, int] = {}
        for r in self.robots:
            c = self.pos[r]
            if c in seen:
                raise SafetyViolationError(f"robots {seen[c]} and {r} share {c} at t={t}")
            seen[c] = r
        for i in range(len(stepped)):
            r, rs, rd = stepped[i]
            for j in range(i + 1, len(stepped)):
                s, ss, sd = stepped[j]
                if rd == ss and sd == rs:
                    raise SafetyViolationError(
                        f"robots {r} and {s} exchanged {rs}<->{ss} at t={t}"
                    )

    # ----- main loop -----

    def _has_work(self, r: int) -> bool:
        return bool(self.plans[r]) or self.pos[r] != self.goals[r] or r in self.in_group

    def run(self) -> Trace:
        wall0 = time.perf_counter()
        try:
            self._run_loop()
        except InfeasibleGroupError as exc:
            self.trace.completed = False
            self._log(self.now, "infeasible", None, str(exc))
        return self._finish(wall0)

    def _run_loop(self) -> None:
        t = 0
        while True:
            self.now = t
            # commit every launch whose barrier has arrived
            stepped: list[tuple[int, Cell, Cell]] = []
            while self.heap and self.heap[0][0] <= t:
                _, ident = heapq.heappop(self.heap)
                launch = self.pending.pop(ident)
                self._commit(launch, t)
                stepped.extend(launch.moves)
            if stepped:
                self._verify_occupancy(t, stepped)
            if self.committed > self.budget:
                self._log(t, "budget", None, f"exceeded {self.budget} committed steps")
                self.trace.completed = False
                break
            # dispatch the idle closures; closures bridged by one coupling
            # group dispatch as a single unit, because joint plan rows only
            # stay safe while the whole group pops them in lockstep
            unit_of: dict[int, int] = {}
            units: dict[int, set[int]] = {}
            for oc in compute_ocs(self.pos, self.g, self.cfg):
                root = min(oc.oc)
                units[root] = set(oc.oc)
                for r in oc.oc:
                    unit_of[r] = root
            for key in sorted(self.groups):
                roots = sorted({unit_of[m] for m in self.groups[key].members})
                for other in roots[1:]:
                    units[roots[0]] |= units.pop(other)
                    for r in units[roots[0]]:
                        unit_of[r] = roots[0]
            for root in sorted(units):
                members = sorted(units[root])
                if not any(self._has_work(r) for r in members):
                    continue
                idle = [r for r in members if self.busy_until[r] <= t]
                if len(idle) < len(members):
                    if self.sync_only:
                        for r in idle:
                            if (
                                r not in self.in_group
                                and self.plans[r]
                                and self._async_clear(r, members)
                            ):
                                self._launch([r], t, min(members))
                    continue
                self._resolve(members, t)
                movers = [r for r in members if self.plans[r]]
                if not movers:
                    continue
                if self.sync_only and not any(r in self.in_group for r in movers):
                    for r in movers:
                        self._launch([r], t, min(members))
                else:
                    self._launch(movers, t, min(members))
            if all(self.pos[r] == self.goals[r] and not self.plans[r] for r in self.robots):
                if not self.heap:
                    self.trace.completed = True
                    self._log(t, "done", None, f"all {len(self.robots)} robots at goals")
                    break
            if not self.heap:
                # Idle robots exist but nothing launched and nothing is in
                # flight; the run cannot make further progress.
                self.trace.completed = False
                self._log(t, "stalled", None, "no launch possible")
                break
            t = self.heap[0][0]

    def _finish(self, wall0: float) -> Trace:
        self.trace.comp_time = time.perf_counter() - wall0
        return self.trace


def run(
    scenario: Scenario,
    cfg: SensingConfig | None = None,
    mode: str = "discof_plus",
    step_duration_model: str = "uniform:1:5",
    seed: int = 0,
    step_budget: int | None = None,
    sync_only_on_conflict: bool = False,
) -> Trace:
    """Simulate one scenario to completion (or budget exhaustion)."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    scenario.validate()
    cfg = cfg or SensingConfig()
    n = max(1, scenario.n)
    budget = (
        step_budget
        if step_budget is not None
        else 50 * n * (scenario.graph.width + scenario.graph.height)
    )
    engine = _Engine(
        scenario, cfg, mode, step_duration_model, seed, budget, sync_only_on_conflict
    )
    return engine.run()
