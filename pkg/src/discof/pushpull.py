"""Pessimistic conflict resolution: coupling groups led one robot at a time.

When optimistic replanning fails, the conflicting robots couple into a
group that stays within relayed communication range and moves as one unit.
A priority queue orders the members; the head becomes the leader and the
group plan walks it to its goal.  Robots in the way are pushed one cell
at a time toward the nearest empty cell off the leader's route, swapped
around a junction when they have nowhere to go, or rotated along occupied
cycles; trailing members are towed so the group never loses connectivity.

A group coupled at step k with member potentials C(position, goal) +
gamma_pre decouples as soon as the summed current goal distances fall
strictly below the summed potentials (checked once per executed group
step); the caller owns whether that check is enabled.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache

from .convergence import ContributionLedger, LedgerStateError
from .world import Cell, WorldGraph, chebyshev


class InfeasibleGroupError(RuntimeError):
    """The group plan cannot make progress toward the leader's goal."""


@dataclass(frozen=True)
class MemberSnapshot:
    """A member's state at coupling time; potential = distance + gamma_pre."""

    position: Cell
    gamma_pre: int
    potential: int


@dataclass
class CouplingGroup:
    members: set[int]
    leader: int | None
    queue: list[int]
    snapshot: dict[int, MemberSnapshot]
    formed_step: int = 0
    assignment: tuple[dict[int, tuple], dict[tuple, frozenset[Cell]]] | None = None
    delta: int = 0

    def key(self) -> int:
        return min(self.members) if self.members else -1


# -------- subproblem regions and priority --------


@lru_cache(maxsize=64)
def _region_map(g: WorldGraph) -> dict[Cell, tuple]:
    """Label every free cell with its region: open rooms vs corridors.

    Rooms are components of the cells with three or more free neighbors;
    corridor cells (degree <= 2) form their own chains.  Goals in the same
    region belong to the same subproblem.
    """
    rooms = {v for v in g.vertices if g.degree(v) >= 3}
    label: dict[Cell, tuple] = {}
    for kind, cells in (("room", rooms), ("corridor", g.vertices - rooms)):
        seen: set[Cell] = set()
        for v in sorted(cells):
            if v in seen:
                continue
            comp = {v}
            queue = deque((v,))
            while queue:
                u = queue.popleft()
                for n in g.neighbors(u):
                    if n in cells and n not in comp:
                        comp.add(n)
                        queue.append(n)
            seen |= comp
            key = (kind, min(comp))
            for c in comp:
                label[c] = key
    return label


@lru_cache(maxsize=64)
def _articulation_cells(g: WorldGraph) -> frozenset[Cell]:
    """Cut vertices of the free graph (iterative lowpoint computation)."""
    cached = getattr(g, "_cut_cells", None)
    if cached is not None:
        return cached
    disc: dict[Cell, int] = {}
    low: dict[Cell, int] = {}
    cut: set[Cell] = set()
    counter = 0
    for root in sorted(g.vertices):
        if root in disc:
            continue
        stack: list[tuple[Cell, Cell | None, int]] = [(root, None, 0)]
        root_children = 0
        while stack:
            v, parent, idx = stack.pop()
            if idx == 0:
                disc[v] = low[v] = counter
                counter += 1
            nbrs = g.neighbors(v)
            if idx < len(nbrs):
                stack.append((v, parent, idx + 1))
                n = nbrs[idx]
                if n == parent:
                    continue
                if n in disc:
                    low[v] = min(low[v], disc[n])
                else:
                    stack.append((n, v, 0))
            else:
                if parent is not None:
                    low[parent] = min(low[parent], low[v])
                    if parent == root:
                        root_children += 1
                    elif low[v] >= disc[parent]:
                        cut.add(parent)
        if root_children > 1:
            cut.add(root)
    result = frozenset(cut)
    g._cut_cells = result  # immutable graph, so the set never goes stale
    return result


def assign_subproblems(
    g: WorldGraph,
    group: CouplingGroup,
    positions: dict[int, Cell],
    goals: dict[int, Cell],
) -> tuple[dict[int, tuple], dict[tuple, frozenset[Cell]]]:
    """Partition the members by the region their goals occupy."""
    label = _region_map(g)
    f: dict[int, tuple] = {}
    cells: dict[tuple, set[Cell]] = {}
    for m in sorted(group.members):
        key = label[goals[m]]
        f[m] = key
        cells.setdefault(key, set())
    for c, key in label.items():
        if key in cells:
            cells[key].add(c)
    return f, {k: frozenset(v) for k, v in cells.items()}


def _rank_pending(
    g: WorldGraph,
    members: set[int] | frozenset[int] | list[int],
    positions: dict[int, Cell],
    goals: dict[int, Cell],
) -> list[int]:
    """Order the members still away from their goals for leadership.

    A member whose goal, once parked on, would cut another member off from
    its own goal must go late; among equals, nearer goals and lower ids go
    first.  Parked-goal blocking is what forces displacement of finished
    robots, so non-blocking members lead first.
    """
    pending = [m for m in sorted(members) if positions[m] != goals[m]]
    cuts = _articulation_cells(g)

    def blocks(i: int) -> int:
        gi = goals[i]
        if gi not in cuts:
            return 0
        labels = g.split_labels(gi)
        count = 0
        for j in members:
            if j == i or positions[j] == gi:
                continue
            target = goals[j]
            if target == positions[j]:
                continue
            if labels.get(positions[j]) != labels.get(target):
                count += 1
        return count

    def key(m: int) -> tuple[int, int, int]:
        d = g.distance(positions[m], goals[m])
        return (blocks(m), d if d is not None else 1 << 30, m)

    return sorted(pending, key=key)


def compute_priority(
    g: WorldGraph,
    group: CouplingGroup,
    f: dict[int, tuple],
    D: dict[tuple, frozenset[Cell]],
    positions: dict[int, Cell],
    goals: dict[int, Cell],
) -> list[int]:
    """Leadership order for a coupling group; see `_rank_pending`."""
    return _rank_pending(g, group.members, positions, goals)


# -------- group construction --------


def form_group(
    members: set[int] | frozenset[int],
    positions: dict[int, Cell],
    gammas: dict[int, int],
    g: WorldGraph,
    goals: dict[int, Cell],
    step: int,
) -> CouplingGroup:
    """Couple `members` with a fresh snapshot of positions and gammas."""
    snap = {}
    for m in sorted(members):
        d = g.distance_field(goals[m])[positions[m]]
        pre = gammas.get(m, 0)
        snap[m] = MemberSnapshot(position=positions[m], gamma_pre=pre, potential=d + pre)
    group = CouplingGroup(
        members=set(members), leader=None, queue=[], snapshot=snap, formed_step=step
    )
    f, D = assign_subproblems(g, group, positions, goals)
    group.assignment = (f, D)
    group.queue = compute_priority(g, group, f, D, positions, goals)
    group.leader = group.queue[0] if group.queue else None
    return group


def merge(
    group: CouplingGroup,
    additions: set[int] | frozenset[int],
    positions: dict[int, Cell],
    gammas: dict[int, int],
    g: WorldGraph,
    goals: dict[int, Cell],
    step: int,
) -> CouplingGroup:
    """Extend a group; a no-op merge returns the group unchanged."""
    if set(additions) <= group.members:
        return group
    return form_group(group.members | set(additions), positions, gammas, g, goals, step)


def check_decouple(
    group: CouplingGroup,
    positions_now: dict[int, Cell],
    goals: dict[int, Cell],
    g: WorldGraph,
) -> bool:
    """True when the members' summed goal distances beat their potentials."""
    if not group.snapshot:
        raise LedgerStateError("coupling group has no snapshot")
    lhs = rhs = 0
    for m in group.members:
        snap = group.snapshot.get(m)
        if snap is None:
            raise LedgerStateError(f"member {m} missing from coupling snapshot")
        lhs += snap.potential
        rhs += g.distance_field(goals[m])[positions_now[m]]
    return lhs > rhs


# -------- the group plan --------


def _bfs_field(
    g: WorldGraph,
    target: Cell,
    blocked: frozenset[Cell] | set[Cell],
    until: Cell | None = None,
) -> dict[Cell, int]:
    """Hop counts to `target` over cells outside `blocked`.

    With `until` given, expansion stops once that cell and its whole
    neighborhood are labeled; only those entries are then meaningful.
    """
    wanted = {until, *g.neighbors(until)} if until is not None else None
    dist = {target: 0}
    queue = deque((target,))
    while queue:
        v = queue.popleft()
        if wanted is not None:
            wanted.discard(v)
            if not wanted:
                break
        for n in g.neighbors(v):
            if n not in dist and n not in blocked:
                dist[n] = dist[v] + 1
                queue.append(n)
    return dist


def _bfs_route(
    g: WorldGraph, start: Cell, target: Cell, blocked: frozenset[Cell] | set[Cell]
) -> list[Cell] | None:
    """Shortest route start -> target avoiding `blocked` interior cells."""
    if start == target:
        return [start]
    parent = {start: start}
    queue = deque((start,))
    while queue:
        v = queue.popleft()
        for n in g.neighbors(v):
            if n in parent or (n in blocked and n != target):
                continue
            parent[n] = v
            if n == target:
                out = [n]
                while out[-1] != start:
                    out.append(parent[out[-1]])
                out.reverse()
                return out
            queue.append(n)
    return None


def _cohesive(
    cells: dict[int, Cell], goals: dict[int, Cell], sensing_range: int
) -> bool:
    """Members still traveling must be mutually within relayed range.

    Members parked on their own goals are exempt from the requirement but
    still count as relay hops; they are on their way out of the group.
    """
    required = {m for m, c in cells.items() if c != goals[m]}
    if len(required) <= 1:
        return True
    first = next(iter(required))
    missing = len(required) - 1
    frontier = [cells[first]]
    pending = [(m, c) for m, c in cells.items() if m != first]
    while frontier and missing:
        nxt = []
        for ax, ay in frontier:
            keep = []
            for item in pending:
                bx, by = item[1]
                dx = ax - bx
                if dx < 0:
                    dx = -dx
                dy = ay - by
                if dy < 0:
                    dy = -dy
                if (dx if dx > dy else dy) <= sensing_range:
                    nxt.append(item[1])
                    if item[0] in required:
                        missing -= 1
                else:
                    keep.append(item)
            pending = keep
            if not missing:
                return True
        frontier = nxt
    return not missing


class _GroupSim:
    """Stepwise construction of one leader episode's joint plan."""

    def __init__(
        self,
        g: WorldGraph,
        members: list[int],
        leader: int,
        positions: dict[int, Cell],
        goals: dict[int, Cell],
        sensing_range: int,
        avoid: frozenset[Cell],
    ):
        self.g = g
        self.members = members
        self.leader = leader
        self.goals = goals
        self.range = sensing_range
        self.avoid = avoid
        self.pos = {m: positions[m] for m in members}
        self.occ = {self.pos[m]: m for m in members}
        self.routes: dict[int, deque[Cell]] = {}
        self.route_order: list[int] = [leader]
        self.plans: dict[int, list[Cell]] = {m: [] for m in members}
        self.reroutes = 0
        self.progressed = False
        self._soft = False
        self._pull_from: dict[int, Cell] = {}

    # ----- routing -----

    def _set_leader_route(self) -> None:
        """Route the leader to its goal, around sensed outsiders if possible."""
        start, target = self.pos[self.leader], self.goals[self.leader]
        route = None
        if self.avoid:
            route = _bfs_route(self.g, start, target, self.avoid - {target})
        if route is None:
            route = _bfs_route(self.g, start, target, frozenset())
        if route is None:
            raise InfeasibleGroupError(
                f"leader {self.leader} cannot reach goal {target} from {start}"
            )
        self.routes[self.leader] = deque(route[1:])

    def _reroute_leader_around_parked(self) -> bool:
        """Try a leader route that avoids every parked member cell."""
        if self.reroutes > len(self.members) + 2:
            return False
        goal = self.goals[self.leader]
        parked = {c for c, m in self.occ.items() if m != self.leader and not self.routes.get(m)}
        if goal in parked:
            return False  # the occupant must be displaced, not avoided
        route = _bfs_route(self.g, self.pos[self.leader], goal, parked | self.avoid)
        if route is None or len(route) < 2:
            return False
        self.reroutes += 1
        self.routes[self.leader] = deque(route[1:])
        self.progressed = True
        return True

    def _initiate_swap(self, blocker: int) -> bool:
        """Script a junction dance exchanging the leader past `blocker`."""
        lead_cell = self.pos[self.leader]
        block_cell = self.pos[blocker]
        # Junctions reachable without passing the blocker, nearest first.
        parent = {lead_cell: lead_cell}
        queue = deque((lead_cell,))
        junctions: list[Cell] = []
        while queue:
            v = queue.popleft()
            if self.g.degree(v) >= 3 and v != lead_cell:
                junctions.append(v)
            for n in self.g.neighbors(v):
                if n not in parent and n != block_cell and n not in self.avoid:
                    parent[n] = v
                    queue.append(n)
        if self.g.degree(lead_cell) >= 3:
            junctions.insert(0, lead_cell)
        for t in junctions:
            path = [t]
            while path[-1] != lead_cell:
                path.append(parent[path[-1]])
            path.reverse()  # lead_cell .. t
            arrive_from = path[-2] if len(path) >= 2 else block_cell
            nbrs = [
                c
                for c in self.g.neighbors(t)
                if c != arrive_from and c not in self.avoid
            ]
            if len(nbrs) < 2:
                continue
            ranked = sorted(nbrs, key=lambda c: (c in self.occ, c))
            branch, beyond = ranked[0], ranked[1]
            self.routes[self.leader] = deque(
                path[1:] + [branch, t] + list(reversed(path[:-1])) + [block_cell]
            )
            self.routes[blocker] = deque(path[:-1] + [t, beyond])
            if blocker not in self.route_order:
                self.route_order.append(blocker)
            self.progressed = True
            return True
        return False

    # ----- pushes -----

    def _push_chain(self, pusher: int, target: Cell) -> dict[int, Cell] | None:
        """One-cell shift of the robots packed from `target` toward an empty.

        Returns the extra moves (excluding the pusher's own), or None when
        no reachable empty keeps the group connected.
        """
        g = self.g
        forbidden = {self.pos[pusher]} | self.avoid
        route_cells = set(self.routes.get(pusher, ()))
        parent = {target: target}
        depth = {target: 0}
        queue = deque((target,))
        empties: list[Cell] = []
        while queue and len(empties) < 32:
            v = queue.popleft()
            if v not in self.occ and v != target:
                empties.append(v)
            for n in g.neighbors(v):
                if n in parent or n in forbidden:
                    continue
                if n in self._claimed or n in self._mover_sources:
                    continue
                parent[n] = v
                depth[n] = depth[v] + 1
                queue.append(n)
        if target not in self.occ:
            return {}

        ranked = sorted(empties, key=lambda c: (c in route_cells, depth[c], c))
        best: tuple[int, int, dict[int, Cell]] | None = None
        for rank, e in enumerate(ranked[:8]):
            path = [e]
            while path[-1] != target:
                path.append(parent[path[-1]])
            path.reverse()  # target .. e
            # Shift the occupied prefix one cell toward the first gap.
            moves: dict[int, Cell] = {}
            displaced_done = 0
            for i in range(len(path) - 1):
                m = self.occ.get(path[i])
                if m is None:
                    break
                if self.routes.get(m):
                    moves = {}
                    break
                if self.pos[m] == self.goals[m]:
                    displaced_done += 1
                moves[m] = path[i + 1]
            if not moves:
                continue
            # The shift must keep the traveling members mutually in range.
            proposed = {
                m: moves.get(m, self._step_moves.get(m, self.pos[m]))
                for m in self.members
            }
            proposed[pusher] = target
            if not self._soft and not _cohesive(proposed, self.goals, self.range):
                continue
            # Prefer shifts that leave finished members parked on their goals.
            if best is None or (displaced_done, rank) < best[:2]:
                best = (displaced_done, rank, moves)
            if displaced_done == 0:
                break
        return best[2] if best else None

    # ----- one step -----

    def plan_step(self, soft: bool = False) -> dict[int, Cell]:
        self._claimed: set[Cell] = set()
        self._mover_sources: set[Cell] = set()
        self._step_moves: dict[int, Cell] = {}
        self._soft = soft
        moves = self._step_moves
        post = {m: self.pos[m] for m in self.members}
        holders = [r for r in self.route_order if self.routes.get(r)]
        intent = {r: self.routes[r][0] for r in holders}

        def accept(group_moves: dict[int, Cell]) -> bool:
            """Gate a move bundle on keeping the travelers mutually in range.

            Unmoved members are assumed to stay put, so every accepted
            bundle leaves a configuration the commit check will pass.  A
            soft step waives the gate: around walls, straight-line range
            understates path distance and can wedge the group, so links
            are allowed to stretch while the pulls keep reeling them in.
            """
            saved = {r: post[r] for r in group_moves}
            post.update(group_moves)
            if not soft and not _cohesive(post, self.goals, self.range):
                post.update(saved)
                return False
            for r, cell in group_moves.items():
                moves[r] = cell
                self._claimed.add(cell)
                self._mover_sources.add(self.pos[r])
            return True

        # chains: accept movers whose target frees up, to fixpoint
        changed = True
        while changed:
            changed = False
            for r in holders:
                if r in moves:
                    continue
                t = intent[r]
                if t in self._claimed:
                    continue
                o = self.occ.get(t)
                if o is None or (o in moves and moves[o] != self.pos[r]):
                    changed = accept({r: t}) or changed
        # rotations: cycles of blocked route holders shift together
        for r in holders:
            if r in moves:
                continue
            cycle = [r]
            cur = r
            closed = False
            while True:
                t = intent.get(cur)
                if t is None or t in self._claimed:
                    break
                o = self.occ.get(t)
                if o is None or o in moves or o not in intent:
                    break
                if o == r:
                    closed = len(cycle) >= 3
                    break
                if o in cycle:
                    break
                cycle.append(o)
                cur = o
            if closed:
                accept({m: intent[m] for m in cycle})
        # pushes for still-blocked route holders, priority order
        for r in holders:
            if r in moves:
                continue
            t = intent[r]
            if t in self._claimed:
                continue
            o = self.occ.get(t)
            if o is None or o in moves or self.routes.get(o):
                continue
            extra = self._push_chain(r, t)
            pushed = extra is not None and accept({**extra, r: t})
            if not pushed and r == self.leader:
                if not self._reroute_leader_around_parked():
                    if not self._initiate_swap(o):
                        pass  # wait; the caller's progress guard decides
        # pulls: tow traveling members drifting off the relay chain; one
        # cell of slack keeps any single step within range
        slack = max(1, self.range - 1)
        occupied_post = set(post.values())
        # Distance to the nearest anchor, maintained incrementally as the
        # anchored part grows; processing in increasing order contracts a
        # stretched relay chain link by link.
        nearest: dict[int, tuple[int, int]] = {}

        def absorb(a: int) -> None:
            ax, ay = post[a]
            for x in nearest:
                bx, by = post[x]
                dx = ax - bx
                if dx < 0:
                    dx = -dx
                dy = ay - by
                if dy < 0:
                    dy = -dy
                if dx < dy:
                    dx = dy
                if dx < nearest[x][0]:
                    nearest[x] = (dx, a)

        nearest = {m: (1 << 30, self.leader) for m in self.members if m != self.leader}
        absorb(self.leader)
        while nearest:
            m = min(nearest, key=lambda x: (nearest[x][0], x))
            d, a = nearest.pop(m)
            if d > slack:
                if m in moves or self.routes.get(m) or post[m] == self.goals[m]:
                    continue  # not towable; neither relay nor stray
                # Any step that nears the anchor and keeps the travelers in
                # range will do; a single fixed route is too direction-brittle.
                src = self.pos[m]
                stepped = False
                for blocked in (occupied_post | self.avoid, self.avoid):
                    field = _bfs_field(
                        self.g, post[a], set(blocked) - {post[a], src}, until=src
                    )
                    d0 = field.get(src)
                    if d0 is None:
                        continue
                    cands = sorted(
                        (field[n], n)
                        for n in self.g.neighbors(src)
                        if n in field
                        and field[n] < d0
                        and n not in self._claimed
                        and n not in occupied_post
                        and (soft or n != self._pull_from.get(m))
                    )
                    for _, c in cands:
                        swap_bad = any(
                            moves.get(v) == src and self.pos[v] == c for v in moves
                        )
                        if not swap_bad and accept({m: c}):
                            # Differently blocked fields can flip direction
                            # step to step; never undo the previous tow, so
                            # a frozen pair reads as a stall, not a spin.
                            self._pull_from[m] = src
                            occupied_post.discard(src)
                            occupied_post.add(c)
                            stepped = True
                            break
                    if stepped:
                        break
            absorb(m)
        return moves

    def commit(self, moves: dict[int, Cell]) -> None:
        for m in moves:
            del self.occ[self.pos[m]]
        for m, cell in moves.items():
            self.occ[cell] = m
            self.pos[m] = cell
            route = self.routes.get(m)
            if route and route[0] == cell:
                route.popleft()
            elif route:
                # Knocked off script; the stale tail would no longer be
                # adjacent, so the robot falls back to being pulled along.
                del self.routes[m]
        for m in self.members:
            self.plans[m].append(self.pos[m])

    def run(self, max_steps: int) -> dict[int, tuple[Cell, ...]]:
        """Plan the whole group home: leaders reign in priority order.

        Later reigns may displace finished members; those re-enter the
        pending ranking, so the loop runs until a ranking comes up empty.
        A reign that cannot progress is shelved and the next candidate
        leads.  When the configuration recurs or every candidate is
        shelved, range keeping itself is the blocker (straight-line range
        understates path distance around walls), so leaders walk home with
        the range gate waived until a reign completes normally again.
        """
        self._cap = max_steps
        stalled_at: dict[int, tuple] = {}
        seen: set[tuple] = set()
        soft = False
        while True:
            pending = _rank_pending(self.g, self.members, self.pos, self.goals)
            if not pending:
                break
            fp = self._fingerprint()
            if not soft and fp in seen:
                soft = True
                stalled_at.clear()
            seen.add(fp)
            live = [m for m in pending if stalled_at.get(m) != fp]
            if not live:
                if soft:
                    raise InfeasibleGroupError(
                        f"group {sorted(self.members)} wedged at {fp}"
                    )
                soft = True
                stalled_at.clear()
                continue
            if self._reign(live[0], soft):
                stalled_at.clear()
                soft = False
            else:
                stalled_at[live[0]] = self._fingerprint()
        return {m: tuple(self.plans[m]) for m in self.members}

    def _fingerprint(self) -> tuple:
        return tuple(sorted(self.pos.items()))

    def _reign(self, leader: int, soft: bool) -> bool:
        """Walk `leader` home; True on arrival, False on a shelved stall."""
        self.leader = leader
        if leader in self.route_order:
            self.route_order.remove(leader)
        self.route_order.insert(0, leader)
        # Leftover scripts from shelved reigns block head-on against the
        # new leader; every reign re-scripts the dances it needs.
        self.routes.clear()
        self.reroutes = 0
        goal = self.goals[leader]
        probe = self.members[0]
        futile = 0
        limit = 2 * (self.g.width + self.g.height)
        while self.pos[leader] != goal:
            if not self.routes.get(leader):
                self._set_leader_route()
            self.progressed = False
            before = self.pos[leader]
            moves = self.plan_step(soft=soft)
            if not moves and not self.progressed:
                return False
            self.commit(moves)
            if len(self.plans[probe]) > self._cap:
                raise InfeasibleGroupError(
                    f"group {sorted(self.members)} exceeded {self._cap} plan steps"
                )
            # Followers can trade cells indefinitely while the leader is
            # walled in; treat a long leaderless streak as a stall.
            futile = 0 if self.pos[leader] != before else futile + 1
            if futile > limit:
                return False
        self.routes.pop(leader, None)
        self._pull_from.clear()
        return True


def push_and_pull(
    g: WorldGraph,
    group: CouplingGroup,
    leader: int,
    positions: dict[int, Cell],
    goals: dict[int, Cell],
    ledger: ContributionLedger | None = None,
    *,
    sensing_range: int = 3,
    avoid: frozenset[Cell] = frozenset(),
    max_steps: int | None = None,
) -> dict[int, tuple[Cell, ...]]:
    """Joint plan walking every member to its goal; equal-length sequences.

    Members take the lead one at a time in priority order; the rest are
    displaced off the leader's way, towed to stay within relayed range,
    and otherwise hold position.  The plan is free of shared-cell and
    exchange conflicts inside the group and keeps the members' sensing
    graph connected at every step.
    """
    members = sorted(group.members)
    if leader not in group.members:
        raise ValueError(f"leader {leader} is not a group member")
    cap = max_steps if max_steps is not None else 16 * len(members) * (g.width + g.height)
    sim = _GroupSim(g, members, leader, positions, goals, sensing_range, avoid)
    plans = sim.run(cap)
    assert _plans_sound(g, members, positions, plans)
    return plans


def _plans_sound(
    g: WorldGraph,
    members: list[int],
    positions: dict[int, Cell],
    plans: dict[int, tuple[Cell, ...]],
) -> bool:
    lengths = {len(p) for p in plans.values()}
    if len(lengths) > 1:
        return False
    steps = lengths.pop() if lengths else 0
    prev = [positions[m] for m in members]
    for j in range(steps):
        cur = [plans[m][j] for m in members]
        for i in range(len(members)):
            if cur[i] != prev[i] and cur[i] not in g.neighbors(prev[i]):
                return False
            for k in range(i + 1, len(members)):
                if cur[i] == cur[k]:
                    return False
                if cur[i] == prev[k] and cur[k] == prev[i]:
                    return False
        prev = cur
    return True
