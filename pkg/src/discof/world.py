"""Grid workspace: 4-connected free-cell graph, shortest paths, scenario I/O.

Cells are (x, y) integer pairs with the origin at the lower-left corner.
The graph is immutable after construction; breadth-first distance fields
are cached per target cell and safe to share across concurrent readers.
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field

Cell = tuple[int, int]

_ORTHO = ((0, 1), (0, -1), (-1, 0), (1, 0))


class WorldError(ValueError):
    """Invalid workspace construction or query input."""


class ScenarioError(ValueError):
    """Malformed scenario document or violated scenario invariant."""


def chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


@dataclass(frozen=True)
class Path:
    """A walk along graph edges; cost counts moves, not vertices."""

    vertices: tuple[Cell, ...]

    @property
    def cost(self) -> int:
        return len(self.vertices) - 1

    @property
    def start(self) -> Cell:
        return self.vertices[0]

    @property
    def end(self) -> Cell:
        return self.vertices[-1]


class WorldGraph:
    """4-connected grid graph over the free cells of a width x height board."""

    def __init__(self, width: int, height: int, obstacles: frozenset[Cell]):
        if width < 1 or height < 1:
            raise WorldError(f"grid dimensions must be positive, got {width}x{height}")
        for cell in obstacles:
            if not (0 <= cell[0] < width and 0 <= cell[1] < height):
                raise WorldError(f"obstacle {cell} outside {width}x{height} grid")
        self.width = width
        self.height = height
        self.obstacles = frozenset(obstacles)
        self.vertices = frozenset(
            (x, y) for x in range(width) for y in range(height) if (x, y) not in self.obstacles
        )
        adj: dict[Cell, tuple[Cell, ...]] = {}
        for v in self.vertices:
            x, y = v
            # Sorted neighbor order fixes the tie-break everywhere paths are built.
            adj[v] = tuple(
                sorted(n for n in ((x + dx, y + dy) for dx, dy in _ORTHO) if n in self.vertices)
            )
        self._adj = adj
        self._fields: dict[Cell, dict[Cell, int]] = {}
        self._split_labels: dict[Cell, dict[Cell, Cell]] = {}

    # -------- queries --------

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def is_free(self, cell: Cell) -> bool:
        return cell in self.vertices

    def neighbors(self, v: Cell) -> tuple[Cell, ...]:
        try:
            return self._adj[v]
        except KeyError:
            raise WorldError(f"{v} is not a free cell") from None

    def degree(self, v: Cell) -> int:
        return len(self.neighbors(v))

    def distance_field(self, target: Cell) -> dict[Cell, int]:
        """Breadth-first distances from every reachable cell to `target`."""
        if target not in self.vertices:
            raise WorldError(f"{target} is not a free cell")
        cached = self._fields.get(target)
        if cached is not None:
            return cached
        dist = {target: 0}
        queue = deque((target,))
        adj = self._adj
        while queue:
            v = queue.popleft()
            d = dist[v] + 1
            for n in adj[v]:
                if n not in dist:
                    dist[n] = d
                    queue.append(n)
        self._fields[target] = dist
        return dist

    def distance(self, u: Cell, v: Cell) -> int | None:
        """Shortest-path cost between free cells, None when disconnected."""
        return self.distance_field(v).get(u)

    def split_labels(self, removed: Cell) -> dict[Cell, Cell]:
        """Component label of every free cell once `removed` is deleted."""
        cached = self._split_labels.get(removed)
        if cached is not None:
            return cached
        labels: dict[Cell, Cell] = {}
        for root in sorted(self.vertices):
            if root == removed or root in labels:
                continue
            labels[root] = root
            queue = deque((root,))
            while queue:
                v = queue.popleft()
                for n in self._adj[v]:
                    if n != removed and n not in labels:
                        labels[n] = root
                        queue.append(n)
        self._split_labels[removed] = labels
        return labels

    def components(self) -> list[frozenset[Cell]]:
        """Connected components of the free graph, sorted by smallest cell."""
        seen: set[Cell] = set()
        comps = []
        for v in sorted(self.vertices):
            if v in seen:
                continue
            comp = {v}
            queue = deque((v,))
            while queue:
                u = queue.popleft()
                for n in self._adj[u]:
                    if n not in comp:
                        comp.add(n)
                        queue.append(n)
            seen |= comp
            comps.append(frozenset(comp))
        return comps

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WorldGraph):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.obstacles == other.obstacles
        )

    def __hash__(self) -> int:
        return hash((self.width, self.height, self.obstacles))

    def __repr__(self) -> str:
        return f"WorldGraph({self.width}x{self.height}, {len(self.obstacles)} obstacles)"


def build_grid(width: int, height: int, obstacles: tuple[Cell, ...] | frozenset[Cell] = ()) -> WorldGraph:
    return WorldGraph(width, height, frozenset(obstacles))


def shortest_path(g: WorldGraph, u: Cell, v: Cell) -> Path | None:
    """Breadth-first shortest path from u to v, or None when disconnected.

    Ties are broken by the graph's sorted neighbor order, so repeated calls
    return the identical path.
    """
    if u not in g.vertices:
        raise WorldError(f"start {u} is not a free cell")
    if v not in g.vertices:
        raise WorldError(f"target {v} is not a free cell")
    if u == v:
        return Path((u,))
    parent: dict[Cell, Cell] = {u: u}
    queue = deque((u,))
    while queue:
        cur = queue.popleft()
        for n in g.neighbors(cur):
            if n in parent:
                continue
            parent[n] = cur
            if n == v:
                out = [n]
                while out[-1] != u:
                    out.append(parent[out[-1]])
                out.reverse()
                return Path(tuple(out))
            queue.append(n)
    return None


# -------- scenario documents --------


@dataclass
class Scenario:
    """A workspace plus per-robot start and goal assignments."""

    graph: WorldGraph
    starts: dict[int, Cell]
    goals: dict[int, Cell]
    seed: int = 0

    @property
    def robots(self) -> tuple[int, ...]:
        return tuple(sorted(self.starts))

    @property
    def n(self) -> int:
        return len(self.starts)

    def validate(self) -> None:
        """Raise ScenarioError naming the first offending robot."""
        if set(self.starts) != set(self.goals):
            raise ScenarioError("starts and goals must cover the same robot ids")
        if not self.starts:
            raise ScenarioError("scenario has no robots")
        seen_starts: dict[Cell, int] = {}
        seen_goals: dict[Cell, int] = {}
        for rid in self.robots:
            s, t = self.starts[rid], self.goals[rid]
            if not self.graph.is_free(s):
                raise ScenarioError(f"robot {rid}: start {s} is not a free cell")
            if not self.graph.is_free(t):
                raise ScenarioError(f"robot {rid}: goal {t} is not a free cell")
            if s in seen_starts:
                raise ScenarioError(f"robot {rid}: start {s} duplicates robot {seen_starts[s]}")
            if t in seen_goals:
                raise ScenarioError(f"robot {rid}: goal {t} duplicates robot {seen_goals[t]}")
            seen_starts[s] = rid
            seen_goals[t] = rid
            if self.graph.distance(s, t) is None:
                raise ScenarioError(f"robot {rid}: goal {t} unreachable from start {s}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.graph == other.graph
            and self.starts == other.starts
            and self.goals == other.goals
            and self.seed == other.seed
        )


_SEED_RE = re.compile(r"^#\s*seed\s+(-?\d+)\s*$")


def load_scenario(text: str) -> Scenario:
    """Parse the line-oriented scenario format and validate the result.

    Grammar: a `grid W H` header, then `obstacle X Y` lines, then
    `robot ID SX SY GX GY` lines.  Lines starting with `#` are comments;
    a `# seed N` comment restores the generator seed.
    """
    width = height = None
    obstacles: list[Cell] = []
    starts: dict[int, Cell] = {}
    goals: dict[int, Cell] = {}
    seed = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _SEED_RE.match(line)
            if m:
                seed = int(m.group(1))
            continue
        parts = line.split()
        try:
            if parts[0] == "grid" and len(parts) == 3:
                if width is not None:
                    raise ScenarioError(f"line {lineno}: duplicate grid header")
                width, height = int(parts[1]), int(parts[2])
            elif parts[0] == "obstacle" and len(parts) == 3:
                obstacles.append((int(parts[1]), int(parts[2])))
            elif parts[0] == "robot" and len(parts) == 6:
                rid = int(parts[1])
                if rid in starts:
                    raise ScenarioError(f"line {lineno}: duplicate robot id {rid}")
                starts[rid] = (int(parts[2]), int(parts[3]))
                goals[rid] = (int(parts[4]), int(parts[5]))
            else:
                raise ScenarioError(f"line {lineno}: unrecognized directive {parts[0]!r}")
        except ValueError as exc:
            raise ScenarioError(f"line {lineno}: {exc}") from None
    if width is None or height is None:
        raise ScenarioError("missing grid header")
    try:
        graph = build_grid(width, height, tuple(obstacles))
    except WorldError as exc:
        raise ScenarioError(str(exc)) from None
    scenario = Scenario(graph=graph, starts=starts, goals=goals, seed=seed)
    scenario.validate()
    return scenario


def save_scenario(s: Scenario) -> str:
    """Serialize to the canonical text form; load(save(s)) == s byte-for-byte."""
    lines = [f"grid {s.graph.width} {s.graph.height}"]
    if s.seed:
        lines.append(f"# seed {s.seed}")
    for x, y in sorted(s.graph.obstacles):
        lines.append(f"obstacle {x} {y}")
    for rid in s.robots:
        sx, sy = s.starts[rid]
        gx, gy = s.goals[rid]
        lines.append(f"robot {rid} {sx} {sy} {gx} {gy}")
    return "\n".join(lines) + "\n"
