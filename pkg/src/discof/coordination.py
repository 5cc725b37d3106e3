"""Sensing, outer closures, and windowed conflict prediction.

A robot senses every cell within a Chebyshev radius.  Two robots whose
distance is at most the sensing range communicate directly; the outer
closure (OC) is the transitive closure of that relation, so information
relays through intermediate robots.  Conflict prediction looks at most
`beta` steps ahead along the current plans of the robots in one OC.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .world import Cell, WorldGraph, chebyshev


@dataclass(frozen=True)
class SensingConfig:
    """Sensing radius and prediction horizon; beta defaults to the radius."""

    sensing_range: int = 3
    beta: int | None = None

    def __post_init__(self) -> None:
        if self.sensing_range < 1:
            raise ValueError("sensing_range must be >= 1")
        if self.beta is None:
            object.__setattr__(self, "beta", self.sensing_range)
        if self.beta < 1:
            raise ValueError("beta must be >= 1")


@dataclass(frozen=True)
class PredictedConflict:
    """One inner-closure entry: who conflicts, how soon, and roughly where."""

    robots: frozenset[int]
    step: int
    cell: Cell


@dataclass
class Closure:
    """An outer closure with its predicted inner closures."""

    oc: frozenset[int]
    ics: list[PredictedConflict] = field(default_factory=list)
    detector: int | None = None


def sense_window(g: WorldGraph, pos: Cell, cfg: SensingConfig) -> frozenset[Cell]:
    """Free cells within the Chebyshev sensing radius of `pos`."""
    if not g.is_free(pos):
        raise ValueError(f"sensor position {pos} is not a free cell")
    r = cfg.sensing_range
    x, y = pos
    out = []
    for cx in range(max(0, x - r), min(g.width, x + r + 1)):
        for cy in range(max(0, y - r), min(g.height, y + r + 1)):
            if (cx, cy) in g.vertices:
                out.append((cx, cy))
    return frozenset(out)


def compute_ocs(positions: dict[int, Cell], g: WorldGraph, cfg: SensingConfig) -> list[Closure]:
    """Partition robots into outer closures by relayed mutual sensing."""
    ids = sorted(positions)
    parent = {r: r for r in ids}

    def find(r: int) -> int:
        while parent[r] != r:
            parent[r] = parent[parent[r]]
            r = parent[r]
        return r

    rng = cfg.sensing_range
    for i, a in enumerate(ids):
        pa = positions[a]
        for b in ids[i + 1 :]:
            if chebyshev(pa, positions[b]) <= rng:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for r in ids:
        groups.setdefault(find(r), []).append(r)
    return [Closure(oc=frozenset(groups[root])) for root in sorted(groups)]


def sense_conflict(
    plans: dict[int, Sequence[Cell]],
    oc: Closure,
    positions: dict[int, Cell],
    k: int,
    cfg: SensingConfig,
) -> tuple[frozenset[int], Closure]:
    """Predict conflicts among OC members within the next `beta` steps.

    Plans hold the cells still to be visited (the current position is taken
    from `positions`); a robot past its plan end is treated as stationary.
    Minimal conflicting sets that share a robot are merged into one inner
    closure; the returned psi is the union of all of them.  The scan is
    intentionally written against the step window directly so it can be
    cross-checked against the offline minimal-conflict computation.
    """
    members = sorted(oc.oc)
    beta: int = cfg.beta  # type: ignore[assignment]
    oc.ics = []
    if len(members) < 2:
        return frozenset(), oc

    seqs = {}
    for r in members:
        seqs[r] = (positions[r],) + tuple(plans.get(r, ()))

    def at(r: int, j: int) -> Cell:
        s = seqs[r]
        return s[j] if j < len(s) else s[-1]

    # pair -> (earliest step, representative cell)
    hits: dict[frozenset[int], tuple[int, Cell]] = {}
    for j in range(1, beta + 1):
        for ai in range(len(members)):
            a = members[ai]
            ca, pa = at(a, j), at(a, j - 1)
            for b in members[ai + 1 :]:
                pair = frozenset((a, b))
                if pair in hits:
                    continue
                cb, pb = at(b, j), at(b, j - 1)
                if ca == cb:
                    hits[pair] = (k + j, ca)
                elif ca == pb and cb == pa:
                    hits[pair] = (k + j, min(ca, cb))
    if not hits:
        return frozenset(), oc

    # Merge conflicting sets that share robots into single inner closures.
    merged: list[tuple[set[int], int, Cell]] = []
    for pair, (step, cell) in sorted(hits.items(), key=lambda kv: (kv[1][0], sorted(kv[0]))):
        target = None
        for entry in merged:
            if entry[0] & pair:
                target = entry
                break
        if target is None:
            merged.append((set(pair), step, cell))
        else:
            target[0].update(pair)
    # A late merge can join two earlier groups; run to fixpoint.
    changed = True
    while changed:
        changed = False
        for i in range(len(merged)):
            for j in range(i + 1, len(merged)):
                if merged[i][0] & merged[j][0]:
                    merged[i][0].update(merged[j][0])
                    merged.pop(j)
                    changed = True
                    break
            if changed:
                break

    oc.ics = [
        PredictedConflict(robots=frozenset(rs), step=step, cell=cell)
        for rs, step, cell in sorted(merged, key=lambda e: (e[1], sorted(e[0])))
    ]
    psi = frozenset().union(*(ic.robots for ic in oc.ics))
    return psi, oc
