"""Local reconfiguration: match faulty primaries to adjacent fault-free spares.

A fault pattern is repairable iff a maximum matching in the repair graph
saturates every faulty primary in scope.  Greedy maximal matchings are not
enough; they can strand a primary whose only spare was taken by a neighbour
that had an alternative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Mapping, Optional, Sequence

import numpy as np

from .faults import FaultMap
from .lattice import PRIMARY, SPARE, ArrayLayout, HexCoord, stable_key

ALL_PRIMARIES = "all-primaries"
USED_ONLY = "used-only"
SCOPES = (ALL_PRIMARIES, USED_ONLY)

REPAIRABLE = "repairable"
UNREPAIRABLE = "unrepairable"


def _check_scope(scope: str) -> None:
    if scope not in SCOPES:
        raise ValueError(f"scope must be one of {SCOPES}, got {scope!r}")


@dataclass(frozen=True)
class RepairGraph:
    A: tuple[HexCoord, ...]
    B: tuple[HexCoord, ...]
    # a -> adjacent fault-free spares, in stable order
    E: Mapping[HexCoord, tuple[HexCoord, ...]]

    @property
    def n_edges(self) -> int:
        return sum(len(bs) for bs in self.E.values())


def build_repair_graph(layout: ArrayLayout, faults: FaultMap, scope: str = ALL_PRIMARIES) -> RepairGraph:
    _check_scope(scope)
    faults.check(layout)
    faulty = faults.faulty
    candidates = layout.used if scope == USED_ONLY else layout.primaries
    A = tuple(c for c in candidates if c in faulty)
    B = tuple(c for c in layout.spares if c not in faulty)
    E = {
        a: tuple(n for n in layout.adjacency[a] if layout.kind(n) == SPARE and n not in faulty)
        for a in A
    }
    return RepairGraph(A, B, E)


def augmenting_matching(left: Sequence[Hashable], adj: Mapping) -> dict:
    """Maximum-cardinality bipartite matching by repeated augmenting-path search.

    ``left`` fixes the processing order and ``adj[a]`` the order in which the
    right-hand neighbours of ``a`` are tried; ties are broken by these orders
    alone, so the result is deterministic.  Returns ``{left: right}``.
    """
    mate_of_right: dict = {}

    def augment(a, seen: set) -> bool:
        for b in adj[a]:
            if b in seen:
                continue
            seen.add(b)
            if b not in mate_of_right or augment(mate_of_right[b], seen):
                mate_of_right[b] = a
                return True
        return False

    for a in left:
        augment(a, set())
    return {a: b for b, a in mate_of_right.items()}


def max_matching(g: RepairGraph) -> dict[HexCoord, HexCoord]:
    matching = augmenting_matching(g.A, g.E)
    return {a: matching[a] for a in g.A if a in matching}


def hall_witness(left: Sequence[Hashable], adj: Mapping, matching: Mapping) -> list:
    """Left vertices reachable by alternating paths from unmatched left vertices.

    When ``matching`` is maximum and leaves some left vertex uncovered, the
    returned set S has ``|N(S)| = |S| - #unmatched(S) < |S|``.
    """
    mate_of_right = {b: a for a, b in matching.items()}
    frontier = [a for a in left if a not in matching]
    reached = set(frontier)
    seen_right = set()
    while frontier:
        nxt = []
        for a in frontier:
            for b in adj[a]:
                if b in seen_right:
                    continue
                seen_right.add(b)
                mate = mate_of_right.get(b)
                if mate is not None and mate not in reached:
                    reached.add(mate)
                    nxt.append(mate)
        frontier = nxt
    return [a for a in left if a in reached]


def is_hall_violator(S, adj: Mapping) -> bool:
    S = set(S)
    if not S:
        return False
    hood = set()
    for a in S:
        hood.update(adj[a])
    return len(hood) < len(S)


@dataclass(frozen=True)
class RepairPlan:
    verdict: str
    assignment: Mapping[HexCoord, HexCoord]
    witness: Optional[tuple[HexCoord, ...]] = None

    @property
    def repairable(self) -> bool:
        return self.verdict == REPAIRABLE

    def to_dict(self) -> dict:
        pairs = sorted(self.assignment.items(), key=lambda kv: stable_key(kv[0]))
        return {
            "verdict": self.verdict,
            "assignment": [
                {"from": {"q": a.q, "r": a.r}, "to": {"q": b.q, "r": b.r}} for a, b in pairs
            ],
            "witness": None if self.witness is None else [{"q": c.q, "r": c.r} for c in self.witness],
        }


def plan_repair(layout: ArrayLayout, faults: FaultMap, scope: str = ALL_PRIMARIES) -> RepairPlan:
    g = build_repair_graph(layout, faults, scope)
    matching = max_matching(g)
    if len(matching) == len(g.A):
        return RepairPlan(REPAIRABLE, matching)
    return RepairPlan(UNREPAIRABLE, matching, tuple(hall_witness(g.A, g.E, matching)))


def check_plan(layout: ArrayLayout, faults: FaultMap, plan: RepairPlan, scope: str = ALL_PRIMARIES) -> None:
    """Assert the structural guarantees of a plan; raises AssertionError on any breach."""
    g = build_repair_graph(layout, faults, scope)
    targets = list(plan.assignment.values())
    assert len(targets) == len(set(targets)), "assignment is not injective"
    for a, b in plan.assignment.items():
        assert layout.kind(a) == PRIMARY and a in faults.faulty, f"{a} is not a faulty primary"
        assert b in g.E[a], f"{a}->{b} is not an edge of the repair graph"
        assert b not in faults.faulty, f"spare {b} is faulty"
    assert plan.repairable == (len(plan.assignment) == len(g.A))
    if plan.repairable:
        assert plan.witness is None
    else:
        assert is_hall_violator(plan.witness, g.E), "witness does not violate Hall's condition"


class FastRepairChecker:
    """Index-based repairability test for Monte-Carlo inner loops.

    Uses the same matching routine as :func:`plan_repair`, on integer cell
    indices in the layout's stable order.
    """

    def __init__(self, layout: ArrayLayout, scope: str = ALL_PRIMARIES):
        _check_scope(scope)
        idx = layout.index
        self.n_cells = layout.n_cells
        cands = layout.used if scope == USED_ONLY else layout.primaries
        self.candidates = [idx[c] for c in cands]
        spare = [layout.kind(c) == SPARE for c in layout.order]
        self.spare_nbrs = [
            tuple(n for n in layout.neighbor_index[i] if spare[n]) for i in range(self.n_cells)
        ]
        self.in_scope = [False] * self.n_cells
        for i in self.candidates:
            self.in_scope[i] = True

    def repairable_indices(self, faulty_idx) -> bool:
        faulty = set(faulty_idx)
        A = sorted(i for i in faulty if self.in_scope[i])
        if not A:
            return True
        adj = {}
        for a in A:
            bs = tuple(b for b in self.spare_nbrs[a] if b not in faulty)
            if not bs:
                return False
            adj[a] = bs
        return len(augmenting_matching(A, adj)) == len(A)

    def repairable_mask(self, mask) -> bool:
        return self.repairable_indices(np.flatnonzero(mask).tolist())
