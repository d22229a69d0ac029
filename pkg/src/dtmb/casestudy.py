"""Reconstruction of the multiplexed in-vitro diagnostics chip on a DTMB(2,6) pattern.

Only the counts are known: 252 primaries (108 used by the assays) and 91
spares.  The geometry built here is deterministic:

1. Among parallelograms ``q in [0, W), r in [0, H)`` with exactly 91 spares
   and at least 252 primaries, take the one with the fewest surplus
   primaries (ties: wider first).  That is 25 x 14, with 7 surplus.
2. Drop surplus primaries that lie on the boundary, last first in the
   stable (row, column) order.
3. Mark 108 used primaries as a ladder of transport lines, the way the
   assay electrodes of the original chip form droplet paths: full rows
   ``r = 3, 7, 11, ...`` (rows ``r = 3 mod 4`` that stay two rows clear of
   the edge), joined by three-cell vertical connectors on odd columns,
   ``q = 1 mod 4`` in the first gap, ``q = 3 mod 4`` in the next, and so on.
   Lines first, then connectors in (gap, column) order, until 108 cells.
   ``used_pattern="compact"`` instead takes a breadth-first blob of
   primaries around the centroid.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

from .lattice import DTMB26, PRIMARY, DTMBVariant, ArrayLayout, Cell, HexCoord, RegionSpec, generate_layout, stable_key
from .reconfig import ALL_PRIMARIES
from .yields import DEFAULT_RUNS, YieldEstimate, analytic_yield_no_redundancy, mfault_curve


@dataclass(frozen=True)
class CaseStudySpec:
    target_primaries: int = 252
    target_spares: int = 91
    used_primaries: int = 108
    pattern: DTMBVariant = DTMB26


INVITRO = CaseStudySpec()


def _bounding_region(spec: CaseStudySpec, max_side: int = 64) -> RegionSpec:
    best = None
    for w in range(1, max_side + 1):
        for h in range(1, max_side + 1):
            n_spare = sum(1 for q in range(w) for r in range(h) if spec.pattern.is_spare(q, r))
            surplus = w * h - n_spare - spec.target_primaries
            if n_spare != spec.target_spares or surplus < 0:
                continue
            key = (surplus, -w, h)
            if best is None or key < best[0]:
                best = (key, w, h)
    if best is None:
        raise ValueError("no bounding parallelogram reproduces the target counts")
    return RegionSpec(best[1], best[2])


def build_invitro_layout(spec: CaseStudySpec = INVITRO, used_pattern: str = "ladder") -> ArrayLayout:
    layout = generate_layout(spec.pattern, _bounding_region(spec))

    surplus = layout.n_primary - spec.target_primaries
    removed = []
    for c in reversed(layout.order):
        if len(removed) == surplus:
            break
        if layout.kind(c) == PRIMARY and not layout.is_interior(c):
            removed.append(c)
    layout = layout.replace_cells({c: None for c in removed})

    if used_pattern == "ladder":
        used = _ladder(layout, spec.used_primaries)
    elif used_pattern == "compact":
        used = _compact(layout, spec.used_primaries)
    else:
        raise ValueError(f"unknown used_pattern {used_pattern!r}")
    if len(used) != spec.used_primaries:
        raise ValueError(f"could only place {len(used)} of {spec.used_primaries} used cells")
    return layout.replace_cells({c: Cell(PRIMARY, True) for c in used})


def _ladder(layout: ArrayLayout, count: int) -> list[HexCoord]:
    height = layout.region.height
    lines = list(range(3, height - 2, 4))
    picked = [c for c in layout.primaries if c.r in lines]
    for gap, (top, bottom) in enumerate(zip(lines, lines[1:])):
        for q in range(1 + 2 * (gap % 2), layout.region.width, 4):
            picked.extend(HexCoord(q, r) for r in range(top + 1, bottom))
    picked = [c for c in picked if c in layout.cells and layout.kind(c) == PRIMARY]
    return picked[:count]


def _compact(layout: ArrayLayout, count: int) -> list[HexCoord]:
    cq = sum(c.q for c in layout.order) / layout.n_cells
    cr = sum(c.r for c in layout.order) / layout.n_cells
    # Euclidean distance between hexagon centres
    start = min(
        layout.primaries,
        key=lambda c: ((c.q - cq + (c.r - cr) / 2) ** 2 + 0.75 * (c.r - cr) ** 2, stable_key(c)),
    )
    used, seen, queue = [], {start}, deque([start])
    while queue and len(used) < count:
        c = queue.popleft()
        used.append(c)
        for n in layout.adjacency[c]:
            if n not in seen and layout.kind(n) == PRIMARY:
                seen.add(n)
                queue.append(n)
    return used


def casestudy_baseline(survival_prob: float, spec: CaseStudySpec = INVITRO) -> YieldEstimate:
    """Yield of the original chip, which fabricated only the assay cells and no spares."""
    return analytic_yield_no_redundancy(survival_prob, spec.used_primaries)


def casestudy_mfault_curve(
    m_grid: Sequence[int],
    runs: int = DEFAULT_RUNS,
    master_seed: int = 0,
    scope: str = ALL_PRIMARIES,
    jobs: int = 1,
    layout: ArrayLayout | None = None,
) -> list[tuple[int, YieldEstimate]]:
    layout = layout or build_invitro_layout()
    return mfault_curve(layout, m_grid, runs, master_seed, scope, jobs)
