"""Hexagonal cell arrays with interstitial spare cells.

Cells live on a triangular adjacency lattice addressed by axial coordinates
``(q, r)``.  Each cell touches six others, at the offsets in
:data:`AXIAL_OFFSETS`.  A layout assigns every cell a kind (primary or spare)
and, for primaries, a ``used`` flag marking cells that carry assay traffic.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple, Optional

PRIMARY = "primary"
SPARE = "spare"
OPEN = "open"
PERIODIC = "periodic"

AXIAL_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1))


class LayoutError(ValueError):
    """Raised for malformed regions, layouts or layout documents."""


class HexCoord(NamedTuple):
    q: int
    r: int

    def offsets(self) -> list["HexCoord"]:
        return [HexCoord(self.q + dq, self.r + dr) for dq, dr in AXIAL_OFFSETS]


def stable_key(c: HexCoord) -> tuple[int, int]:
    """Sort key for the canonical cell ordering: by row, then column."""
    return (c.r, c.q)


@dataclass(frozen=True)
class DTMBVariant:
    spares_per_primary: int
    primaries_per_spare: int

    def __post_init__(self):
        if (self.spares_per_primary, self.primaries_per_spare) not in _RULES:
            raise LayoutError(f"unsupported variant {self.name}")

    @property
    def name(self) -> str:
        return f"DTMB({self.spares_per_primary},{self.primaries_per_spare})"

    @property
    def nominal_rr(self) -> Fraction:
        return Fraction(self.spares_per_primary, self.primaries_per_spare)

    @property
    def period(self) -> tuple[int, int]:
        """Smallest (W, H) such that periodic regions must be multiples of it."""
        return _PERIODS[(self.spares_per_primary, self.primaries_per_spare)]

    def is_spare(self, q: int, r: int) -> bool:
        return _RULES[(self.spares_per_primary, self.primaries_per_spare)](q, r)

    @classmethod
    def parse(cls, text: str) -> "DTMBVariant":
        m = re.fullmatch(r"\s*(?:DTMB)?\(?\s*(\d+)\s*,\s*(\d+)\s*\)?\s*", text, re.IGNORECASE)
        if not m:
            raise LayoutError(f"cannot parse variant {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    def __str__(self):
        return self.name


# Spare-membership rules.  Each one gives every primary exactly s spare
# neighbours and every spare exactly p_adj primary neighbours on the infinite
# lattice; (q + 3r) mod 7 is the perfect 1-covering of the triangular lattice.
_RULES = {
    (1, 6): lambda q, r: (q + 3 * r) % 7 == 0,
    (2, 6): lambda q, r: q % 2 == 0 and r % 2 == 0,
    (3, 6): lambda q, r: (q - r) % 3 == 0,
    (4, 4): lambda q, r: r % 2 == 1,
}
_PERIODS = {(1, 6): (7, 7), (2, 6): (2, 2), (3, 6): (3, 3), (4, 4): (2, 2)}

DTMB16 = DTMBVariant(1, 6)
DTMB26 = DTMBVariant(2, 6)
DTMB36 = DTMBVariant(3, 6)
DTMB44 = DTMBVariant(4, 4)
VARIANTS = (DTMB16, DTMB26, DTMB36, DTMB44)


@dataclass(frozen=True)
class RegionSpec:
    """A parallelogram ``q in [0, width), r in [0, height)`` or an explicit cell list.

    Periodic regions wrap ``q`` modulo ``width`` and ``r`` modulo ``height``;
    they are only meaningful for full parallelograms.
    """

    width: int
    height: int
    boundary: str = OPEN
    cells: Optional[tuple[HexCoord, ...]] = None

    def __post_init__(self):
        if self.boundary not in (OPEN, PERIODIC):
            raise LayoutError(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")
        if self.width < 1 or self.height < 1:
            raise LayoutError("region must be non-empty")
        if self.cells is not None:
            if not self.cells:
                raise LayoutError("region must be non-empty")
            if self.boundary == PERIODIC:
                raise LayoutError("periodic boundary requires a parallelogram region")

    def coords(self) -> list[HexCoord]:
        if self.cells is not None:
            return sorted(set(self.cells), key=stable_key)
        return [HexCoord(q, r) for r in range(self.height) for q in range(self.width)]


@dataclass(frozen=True)
class Cell:
    kind: str
    used: bool = False


@dataclass(frozen=True)
class ArrayLayout:
    """An immutable chip layout.  Edits go through :meth:`replace_cells`."""

    cells: Mapping[HexCoord, Cell]
    region: RegionSpec
    variant: Optional[DTMBVariant] = None

    def __post_init__(self):
        for c, cell in self.cells.items():
            if cell.kind not in (PRIMARY, SPARE):
                raise LayoutError(f"cell {tuple(c)} has unknown kind {cell.kind!r}")
            if cell.used and cell.kind != PRIMARY:
                raise LayoutError(f"spare cell {tuple(c)} cannot be marked used")
        if self.region.boundary == PERIODIC:
            w, h = self.region.width, self.region.height
            for c in self.cells:
                if not (0 <= c.q < w and 0 <= c.r < h):
                    raise LayoutError(f"cell {tuple(c)} lies outside the periodic {w}x{h} region")
        if self.n_primary < 1:
            raise LayoutError("layout needs at least one primary cell")

    # -- ordering and counts ------------------------------------------------

    @cached_property
    def order(self) -> tuple[HexCoord, ...]:
        return tuple(sorted(self.cells, key=stable_key))

    @cached_property
    def index(self) -> dict[HexCoord, int]:
        return {c: i for i, c in enumerate(self.order)}

    @cached_property
    def primaries(self) -> tuple[HexCoord, ...]:
        return tuple(c for c in self.order if self.cells[c].kind == PRIMARY)

    @cached_property
    def spares(self) -> tuple[HexCoord, ...]:
        return tuple(c for c in self.order if self.cells[c].kind == SPARE)

    @cached_property
    def used(self) -> tuple[HexCoord, ...]:
        return tuple(c for c in self.primaries if self.cells[c].used)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_primary(self) -> int:
        return sum(1 for cell in self.cells.values() if cell.kind == PRIMARY)

    @property
    def n_spare(self) -> int:
        return len(self.cells) - self.n_primary

    @property
    def periodic(self) -> bool:
        return self.region.boundary == PERIODIC

    def kind(self, c: HexCoord) -> str:
        return self.cells[c].kind

    # -- adjacency ----------------------------------------------------------

    def _raw_neighbors(self, c: HexCoord) -> list[HexCoord]:
        out = []
        for n in c.offsets():
            if self.periodic:
                n = HexCoord(n.q % self.region.width, n.r % self.region.height)
            if n in self.cells and n != c and n not in out:
                out.append(n)
        return sorted(out, key=stable_key)

    @cached_property
    def adjacency(self) -> dict[HexCoord, tuple[HexCoord, ...]]:
        return {c: tuple(self._raw_neighbors(c)) for c in self.order}

    @cached_property
    def neighbor_index(self) -> tuple[tuple[int, ...], ...]:
        """Neighbour lists by cell index, each in stable order."""
        idx = self.index
        return tuple(tuple(idx[n] for n in self.adjacency[c]) for c in self.order)

    def is_interior(self, c: HexCoord) -> bool:
        if self.periodic:
            return True
        return all(n in self.cells for n in c.offsets())

    # -- identity, edits, serialisation --------------------------------------

    @cached_property
    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def replace_cells(self, changes: Mapping[HexCoord, Optional[Cell]]) -> "ArrayLayout":
        """Return a new layout with cells replaced (or removed where the value is None)."""
        cells = dict(self.cells)
        for c, cell in changes.items():
            c = HexCoord(*c)
            if cell is None:
                cells.pop(c, None)
            else:
                cells[c] = cell
        region = self.region
        if region.cells is not None or set(cells) != set(self.cells):
            if region.boundary == PERIODIC:
                raise LayoutError("cannot add or remove cells of a periodic layout")
            region = RegionSpec(region.width, region.height, OPEN, tuple(sorted(cells, key=stable_key)))
        return ArrayLayout(cells, region, self.variant)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.name if self.variant else None,
            "boundary": self.region.boundary,
            "width": self.region.width,
            "height": self.region.height,
            "cells": [
                {"q": c.q, "r": c.r, "kind": self.cells[c].kind, "used": self.cells[c].used}
                for c in self.order
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ArrayLayout":
        try:
            variant = DTMBVariant.parse(doc["variant"]) if doc.get("variant") else None
            width, height = int(doc["width"]), int(doc["height"])
            boundary = doc["boundary"]
            cells = {}
            for item in doc["cells"]:
                c = HexCoord(int(item["q"]), int(item["r"]))
                if c in cells:
                    raise LayoutError(f"duplicate cell {tuple(c)}")
                cells[c] = Cell(item["kind"], bool(item.get("used", False)))
        except (KeyError, TypeError) as exc:
            raise LayoutError(f"malformed layout document: {exc!r}") from exc
        full = {HexCoord(q, r) for r in range(height) for q in range(width)}
        explicit = None if set(cells) == full else tuple(sorted(cells, key=stable_key))
        return cls(cells, RegionSpec(width, height, boundary, explicit), variant)


def neighbors(c: HexCoord, layout: ArrayLayout) -> set[HexCoord]:
    """Cells of ``layout`` adjacent to ``c`` (wrapped on periodic layouts)."""
    c = HexCoord(*c)
    if c not in layout.cells:
        raise KeyError(f"{tuple(c)} is not a cell of this layout")
    return set(layout.adjacency[c])


def generate_layout(variant: DTMBVariant, region: RegionSpec) -> ArrayLayout:
    if region.boundary == PERIODIC:
        pw, ph = variant.period
        if region.width % pw or region.height % ph:
            raise LayoutError(
                f"periodic {variant.name} needs width a multiple of {pw} and height a "
                f"multiple of {ph}; got {region.width}x{region.height}"
            )
    cells = {
        c: Cell(SPARE if variant.is_spare(c.q, c.r) else PRIMARY) for c in region.coords()
    }
    return ArrayLayout(cells, region, variant)


def redundancy_ratio(layout: ArrayLayout) -> Fraction:
    n_primary = layout.n_primary
    if n_primary == 0:
        raise ZeroDivisionError("redundancy ratio undefined without primary cells")
    return Fraction(layout.n_spare, n_primary)


@dataclass
class ValidationReport:
    # spare-neighbour count for primaries, primary-neighbour count for spares
    counts: dict[HexCoord, int]
    interior: set[HexCoord]
    violations: list[HexCoord]
    rr: Fraction
    n_primary: int
    n_spare: int
    variant: Optional[DTMBVariant] = None
    expected: Optional[tuple[int, int]] = field(default=None)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.name if self.variant else None,
            "n_primary": self.n_primary,
            "n_spare": self.n_spare,
            "rr": f"{self.rr.numerator}/{self.rr.denominator}",
            "rr_float": float(self.rr),
            "violations": [{"q": c.q, "r": c.r, "count": self.counts[c]} for c in self.violations],
            "cells": [
                {"q": c.q, "r": c.r, "count": n, "interior": c in self.interior}
                for c, n in sorted(self.counts.items(), key=lambda kv: stable_key(kv[0]))
            ],
        }


def validate_layout(layout: ArrayLayout, variant: Optional[DTMBVariant] = None) -> ValidationReport:
    """Count opposite-kind neighbours per cell and flag interior cells that break (s, p_adj).

    ``variant`` defaults to the layout's own.  Layouts without a variant are
    only counted, never flagged.
    """
    variant = variant or layout.variant
    counts, interior, violations = {}, set(), []
    for c in layout.order:
        kind = layout.kind(c)
        other = SPARE if kind == PRIMARY else PRIMARY
        counts[c] = sum(1 for n in layout.adjacency[c] if layout.kind(n) == other)
        if layout.is_interior(c):
            interior.add(c)
            if variant is not None:
                want = variant.spares_per_primary if kind == PRIMARY else variant.primaries_per_spare
                if counts[c] != want:
                    violations.append(c)
    expected = (variant.spares_per_primary, variant.primaries_per_spare) if variant else None
    return ValidationReport(
        counts, interior, violations, redundancy_ratio(layout),
        layout.n_primary, layout.n_spare, variant, expected,
    )


def layout_from_cells(
    cells: Iterable[tuple[int, int]] | Mapping,
    spares: Iterable[tuple[int, int]] = (),
    used: Iterable[tuple[int, int]] = (),
) -> ArrayLayout:
    """Build an open layout from explicit coordinates (handy for hand-made fixtures)."""
    spare_set = {HexCoord(*c) for c in spares}
    used_set = {HexCoord(*c) for c in used}
    coords = sorted({HexCoord(*c) for c in cells} | spare_set, key=stable_key)
    qs = [c.q for c in coords]
    rs = [c.r for c in coords]
    region = RegionSpec(max(qs) - min(qs) + 1, max(rs) - min(rs) + 1, OPEN, tuple(coords))
    layout_cells = {
        c: Cell(SPARE if c in spare_set else PRIMARY, c in used_set) for c in coords
    }
    return ArrayLayout(layout_cells, region)


def sized_layout(variant: DTMBVariant, n_primary: int, boundary: str = OPEN, max_side: int = 80) -> ArrayLayout:
    """Near-square parallelogram layout whose primary count is as close as possible to ``n_primary``.

    Ties go to the squarer region, then the wider one.  Periodic regions are
    restricted to multiples of the variant's period.
    """
    pw, ph = variant.period if boundary == PERIODIC else (1, 1)
    best = None
    for w in range(pw, max_side + 1, pw):
        for h in range(ph, max_side + 1, ph):
            if not 0.5 <= w / h <= 2:
                continue
            n_spare = sum(variant.is_spare(q, r) for r in range(h) for q in range(w))
            key = (abs(w * h - n_spare - n_primary), abs(w - h), -w)
            if best is None or key < best[0]:
                best = (key, w, h)
    return generate_layout(variant, RegionSpec(best[1], best[2], boundary))
