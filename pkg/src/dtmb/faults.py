"""Seeded fault-map generation.

Every trial draws from its own PCG64 stream, keyed by numpy's
``SeedSequence(entropy=master, spawn_key=(trial_index,))``.  The stream for a
trial depends only on ``(master, trial_index)``, so trials may be generated in
any order or on any number of workers and still come out identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .lattice import ArrayLayout, HexCoord, LayoutError, stable_key

MASTER_MASK = (1 << 64) - 1


class Seed(NamedTuple):
    master: int
    trial_index: int = 0


def trial_rng(seed: Seed) -> np.random.Generator:
    master, trial = seed
    if not 0 <= master <= MASTER_MASK:
        raise ValueError(f"master seed must be a 64-bit unsigned integer, got {master}")
    if trial < 0:
        raise ValueError(f"trial index must be non-negative, got {trial}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master, spawn_key=(trial,))))


def derive_master(master: int, index: int) -> int:
    """A fresh 64-bit master seed for sub-experiment ``index`` (e.g. one grid point)."""
    state = np.random.SeedSequence(master, spawn_key=(index,)).generate_state(1, np.uint64)
    return int(state[0])


@dataclass(frozen=True)
class FaultMap:
    faulty: frozenset[HexCoord]
    layout_hash: str

    def __len__(self):
        return len(self.faulty)

    def __contains__(self, c):
        return c in self.faulty

    def check(self, layout: ArrayLayout) -> None:
        if self.layout_hash != layout.hash:
            raise LayoutError("fault map was generated for a different layout")
        stray = [c for c in self.faulty if c not in layout.cells]
        if stray:
            raise LayoutError(f"fault map names cells outside the layout: {sorted(stray)[:5]}")

    def to_dict(self) -> dict:
        return {
            "layout_hash": self.layout_hash,
            "faulty": [{"q": c.q, "r": c.r} for c in sorted(self.faulty, key=stable_key)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FaultMap":
        try:
            faulty = frozenset(HexCoord(int(f["q"]), int(f["r"])) for f in doc["faulty"])
            return cls(faulty, str(doc["layout_hash"]))
        except (KeyError, TypeError) as exc:
            raise LayoutError(f"malformed fault map document: {exc!r}") from exc

    @classmethod
    def for_layout(cls, layout: ArrayLayout, faulty) -> "FaultMap":
        fm = cls(frozenset(HexCoord(*c) for c in faulty), layout.hash)
        fm.check(layout)
        return fm


def _check_probability(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"survival probability must lie in [0, 1], got {p}")


def bernoulli_mask(n_cells: int, survival_prob: float, seed: Seed) -> np.ndarray:
    """Boolean fault flags over the stable cell order: cell i fails iff u_i >= p."""
    _check_probability(survival_prob)
    return trial_rng(seed).random(n_cells) >= survival_prob


def exact_indices(n_cells: int, m: int, seed: Seed) -> list[int]:
    """First ``m`` positions of a Fisher-Yates shuffle of ``range(n_cells)``.

    The prefix for ``m`` is a prefix of the one for any larger ``m`` under the
    same seed, which makes exactly-m fault sets nested across ``m``.
    """
    if not 0 <= m <= n_cells:
        raise ValueError(f"need 0 <= m <= {n_cells}, got m={m}")
    rng = trial_rng(seed)
    perm = list(range(n_cells))
    if m == 0:
        return []
    swaps = rng.integers(np.arange(m), n_cells).tolist()
    for i, j in enumerate(swaps):
        perm[i], perm[j] = perm[j], perm[i]
    return perm[:m]


def inject_bernoulli(layout: ArrayLayout, survival_prob: float, seed: Seed) -> FaultMap:
    mask = bernoulli_mask(layout.n_cells, survival_prob, seed)
    order = layout.order
    return FaultMap(frozenset(order[i] for i in np.flatnonzero(mask)), layout.hash)


def inject_exact(layout: ArrayLayout, m: int, seed: Seed) -> FaultMap:
    order = layout.order
    return FaultMap(frozenset(order[i] for i in exact_indices(len(order), m, seed)), layout.hash)
