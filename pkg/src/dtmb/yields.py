"""Yield of defect-tolerant arrays: closed forms, exact enumeration and Monte Carlo.

Every cell, primary or spare, survives independently with probability ``p``.
An array is good when every faulty primary in scope can be handed to a
distinct, adjacent, fault-free spare.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .faults import Seed, bernoulli_mask, derive_master, exact_indices
from .lattice import SPARE, ArrayLayout, redundancy_ratio
from .reconfig import ALL_PRIMARIES, USED_ONLY, FastRepairChecker, _check_scope

ANALYTIC = "analytic"
EXACT = "exact"
MONTE_CARLO = "monte-carlo"

DEFAULT_RUNS = 10_000
ENUMERATION_LIMIT = 24

CSV_HEADER = ("p_or_m", "runs", "successes", "yield", "std_error", "method")


class EnumerationBoundError(ValueError):
    """Raised when exact enumeration is asked for on too large a layout."""


@dataclass(frozen=True)
class YieldEstimate:
    value: float
    method: str
    runs: Optional[int] = None
    successes: Optional[int] = None
    std_error: Optional[float] = None
    params: dict = field(default_factory=dict, compare=False)

    def band(self, k: float = 3.0) -> tuple[float, float]:
        se = self.std_error or 0.0
        return self.value - k * se, self.value + k * se


@dataclass(frozen=True)
class EffectiveYield:
    value: float
    yield_input: float
    rr_input: float
    # the same quantity via Y / (1 + RR), kept for cross-checking
    value_from_rr: float


def _check_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"survival probability must lie in [0, 1], got {p}")


# -- closed forms ------------------------------------------------------------


def analytic_yield_no_redundancy(survival_prob: float, n: int) -> YieldEstimate:
    """All ``n`` cells must survive: ``p**n``."""
    _check_p(survival_prob)
    if n < 1:
        raise ValueError("n must be at least 1")
    return YieldEstimate(survival_prob**n, ANALYTIC, params={"survival_prob": survival_prob, "n": n, "model": "none"})


def cluster_yield_dtmb16(p: float) -> float:
    """One spare with its six primaries survives iff at most one of the seven cells fails."""
    return p**7 + 7 * p**6 * (1 - p)


def analytic_yield_dtmb16(survival_prob: float, n: int) -> YieldEstimate:
    """``n`` primaries grouped into ``n/6`` independent seven-cell clusters.

    The exponent is real, so ``n`` need not be a multiple of 6.
    """
    _check_p(survival_prob)
    if n < 1:
        raise ValueError("n must be at least 1")
    value = cluster_yield_dtmb16(survival_prob) ** (n / 6)
    return YieldEstimate(value, ANALYTIC, params={"survival_prob": survival_prob, "n": n, "model": "dtmb16"})


# -- exact enumeration ---------------------------------------------------------


def exact_yield(layout: ArrayLayout, survival_prob: float, scope: str = ALL_PRIMARIES) -> YieldEstimate:
    """Probability-weighted sum over every fault pattern of the layout.

    Repairability is decided with Hall's condition rather than a matching: a
    set of faulty primaries is repairable iff every subset of it has at least
    as many fault-free adjacent spares as members.  For each pattern of
    surviving spares this is a subset-closure over the primaries, evaluated
    for all primary patterns at once.
    """
    _check_p(survival_prob)
    _check_scope(scope)
    if layout.n_cells > ENUMERATION_LIMIT:
        raise EnumerationBoundError(
            f"exact enumeration is limited to {ENUMERATION_LIMIT} cells "
            f"(layout has {layout.n_cells}); use Monte Carlo instead"
        )
    p, q = survival_prob, 1.0 - survival_prob
    spares = layout.spares
    spare_bit = {c: 1 << i for i, c in enumerate(spares)}
    prims = layout.used if scope == USED_ONLY else layout.primaries
    k, ns = len(prims), len(spares)

    nbr = [
        sum(spare_bit[n] for n in layout.adjacency[a] if layout.kind(n) == SPARE) for a in prims
    ]
    subsets = np.arange(1 << k, dtype=np.int64)
    hood = np.zeros(1 << k, dtype=np.int64)
    for i, mask in enumerate(nbr):
        hood[(subsets >> i) & 1 == 1] |= mask
    size = np.bitwise_count(subsets).astype(np.int64)
    weight = np.power(q, size) * np.power(p, k - size)

    total = 0.0
    for alive in range(1 << ns):
        n_alive = alive.bit_count()
        w_spares = p**n_alive * q ** (ns - n_alive)
        if w_spares == 0.0:
            continue
        ok = np.bitwise_count(hood & alive).astype(np.int64) >= size
        for i in range(k):
            view = ok.reshape(-1, 2, 1 << i)
            view[:, 1, :] &= view[:, 0, :]
        total += w_spares * float(weight[ok].sum())
    value = min(1.0, max(0.0, total))
    return YieldEstimate(value, EXACT, params={"survival_prob": p, "layout": layout.hash, "scope": scope})


# -- Monte Carlo ---------------------------------------------------------------


def _count_bernoulli(layout, scope, survival_prob, master, start, stop) -> int:
    checker = FastRepairChecker(layout, scope)
    n = layout.n_cells
    return sum(
        checker.repairable_mask(bernoulli_mask(n, survival_prob, Seed(master, t)))
        for t in range(start, stop)
    )


def _count_exact(layout, scope, m, master, start, stop) -> int:
    checker = FastRepairChecker(layout, scope)
    n = layout.n_cells
    return sum(
        checker.repairable_indices(exact_indices(n, m, Seed(master, t))) for t in range(start, stop)
    )


def _mfault_chunk(layout, scope, m_grid, master, start, stop) -> list[int]:
    # m_grid ascending.  Exactly-m sets are nested in m for a fixed trial seed
    # and repairability is inherited by subsets, so each trial passes a prefix
    # of the grid; bisect for its length.
    checker = FastRepairChecker(layout, scope)
    n = layout.n_cells
    passed = [0] * (len(m_grid) + 1)
    top = max(m_grid) if m_grid else 0
    for t in range(start, stop):
        prefix = exact_indices(n, top, Seed(master, t))
        lo, hi = 0, len(m_grid)
        while lo < hi:
            mid = (lo + hi) // 2
            if checker.repairable_indices(prefix[: m_grid[mid]]):
                lo = mid + 1
            else:
                hi = mid
        passed[lo] += 1
    # trials passing exactly k grid points contribute to points 0..k-1
    counts, running = [0] * len(m_grid), 0
    for j in range(len(m_grid) - 1, -1, -1):
        running += passed[j + 1]
        counts[j] = running
    return counts


def _chunks(runs: int, jobs: int) -> list[tuple[int, int]]:
    jobs = max(1, min(jobs, runs))
    bounds = [runs * i // jobs for i in range(jobs + 1)]
    return [(bounds[i], bounds[i + 1]) for i in range(jobs)]


def _run_chunked(fn, args: tuple, runs: int, jobs: int):
    chunks = _chunks(runs, jobs)
    if len(chunks) == 1:
        return [fn(*args, *chunks[0])]
    with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
        futures = [pool.submit(fn, *args, start, stop) for start, stop in chunks]
        return [f.result() for f in futures]


def _mc_estimate(successes: int, runs: int, params: dict) -> YieldEstimate:
    v = successes / runs
    return YieldEstimate(v, MONTE_CARLO, runs, successes, math.sqrt(v * (1 - v) / runs), params)


def mc_yield(
    layout: ArrayLayout,
    survival_prob: float,
    runs: int = DEFAULT_RUNS,
    master_seed: int = 0,
    scope: str = ALL_PRIMARIES,
    jobs: int = 1,
) -> YieldEstimate:
    _check_p(survival_prob)
    _check_scope(scope)
    if runs < 1:
        raise ValueError("runs must be at least 1")
    parts = _run_chunked(_count_bernoulli, (layout, scope, survival_prob, master_seed), runs, jobs)
    params = {"survival_prob": survival_prob, "layout": layout.hash, "scope": scope, "master_seed": master_seed}
    return _mc_estimate(sum(parts), runs, params)


def mfault_yield(
    layout: ArrayLayout,
    m: int,
    runs: int = DEFAULT_RUNS,
    master_seed: int = 0,
    scope: str = ALL_PRIMARIES,
    jobs: int = 1,
) -> YieldEstimate:
    """Fraction of uniformly drawn exactly-``m`` fault maps that are repairable."""
    _check_scope(scope)
    if not 0 <= m <= layout.n_cells:
        raise ValueError(f"need 0 <= m <= {layout.n_cells}, got m={m}")
    if runs < 1:
        raise ValueError("runs must be at least 1")
    parts = _run_chunked(_count_exact, (layout, scope, m, master_seed), runs, jobs)
    params = {"m": m, "layout": layout.hash, "scope": scope, "master_seed": master_seed}
    return _mc_estimate(sum(parts), runs, params)


def mfault_curve(
    layout: ArrayLayout,
    m_grid: Sequence[int],
    runs: int = DEFAULT_RUNS,
    master_seed: int = 0,
    scope: str = ALL_PRIMARIES,
    jobs: int = 1,
) -> list[tuple[int, YieldEstimate]]:
    """m-fault yields over a grid, with common random numbers across ``m``.

    Trial ``t`` uses seed ``(master_seed, t)`` at every grid point, so each
    point equals ``mfault_yield(layout, m, runs, master_seed, scope)`` and the
    curve is nonincreasing in ``m`` by construction.
    """
    _check_scope(scope)
    for m in m_grid:
        if not 0 <= m <= layout.n_cells:
            raise ValueError(f"need 0 <= m <= {layout.n_cells}, got m={m}")
    if runs < 1:
        raise ValueError("runs must be at least 1")
    ordered = sorted(set(m_grid))
    parts = _run_chunked(_mfault_chunk, (layout, scope, ordered, master_seed), runs, jobs)
    totals = {m: sum(part[j] for part in parts) for j, m in enumerate(ordered)}
    return [
        (m, _mc_estimate(totals[m], runs, {"m": m, "layout": layout.hash, "scope": scope, "master_seed": master_seed}))
        for m in m_grid
    ]


# -- effective yield and sweeps ------------------------------------------------


def effective_yield(y: Union[YieldEstimate, float], layout: ArrayLayout) -> EffectiveYield:
    """Yield discounted by the area spent on spares: ``Y * n / N``."""
    value = y.value if isinstance(y, YieldEstimate) else float(y)
    n, N = layout.n_primary, layout.n_cells
    rr = redundancy_ratio(layout)
    return EffectiveYield(value * n / N, value, float(rr), value / (1 + float(rr)))


class AnalyticModel(NamedTuple):
    kind: str  # "dtmb16" or "none"
    n: int

    def estimate(self, p: float) -> YieldEstimate:
        if self.kind == "dtmb16":
            return analytic_yield_dtmb16(p, self.n)
        if self.kind == "none":
            return analytic_yield_no_redundancy(p, self.n)
        raise ValueError(f"unknown analytic model {self.kind!r}")


def yield_sweep(
    model: Union[ArrayLayout, AnalyticModel],
    p_grid: Sequence[float],
    runs: int = DEFAULT_RUNS,
    master_seed: int = 0,
    scope: str = ALL_PRIMARIES,
    jobs: int = 1,
    method: str = MONTE_CARLO,
) -> list[tuple[float, YieldEstimate]]:
    """One yield estimate per grid point.

    For layouts, grid point ``i`` runs Monte Carlo under master seed
    ``derive_master(master_seed, i)`` (or exact enumeration when ``method`` is
    ``"exact"``).
    """
    for p in p_grid:
        _check_p(p)
    out = []
    for i, p in enumerate(p_grid):
        if isinstance(model, AnalyticModel):
            est = model.estimate(p)
        elif method == EXACT:
            est = exact_yield(model, p, scope)
        else:
            est = mc_yield(model, p, runs, derive_master(master_seed, i), scope, jobs)
        out.append((p, est))
    return out


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def curve_to_csv(curve: Sequence[tuple[float, YieldEstimate]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for x, est in curve:
        key = format(x, ".12g") if isinstance(x, float) else str(x)
        writer.writerow([key, _fmt(est.runs), _fmt(est.successes), _fmt(est.value), _fmt(est.std_error), est.method])
    return buf.getvalue()


def crossover(xs: Sequence[float], a: Sequence[float], b: Sequence[float]) -> Optional[float]:
    """First x where ``a - b`` changes sign, linearly interpolated; None if it never does."""
    d = [ai - bi for ai, bi in zip(a, b)]
    for i in range(1, len(d)):
        if d[i - 1] == 0:
            return xs[i - 1]
        if d[i - 1] * d[i] < 0:
            t = d[i - 1] / (d[i - 1] - d[i])
            return xs[i - 1] + t * (xs[i] - xs[i - 1])
    return None
