"""Defect-tolerant digital-microfluidic arrays with interstitial spare cells."""

from .faults import FaultMap, Seed, inject_bernoulli, inject_exact
from .lattice import (
    DTMB16,
    DTMB26,
    DTMB36,
    DTMB44,
    VARIANTS,
    ArrayLayout,
    DTMBVariant,
    HexCoord,
    LayoutError,
    RegionSpec,
    generate_layout,
    neighbors,
    redundancy_ratio,
    validate_layout,
)
from .reconfig import build_repair_graph, max_matching, plan_repair
from .yields import (
    YieldEstimate,
    analytic_yield_dtmb16,
    analytic_yield_no_redundancy,
    effective_yield,
    exact_yield,
    mc_yield,
    mfault_curve,
    mfault_yield,
    yield_sweep,
)

__version__ = "0.1.0"
