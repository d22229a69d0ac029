import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtmb.faults import FaultMap, Seed, inject_bernoulli, inject_exact
from dtmb.lattice import DTMB16, DTMB26, DTMB44, Cell, HexCoord, LayoutError, RegionSpec, generate_layout
from dtmb.reconfig import (
    ALL_PRIMARIES,
    USED_ONLY,
    FastRepairChecker,
    RepairGraph,
    augmenting_matching,
    build_repair_graph,
    check_plan,
    is_hall_violator,
    max_matching,
    plan_repair,
)

from oracles import brute_max_matching_size, hall_condition_holds, repairable_by_hall


@pytest.fixture(scope="module")
def d16():
    return generate_layout(DTMB16, RegionSpec(14, 14, "periodic"))


@pytest.fixture(scope="module")
def d26():
    return generate_layout(DTMB26, RegionSpec(12, 12, "periodic"))


def _kinds(layout):
    return {tuple(c): layout.kind(c) for c in layout.cells}


def _wrap(layout):
    return (layout.region.width, layout.region.height) if layout.periodic else None


def test_graph_without_faults(d16):
    g = build_repair_graph(d16, FaultMap.for_layout(d16, []))
    assert g.A == () and g.n_edges == 0
    assert len(g.B) == d16.n_spare


def test_graph_single_fault(d16):
    a = HexCoord(1, 0)
    g = build_repair_graph(d16, FaultMap.for_layout(d16, [a]))
    assert g.A == (a,)
    assert len(g.B) == d16.n_spare
    assert g.E[a] == (HexCoord(0, 0),)


def test_graph_faulty_spare_drops_edge(d16):
    a, spare = HexCoord(1, 0), HexCoord(0, 0)
    g = build_repair_graph(d16, FaultMap.for_layout(d16, [a, spare]))
    assert g.E[a] == ()
    assert spare not in g.B


def test_graph_rejects_foreign_fault_map(d16, d26):
    fm = FaultMap.for_layout(d26, [HexCoord(1, 1)])
    with pytest.raises(LayoutError):
        build_repair_graph(d16, fm)
    with pytest.raises(ValueError):
        build_repair_graph(d26, fm, scope="everything")


def test_matching_small_cases():
    assert max_matching(RepairGraph((), (), {})) == {}
    g = RepairGraph(("a1", "a2"), ("b1",), {"a1": ("b1",), "a2": ("b1",)})
    assert len(max_matching(g)) == 1


def test_matching_beats_greedy():
    # first-come greedy gives a1 the shared spare b1 and strands a2
    adj = {"a1": ("b1", "b2"), "a2": ("b1",)}
    assert augmenting_matching(["a1", "a2"], adj) == {"a1": "b2", "a2": "b1"}


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 10), st.integers(0, 10), st.floats(0.0, 1.0), st.randoms(use_true_random=False))
def test_matching_is_maximum(n_left, n_right, density, rnd):
    left = [f"a{i}" for i in range(n_left)]
    right = [f"b{j}" for j in range(n_right)]
    adj = {a: tuple(b for b in right if rnd.random() < density) for a in left}
    g = RepairGraph(tuple(left), tuple(right), adj)
    m = max_matching(g)
    assert len(set(m.values())) == len(m)
    assert all(b in adj[a] for a, b in m.items())
    assert len(m) == brute_max_matching_size(left, adj)
    assert max_matching(g) == m


def test_plan_without_faults(d26):
    plan = plan_repair(d26, FaultMap.for_layout(d26, []))
    assert plan.repairable and plan.assignment == {} and plan.witness is None


def test_plan_two_faults_sharing_only_spare(d16):
    spare = HexCoord(0, 0)
    a1, a2 = sorted(d16.adjacency[spare])[:2]
    fm = FaultMap.for_layout(d16, [a1, a2])
    plan = plan_repair(d16, fm)
    assert not plan.repairable
    assert set(plan.witness) == {a1, a2}
    check_plan(d16, fm, plan)


def test_plan_matches_hall_oracle_on_random_maps(d26):
    kinds, wrap = _kinds(d26), _wrap(d26)
    checked = unrepairable = 0
    t = 0
    while checked < 1000:
        fm = inject_bernoulli(d26, 0.88, Seed(2024, t))
        t += 1
        g = build_repair_graph(d26, fm)
        if len(g.A) > 12:
            continue
        plan = plan_repair(d26, fm)
        check_plan(d26, fm, plan)
        faulty = {tuple(c) for c in fm.faulty}
        assert plan.repairable == repairable_by_hall(kinds, faulty, wrap)
        unrepairable += not plan.repairable
        checked += 1
    assert 50 < unrepairable < 950


def test_witness_is_hall_violator_whenever_emitted(d16):
    for t in range(300):
        fm = inject_exact(d16, 25, Seed(5, t))
        plan = plan_repair(d16, fm)
        check_plan(d16, fm, plan)
        if not plan.repairable:
            g = build_repair_graph(d16, fm)
            assert is_hall_violator(plan.witness, g.E)
            assert not hall_condition_holds(g.A, g.E)


def test_fault_monotonicity(d26):
    rng = random.Random(7)
    for t in range(60):
        fm = inject_exact(d26, 30, Seed(77, t))
        chain = sorted(fm.faulty)
        rng.shuffle(chain)
        verdicts = [
            plan_repair(d26, FaultMap.for_layout(d26, chain[:k])).repairable for k in range(len(chain) + 1)
        ]
        # once unrepairable, adding faults never restores repairability
        assert verdicts == sorted(verdicts, reverse=True)


def test_scope_monotonicity(d26):
    half = {c for i, c in enumerate(d26.primaries) if i % 2 == 0}
    layout = d26.replace_cells({c: Cell("primary", True) for c in half})
    for t in range(200):
        fm = inject_bernoulli(layout, 0.85, Seed(3, t))
        if plan_repair(layout, fm, ALL_PRIMARIES).repairable:
            assert plan_repair(layout, fm, USED_ONLY).repairable


def test_used_only_ignores_unused_faults():
    layout = generate_layout(DTMB44, RegionSpec(4, 4, "periodic"))
    used = HexCoord(0, 0)
    layout = layout.replace_cells({used: Cell("primary", True)})
    unused = [c for c in layout.primaries if c != used]
    spares = list(layout.spares)
    fm = FaultMap.for_layout(layout, unused + spares)
    assert plan_repair(layout, fm, USED_ONLY).repairable
    assert not plan_repair(layout, fm, ALL_PRIMARIES).repairable


def test_plan_is_deterministic(d26):
    fm = inject_exact(d26, 20, Seed(1, 1))
    first = plan_repair(d26, fm)
    for _ in range(3):
        assert plan_repair(d26, fm) == first
    rebuilt = generate_layout(DTMB26, RegionSpec(12, 12, "periodic"))
    assert plan_repair(rebuilt, FaultMap.for_layout(rebuilt, fm.faulty)).to_dict() == first.to_dict()


def test_fast_checker_agrees_with_plan(d26):
    checker = FastRepairChecker(d26)
    for t in range(300):
        fm = inject_bernoulli(d26, 0.8, Seed(9, t))
        idx = [d26.index[c] for c in fm.faulty]
        assert checker.repairable_indices(idx) == plan_repair(d26, fm).repairable


def test_plan_json_shape(d16):
    spare = HexCoord(0, 0)
    a1, a2 = sorted(d16.adjacency[spare])[:2]
    doc = plan_repair(d16, FaultMap.for_layout(d16, [a1, a2])).to_dict()
    assert doc["verdict"] == "unrepairable"
    assert len(doc["assignment"]) == 1
    assert set(doc["assignment"][0]) == {"from", "to"}
    assert {(w["q"], w["r"]) for w in doc["witness"]} == {tuple(a1), tuple(a2)}
    ok = plan_repair(d16, FaultMap.for_layout(d16, [a1])).to_dict()
    assert ok == {"verdict": "repairable", "assignment": [{"from": {"q": a1.q, "r": a1.r}, "to": {"q": 0, "r": 0}}], "witness": None}
