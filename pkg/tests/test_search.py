import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ptc_forge.cost import REFERENCE_CONSTRAINTS_K16, Constraints, check_constraints
from ptc_forge.errors import InfeasibleConstraints, InvalidArgument
from ptc_forge.search import (
    Evaluator,
    SearchConfig,
    crowding_distance,
    evaluate,
    hypervolume,
    mutation_rate,
    nondominated_sort,
    random_search,
    run_search,
    select_survivors,
)
from ptc_forge.topology import make_baseline, pad_gene


def dominates(a, b):
    return all(x >= y for x, y in zip(a, b)) and any(x > y for x, y in zip(a, b))


def peel_oracle(points):
    left = list(range(len(points)))
    fronts = []
    while left:
        front = [i for i in left if not any(dominates(points[j], points[i]) for j in left if j != i)]
        fronts.append(front)
        left = [i for i in left if i not in front]
    return fronts


def box_union_oracle(points, ref):
    # inclusion-exclusion over boxes [ref, p]
    total = 0.0
    for r in range(1, len(points) + 1):
        for combo in itertools.combinations(points, r):
            corner = np.min(combo, axis=0)
            total += (-1) ** (r + 1) * np.prod(np.maximum(corner - ref, 0))
    return total


# -- evaluation -------------------------------------------------------------

def test_evaluate_butterfly(gf):
    ind = evaluate(make_baseline("butterfly", 16), gf, REFERENCE_CONSTRAINTS_K16)
    assert np.isfinite(ind.objectives).all()
    assert check_constraints(ind.cost, REFERENCE_CONSTRAINTS_K16)
    assert ind.objectives[1] == ind.cost.cd and ind.objectives[2] == ind.cost.ee


def test_evaluator_cache(gf):
    ev = Evaluator(gf, REFERENCE_CONSTRAINTS_K16)
    g = make_baseline("butterfly", 16)
    a = ev.evaluate(g)
    b = ev.evaluate(pad_gene(g, 32))
    assert ev.n_scored == 1
    assert np.array_equal(a.objectives, b.objectives) and a.scores == b.scores


def test_infeasible_gene_rejected(gf):
    ev = Evaluator(gf, Constraints(area=(0.0, 1.0)))
    with pytest.raises(InfeasibleConstraints):
        ev.evaluate(make_baseline("butterfly", 16))
    assert ev.n_scored == 0


def test_parallel_evaluation_matches_serial(gf):
    genes = [make_baseline(s, 8) for s in ("butterfly", "mmi-interlaced")]
    c = Constraints()
    serial = Evaluator(gf, c).evaluate_many(genes)
    parallel = Evaluator(gf, c, jobs=2).evaluate_many(genes)
    for a, b in zip(serial, parallel):
        assert np.array_equal(a.objectives, b.objectives)


# -- sorting ----------------------------------------------------------------

def test_sort_examples():
    assert nondominated_sort([[1.0, 1.0, 1.0]]) == [[0]]
    assert nondominated_sort([[1, 1, 1], [2, 2, 2]]) == [[1], [0]]


def test_sort_matches_oracle():
    rng = np.random.default_rng(0)
    for trial in range(10):
        pts = rng.integers(0, 6, (200, 3)).astype(float) if trial % 2 else rng.standard_normal((200, 3))
        assert nondominated_sort(pts) == peel_oracle(pts.tolist())


def test_sort_rejects_nan():
    with pytest.raises(InvalidArgument):
        nondominated_sort([[0.0, np.nan]])


def test_crowding_examples():
    assert np.isinf(crowding_distance([[1, 2], [3, 4]])).all()
    d = crowding_distance([[0.0, 5, 5], [1.0, 5, 5], [2.0, 5, 5]])
    assert np.isinf(d[0]) and np.isinf(d[2]) and d[1] == pytest.approx(1.0)


@given(st.integers(0, 2**31))
def test_crowding_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((9, 3))
    perm = rng.permutation(9)
    assert np.array_equal(crowding_distance(pts)[perm], crowding_distance(pts[perm]))


def test_survivors_identity_and_dominating_set():
    rng = np.random.default_rng(1)
    pts = rng.standard_normal((10, 3))
    assert select_survivors(pts, 10) == list(range(10))
    strong = pts + 100
    both = np.vstack([pts, strong])
    assert select_survivors(both, 10) == list(range(10, 20))


def test_survivor_dominance_audit():
    rng = np.random.default_rng(2)
    for _ in range(20):
        pts = rng.integers(0, 5, (60, 3)).astype(float)
        keep = set(select_survivors(pts, 25))
        fronts = nondominated_sort(pts)
        rank = {i: r for r, f in enumerate(fronts) for i in f}
        worst_kept = max(rank[i] for i in keep)
        assert all(rank[i] >= worst_kept for i in range(60) if i not in keep)
        assert all(not dominates(pts[j], pts[i]) for i in keep for j in range(60)
                   if j not in keep and rank[j] < rank[i])


# -- hypervolume ------------------------------------------------------------

@pytest.mark.parametrize("dim", [2, 3])
def test_hypervolume_matches_inclusion_exclusion(dim):
    rng = np.random.default_rng(dim)
    for _ in range(30):
        pts = rng.uniform(0, 1, (int(rng.integers(1, 8)), dim))
        ref = np.zeros(dim)
        assert hypervolume(pts, ref) == pytest.approx(box_union_oracle(pts, ref), rel=1e-10)


def test_hypervolume_edge_cases():
    assert hypervolume(np.zeros((0, 3)), np.zeros(3)) == 0.0
    assert hypervolume([[1, 1, 1]], [1, 0, 0]) == 0.0
    assert hypervolume([[2, 3, 4]], [1, 1, 1]) == pytest.approx(6.0)


# -- schedule ---------------------------------------------------------------

def test_mutation_rate_schedule():
    cfg = SearchConfig(max_iters=80, phase2_iters=20)
    rates = [mutation_rate(i, cfg) for i in range(1, 81)]
    assert rates[0] == pytest.approx(0.1)
    assert rates[59] == pytest.approx(0.02)
    assert all(r == 0.02 for r in rates[60:])
    assert all(a >= b - 1e-15 for a, b in zip(rates, rates[1:]))
    with pytest.raises(InvalidArgument):
        mutation_rate(0, cfg)
    with pytest.raises(InvalidArgument):
        mutation_rate(81, cfg)


def test_constant_schedule():
    cfg = SearchConfig(max_iters=10, scheduler="constant", p_mu0=0.3)
    assert {mutation_rate(i, cfg) for i in range(1, 11)} == {0.3}


@pytest.mark.parametrize("kwargs", [
    {"phase2_iters": 80}, {"p_co": 2.0}, {"scheduler": "linear"}, {"disabled_ops": ("Jump",)},
    {"pop_size": 0}, {"baselines": ("spiral",)},
])
def test_search_config_validation(kwargs):
    with pytest.raises(InvalidArgument):
        SearchConfig(**kwargs)


def test_search_config_round_trip():
    cfg = SearchConfig(k=8, seed=3, constraints=REFERENCE_CONSTRAINTS_K16, disabled_ops=("RS",), b_range=(2, 10))
    again = SearchConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg


# -- loop -------------------------------------------------------------------

def small_cfg(**kw):
    base = dict(k=16, pop_size=12, max_iters=8, seed=4)
    base.update(kw)
    return SearchConfig(**base)


def test_zero_iterations_returns_initial_front(gf):
    res = run_search(small_cfg(max_iters=0), gf)
    assert len(res.history) == 1
    assert len(res.population) == 12 + 1  # the butterfly is the only feasible baseline
    front_keys = {tuple(ind.objectives) for ind in res.front}
    pts = np.array([ind.objectives for ind in res.population])
    assert front_keys == {tuple(pts[i]) for i in nondominated_sort(pts)[0]}


def test_search_deterministic(gf):
    a = run_search(small_cfg(), gf)
    b = run_search(small_cfg(), gf)
    assert a.history == b.history
    assert [ind.to_dict() for ind in a.front] == [ind.to_dict() for ind in b.front]


def test_search_elitism_and_front(gf):
    res = run_search(small_cfg(max_iters=12), gf)
    best = np.array([[h["best"][k] for k in ("score", "cd", "ee")] for h in res.history])
    assert (np.diff(best, axis=0) >= 0).all()
    pts = np.array([ind.objectives for ind in res.front])
    for i, j in itertools.permutations(range(len(pts)), 2):
        assert not dominates(pts[i], pts[j])
    assert all(check_constraints(ind.cost, res.constraints) for ind in res.front)
    assert [h["iter"] for h in res.history] == list(range(13))
    assert res.history[-1]["p_mu"] == pytest.approx(0.02)


def test_search_trace_lines(gf):
    trace = []
    run_search(small_cfg(max_iters=2), gf, trace=trace)
    assert trace and {t.generation for t in trace} == {1, 2}


def test_random_search_budget(gf):
    res = random_search(small_cfg(), gf, budget=30)
    assert len(res.population) == 31
    assert res.front
