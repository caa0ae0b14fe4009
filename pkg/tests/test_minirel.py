import itertools
import json

import numpy as np
import pytest

from helpers import make_dataset
from minrepfair.fairness import FairnessSpec, InfeasibleError, beta_for, validate
from minrepfair.kmeans import Clustering, best_of, cluster_means, kmeans_cost, kmeanspp_init, lloyd, sq_distances
from minrepfair.minirel import MiniRelConfig, initialize, prefix_mode, run

X6 = np.array([0.0, 1.0, 2.0, 10.0, 11.0, 12.0])


def six_point():
    ds = make_dataset(X6, ["b", "a", "a", "a", "a", "b"])
    return ds, FairnessSpec(0.51, [1, 1], 2)


def nearest(ds, centers):
    d2 = sq_distances(ds.points, centers)
    a = np.argmin(d2, axis=1)
    return Clustering(a, centers, float(d2[np.arange(ds.n), a].sum()))


def global_fair_optimum(ds, spec):
    best = np.inf
    for a in itertools.product(range(spec.K), repeat=ds.n):
        a = np.array(a)
        if len(set(a.tolist())) < spec.K:
            continue
        C = cluster_means(ds.points, a, spec.K)
        cl = Clustering(a, C, kmeans_cost(ds.points, a, C))
        if validate(cl, ds, spec).satisfied:
            best = min(best, cl.cost)
    return best


def test_config_validation():
    spec = FairnessSpec(0.51, [1], 3)
    with pytest.raises(ValueError):
        MiniRelConfig(3, spec, init="bogus")
    with pytest.raises(ValueError):
        MiniRelConfig(3, spec, prefix="bogus")
    with pytest.raises(ValueError):
        MiniRelConfig(2, spec)
    with pytest.raises(ValueError):
        MiniRelConfig(3, spec, L=0)


@pytest.mark.parametrize("seed", range(5))
def test_zero_beta_reproduces_lloyd(seed):
    rng = np.random.default_rng(seed)
    ds = make_dataset(rng.normal(size=(40, 2)), rng.integers(0, 2, size=40))
    K = 3
    centers = kmeanspp_init(ds, K, seed)
    costs = []
    plain = lloyd(ds, centers, trace=costs)
    trace = run(ds, MiniRelConfig(K, FairnessSpec(0.51, [0, 0], K), prefix="off"),
                init=nearest(ds, centers))
    assert trace.converged
    assert np.allclose(trace.objectives[:-1], costs, rtol=0, atol=1e-9)
    assert np.array_equal(trace.clustering.assignment, plain.assignment)


def test_six_point_reaches_global_fair_optimum():
    ds, spec = six_point()
    best = global_fair_optimum(ds, spec)
    assert best == pytest.approx(110.8)
    for init in ("warmstart", "random", "kmeanspp"):
        trace = run(ds, MiniRelConfig(2, spec, init=init, prefix="off"))
        assert trace.success and trace.clustering.cost == pytest.approx(best)


def test_unusable_plan_falls_back_to_full_model():
    # from the k-means split neither cluster can gain a second "b" by moving members in
    ds, spec = six_point()
    trace = run(ds, MiniRelConfig(2, spec, prefix="local"))
    assert trace.prefix_fallback and trace.prefix == "off" and trace.plan is None
    assert trace.success


def test_iris_small_k(iris):
    for K in range(4, 9):
        baseline = best_of(iris, K, 10, seed=0).cost
        spec = FairnessSpec(0.51, beta_for("eqop", iris, 0.51, K), K)
        trace = run(iris, MiniRelConfig(K, spec))
        assert trace.success and trace.prefix == "local"
        assert trace.clustering.cost <= 1.10 * baseline


def test_prefix_mode_resolution(iris):
    K = 4
    spec = FairnessSpec(0.51, [1, 1, 1], K)
    assert prefix_mode(iris, MiniRelConfig(K, spec)) == "local"
    assert prefix_mode(iris, MiniRelConfig(K, FairnessSpec(0.5, [1, 1, 1], K))) == "off"
    assert prefix_mode(iris, MiniRelConfig(K, spec, prefix="weighted")) == "weighted"
    overlap = make_dataset(np.zeros((3, 1)), [0, 0, 1])
    overlap.groups.append(np.array([0, 2]))
    assert prefix_mode(overlap, MiniRelConfig(K, FairnessSpec(0.51, [1, 1, 1], K))) == "off"


def test_initialize_schemes(iris):
    spec = FairnessSpec(0.51, [1, 1, 1], 5)
    ws = initialize(iris, MiniRelConfig(5, spec, restarts=1, seed=3))
    again = lloyd(iris, ws.centers)
    assert np.array_equal(again.assignment, ws.assignment)       # a Lloyd fixed point
    for scheme in ("random", "kmeanspp"):
        cl = initialize(iris, MiniRelConfig(5, spec, init=scheme, seed=3))
        assert cl.centers.shape == (5, iris.points.shape[1])
        assert np.array_equal(cl.assignment, np.argmin(sq_distances(iris.points, cl.centers), axis=1))


def test_more_restarts_never_worse(iris):
    spec = FairnessSpec(0.51, [1, 1, 1], 6)
    for seed in range(5):
        one = initialize(iris, MiniRelConfig(6, spec, restarts=1, seed=seed))
        many = initialize(iris, MiniRelConfig(6, spec, restarts=100, seed=seed))
        assert many.cost <= one.cost + 1e-12


def test_warmstart_needs_fewer_iterations(iris):
    K = 6
    spec = FairnessSpec(0.51, beta_for("eqop", iris, 0.51, K), K)
    iters = {"warmstart": [], "random": []}
    for seed in range(10):
        for init in iters:
            iters[init].append(run(iris, MiniRelConfig(K, spec, init=init, seed=seed, restarts=1)).iterations)
    assert np.mean(iters["warmstart"]) < np.mean(iters["random"])


@pytest.mark.parametrize("seed", range(8))
def test_trace_invariants(seed):
    rng = np.random.default_rng(seed)
    n = 30
    ds = make_dataset(rng.normal(size=(n, 2)), rng.integers(0, 3, size=n))
    K = 4
    spec = FairnessSpec(0.51, [1, 1, 1], K)
    trace = run(ds, MiniRelConfig(K, spec, init="random", seed=seed, prefix="off"))
    obj = np.array(trace.objectives)
    assert np.all(np.diff(obj) <= 1e-9)
    assert trace.converged and trace.iterations <= 100
    assert trace.success and not trace.partial
    cl = trace.clustering
    assert np.allclose(cl.centers, cluster_means(ds.points, cl.assignment, K))
    # fixed point: no single feasible reassignment lowers the cost to these centers
    D = sq_distances(ds.points, cl.centers)
    base = D[np.arange(n), cl.assignment].sum()
    for i in range(n):
        for k in range(K):
            if k == cl.assignment[i]:
                continue
            a = cl.assignment.copy()
            a[i] = k
            moved = Clustering(a, cl.centers, 0.0)
            if validate(moved, ds, spec).satisfied:
                assert D[np.arange(n), a].sum() >= base - 1e-9


def test_infeasible_run_raises_with_diagnostics():
    ds = make_dataset(np.arange(4.0), [0, 1, 1, 1])
    spec = FairnessSpec(1, [4, 4], 4)
    with pytest.raises(InfeasibleError, match="beta"):
        run(ds, MiniRelConfig(4, spec, prefix="off"))


def test_infeasible_at_solve_time():
    # two singletons of group 0 cannot make both clusters pure group 0 and pure group 1
    ds = make_dataset(np.arange(3.0), [0, 1, 1])
    spec = FairnessSpec(1, [2, 0], 2)
    with pytest.raises(InfeasibleError, match="iteration 1"):
        run(ds, MiniRelConfig(2, spec, prefix="off"))


def test_budget_exhaustion_is_partial():
    ds, spec = six_point()
    trace = run(ds, MiniRelConfig(2, spec, prefix="off", node_limit=0))
    assert trace.partial and not trace.success


def test_restricted_W_retry(caplog):
    # W lets only cluster 0 represent either group; both cannot hold a majority there
    ds = make_dataset(np.array([0.0, 0.1, 5.0, 5.1]), [0, 0, 1, 1])
    spec = FairnessSpec(0.51, [1, 1], 2, W=[[True, False], [True, False]])
    trace = run(ds, MiniRelConfig(2, spec, prefix="off"))
    assert "retrying with every pair allowed" in caplog.text
    assert trace.success


def test_trace_json_lines():
    ds, spec = six_point()
    trace = run(ds, MiniRelConfig(2, spec, prefix="off"))
    lines = trace.to_jsonl().splitlines()
    assert len(lines) == trace.iterations
    recs = [json.loads(l) for l in lines]
    assert [r["iteration"] for r in recs] == list(range(1, trace.iterations + 1))
    assert set(recs[0]) == {"iteration", "objective", "assign_objective", "changes", "nodes",
                            "wall_time", "status"}
