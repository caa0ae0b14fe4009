import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from helpers import enumerate_binary, random_binary_model
from minrepfair.milp import Basis, LpProblem, MilpModel, simplex, solve_lp, solve_milp, warm_start


def lp_model(c, rows, lb=0.0, ub=10.0):
    m = MilpModel()
    m.add_vars(len(c), lb, ub, False, c)
    for coefs, sense, rhs in rows:
        m.add_constr(np.arange(len(c)), coefs, sense, rhs)
    return m


def highs(model):
    c, A, senses, rhs, lb, ub, _ = model.arrays()
    A = A.toarray()
    le = [i for i, s in enumerate(senses) if s == "<="]
    ge = [i for i, s in enumerate(senses) if s == ">="]
    eq = [i for i, s in enumerate(senses) if s == "="]
    A_ub = np.vstack([A[le], -A[ge]]) if le or ge else None
    b_ub = np.concatenate([rhs[le], -rhs[ge]]) if le or ge else None
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A[eq] if eq else None, b_eq=rhs[eq] if eq else None,
                  bounds=list(zip(lb, ub)), method="highs")
    return res


def test_lp_single_bound_example():
    m = lp_model([1.0], [([1.0], ">=", 3.0)])
    r = solve_lp(m)
    assert r.status == "optimal" and r.objective == pytest.approx(3.0) and r.x[0] == pytest.approx(3.0)


def test_lp_infeasible_example():
    m = lp_model([1.0], [([1.0], ">=", 2.0), ([1.0], "<=", 1.0)])
    assert solve_lp(m).status == "infeasible"


def test_lp_unbounded():
    m = lp_model([-1.0, 0.0], [([1.0, -1.0], "<=", 1.0)], ub=np.inf)
    assert solve_lp(m).status == "unbounded"


def test_lp_bounds_only():
    m = MilpModel()
    m.add_vars(3, [-1, 0, 2], [1, 5, 3], False, [1.0, -2.0, 0.0])
    r = solve_lp(m)
    assert r.objective == pytest.approx(-11.0)


@pytest.mark.parametrize("seed", range(100))
def test_lp_matches_reference_oracle(seed):
    rng = np.random.default_rng(seed)
    n, m = 10, 8
    c = rng.integers(-9, 10, size=n).astype(float)
    rows = []
    for _ in range(m):
        coefs = rng.integers(-5, 6, size=n).astype(float)
        rows.append((coefs, str(rng.choice(["<=", ">=", "="])), float(rng.integers(-10, 30))))
    model = lp_model(c, rows, lb=rng.integers(-5, 1, size=n), ub=rng.integers(1, 8, size=n))
    ours, ref = solve_lp(model), highs(model)
    if ref.status == 2:
        assert ours.status == "infeasible"
    else:
        assert ref.status == 0
        assert ours.status == "optimal"
        assert ours.objective == pytest.approx(ref.fun, abs=1e-6)
        assert model.max_violation(ours.x) <= 1e-7


def vertex_enumeration(model):
    """Optimum of a tiny bounded LP by trying every square active set."""
    c, A, senses, rhs, lb, ub, _ = model.arrays()
    A = A.toarray()
    n = len(c)
    planes = [(A[i], rhs[i]) for i in range(A.shape[0])]
    planes += [(np.eye(n)[j], lb[j]) for j in range(n)] + [(np.eye(n)[j], ub[j]) for j in range(n)]
    best = np.inf
    for combo in itertools.combinations(range(len(planes)), n):
        M = np.array([planes[i][0] for i in combo])
        if abs(np.linalg.det(M)) < 1e-9:
            continue
        x = np.linalg.solve(M, np.array([planes[i][1] for i in combo]))
        if model.max_violation(x) <= 1e-9:
            best = min(best, float(c @ x))
    return best


@pytest.mark.parametrize("seed", range(30))
def test_lp_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(1000 + seed)
    n = 3
    rows = [(rng.integers(-4, 5, size=n).astype(float), str(rng.choice(["<=", ">="])),
             float(rng.integers(-4, 8))) for _ in range(3)]
    model = lp_model(rng.integers(-5, 6, size=n).astype(float), rows, lb=-2.0, ub=3.0)
    ref = vertex_enumeration(model)
    ours = solve_lp(model)
    if np.isinf(ref):
        assert ours.status == "infeasible"
    else:
        assert ours.objective == pytest.approx(ref, abs=1e-7)


def test_degenerate_cycling_example():
    # classic example on which textbook Dantzig pricing cycles
    m = MilpModel()
    m.add_vars(4, 0, np.inf, False, [-0.75, 20.0, -0.5, 6.0])
    m.add_constr([0, 1, 2, 3], [0.25, -8, -1, 9], "<=", 0)
    m.add_constr([0, 1, 2, 3], [0.5, -12, -0.5, 3], "<=", 0)
    m.add_constr([2], [1.0], "<=", 1)
    r = solve_lp(m)
    assert r.status == "optimal" and r.objective == pytest.approx(-1.25)


@pytest.mark.parametrize("seed", range(10))
def test_bland_from_the_start_agrees(seed, monkeypatch):
    rng = np.random.default_rng(seed)
    model = random_binary_model(rng, 8, 5)
    normal = solve_lp(model)
    monkeypatch.setattr(simplex, "DEGENERATE_LIMIT", 0)
    bland = solve_lp(model)
    assert normal.status == bland.status
    if normal.status == "optimal":
        assert bland.objective == pytest.approx(normal.objective, abs=1e-9)


def test_lp_warm_start_from_basis():
    for seed in range(50):
        model = random_binary_model(np.random.default_rng(seed), 10, 6)
        first = solve_lp(model)
        if first.status == "optimal":
            break
    assert first.status == "optimal"
    again = solve_lp(model, start=first.basis)
    assert again.objective == pytest.approx(first.objective)
    assert again.iterations <= first.iterations
    assert isinstance(first.basis, Basis)
    assert LpProblem.from_model(model).n == 10


def test_knapsack_example():
    m = MilpModel()
    m.add_vars(2, 0, 1, True, [-3.0, -2.0])
    m.add_constr([0, 1], [1, 1], "<=", 1)
    sol = solve_milp(m)
    assert sol.status == "optimal" and sol.objective == -3.0
    assert sol.values.tolist() == [1.0, 0.0]


def test_assignment_problem_solved_at_root():
    rng = np.random.default_rng(0)
    n = 6
    cost = rng.random((n, n))
    m = MilpModel()
    x = m.add_vars(n * n, 0, 1, True, cost.ravel()).reshape(n, n)
    for i in range(n):
        m.add_constr(x[i], 1.0, "=", 1)
        m.add_constr(x[:, i], 1.0, "=", 1)
    sol = solve_milp(m)
    assert sol.status == "optimal" and sol.nodes == 1


@pytest.mark.parametrize("seed", range(100))
def test_milp_matches_enumeration(seed):
    model = random_binary_model(np.random.default_rng(seed))
    best, _ = enumerate_binary(model)
    sol = solve_milp(model)
    if np.isinf(best):
        assert sol.status == "infeasible"
    else:
        assert sol.status == "optimal"
        assert sol.objective == best
        assert model.is_feasible(sol.values)


def test_mixed_integer_with_continuous_part():
    m = MilpModel()
    x = m.add_var(0, 1, True, -1.0)
    y = m.add_var(0, 10, False, -1.0)
    m.add_constr([x, y], [3.0, 1.0], "<=", 2.5)
    sol = solve_milp(m)
    assert sol.objective == pytest.approx(-2.5)
    assert sol.values[x] == 0.0


def test_rejects_unbounded_integers():
    m = MilpModel()
    m.add_var(0, np.inf, True, 1.0)
    with pytest.raises(ValueError):
        solve_milp(m)


def enumerate_integer(model, lb, ub):
    best, arg = np.inf, None
    for vals in itertools.product(*(range(int(a), int(b) + 1) for a, b in zip(lb, ub))):
        x = np.array(vals, dtype=float)
        if model.max_violation(x) <= 1e-9 and model.objective(x) < best - 1e-12:
            best, arg = model.objective(x), x
    return best, arg


def random_integer_model(rng, n, m, prio=False):
    model = MilpModel()
    lb = rng.integers(-2, 1, size=n)
    ub = lb + rng.integers(1, 5, size=n)
    for j in range(n):
        model.add_var(lb[j], ub[j], True, float(rng.integers(-9, 10)))
        if prio and rng.random() < 0.5:
            model.set_priority(j, 1)
    for _ in range(m):
        coefs = rng.integers(-5, 6, size=n).astype(float)
        mid = rng.uniform(lb, ub)
        model.add_constr(np.arange(n), coefs, rng.choice(["<=", ">="]), float(np.round(coefs @ mid)))
    return model, lb, ub


@pytest.mark.parametrize("seed", range(60))
def test_general_integers_match_enumeration(seed):
    rng = np.random.default_rng(900 + seed)
    model, lb, ub = random_integer_model(rng, 5, 4, prio=seed % 2 == 1)
    best, _ = enumerate_integer(model, lb, ub)
    sol = solve_milp(model)
    if np.isinf(best):
        assert sol.status == "infeasible"
    else:
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(best, abs=1e-6)
        assert np.allclose(sol.values, np.round(sol.values), atol=1e-6)


def test_priority_class_branched_first():
    # x is fractional at the root alongside y; with priority, x is split first
    m = MilpModel()
    x = m.add_var(0, 10, True, -1.0)
    y = m.add_var(0, 1, True, -1.0)
    m.add_constr([x, y], [2.0, 3.0], "<=", 12.5)
    m.add_constr([x, y], [1.0, -4.0], "<=", 3.7)
    m.set_priority(x, 1)
    assert list(m.priorities()) == [1, 0]
    best, _ = enumerate_integer(m, [0, 0], [10, 1])
    sol = solve_milp(m)
    assert sol.status == "optimal" and sol.objective == pytest.approx(best)


def test_dump_lists_general_integers():
    m = MilpModel()
    m.add_var(0, 1, True, 1.0, name="a")
    m.add_var(0, 4, True, 1.0, name="b")
    lines = m.dump().splitlines()
    assert lines[lines.index("binaries") + 1] == " a"
    assert lines[lines.index("generals") + 1] == " b"


def test_solution_is_deterministic():
    model = random_binary_model(np.random.default_rng(42), 12, 6)
    a, b = solve_milp(model), solve_milp(model)
    assert a.status == b.status and a.nodes == b.nodes
    if a.values is not None:
        assert np.array_equal(a.values, b.values)


def test_node_budget_reports_gap():
    rng = np.random.default_rng(5)
    n = 30
    w = rng.integers(10, 60, size=n)
    m = MilpModel()
    m.add_vars(n, 0, 1, True, -rng.integers(10, 60, size=n).astype(float))
    m.add_constr(np.arange(n), w.astype(float), "<=", float(w.sum() // 2))
    sol = solve_milp(m, node_limit=3)
    assert sol.status == "iteration-limit"
    assert sol.nodes <= 3 + 2
    if sol.values is not None:
        assert sol.gap >= 0 and sol.bound <= sol.objective + 1e-9


def test_warm_start_feasible_and_infeasible_hints():
    m = MilpModel()
    m.add_vars(3, 0, 1, True, [1.0, 2.0, 3.0])
    m.add_constr([0, 1, 2], [1, 1, 1], ">=", 2)
    ws = warm_start(m, [0, 1, 1])
    assert ws is not None and ws[1] == 5.0
    assert warm_start(m, [1, 0, 0]) is None
    assert warm_start(m, [1, 1]) is None
    plain = solve_milp(m)
    hinted_bad = solve_milp(m, hint=[1, 0, 0])
    assert plain.objective == hinted_bad.objective == 3.0
    assert plain.nodes == hinted_bad.nodes


def test_dump_grammar():
    m = MilpModel("toy")
    a = m.add_var(0, 1, True, 2.0, name="a")
    b = m.add_var(0, 4, False, -1.0, name="b")
    m.add_constr([a, b], [1.0, 1.0], ">=", 1, name="cover")
    text = m.dump()
    lines = text.splitlines()
    assert lines[0] == "\\ toy"
    assert lines[1:4] == ["minimize", " obj: 2 a + -1 b", "subject to"]
    assert " cover: 1 a + 1 b >= 1" in lines
    assert lines[lines.index("bounds") + 1:lines.index("bounds") + 3] == [" 0 <= a <= 1", " 0 <= b <= 4"]
    assert lines[-2:] == [" a", "end"]


def test_model_validation():
    m = MilpModel()
    m.add_var()
    with pytest.raises(ValueError):
        m.add_constr([3], [1.0], "<=", 1)
    with pytest.raises(ValueError):
        m.add_constr([0], [1.0], "<>", 1)


def test_crash_from_optimal_hint_needs_no_pivots():
    # assignment rows plus count rows that share the assignment columns
    rng = np.random.default_rng(3)
    n, K = 12, 3
    D = rng.random((n, K))
    m = MilpModel()
    z = np.array([[m.add_var(0, 1, True, D[i, k]) for k in range(K)] for i in range(n)])
    cnt = [m.add_var(0, n, True) for _ in range(K)]
    for i in range(n):
        m.add_constr(z[i], 1.0, "==", 1.0)
    for k in range(K):
        m.add_constr(list(z[:, k]) + [cnt[k]], [1.0] * n + [-1.0], "==", 0.0)
    best = D.argmin(axis=1)
    hint = np.zeros(m.n_vars)
    hint[z[np.arange(n), best]] = 1.0
    hint[cnt] = np.bincount(best, minlength=K)
    res = solve_lp(m, start=hint)
    assert res.status == "optimal" and res.iterations == 0
    assert res.objective == pytest.approx(D.min(axis=1).sum())
