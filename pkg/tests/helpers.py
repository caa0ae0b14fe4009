"""Small builders shared by the test modules."""

import numpy as np

from minrepfair.data import Dataset


def make_dataset(points, labels):
    """Dataset from raw points and one group label per point."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    labels = np.asarray(labels)
    names = list(dict.fromkeys(labels.tolist()))
    groups = [np.flatnonzero(labels == g) for g in names]
    return Dataset(points, groups, [str(g) for g in names], [f"x{j}" for j in range(points.shape[1])])


def random_fair_instance(rng, n_max=10, K_max=3, G_max=3, alphas=(0.34, 0.5, 0.51, 0.67),
                         disjoint=False, with_u=True):
    """Random tiny fair assignment instance with beta within capacity."""
    from minrepfair.fairassign import FairAssignInstance
    from minrepfair.fairness import FairnessSpec, max_groups_per_cluster

    n = int(rng.integers(2, n_max + 1))
    K = int(rng.integers(1, K_max + 1))
    G = int(rng.integers(1, G_max + 1))
    alpha = float(rng.choice(alphas))
    if disjoint:
        labels = rng.integers(0, G, size=n)
        groups = [np.flatnonzero(labels == g) for g in range(G)]
    else:
        groups = [np.flatnonzero(rng.random(n) < 0.5) for _ in range(G)]
    beta = rng.integers(0, K + 1, size=G)
    cap = max_groups_per_cluster(alpha) * K
    while beta.sum() > cap:
        g = int(rng.integers(G))
        beta[g] = max(beta[g] - 1, 0)
    W = rng.random((G, K)) < 0.8
    l = int(rng.integers(1, 3))
    u = int(rng.integers(l, n + 2)) if with_u and rng.random() < 0.4 else None
    D = np.round(rng.random((n, K)) * 4, 3)
    return FairAssignInstance(D, groups, FairnessSpec(alpha, beta, K, W, l=l, u=u))


def random_binary_model(rng, n_vars=None, n_rows=None):
    """Random pure 0-1 model with mixed row senses and integer data."""
    from minrepfair.milp import MilpModel

    n = int(rng.integers(1, 13)) if n_vars is None else n_vars
    m = int(rng.integers(0, 7)) if n_rows is None else n_rows
    model = MilpModel("random")
    model.add_vars(n, 0, 1, True, rng.integers(-9, 10, size=n).astype(float))
    for _ in range(m):
        idx = np.flatnonzero(rng.random(n) < 0.6)
        if idx.size == 0:
            continue
        coefs = rng.integers(-5, 6, size=idx.size).astype(float)
        sense = str(rng.choice(["<=", ">=", "="]))
        act = coefs.sum() / 2
        rhs = float(np.round(act + rng.integers(-3, 4)))
        model.add_constr(idx, coefs, sense, rhs)
    return model


def enumerate_binary(model):
    """(objective, values) of the best 0-1 point by exhaustive search, or (inf, None)."""
    import itertools

    n = model.n_vars
    best, arg = np.inf, None
    for bits in itertools.product((0.0, 1.0), repeat=n):
        x = np.array(bits)
        if model.max_violation(x) <= 1e-9:
            obj = model.objective(x)
            if obj < best - 1e-12:
                best, arg = obj, x
    return best, arg
