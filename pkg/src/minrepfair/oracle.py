"""Exhaustive ground truth for tiny instances, plus a 3-SAT to fair
assignment reduction used to generate adversarial feasibility instances."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .fairness import FairnessSpec
from .fairassign import FairAssignInstance
from .kmeans import Clustering, cluster_means, kmeans_cost

ENUM_LIMIT = 10**7
_CHUNK = 1 << 16


@dataclass
class OracleResult:
    status: str                        # "optimal" or "infeasible"
    assignment: Optional[np.ndarray]
    objective: float


def _all_assignments(n, K):
    """Yield (rows, n) int blocks covering every assignment in lexicographic order."""
    total = K ** n
    if total > ENUM_LIMIT:
        raise ValueError(f"{K}^{n} assignments exceed the enumeration limit {ENUM_LIMIT}")
    powers = K ** np.arange(n - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        yield ((codes[:, None] // powers[None, :]) % K).astype(np.int64)


def _block_counts(block, mask, K):
    """(rows, K) count of points of ``mask`` in each cluster."""
    return np.stack([((block == k) & mask[None, :]).sum(axis=1) for k in range(K)], axis=1)


def brute_force_fair_assignment(inst: FairAssignInstance) -> OracleResult:
    """Minimum-cost feasible assignment by enumerating all K^n maps.

    With ``inst.plan`` set, feasibility means every planned pair is
    represented (the pre-fixed model); otherwise each group must be
    represented in at least beta_g of its allowed clusters.
    """
    spec = inst.spec
    n, K = inst.n, inst.K
    u = spec.upper(n)
    D = inst.distances
    masks = []
    for g in inst.groups:
        m = np.zeros(n, dtype=bool)
        m[g] = True
        masks.append(m)
    best_obj, best = np.inf, None
    for block in _all_assignments(n, K):
        sizes = _block_counts(block, np.ones(n, dtype=bool), K)
        ok = np.all((sizes >= spec.l) & (sizes <= u), axis=1)
        for g, m in enumerate(masks):
            a = spec.alpha_for(g)
            rep = _block_counts(block, m, K) * a.denominator >= a.numerator * sizes
            if inst.plan is not None:
                for gg, k in inst.plan:
                    if gg == g:
                        ok &= rep[:, k]
            else:
                ok &= (rep & spec.W[g][None, :]).sum(axis=1) >= spec.beta[g]
        if not ok.any():
            continue
        cand = block[ok]
        cost = D[np.arange(n)[None, :], cand].sum(axis=1)
        j = int(np.argmin(cost))
        if cost[j] < best_obj:
            best_obj, best = float(cost[j]), cand[j].copy()
    if best is None:
        return OracleResult("infeasible", None, np.inf)
    return OracleResult("optimal", best, best_obj)


def brute_force_kmeans(ds, K) -> Clustering:
    """Globally optimal k-means partition into K nonempty clusters."""
    X = ds.points if hasattr(ds, "points") else np.asarray(ds, dtype=float)
    n = X.shape[0]
    best_cost, best = np.inf, None
    for block in _all_assignments(n, K):
        sizes = _block_counts(block, np.ones(n, dtype=bool), K)
        block = block[np.all(sizes > 0, axis=1)]
        if not len(block):
            continue
        onehot = (block[:, :, None] == np.arange(K)[None, None, :]).astype(float)   # (r, n, K)
        cnt = onehot.sum(axis=1)                                                     # (r, K)
        sums = np.einsum("rnk,nd->rkd", onehot, X)
        # sum of squared norms minus |C_k| * |mean_k|^2 per cluster
        cost = (X ** 2).sum() - (np.einsum("rkd,rkd->rk", sums, sums) / cnt).sum(axis=1)
        j = int(np.argmin(cost))
        if cost[j] < best_cost - 1e-12:
            best_cost, best = float(cost[j]), block[j].copy()
    if best is None:
        raise ValueError("need n >= K")
    centers = cluster_means(X, best, K)
    return Clustering(best, centers, kmeans_cost(X, best, centers), 0)


# ---- 3-SAT reduction ----

def sat_to_fair_assignment(clauses, n_vars) -> FairAssignInstance:
    """Fair assignment instance that is feasible iff the 3-CNF is satisfiable.

    Points 2v and 2v+1 stand for literals v and not-v (variables are
    1-based in ``clauses``). Each variable's pair forms a group that must be
    represented in both clusters; each clause's literal points form a group
    that must be represented in cluster 0. With alpha = 1/(2n) and two
    nonempty clusters, cluster 0 then holds exactly one literal of each
    variable and at least one true literal per clause.
    """
    n = 2 * n_vars
    groups = [[2 * v, 2 * v + 1] for v in range(n_vars)]
    for clause in clauses:
        pts = sorted({2 * (abs(lit) - 1) + (lit < 0) for lit in clause})
        groups.append(pts)
    G = len(groups)
    W = np.zeros((G, 2), dtype=bool)
    W[:n_vars] = True
    W[n_vars:, 0] = True
    beta = [2] * n_vars + [1] * len(clauses)
    spec = FairnessSpec(Fraction(1, n), beta, 2, W, l=1)
    return FairAssignInstance(np.zeros((n, 2)), groups, spec)


def decode(assignment, n_vars):
    """Truth values: variable v is true iff its positive literal sits in cluster 0."""
    assignment = np.asarray(assignment)
    return [bool(assignment[2 * v] == 0) for v in range(n_vars)]


def satisfies(clauses, values):
    return all(any(values[abs(l) - 1] == (l > 0) for l in c) for c in clauses)


def brute_force_sat(clauses, n_vars):
    """A satisfying valuation, or None."""
    for bits in itertools.product([False, True], repeat=n_vars):
        if satisfies(clauses, bits):
            return list(bits)
    return None


def random_3cnf(n_vars, n_clauses, rng):
    rng = np.random.default_rng(rng)
    out = []
    for _ in range(n_clauses):
        vs = rng.integers(1, n_vars + 1, size=3)
        signs = rng.choice([-1, 1], size=3)
        out.append([int(v * s) for v, s in zip(vs, signs)])
    return out


def parse_dimacs(text):
    """(clauses, n_vars) from DIMACS CNF text."""
    n_vars = 0
    clauses, cur = [], []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith(("c", "%")):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) < 4 or parts[1] != "cnf":
                raise ValueError(f"bad problem line: {line!r}")
            n_vars = int(parts[2])
            continue
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                clauses.append(cur)
                cur = []
            else:
                cur.append(lit)
                n_vars = max(n_vars, abs(lit))
    if cur:
        clauses.append(cur)
    return clauses, n_vars
