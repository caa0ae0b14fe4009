"""Pre-fixing: decide up front which clusters each group must
alpha-represent, so the fair assignment can drop its y variables."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .fairness import FairnessSpec, InfeasibleError, as_fraction, group_counts, max_groups_per_cluster
from .kmeans import sq_distances
from .milp import MilpModel, solve_milp

log = logging.getLogger(__name__)

OBJECTIVES = ("proportion", "weighted", "local")


@dataclass
class PrefixPlan:
    obligations: list                  # sorted (g, k) pairs
    costs: np.ndarray = None           # (num_groups, K); inf = pair not allowed
    objective: float = 0.0
    method: str = "ip"
    extra: dict = field(default_factory=dict)

    def clusters_of(self, g):
        return [k for gg, k in self.obligations if gg == g]

    def to_dict(self):
        costs = None if self.costs is None else [
            [None if not np.isfinite(v) else float(v) for v in row] for row in self.costs]
        return {"obligations": [list(p) for p in self.obligations], "costs": costs,
                "objective": self.objective, "method": self.method}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        costs = d.get("costs")
        if costs is not None:
            costs = np.array([[np.inf if v is None else v for v in row] for row in costs])
        return cls([tuple(p) for p in d["obligations"]], costs, d.get("objective", 0.0),
                   d.get("method", "ip"))


def check_plan(plan_pairs, spec: FairnessSpec):
    """List of violated plan invariants (empty when the plan is valid)."""
    problems = []
    pairs = set(plan_pairs)
    for g, k in pairs:
        if not spec.W[g, k]:
            problems.append(f"({g}, {k}) not allowed")
    for g in range(spec.num_groups):
        got = sum(1 for gg, _ in pairs if gg == g)
        if got < spec.beta[g]:
            problems.append(f"group {g}: {got} clusters < beta {spec.beta[g]}")
    cap = max_groups_per_cluster(spec.alpha_min)
    for k in range(spec.K):
        load = sum(1 for _, kk in pairs if kk == k)
        if load > cap:
            problems.append(f"cluster {k}: {load} groups > capacity {cap}")
    return problems


def _proportions(assignment, groups, K):
    sizes = np.bincount(np.asarray(assignment), minlength=K)
    counts = group_counts(assignment, groups, K)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(sizes > 0, counts / np.maximum(sizes, 1), 0.0)
    return p, sizes, counts


def _shortfall(alpha, p):
    return max(float(alpha) - p, 0.0)


def cost_proportion(clustering, ds, g, k, alpha):
    p, _, _ = _proportions(clustering.assignment, [ds.groups[g]], clustering.K)
    return _shortfall(alpha, p[0, k])


def cost_weighted(clustering, ds, g, k, alpha):
    p, sizes, _ = _proportions(clustering.assignment, [ds.groups[g]], clustering.K)
    return float(sizes[k]) * _shortfall(alpha, p[0, k])


def required_moves(p, size, alpha, count=None):
    """Smallest q with q + p*size >= alpha*(q + size).

    Pass the exact member ``count`` when known; p is then ignored.
    Raises ValueError for alpha = 1 with p < 1 (adding points never helps).
    """
    a = as_fraction(alpha)
    cnt = Fraction(count) if count is not None else Fraction(p).limit_denominator(10**9) * size
    need = a * size - cnt
    if need <= 0:
        return 0
    if a >= 1:
        raise ValueError("alpha = 1 cannot be reached by adding members")
    return math.ceil(need / (1 - a))


def _local_cost(X, members_mask, assignment, center, k, size, count, alpha):
    if alpha >= 1 and count < size:
        return math.inf
    q = required_moves(None, size, alpha, count=count)
    if q == 0:
        return 0.0
    outside = members_mask & (assignment != k)
    if outside.sum() < q:
        return math.inf
    d2 = sq_distances(X[outside], center[None, :])[:, 0]
    return float(np.sort(d2)[:q].sum())


def cost_local(clustering, ds, g, k, alpha):
    """Sum of the q smallest squared distances to center k among group-g
    points outside cluster k; inf when fewer than q exist."""
    mask = np.zeros(ds.n, dtype=bool)
    mask[ds.groups[g]] = True
    assignment = np.asarray(clustering.assignment)
    size = int(np.sum(assignment == k))
    count = int(np.sum(mask & (assignment == k)))
    return _local_cost(ds.points, mask, assignment, clustering.centers[k], k, size, count,
                       as_fraction(alpha))


def cost_matrix(clustering, ds, spec: FairnessSpec, objective="local"):
    """(num_groups, K) prefix costs; pairs outside W or unreachable are inf."""
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown prefix objective {objective!r}; expected one of {OBJECTIVES}")
    K = spec.K
    assignment = np.asarray(clustering.assignment)
    p, sizes, counts = _proportions(assignment, ds.groups, K)
    membership = ds.membership()
    out = np.full((ds.num_groups, K), np.inf)
    for g in range(ds.num_groups):
        a = spec.alpha_for(g)
        for k in range(K):
            if not spec.W[g, k]:
                continue
            if objective == "proportion":
                out[g, k] = _shortfall(a, p[g, k])
            elif objective == "weighted":
                out[g, k] = sizes[k] * _shortfall(a, p[g, k])
            else:
                out[g, k] = _local_cost(ds.points, membership[g], assignment, clustering.centers[k],
                                        k, int(sizes[k]), int(counts[g, k]), a)
    return out


def _trim(pairs, costs, beta):
    """Drop surplus obligations (most expensive first) down to beta_g per group."""
    keep = []
    for g in sorted({g for g, _ in pairs} | set(range(len(beta)))):
        mine = sorted((k for gg, k in pairs if gg == g), key=lambda k: (-costs[g, k], k))
        surplus = len(mine) - int(beta[g])
        keep.extend((g, k) for k in mine[max(surplus, 0):])
    return sorted(keep)


def solve_prefix_ip(costs, spec: FairnessSpec, time_limit=None) -> PrefixPlan:
    """Minimum-cost plan: each group gets at least beta_g allowed clusters,
    each cluster hosts at most floor(1/alpha) groups."""
    costs = np.asarray(costs, dtype=float)
    allowed = spec.W & np.isfinite(costs)
    cap = max_groups_per_cluster(spec.alpha_min)
    reasons = []
    for g in np.flatnonzero(allowed.sum(axis=1) < spec.beta):
        reasons.append(f"group {g} has {allowed[g].sum()} usable clusters < beta {spec.beta[g]}")
    if spec.beta.sum() > cap * spec.K:
        reasons.append(f"sum(beta)={spec.beta.sum()} exceeds capacity {cap}*{spec.K}")
    if reasons:
        raise InfeasibleError("; ".join(reasons))

    model = MilpModel("prefix")
    var = {}
    for g, k in zip(*np.nonzero(allowed)):
        var[(int(g), int(k))] = model.add_var(0, 1, True, costs[g, k], name=f"x_{g}_{k}")
    for g in range(spec.num_groups):
        ks = [var[(g, k)] for k in range(spec.K) if (g, k) in var]
        model.add_constr(ks, 1.0, ">=", int(spec.beta[g]), name=f"beta_{g}")
    for k in range(spec.K):
        gs = [var[(g, k)] for g in range(spec.num_groups) if (g, k) in var]
        if gs:
            model.add_constr(gs, 1.0, "<=", cap, name=f"cap_{k}")
    sol = solve_milp(model, time_limit=time_limit)
    if sol.status == "infeasible":
        raise InfeasibleError("pre-fix IP is infeasible")
    if sol.values is None:
        raise RuntimeError(f"pre-fix IP ended with status {sol.status}")
    pairs = [p for p, j in var.items() if sol.values[j] > 0.5]
    pairs = _trim(pairs, costs, spec.beta)
    return PrefixPlan(pairs, costs, float(sum(costs[g, k] for g, k in pairs)), "ip",
                      {"nodes": sol.nodes})


def naive_prefix(spec: FairnessSpec, seed, costs=None, max_tries=10_000) -> PrefixPlan:
    """Random capacity-respecting plan.

    Each group draws beta_g of its allowed clusters uniformly; the draw is
    rejected and repeated if some cluster exceeds floor(1/alpha) groups.
    After ``max_tries`` rejections the groups draw sequentially from the
    clusters that still have room.
    """
    rng = np.random.default_rng(seed)
    cap = max_groups_per_cluster(spec.alpha_min)
    G, K = spec.num_groups, spec.K
    problems = spec.necessary_conditions()
    if problems:
        raise InfeasibleError("; ".join(problems))

    def draw(sequential):
        load = np.zeros(K, dtype=int)
        pairs = []
        for g in range(G):
            if spec.beta[g] == 0:
                continue
            allowed = np.flatnonzero(spec.W[g] & (load < cap if sequential else True))
            if allowed.size < spec.beta[g]:
                return None
            ks = rng.choice(allowed, size=int(spec.beta[g]), replace=False)
            load[ks] += 1
            pairs.extend((g, int(k)) for k in ks)
        if np.any(load > cap):
            return None
        return sorted(pairs)

    pairs = None
    for _ in range(max_tries):
        pairs = draw(False)
        if pairs is not None:
            break
    else:
        log.info("naive prefix: %d rejections, falling back to sequential draws", max_tries)
        for _ in range(max_tries):
            pairs = draw(True)
            if pairs is not None:
                break
        else:
            raise InfeasibleError("could not draw a capacity-respecting plan")
    objective = 0.0 if costs is None else float(sum(np.asarray(costs)[g, k] for g, k in pairs))
    return PrefixPlan(pairs, None if costs is None else np.asarray(costs, dtype=float),
                      objective, "naive")


def make_plan(clustering, ds, spec, mode="local", seed=0):
    """Plan for a MiniReL run: ``mode`` is one of the cost objectives or
    ``"naive"``."""
    if mode == "naive":
        return naive_prefix(spec, seed)
    return solve_prefix_ip(cost_matrix(clustering, ds, spec, mode), spec)
