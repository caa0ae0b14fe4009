"""The fair assignment problem: with centers fixed, assign points to
clusters at minimum squared-distance cost subject to representation and
cardinality constraints, solved exactly as a 0-1 program.

Representation rows are kept in integer arithmetic: for alpha = p/q the row
``sum_{i in X_g} z_ik >= alpha * sum_i z_ik`` is stored scaled by q as
``sum_i (q*[i in X_g] - p) z_ik >= 0`` (plus ``q*M*(1 - y_gk)`` in the
big-M form) so that boundary cases such as alpha = 0.51 are decided exactly.

:func:`solve` also adds, per representation row, the facets of the integer
hull of ``{(M, O) integer: (q - p) M >= p O, M + O >= l}`` where M and O count
group members and non-members in the cluster. They are valid for every
integer assignment, so optima are unchanged, but they close most of the LP
gap that otherwise forces branching over interchangeable points. The LP
optimum can still sit inside a facet with a fractional M; integer count
variables (members per represented pair, points per cluster) let the
branch-and-bound split on ``M <= m`` / ``M >= m + 1`` instead of on one
interchangeable point at a time.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .fairness import FairnessSpec
from .milp import MilpModel, solve_milp

log = logging.getLogger(__name__)


@dataclass
class FairAssignInstance:
    distances: np.ndarray          # (n, K) squared distances
    groups: list                   # index arrays, one per group
    spec: FairnessSpec
    plan: Optional[list] = None    # (g, k) obligations for the pre-fixed form

    def __post_init__(self):
        self.distances = np.asarray(self.distances, dtype=float)
        if self.distances.ndim != 2 or not np.all(np.isfinite(self.distances)):
            raise ValueError("distances must be a finite (n, K) matrix")
        if self.distances.shape[1] != self.spec.K:
            raise ValueError("distance matrix and spec disagree on K")
        if len(self.groups) != self.spec.num_groups:
            raise ValueError("one beta entry per group required")
        self.groups = [np.unique(np.asarray(g, dtype=np.int64)) for g in self.groups]
        if self.plan is not None:
            self.plan = sorted({(int(g), int(k)) for g, k in self.plan})

    @property
    def n(self):
        return self.distances.shape[0]

    @property
    def K(self):
        return self.distances.shape[1]

    def to_dict(self):
        return {
            "distances": self.distances.tolist(),
            "groups": [g.tolist() for g in self.groups],
            "spec": self.spec.to_dict(),
            "plan": None if self.plan is None else [list(p) for p in self.plan],
        }

    @classmethod
    def from_dict(cls, d):
        plan = d.get("plan")
        return cls(np.array(d["distances"], dtype=float), d["groups"],
                   FairnessSpec.from_dict(d["spec"]),
                   None if plan is None else [tuple(p) for p in plan])

    def dump(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


def big_m(spec: FairnessSpec, n, g=0) -> Fraction:
    """alpha*u when the cardinality upper bound is active, else alpha*n."""
    return spec.alpha_for(g) * spec.upper(n)


@dataclass
class FairAssignModel:
    model: MilpModel
    z: np.ndarray                  # (n, K) variable indices
    y: dict = field(default_factory=dict)   # (g, k) -> variable index
    form: str = "full"
    counts: list = field(default_factory=list)   # (variable index, point indices, cluster)


def _add_z(inst, model):
    n, K = inst.n, inst.K
    z = model.add_vars(n * K, 0, 1, True, inst.distances.ravel(),
                       names=[f"z_{i}_{k}" for i in range(n) for k in range(K)]).reshape(n, K)
    for i in range(n):
        model.add_constr(z[i], 1.0, "=", 1.0, name=f"assign_{i}")
    return z


def _representation_row(inst, z, g, k):
    a = inst.spec.alpha_for(g)
    coefs = np.full(inst.n, -float(a.numerator))
    coefs[inst.groups[g]] += a.denominator
    return z[:, k], coefs, a


def _add_cardinality(inst, model, z):
    u = inst.spec.upper(inst.n)
    for k in range(inst.K):
        model.add_constr(z[:, k], 1.0, ">=", inst.spec.l, name=f"size_lo_{k}")
        model.add_constr(z[:, k], 1.0, "<=", u, name=f"size_hi_{k}")


def build_full(inst: FairAssignInstance) -> FairAssignModel:
    """Big-M form: z assignment binaries plus one y binary per allowed pair."""
    model = MilpModel("fair_assign_full")
    z = _add_z(inst, model)
    spec = inst.spec
    pairs = [(g, k) for g in range(spec.num_groups) for k in range(inst.K) if spec.W[g, k]]
    y = {}
    for g, k in pairs:
        y[(g, k)] = model.add_var(0, 1, True, 0.0, name=f"y_{g}_{k}")
    for g, k in pairs:
        idx, coefs, a = _representation_row(inst, z, g, k)
        # q*M*(1 - y) moved to the left: coefs.z - q*M*y >= -q*M
        qM = float(a.denominator * big_m(spec, inst.n, g))
        model.add_constr(np.append(idx, y[(g, k)]), np.append(coefs, -qM), ">=", -qM,
                         name=f"rep_{g}_{k}")
    for g in range(spec.num_groups):
        ys = [y[(g, k)] for k in range(inst.K) if (g, k) in y]
        model.add_constr(ys, 1.0, ">=", int(spec.beta[g]), name=f"cover_{g}")
    _add_cardinality(inst, model, z)
    return FairAssignModel(model, z, y, "full")


def build_prefixed(inst: FairAssignInstance) -> FairAssignModel:
    """Pre-fixed form: each planned (g, k) becomes a hard representation row;
    no y variables and no big-M."""
    if inst.plan is None:
        raise ValueError("pre-fixed form needs a plan")
    model = MilpModel("fair_assign_prefixed")
    z = _add_z(inst, model)
    for g, k in inst.plan:
        idx, coefs, _ = _representation_row(inst, z, g, k)
        model.add_constr(idx, coefs, ">=", 0.0, name=f"rep_{g}_{k}")
    _add_cardinality(inst, model, z)
    return FairAssignModel(model, z, {}, "prefixed")


def build(inst: FairAssignInstance, strengthen=False) -> FairAssignModel:
    fam = build_prefixed(inst) if inst.plan is not None else build_full(inst)
    if strengthen:
        add_hull_rows(inst, fam)
        add_count_vars(inst, fam)
    return fam


def add_count_vars(inst: FairAssignInstance, fam: FairAssignModel):
    """Integer variables equal to the member count of each represented pair
    and to each cluster size; they exist only to be branched on."""
    pairs = inst.plan if fam.form == "prefixed" else sorted(fam.y)
    everyone = np.arange(inst.n)
    items = [(inst.groups[g], k, f"cnt_{g}_{k}") for g, k in pairs]
    items += [(everyone, k, f"size_{k}") for k in sorted({k for _, k in pairs})]
    for pts, k, name in items:
        j = fam.model.add_var(0, len(pts), True, 0.0, name=name)
        fam.model.add_constr(np.append(fam.z[pts, k], j), np.append(np.ones(len(pts)), -1.0), "=", 0.0,
                             name=f"def_{name}")
        fam.model.set_priority(j, 1)
        fam.counts.append((j, pts, k))
    return len(items)


def hull_facets(alpha, l, o_max):
    """Lower-hull edges of the integer points (O, min feasible M).

    Returns ``(a, b, c)`` triples meaning ``a*M - b*O >= c`` with b >= 0.
    Only edges with c > 0 are kept; the others coincide with the original
    row or only bind near O = o_max.
    """
    alpha = Fraction(alpha)
    p, q = alpha.numerator, alpha.denominator
    if p == q:
        o_max = 0
    hull = []
    for o in range(o_max + 1):
        m = max(-(-p * o // (q - p)) if q > p else 0, l - o, 0)
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (m - y1) - (y2 - y1) * (o - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append((o, m))
    out = []
    for (o1, m1), (o2, m2) in zip(hull, hull[1:]):
        a, b = o2 - o1, m2 - m1
        c = m1 * a - b * o1
        # b < 0 edges restate the cluster-size bound M + O >= l
        if c <= 0 or b < 0:
            continue
        d = math.gcd(math.gcd(a, b), c)
        out.append((a // d, b // d, c // d))
    return out


def add_hull_rows(inst: FairAssignInstance, fam: FairAssignModel):
    """Append the integer-hull rows to ``fam.model``; returns how many."""
    spec = inst.spec
    n = inst.n
    pairs = inst.plan if fam.form == "prefixed" else sorted(fam.y)
    added = 0
    for g, k in pairs:
        member = np.zeros(n, dtype=bool)
        member[inst.groups[g]] = True
        o_max = min(n - int(member.sum()), spec.upper(n))
        for j, (a, b, c) in enumerate(hull_facets(spec.alpha_for(g), spec.l, o_max)):
            coefs = np.where(member, float(a), -float(b))
            name = f"hull_{g}_{k}_{j}"
            if fam.form == "prefixed":
                fam.model.add_constr(fam.z[:, k], coefs, ">=", c, name=name)
            else:
                # slack when y = 0: a*M - b*O >= -b*o_max always holds
                relax = float(c + b * o_max)
                fam.model.add_constr(np.append(fam.z[:, k], fam.y[(g, k)]), np.append(coefs, -relax),
                                     ">=", c - relax, name=name)
            added += 1
    return added


def hint_from_assignment(fam: FairAssignModel, inst: FairAssignInstance, assignment):
    """Full variable vector for a point->cluster map (y set from the
    representation the map achieves), usable as a MILP warm start."""
    from .fairness import represented_matrix

    values = np.zeros(fam.model.n_vars)
    assignment = np.asarray(assignment, dtype=np.int64)
    values[fam.z[np.arange(inst.n), assignment]] = 1.0
    if fam.y:
        rep = represented_matrix(assignment, inst.groups, inst.K,
                                 [inst.spec.alpha_for(g) for g in range(inst.spec.num_groups)])
        for (g, k), j in fam.y.items():
            values[j] = float(rep[g, k])
    for j, pts, k in fam.counts:
        values[j] = float(np.sum(assignment[pts] == k))
    return values


@dataclass
class FairAssignResult:
    status: str
    assignment: Optional[np.ndarray]
    objective: float
    nodes: int
    form: str
    gap: float = 0.0
    wall_time: float = 0.0


def solve(inst: FairAssignInstance, time_limit=None, node_limit=None, warm=None,
          strengthen=True) -> FairAssignResult:
    """Solve the instance in the form its ``plan`` implies.

    ``warm`` is an optional point->cluster map used as the starting
    incumbent (ignored when it violates the constraints). ``strengthen``
    adds the integer-hull rows described in the module docstring.
    """
    fam = build(inst, strengthen)
    hint = None if warm is None else hint_from_assignment(fam, inst, warm)
    start = hint_from_assignment(fam, inst, np.argmin(inst.distances, axis=1))
    sol = solve_milp(fam.model, time_limit=time_limit, node_limit=node_limit, hint=hint,
                     start=hint if hint is not None else start)
    if sol.values is None:
        return FairAssignResult(sol.status, None, np.inf, sol.nodes, fam.form, sol.gap, sol.wall_time)
    zval = sol.values[fam.z]
    assignment = np.argmax(zval, axis=1)
    objective = float(inst.distances[np.arange(inst.n), assignment].sum())
    return FairAssignResult(sol.status, assignment, objective, sol.nodes, fam.form, sol.gap, sol.wall_time)


def greedy_cost(inst: FairAssignInstance):
    return float(inst.distances.min(axis=1).sum())
