"""Minimum-representation fairness: alpha-representation, lambda counts,
beta vectors for statistical parity / equality of opportunity, validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np


class InfeasibleError(RuntimeError):
    """A fairness requirement cannot be met."""


def as_fraction(alpha) -> Fraction:
    """Exact rational form of alpha; decimal floats such as 0.51 map to 51/100."""
    if isinstance(alpha, Fraction):
        return alpha
    if isinstance(alpha, int):
        return Fraction(alpha)
    return Fraction(alpha).limit_denominator(10**6)


def is_alpha_represented(cluster_size, group_count, alpha) -> bool:
    a = as_fraction(alpha)
    return group_count * a.denominator >= a.numerator * cluster_size


def max_groups_per_cluster(alpha) -> int:
    """floor(1/alpha): how many groups can be alpha-represented at once."""
    return math.floor(1 / as_fraction(alpha))


@dataclass
class FairnessSpec:
    """Fairness parameters for K clusters over ``num_groups`` groups.

    ``alpha`` is either one shared threshold or one per group. ``W`` is a
    boolean (num_groups, K) matrix of allowed (group, cluster) pairs; None
    means every pair. ``u=None`` means no upper bound (u = n).
    """

    alpha: Union[float, Fraction, Sequence]
    beta: Sequence[int]
    K: int
    W: Optional[np.ndarray] = None
    l: int = 1
    u: Optional[int] = None

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=np.int64)
        G = len(self.beta)
        if self.W is None:
            self.W = np.ones((G, self.K), dtype=bool)
        else:
            self.W = np.array(self.W, dtype=bool)
        if self.W.shape != (G, self.K):
            raise ValueError(f"W must have shape {(G, self.K)}, got {self.W.shape}")
        for g in range(G):
            a = self.alpha_for(g)
            if not (0 < a <= 1):
                raise ValueError(f"alpha must lie in (0, 1], got {float(a)}")
        if np.any(self.beta < 0):
            raise ValueError("beta must be nonnegative")
        # l >= 1 keeps all K clusters nonempty, so an empty cluster never
        # counts as trivially represented
        if self.l < 1 or (self.u is not None and self.u < self.l):
            raise ValueError("need 1 <= l <= u")

    @property
    def num_groups(self):
        return len(self.beta)

    def alpha_for(self, g) -> Fraction:
        if isinstance(self.alpha, (list, tuple, np.ndarray)):
            return as_fraction(self.alpha[g])
        return as_fraction(self.alpha)

    @property
    def alpha_min(self) -> Fraction:
        return min(self.alpha_for(g) for g in range(self.num_groups)) if self.num_groups else as_fraction(self.alpha)

    def upper(self, n):
        return n if self.u is None else min(self.u, n)

    def necessary_conditions(self):
        """Cheap infeasibility reasons (empty list when none are found)."""
        problems = []
        allowed = self.W.sum(axis=1)
        for g in np.flatnonzero(self.beta > allowed):
            problems.append(f"group {g}: beta={self.beta[g]} exceeds its {allowed[g]} allowed clusters")
        cap = max_groups_per_cluster(self.alpha_min) * self.K
        if self.beta.sum() > cap:
            problems.append(f"sum(beta)={self.beta.sum()} exceeds capacity floor(1/alpha)*K={cap}")
        return problems

    def with_full_W(self):
        return FairnessSpec(self.alpha, self.beta, self.K, None, self.l, self.u)

    def to_dict(self):
        alpha = ([str(self.alpha_for(g)) for g in range(self.num_groups)]
                 if isinstance(self.alpha, (list, tuple, np.ndarray)) else str(as_fraction(self.alpha)))
        return {"alpha": alpha, "beta": self.beta.tolist(), "K": self.K,
                "W": self.W.astype(int).tolist(), "l": self.l, "u": self.u}

    @classmethod
    def from_dict(cls, d):
        alpha = d["alpha"]
        alpha = [Fraction(a) for a in alpha] if isinstance(alpha, list) else Fraction(str(alpha))
        return cls(alpha, d["beta"], d["K"], d.get("W"), d.get("l", 1), d.get("u"))


def group_counts(assignment, groups, K):
    """(num_groups, K) matrix of |C_k ∩ X_g|."""
    assignment = np.asarray(assignment)
    return np.array([np.bincount(assignment[g], minlength=K) for g in groups],
                    dtype=np.int64).reshape(len(groups), K)


def represented_matrix(assignment, groups, K, alpha):
    """Boolean (num_groups, K): group g alpha-represented in cluster k."""
    sizes = np.bincount(np.asarray(assignment), minlength=K)
    counts = group_counts(assignment, groups, K)
    out = np.zeros(counts.shape, dtype=bool)
    for g in range(counts.shape[0]):
        a = as_fraction(alpha[g] if isinstance(alpha, (list, tuple, np.ndarray)) else alpha)
        out[g] = counts[g] * a.denominator >= a.numerator * sizes
    return out


def _assignment(clustering):
    return clustering.assignment if hasattr(clustering, "assignment") else np.asarray(clustering)


def lambda_count(clustering, ds, g, alpha, K=None) -> int:
    assignment = _assignment(clustering)
    K = K if K is not None else clustering.K
    return int(represented_matrix(assignment, [ds.groups[g]], K, alpha)[0].sum())


def beta_statistical_parity(num_groups, alpha, K):
    if num_groups == 0:
        return np.zeros(0, dtype=np.int64)
    b = math.floor(Fraction(1, num_groups) * max_groups_per_cluster(alpha) * K)
    return np.full(num_groups, b, dtype=np.int64)


def beta_equality_of_opportunity(ds, alpha, K):
    cap = max_groups_per_cluster(alpha)
    return np.array([math.floor(Fraction(len(g), ds.n) * cap * K) for g in ds.groups],
                    dtype=np.int64)


def beta_for(notion, ds, alpha, K):
    if notion == "sp":
        return beta_statistical_parity(ds.num_groups, alpha, K)
    if notion == "eqop":
        return beta_equality_of_opportunity(ds, alpha, K)
    raise ValueError(f"unknown fairness notion {notion!r}; expected 'sp' or 'eqop'")


@dataclass
class FairnessReport:
    lambdas: list
    beta: list
    group_satisfied: list
    cluster_sizes: list
    sizes_ok: bool
    cost: float
    group_names: list = field(default_factory=list)

    @property
    def satisfied(self):
        return self.sizes_ok and all(self.group_satisfied)

    def to_dict(self):
        return {"lambda": self.lambdas, "beta": self.beta, "group_satisfied": self.group_satisfied,
                "satisfied": self.satisfied, "cluster_sizes": self.cluster_sizes,
                "sizes_ok": self.sizes_ok, "cost": self.cost, "groups": self.group_names}

    def to_json(self):
        return json.dumps(self.to_dict())


def validate(clustering, ds, spec: FairnessSpec) -> FairnessReport:
    assignment = _assignment(clustering)
    K = spec.K
    rep = represented_matrix(assignment, ds.groups, K,
                             [spec.alpha_for(g) for g in range(ds.num_groups)])
    lambdas = rep.sum(axis=1)
    sizes = np.bincount(assignment, minlength=K)
    sizes_ok = bool(np.all(sizes >= spec.l) and np.all(sizes <= spec.upper(ds.n)))
    cost = float(getattr(clustering, "cost", float("nan")))
    return FairnessReport(
        lambdas=lambdas.tolist(),
        beta=spec.beta.tolist(),
        group_satisfied=(lambdas >= spec.beta).tolist(),
        cluster_sizes=sizes.tolist(),
        sizes_ok=sizes_ok,
        cost=cost,
        group_names=list(ds.group_names),
    )
