"""Fair Lloyd iterations: alternate an exact fair assignment with
mean-center updates until the assignment stops changing."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kmeans
from .fairassign import FairAssignInstance, solve
from .fairness import FairnessReport, FairnessSpec, InfeasibleError, validate
from .kmeans import Clustering, cluster_means, kmeans_cost, sq_distances
from .prefix import OBJECTIVES, PrefixPlan, make_plan

log = logging.getLogger(__name__)

INIT_SCHEMES = ("random", "kmeanspp", "warmstart")
PREFIX_MODES = ("auto", "off", "naive") + OBJECTIVES


@dataclass
class MiniRelConfig:
    K: int
    spec: FairnessSpec
    init: str = "warmstart"
    restarts: int = 10              # k-means runs behind a warm start
    L: int = 100
    prefix: str = "auto"            # auto | off | naive | proportion | weighted | local
    seed: int = 0
    time_limit: Optional[float] = None   # per fair-assignment solve, seconds
    node_limit: Optional[int] = None     # per fair-assignment solve

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be at least 1")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.init not in INIT_SCHEMES:
            raise ValueError(f"unknown init scheme {self.init!r}; expected one of {INIT_SCHEMES}")
        if self.prefix not in PREFIX_MODES:
            raise ValueError(f"unknown prefix mode {self.prefix!r}; expected one of {PREFIX_MODES}")
        if self.spec.K != self.K:
            raise ValueError("config K and spec K differ")


def prefix_mode(ds, cfg: MiniRelConfig):
    """Resolve ``auto``: local-cost pre-fixing when groups are disjoint and
    every alpha exceeds 1/2 (then it cannot cut off the optimum), else off."""
    if cfg.prefix != "auto":
        return cfg.prefix
    spec = cfg.spec
    if ds.groups_disjoint() and spec.alpha_min * 2 > 1:
        return "local"
    return "off"


def initialize(ds, cfg: MiniRelConfig) -> Clustering:
    """Starting clustering; its centers seed the loop and it is the
    reference for pre-fix costs."""
    if cfg.init == "warmstart":
        return kmeans.best_of(ds, cfg.K, restarts=cfg.restarts, seed=cfg.seed)
    if cfg.init == "random":
        centers = kmeans.random_init(ds, cfg.K, cfg.seed)
    else:
        centers = kmeans.kmeanspp_init(ds, cfg.K, cfg.seed)
    d2 = sq_distances(ds.points, centers)
    assignment = np.argmin(d2, axis=1)
    return Clustering(assignment, centers, float(d2[np.arange(ds.n), assignment].sum()), 0)


@dataclass
class MiniRelTrace:
    objectives: list = field(default_factory=list)          # cost after each center update
    assign_objectives: list = field(default_factory=list)   # fair assignment optimum per iteration
    changes: list = field(default_factory=list)             # points that switched cluster
    nodes: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)
    statuses: list = field(default_factory=list)
    clustering: Optional[Clustering] = None
    report: Optional[FairnessReport] = None
    converged: bool = False
    partial: bool = False
    init_cost: float = float("nan")
    plan: Optional[PrefixPlan] = None
    prefix: str = "off"
    prefix_fallback: bool = False    # plan infeasible, ran the full model instead
    total_time: float = 0.0

    @property
    def iterations(self):
        return len(self.objectives)

    @property
    def success(self):
        return self.clustering is not None and self.report is not None and self.report.satisfied

    def records(self):
        for t in range(self.iterations):
            yield {"iteration": t + 1, "objective": self.objectives[t],
                   "assign_objective": self.assign_objectives[t], "changes": self.changes[t],
                   "nodes": self.nodes[t], "wall_time": self.wall_times[t],
                   "status": self.statuses[t]}

    def to_jsonl(self):
        return "".join(json.dumps(r) + "\n" for r in self.records())


def _diagnose(ds, spec):
    problems = spec.necessary_conditions()
    for g in range(spec.num_groups):
        if spec.beta[g] and len(ds.groups[g]) == 0:
            problems.append(f"group {g} is empty but beta={spec.beta[g]}")
    return problems


def run(ds, cfg: MiniRelConfig, init: Optional[Clustering] = None) -> MiniRelTrace:
    """Run the fair Lloyd loop; ``init`` overrides :func:`initialize`."""
    t_start = time.perf_counter()
    spec = cfg.spec
    problems = _diagnose(ds, spec)
    if problems:
        raise InfeasibleError("; ".join(problems))
    X = ds.points
    start = init if init is not None else initialize(ds, cfg)
    trace = MiniRelTrace(init_cost=start.cost, prefix=prefix_mode(ds, cfg))

    plan = None
    if trace.prefix != "off":
        try:
            trace.plan = make_plan(start, ds, spec, trace.prefix, seed=cfg.seed)
        except InfeasibleError as exc:
            # costs can rule out every cluster for a group (local cost only
            # counts members moved in), while the full model stays feasible
            log.warning("no pre-fix plan (%s); using the full model", exc)
            trace.prefix, trace.prefix_fallback = "off", True
        else:
            plan = trace.plan.obligations
            log.debug("prefix plan %s", plan)

    centers = np.array(start.centers, dtype=float)
    prev = None
    warm = np.asarray(start.assignment)
    for it in range(cfg.L):
        t0 = time.perf_counter()
        D = sq_distances(X, centers)
        inst = FairAssignInstance(D, ds.groups, spec, plan)
        res = solve(inst, time_limit=cfg.time_limit, node_limit=cfg.node_limit, warm=warm)
        if res.assignment is None and res.status == "infeasible" and it == 0 \
                and plan is None and not spec.W.all():
            log.warning("fair assignment infeasible with the given W; retrying with every pair allowed")
            spec = spec.with_full_W()
            inst = FairAssignInstance(D, ds.groups, spec, plan)
            res = solve(inst, time_limit=cfg.time_limit, node_limit=cfg.node_limit, warm=warm)
        if res.assignment is None:
            if res.status == "infeasible":
                detail = "pre-fix plan cannot be met" if plan is not None else "no assignment meets beta"
                raise InfeasibleError(f"fair assignment infeasible at iteration {it + 1}: {detail} "
                                      f"(beta={spec.beta.tolist()}, K={spec.K})")
            log.warning("solver budget exhausted without a feasible assignment at iteration %d", it + 1)
            trace.partial = True
            break
        if res.status != "optimal":
            trace.partial = True
        assignment = res.assignment
        if prev is not None:
            # keep the previous map on ties so equal-cost optima cannot cycle
            prev_cost = float(D[np.arange(ds.n), prev].sum())
            if res.objective >= prev_cost - 1e-9 * max(1.0, abs(prev_cost)):
                assignment = prev
        changes = int(ds.n if prev is None else np.sum(assignment != prev))
        assign_obj = float(D[np.arange(ds.n), assignment].sum())
        if prev is not None and changes == 0:
            trace.converged = True
            trace.objectives.append(trace.objectives[-1])
        else:
            centers = cluster_means(X, assignment, cfg.K, fallback=centers)
            trace.objectives.append(kmeans_cost(X, assignment, centers))
        trace.assign_objectives.append(assign_obj)
        trace.changes.append(changes)
        trace.nodes.append(res.nodes)
        trace.statuses.append(res.status)
        trace.wall_times.append(time.perf_counter() - t0)
        prev = assignment
        warm = assignment
        if trace.converged:
            break

    if prev is not None:
        trace.clustering = Clustering(prev, centers, kmeans_cost(X, prev, centers), trace.iterations)
        trace.report = validate(trace.clustering, ds, spec)
    trace.total_time = time.perf_counter() - t_start
    return trace
