"""Best-first branch-and-bound for mixed-integer programs with bounded
integer variables (0-1 in the common case)."""

from __future__ import annotations

import heapq
import logging
import math
import time
from itertools import count

import numpy as np

from .model import MilpModel, MilpSolution
from .simplex import Basis, LpProblem, solve_lp

log = logging.getLogger(__name__)

INT_TOL = 1e-6
FEAS_TOL = 1e-6
PRUNE_TOL = 1e-9
DIVE_EVERY = 200       # tree nodes between dives while no incumbent exists
DIVE_EXTRA = 50        # LP budget of a dive beyond its starting fractional count


def _prune_limit(incumbent):
    if not math.isfinite(incumbent):
        return incumbent
    return incumbent - PRUNE_TOL - 1e-12 * abs(incumbent)


def warm_start(model: MilpModel, hint):
    """Return ``(values, objective)`` when ``hint`` is a feasible point of
    ``model``, else None (the hint is then ignored)."""
    if hint is None:
        return None
    hint = np.asarray(hint, dtype=float)
    if hint.shape != (model.n_vars,):
        log.info("warm start ignored: expected %d values, got %s", model.n_vars, hint.shape)
        return None
    integer = model.arrays()[6]
    values = hint.copy()
    values[integer] = np.round(values[integer])
    if not model.is_feasible(values, tol=FEAS_TOL):
        log.info("warm start ignored: hint is infeasible (violation %.3g)", model.max_violation(values))
        return None
    return values, model.objective(values)


def _check_integer_bounds(lb, ub, integer):
    if np.any(~np.isfinite(lb[integer])) or np.any(~np.isfinite(ub[integer])):
        raise ValueError("integer variables need finite bounds")


def _pack(basis):
    return basis.basic.astype(np.int32), np.packbits(basis.at_upper), basis.at_upper.size


def _unpack(packed):
    basic, bits, size = packed
    return Basis(basic.astype(np.int64), np.unpackbits(bits, count=size).astype(bool))


def _most_fractional(x, int_idx, prio=None):
    vals = x[int_idx]
    frac = np.abs(vals - np.round(vals))
    if frac.max(initial=0.0) <= INT_TOL:
        return -1
    if prio is not None:
        # restrict to the highest priority class that has a fractional member
        top = prio[frac > INT_TOL].max()
        frac = np.where(prio == top, frac, 0.0)
    # first index attaining the maximum fractionality (closest to 1/2)
    return int(int_idx[int(np.argmax(frac))])


def _least_fractional(x, int_idx, prio=None):
    vals = x[int_idx]
    frac = np.abs(vals - np.round(vals))
    mask = frac > INT_TOL
    if not mask.any():
        return -1
    if prio is not None:
        mask &= prio == prio[mask].max()
    k = np.flatnonzero(mask)
    return int(int_idx[k[int(np.argmin(frac[k]))]])


def solve_milp(model: MilpModel, time_limit=None, node_limit=None, hint=None, start=None) -> MilpSolution:
    """Solve ``model`` exactly by LP-based branch-and-bound.

    Nodes are explored best-bound first (ties: deeper first, then creation
    order); the branching variable is the most fractional one (ties: lowest
    index) within the highest branching priority class that has one. Each created child is solved immediately and warm-started from
    its parent's basis, so ``nodes`` counts LP relaxations solved.
    A feasible ``hint`` becomes the initial incumbent. ``start`` (default:
    ``hint``) is a point used only to crash the root LP basis.

    Incumbents also come from dives: starting at a node, repeatedly fix the
    least fractional variable of the highest priority class to its nearest
    value (the other side if that is infeasible) and re-solve. Dives run at the root and every
    ``DIVE_EVERY`` nodes while there is no incumbent; their LPs are not
    counted as nodes.
    """
    t0 = time.perf_counter()
    c, A, senses, rhs, lb0, ub0, integer = model.arrays()
    _check_integer_bounds(lb0, ub0, integer)
    int_idx = np.flatnonzero(integer)
    prio = model.priorities()[int_idx]
    prio = prio if prio.any() else None
    problem = LpProblem(c, A, senses, rhs)

    inc_x, inc_obj = None, math.inf
    ws = warm_start(model, hint)
    if ws is not None:
        inc_x, inc_obj = ws

    nodes = 0
    lp_iters = 0
    incomplete = False
    heap = []
    tie = count()

    def out_of_budget():
        if node_limit is not None and nodes >= node_limit:
            return True
        return time_limit is not None and time.perf_counter() - t0 > time_limit

    def _node_bounds(fixings):
        lb, ub = lb0.copy(), ub0.copy()
        for j, lo, hi in fixings:
            lb[j] = max(lb[j], lo)
            ub[j] = min(ub[j], hi)
        return lb, ub

    def evaluate(fixings, start):
        """Solve the LP for a node; returns (status, objective, x, basis)."""
        nonlocal nodes, lp_iters, incomplete
        lb, ub = _node_bounds(fixings)
        res = solve_lp(problem, lb, ub, start=start)
        nodes += 1
        lp_iters += res.iterations
        if res.status not in ("optimal", "infeasible"):
            if res.status == "unbounded" and not fixings:
                return "unbounded", -math.inf, None, None
            log.warning("node LP ended with status %s; tree marked incomplete", res.status)
            incomplete = True
            return "skip", math.inf, None, None
        return res.status, res.objective, res.x, res.basis

    def dive(fixings, x, basis):
        nonlocal inc_x, inc_obj, lp_iters
        frac = np.abs(x[int_idx] - np.round(x[int_idx]))
        budget = int(np.sum(frac > INT_TOL)) + DIVE_EXTRA
        lb, ub = _node_bounds(fixings)
        while budget > 0:
            j = _least_fractional(x, int_idx, prio)
            if j < 0:
                cand = x.copy()
                cand[int_idx] = np.round(cand[int_idx])
                if model.max_violation(cand) <= FEAS_TOL and float(c @ cand) < _prune_limit(inc_obj):
                    inc_x, inc_obj = cand, float(c @ cand)
                    log.debug("dive incumbent %.9g", inc_obj)
                return
            if out_of_budget():
                return
            nearest = float(np.round(x[j]))
            other = math.floor(x[j]) if nearest > x[j] else math.ceil(x[j])
            for v in (nearest, float(other)):
                lb[j] = ub[j] = v
                res = solve_lp(problem, lb, ub, start=basis)
                lp_iters += res.iterations
                budget -= 1
                if res.status == "optimal" and res.objective < _prune_limit(inc_obj):
                    x, basis = res.x, res.basis
                    break
            else:
                return

    def consider(fixings, depth, status, obj, x, basis):
        nonlocal inc_x, inc_obj
        if status != "optimal" or obj >= _prune_limit(inc_obj):
            return
        j = _most_fractional(x, int_idx, prio)
        if j < 0:
            cand = x.copy()
            cand[int_idx] = np.round(cand[int_idx])
            if model.max_violation(cand) <= FEAS_TOL:
                cand_obj = float(c @ cand)
                if cand_obj < _prune_limit(inc_obj):
                    inc_x, inc_obj = cand, cand_obj
                    log.debug("incumbent %.9g at node %d", inc_obj, nodes)
                return
            # rounding broke a row: branch on the largest deviation instead
            frac = np.abs(x[int_idx] - np.round(x[int_idx]))
            j = int(int_idx[int(np.argmax(frac))])
        heapq.heappush(heap, (obj, -depth, next(tie), fixings, j, float(x[j]), _pack(basis)))

    status, obj, x, basis = evaluate((), hint if start is None else start)
    if status == "unbounded":
        return MilpSolution("unbounded", None, -math.inf, math.inf, nodes, -math.inf,
                            lp_iters, time.perf_counter() - t0)
    root_bound = obj
    consider((), 0, status, obj, x, basis)
    if heap:
        dive((), x, basis)
    last_dive = nodes

    budget_hit = False
    while heap:
        bound = heap[0][0]
        if bound >= _prune_limit(inc_obj):
            heap.clear()
            break
        if out_of_budget():
            budget_hit = True
            break
        _, negdepth, _, fixings, j, xj, packed = heapq.heappop(heap)
        parent = _unpack(packed)
        depth = -negdepth + 1
        for lo, hi in ((-math.inf, float(math.floor(xj))), (float(math.ceil(xj)), math.inf)):
            child = fixings + ((j, lo, hi),)
            status, obj, x, basis = evaluate(child, parent)
            consider(child, depth, status, obj, x, basis)
            if inc_x is None and status == "optimal" and nodes - last_dive >= DIVE_EVERY:
                last_dive = nodes
                dive(child, x, basis)

    elapsed = time.perf_counter() - t0
    open_bound = min((h[0] for h in heap), default=math.inf)
    if inc_x is not None:
        best_bound = min(open_bound, inc_obj)
        if not heap and not budget_hit and not incomplete:
            return MilpSolution("optimal", inc_x, inc_obj, 0.0, nodes, inc_obj, lp_iters, elapsed)
        return MilpSolution("iteration-limit", inc_x, inc_obj, max(0.0, inc_obj - best_bound),
                            nodes, best_bound, lp_iters, elapsed)
    if not heap and not budget_hit and not incomplete:
        return MilpSolution("infeasible", None, math.inf, math.inf, nodes, math.inf, lp_iters, elapsed)
    best_bound = min(open_bound, root_bound if math.isfinite(root_bound) else math.inf)
    return MilpSolution("iteration-limit", None, math.inf, math.inf, nodes, best_bound, lp_iters, elapsed)
