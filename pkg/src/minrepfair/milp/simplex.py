"""Bounded-variable revised primal simplex.

Every row r is written as ``a_r . x - s_r = 0`` with a logical variable s_r
bounded by the row's sense, so the whole problem is
``min c.x  s.t.  [A -I] (x, s) = 0,  lo <= (x, s) <= hi``. The logical
basis is always a valid starting basis.

Phase 1 minimises the sum of bound violations of the basic variables
(costs of -1/+1 recomputed every iteration, infeasible basics may only move
up to the bound they violate); phase 2 uses the true costs. Pricing is
Dantzig, switching to Bland's rule after a run of degenerate pivots.
Basis solves use a sparse LU with a product-form eta file between
refactorisations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
DEGENERATE_LIMIT = 500
REFACTOR_EVERY = 50


@dataclass
class Basis:
    basic: np.ndarray      # column index per row, columns n.. are logicals
    at_upper: np.ndarray   # bool per column, meaningful for nonbasic ones


@dataclass
class LpResult:
    status: str            # optimal | infeasible | unbounded | iteration-limit | numerical
    x: Optional[np.ndarray]
    objective: float
    iterations: int
    basis: Optional[Basis] = None


def row_bounds(senses, rhs):
    lo = np.where(senses == "<=", -np.inf, rhs).astype(float)
    hi = np.where(senses == ">=", np.inf, rhs).astype(float)
    return lo, hi


class LpProblem:
    """Frozen constraint data shared between many LP solves (B&B nodes)."""

    def __init__(self, c, A, senses, rhs):
        self.c = np.asarray(c, dtype=float)
        self.A = sp.csr_matrix(A)
        self.m, self.n = self.A.shape
        self.A_csc = self.A.tocsc()
        self.AT = self.A.T.tocsr()
        self.row_lo, self.row_hi = row_bounds(np.asarray(senses, dtype=object), np.asarray(rhs, dtype=float))
        self.c_full = np.concatenate([self.c, np.zeros(self.m)])
        # [A -I] in CSC, used to assemble basis matrices
        self.F = sp.hstack([self.A_csc, -sp.identity(self.m, format="csc")], format="csc")

    @classmethod
    def from_model(cls, model):
        c, A, senses, rhs, _, _, _ = model.arrays()
        return cls(c, A, senses, rhs)

    def column(self, j):
        if j < self.n:
            col = np.zeros(self.m)
            s, e = self.A_csc.indptr[j], self.A_csc.indptr[j + 1]
            col[self.A_csc.indices[s:e]] = self.A_csc.data[s:e]
            return col
        col = np.zeros(self.m)
        col[j - self.n] = -1.0
        return col

    def crash_basis(self, lo, hi, hint):
        """Logical basis with structurals placed at the bound nearest ``hint``;
        structurals with a nonzero hint then replace the logicals of equality
        rows. A column is taken only if it misses every row replaced so far,
        so the basis matrix is triangular on the replaced rows."""
        n, m = self.n, self.m
        N = n + m
        basic = np.arange(n, N)
        at_upper = np.zeros(N, dtype=bool)
        hint = np.clip(np.asarray(hint, dtype=float), lo[:n], hi[:n])
        mid = np.where(np.isfinite(lo[:n]) & np.isfinite(hi[:n]), 0.5 * (lo[:n] + hi[:n]), np.inf)
        at_upper[:n] = np.isfinite(hi[:n]) & ((hint > mid) | ~np.isfinite(lo[:n]))
        eq = self.row_lo == self.row_hi
        pivot_rows = np.zeros(m, dtype=bool)
        indptr, indices = self.A_csc.indptr, self.A_csc.indices
        for j in np.flatnonzero((np.abs(hint) > 1e-9) & (lo[:n] < hi[:n])):
            rows = indices[indptr[j]:indptr[j + 1]]
            if rows.size == 0 or pivot_rows[rows].any():
                continue
            free = rows[eq[rows]]
            if free.size == 0:
                continue
            r = free[0]
            basic[r] = j
            pivot_rows[r] = True
        return Basis(basic, at_upper)


class _Factor:
    def __init__(self, B):
        self.lu = splu(sp.csc_matrix(B), permc_spec="COLAMD", options={"SymmetricMode": False})
        self.etas = []

    def ftran(self, a):
        w = self.lu.solve(a)
        for p, d in self.etas:
            wp = w[p] / d[p]
            if wp != 0.0:
                w -= wp * d
            w[p] = wp
        return w

    def btran(self, c):
        v = c.copy()
        for p, d in reversed(self.etas):
            v[p] = (v[p] - (np.dot(v, d) - v[p] * d[p])) / d[p]
        return self.lu.solve(v, trans="T")

    def update(self, p, w):
        self.etas.append((p, w))


def solve_lp(problem, lb=None, ub=None, start=None, max_iter=None) -> LpResult:
    """Solve ``min c.x`` over the rows of ``problem`` and bounds ``lb, ub``.

    ``problem`` is an :class:`LpProblem` or a ``MilpModel`` (whose LP
    relaxation is solved; bounds default to the model's). ``start`` may be a
    :class:`Basis` from an earlier solve (warm start) or an array of hint
    values used to crash the starting basis.
    """
    if not isinstance(problem, LpProblem):
        arrays = problem.arrays()
        lb = arrays[4] if lb is None else lb
        ub = arrays[5] if ub is None else ub
        problem = LpProblem.from_model(problem)
    n, m = problem.n, problem.m
    N = n + m
    lo = np.concatenate([np.asarray(lb, dtype=float), problem.row_lo])
    hi = np.concatenate([np.asarray(ub, dtype=float), problem.row_hi])
    if np.any(lo > hi + FEAS_TOL):
        return LpResult("infeasible", None, np.inf, 0)
    if max_iter is None:
        max_iter = 50 * (N + 10)

    if isinstance(start, Basis):
        basis = Basis(start.basic.copy(), start.at_upper.copy())
    elif start is not None:
        basis = problem.crash_basis(lo, hi, start)
    else:
        basis = Basis(np.arange(n, N), np.zeros(N, dtype=bool))

    if m == 0:
        return _solve_bounds_only(problem, lo, hi)

    basic = basis.basic
    basis.at_upper = np.isfinite(hi) & (basis.at_upper | ~np.isfinite(lo))
    is_basic = np.zeros(N, dtype=bool)
    is_basic[basic] = True
    x = _nonbasic_values(lo, hi, basis.at_upper)
    c = problem.c_full
    F = problem.F

    factor = None
    iters = 0
    degenerate = 0
    bland = False
    refactor_fail = 0

    while True:
        if factor is None or len(factor.etas) >= REFACTOR_EVERY:
            try:
                factor = _Factor(F[:, basic])
            except RuntimeError:
                refactor_fail += 1
                if refactor_fail > 3:
                    return LpResult("numerical", None, np.nan, iters)
                basic, is_basic = _repair_singular(problem, basic, is_basic, x, lo, hi)
                factor = None
                continue
            xn = np.where(is_basic, 0.0, x)
            x[basic] = factor.ftran(-(F @ xn))

        xb = x[basic]
        lob, hib = lo[basic], hi[basic]
        below = xb < lob - FEAS_TOL
        above = xb > hib + FEAS_TOL
        phase1 = bool(below.any() or above.any())
        if phase1:
            cb = np.where(below, -1.0, np.where(above, 1.0, 0.0))
            y = factor.btran(cb)
            d = -np.concatenate([problem.AT @ y, -y])
        else:
            y = factor.btran(c[basic])
            d = c - np.concatenate([problem.AT @ y, -y])

        at_up = basis.at_upper
        movable = ~is_basic & (hi > lo)
        # at_up implies a finite upper bound; free nonbasics sit at 0
        can_inc = movable & ~at_up & (d < -DUAL_TOL)
        can_dec = movable & (at_up | ~np.isfinite(lo)) & (d > DUAL_TOL)
        eligible = can_inc | can_dec
        if not eligible.any():
            if factor.etas:
                factor = None  # confirm on a fresh factorisation
                continue
            if phase1:
                return LpResult("infeasible", None, np.inf, iters, Basis(basic.copy(), at_up.copy()))
            xs = x[:n].copy()
            return LpResult("optimal", xs, float(problem.c @ xs), iters, Basis(basic.copy(), at_up.copy()))

        if iters >= max_iter:
            return LpResult("iteration-limit", None, np.nan, iters)
        iters += 1

        if bland:
            q = int(np.flatnonzero(eligible)[0])
        else:
            q = int(np.argmax(np.where(eligible, np.abs(d), -1.0)))
        direction = 1.0 if can_inc[q] else -1.0

        w = factor.ftran(problem.column(q))
        delta = -direction * w  # rate of change of x_B per unit step

        ratios = np.full(m, np.inf)
        hit_upper = np.zeros(m, dtype=bool)
        dec = delta < -PIVOT_TOL
        inc = delta > PIVOT_TOL
        feas = ~below & ~above
        # feasible basics stay within their bounds
        r_dec = dec & feas & np.isfinite(lob)
        ratios[r_dec] = (xb[r_dec] - lob[r_dec]) / -delta[r_dec]
        r_inc = inc & feas & np.isfinite(hib)
        ratios[r_inc] = (hib[r_inc] - xb[r_inc]) / delta[r_inc]
        hit_upper[r_inc] = True
        # infeasible basics may travel up to the bound they violate
        r_b = inc & below
        ratios[r_b] = (lob[r_b] - xb[r_b]) / delta[r_b]
        r_a = dec & above
        ratios[r_a] = (xb[r_a] - hib[r_a]) / -delta[r_a]
        hit_upper[r_a] = True
        np.maximum(ratios, 0.0, out=ratios)

        t_row = ratios.min() if m else np.inf
        t_flip = hi[q] - lo[q]
        if not np.isfinite(t_row) and not np.isfinite(t_flip):
            if phase1:
                return LpResult("numerical", None, np.nan, iters)
            return LpResult("unbounded", None, -np.inf, iters)

        if t_flip <= t_row:
            t = t_flip
            x[q] += direction * t
            x[basic] += t * delta
            at_up[q] = direction > 0
            leave = -1
        else:
            t = t_row
            ties = np.flatnonzero(ratios <= t_row + 1e-12)
            if bland:
                p = int(ties[np.argmin(basic[ties])])
            else:
                p = int(ties[np.argmax(np.abs(delta[ties]))])
            leave = int(basic[p])
            x[q] += direction * t
            x[basic] += t * delta
            x[leave] = hib[p] if hit_upper[p] else lob[p]
            at_up[leave] = bool(hit_upper[p])
            basic[p] = q
            is_basic[q] = True
            is_basic[leave] = False
            factor.update(p, w)

        if t <= 1e-12:
            degenerate += 1
            if degenerate >= DEGENERATE_LIMIT and not bland:
                log.debug("switching to Bland's rule after %d degenerate pivots", degenerate)
                bland = True
        else:
            degenerate = 0
            bland = False


def _nonbasic_values(lo, hi, at_upper):
    x = np.where(at_upper, hi, lo)
    bad = ~np.isfinite(x)
    x[bad] = np.where(np.isfinite(lo[bad]), lo[bad], np.where(np.isfinite(hi[bad]), hi[bad], 0.0))
    return x


def _repair_singular(problem, basic, is_basic, x, lo, hi):
    """Swap structural columns out for their rows' logicals until the basis
    factorises; used only when a warm-start basis turns out singular."""
    n = problem.n
    basic = basic.copy()
    for p in range(problem.m):
        if basic[p] < n:
            j = basic[p]
            basic[p] = n + p
            is_basic[j] = False
            x[j] = lo[j] if np.isfinite(lo[j]) else (hi[j] if np.isfinite(hi[j]) else 0.0)
    is_basic[basic] = True
    return basic, is_basic


def _solve_bounds_only(problem, lo, hi):
    c = problem.c
    n = problem.n
    x = np.where(c > 0, lo[:n], np.where(c < 0, hi[:n], np.where(np.isfinite(lo[:n]), lo[:n], 0.0)))
    x = np.where(np.isfinite(x), x, np.where(np.isfinite(lo[:n]), lo[:n], hi[:n]))
    if not np.all(np.isfinite(x)):
        return LpResult("unbounded", None, -np.inf, 0)
    return LpResult("optimal", x, float(c @ x), 0, Basis(np.arange(n, n), np.zeros(n, dtype=bool)))
