from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

_SENSES = {"<=": "<=", "L": "<=", ">=": ">=", "G": ">=", "=": "=", "==": "=", "E": "="}


class MilpModel:
    """A minimisation problem over bounded variables with sparse linear rows.

    Variables and rows are appended; :meth:`arrays` freezes them into numpy /
    scipy form for the solvers.
    """

    def __init__(self, name="model"):
        self.name = name
        self._lb, self._ub, self._int, self._obj, self.var_names = [], [], [], [], []
        self._rows = []
        self.senses, self.rhs, self.row_names = [], [], []
        self.priority = {}     # variable -> branching priority (default 0, higher first)
        self._frozen = None

    @property
    def n_vars(self):
        return len(self._lb)

    @property
    def n_constrs(self):
        return len(self._rows)

    def add_var(self, lb=0.0, ub=1.0, integer=False, obj=0.0, name=None):
        return int(self.add_vars(1, lb, ub, integer, obj, None if name is None else [name])[0])

    def add_vars(self, count, lb=0.0, ub=1.0, integer=False, obj=0.0, names=None):
        start = self.n_vars
        self._lb.extend(np.broadcast_to(np.asarray(lb, dtype=float), (count,)).tolist())
        self._ub.extend(np.broadcast_to(np.asarray(ub, dtype=float), (count,)).tolist())
        self._int.extend(np.broadcast_to(np.asarray(integer, dtype=bool), (count,)).tolist())
        self._obj.extend(np.broadcast_to(np.asarray(obj, dtype=float), (count,)).tolist())
        if names is None:
            names = [f"x{start + i}" for i in range(count)]
        self.var_names.extend(names)
        self._frozen = None
        return np.arange(start, start + count)

    def set_priority(self, idx, value):
        for j in np.atleast_1d(idx):
            self.priority[int(j)] = int(value)

    def priorities(self):
        out = np.zeros(self.n_vars, dtype=np.int64)
        for j, v in self.priority.items():
            out[j] = v
        return out

    def add_constr(self, idx, coefs, sense, rhs, name=None):
        idx = np.asarray(idx, dtype=np.int64).ravel()
        coefs = np.broadcast_to(np.asarray(coefs, dtype=float), idx.shape).copy()
        if sense not in _SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_vars):
            raise ValueError("row references an unknown variable")
        self._rows.append((idx, coefs))
        self.senses.append(_SENSES[sense])
        self.rhs.append(float(rhs))
        self.row_names.append(name or f"c{len(self._rows) - 1}")
        self._frozen = None
        return len(self._rows) - 1

    def add_constr_dict(self, coefs: dict, sense, rhs, name=None):
        return self.add_constr(list(coefs), list(coefs.values()), sense, rhs, name)

    def arrays(self):
        """(c, A csr, senses, rhs, lb, ub, integer) with integer bounds tightened."""
        if self._frozen is None:
            n, m = self.n_vars, self.n_constrs
            if m:
                lens = [len(i) for i, _ in self._rows]
                rows = np.repeat(np.arange(m), lens)
                cols = np.concatenate([i for i, _ in self._rows]) if sum(lens) else np.zeros(0, int)
                vals = np.concatenate([v for _, v in self._rows]) if sum(lens) else np.zeros(0)
                A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
            else:
                A = sp.csr_matrix((0, n))
            A.sum_duplicates()
            lb = np.array(self._lb)
            ub = np.array(self._ub)
            integer = np.array(self._int, dtype=bool)
            lb[integer] = np.ceil(lb[integer] - 1e-9)
            ub[integer] = np.floor(ub[integer] + 1e-9)
            self._frozen = (np.array(self._obj), A, np.array(self.senses, dtype=object),
                            np.array(self.rhs), lb, ub, integer)
        return self._frozen

    def objective(self, values):
        return float(np.dot(self.arrays()[0], values))

    def max_violation(self, values):
        """Largest bound or row violation of ``values`` (0 when feasible)."""
        c, A, senses, rhs, lb, ub, _ = self.arrays()
        values = np.asarray(values, dtype=float)
        viol = max(0.0, float(np.max(lb - values, initial=0)), float(np.max(values - ub, initial=0)))
        if A.shape[0]:
            act = A @ values
            le = senses == "<="
            ge = senses == ">="
            eq = senses == "="
            viol = max(viol,
                       float(np.max(act[le] - rhs[le], initial=0)),
                       float(np.max(rhs[ge] - act[ge], initial=0)),
                       float(np.max(np.abs(act[eq] - rhs[eq]), initial=0)))
        return viol

    def is_feasible(self, values, tol=1e-6, int_tol=1e-6):
        integer = self.arrays()[6]
        values = np.asarray(values, dtype=float)
        if np.any(np.abs(values[integer] - np.round(values[integer])) > int_tol):
            return False
        return self.max_violation(values) <= tol

    def dump(self, out: Optional[io.TextIOBase] = None):
        """Write the model in an LP-format-like text.

        Grammar (one item per line, stable variable / row order)::

            \\ <model name>
            minimize
             obj: <coef> <var> + ...
            subject to
             <row>: <coef> <var> + ... <sense> <rhs>
            bounds
             <lb> <= <var> <= <ub>
            binaries
             <var> ...
            generals
             <var> ...
            end

        ``binaries`` lists 0-1 integer variables, ``generals`` the other
        integer variables; empty sections are omitted.
        """
        buf = io.StringIO() if out is None else out
        c, A, senses, rhs, lb, ub, integer = self.arrays()
        names = self.var_names

        def num(v):
            return f"{v + 0.0:.12g}"    # + 0.0 turns -0 into 0

        def expr(idx, vals):
            return " + ".join(f"{num(v)} {names[j]}" for j, v in zip(idx, vals)) or "0"

        nz = np.flatnonzero(c)
        buf.write(f"\\ {self.name}\nminimize\n obj: {expr(nz, c[nz])}\nsubject to\n")
        for r in range(A.shape[0]):
            s, e = A.indptr[r], A.indptr[r + 1]
            buf.write(f" {self.row_names[r]}: {expr(A.indices[s:e], A.data[s:e])} {senses[r]} {num(rhs[r])}\n")
        buf.write("bounds\n")
        for j in range(self.n_vars):
            buf.write(f" {num(lb[j])} <= {names[j]} <= {num(ub[j])}\n")
        binary = integer & (lb >= 0) & (ub <= 1)
        for title, mask in (("binaries", binary), ("generals", integer & ~binary)):
            if mask.any():
                buf.write(f"{title}\n " + " ".join(names[j] for j in np.flatnonzero(mask)) + "\n")
        buf.write("end\n")
        if out is None:
            return buf.getvalue()
        return None


@dataclass
class MilpSolution:
    status: str
    values: Optional[np.ndarray]
    objective: float
    gap: float
    nodes: int
    bound: float = float("-inf")
    lp_iterations: int = 0
    wall_time: float = 0.0

    @property
    def ok(self):
        return self.status == "optimal"
