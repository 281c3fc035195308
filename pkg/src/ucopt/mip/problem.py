"""Generic MIP container with semantic tags.

A MipProblem is a minimize objective over continuous/binary variables with
sparse constraint rows.  Every variable and row carries a tag: variables
("u"|"P"|"S"|"s"|"d", g, t); rows (family, *indices) where family is one of
C1..C7 (or "CUT" for exclusion constraints added by the data generator).
Tags are the handle the graph encoder and the search layers use to find
commitment variables without guessing at column order.

Problems are frozen after build_problem(); derived problems (variable fixing,
extra rows) copy the arrays they change and share the rest.
"""
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch

CONTINUOUS = "C"
BINARY = "B"

LE, EQ, GE = -1, 0, 1

# solve statuses
OPTIMAL = "Optimal"
FEASIBLE = "Feasible"
INFEASIBLE = "Infeasible"
TIME_LIMIT = "TimeLimit"
UNBOUNDED = "Unbounded"

_SENSE_CHAR = {LE: "<=", EQ: "=", GE: ">="}


class ProblemBuilder:
    """Accumulates variables and rows, then freezes into a MipProblem."""

    def __init__(self, name="mip"):
        self.name = name
        self._vnames, self._vkinds, self._vlb, self._vub = [], [], [], []
        self._vobj, self._vtags = [], []
        self._rows = []          # list of (dict col->coef, sense, rhs, tag, name)
        self._tag_to_col = {}

    def add_var(self, name, kind, lb, ub, obj, tag):
        if tag in self._tag_to_col:
            raise ValueError("duplicate variable tag %r" % (tag,))
        if kind == BINARY and not (lb >= 0.0 and ub <= 1.0):
            raise ValueError("binary variable %s must have bounds within [0,1]" % name)
        col = len(self._vnames)
        self._vnames.append(name)
        self._vkinds.append(kind)
        self._vlb.append(float(lb))
        self._vub.append(float(ub))
        self._vobj.append(float(obj))
        self._vtags.append(tag)
        self._tag_to_col[tag] = col
        return col

    def col_of(self, tag):
        return self._tag_to_col[tag]

    def add_row(self, coefs, sense, rhs, tag, name=None):
        """coefs: iterable of (col, value); zero values are dropped."""
        packed = {}
        for col, val in coefs:
            if val != 0.0:
                packed[col] = packed.get(col, 0.0) + float(val)
        packed = {c: v for c, v in packed.items() if v != 0.0}
        if name is None:
            name = "_".join(str(p) for p in tag)
        self._rows.append((packed, sense, float(rhs), tag, name))

    def build(self):
        n = len(self._vnames)
        mrows = len(self._rows)
        indptr = np.zeros(mrows + 1, dtype=np.int64)
        cols_acc, vals_acc, senses, rhs, rtags, rnames = [], [], [], [], [], []
        seen = set()
        for i, (packed, sense, b, tag, name) in enumerate(self._rows):
            if tag in seen:
                raise ValueError("duplicate row tag %r" % (tag,))
            seen.add(tag)
            cols = sorted(packed)
            cols_acc.extend(cols)
            vals_acc.extend(packed[c] for c in cols)
            indptr[i + 1] = indptr[i] + len(cols)
            senses.append(sense)
            rhs.append(b)
            rtags.append(tag)
            rnames.append(name)
        return MipProblem(
            name=self.name,
            var_names=tuple(self._vnames),
            var_kinds=np.array(self._vkinds, dtype="U1"),
            lb=np.array(self._vlb, dtype=float),
            ub=np.array(self._vub, dtype=float),
            obj=np.array(self._vobj, dtype=float),
            var_tags=tuple(self._vtags),
            row_ptr=indptr,
            row_cols=np.array(cols_acc, dtype=np.int64),
            row_vals=np.array(vals_acc, dtype=float),
            senses=np.array(senses, dtype=np.int8),
            rhs=np.array(rhs, dtype=float),
            row_tags=tuple(rtags),
            row_names=tuple(rnames),
        )


@dataclass(frozen=True)
class MipProblem:
    name: str
    var_names: tuple
    var_kinds: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    obj: np.ndarray
    var_tags: tuple
    row_ptr: np.ndarray
    row_cols: np.ndarray
    row_vals: np.ndarray
    senses: np.ndarray
    rhs: np.ndarray
    row_tags: tuple
    row_names: tuple
    meta: dict = field(default_factory=dict)

    @property
    def n_vars(self):
        return len(self.var_names)

    @property
    def n_rows(self):
        return len(self.rhs)

    @property
    def nnz(self):
        return len(self.row_cols)

    def row(self, i):
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self.row_cols[lo:hi], self.row_vals[lo:hi]

    def binary_cols(self):
        return np.flatnonzero(self.var_kinds == BINARY)

    def tag_index(self):
        return {tag: i for i, tag in enumerate(self.var_tags)}

    def u_shape(self):
        """(N, T) implied by the u-variable tags."""
        gs = [tag[1] for tag in self.var_tags if tag[0] == "u"]
        ts = [tag[2] for tag in self.var_tags if tag[0] == "u"]
        if not gs:
            raise ShapeMismatch("problem has no u variables")
        return max(gs) + 1, max(ts) + 1

    def u_cols(self):
        """Columns of the u block in row-major (g,t) order."""
        n, t = self.u_shape()
        idx = {}
        for col, tag in enumerate(self.var_tags):
            if tag[0] == "u":
                idx[(tag[1], tag[2])] = col
        return np.array([idx[(g, tt)] for g in range(n) for tt in range(t)],
                        dtype=np.int64)

    def activities(self, x):
        """Row activities A x for a full assignment."""
        x = np.asarray(x, dtype=float)
        acts = np.empty(self.n_rows)
        for i in range(self.n_rows):
            lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
            acts[i] = np.dot(self.row_vals[lo:hi], x[self.row_cols[lo:hi]])
        return acts

    def violation_report(self, x, tol=1e-6):
        """Rows and bound pairs violated by x beyond tol."""
        x = np.asarray(x, dtype=float)
        out = []
        bad_lo = np.flatnonzero(x < self.lb - tol)
        bad_hi = np.flatnonzero(x > self.ub + tol)
        for j in bad_lo:
            out.append(("bound", self.var_tags[j], float(self.lb[j] - x[j])))
        for j in bad_hi:
            out.append(("bound", self.var_tags[j], float(x[j] - self.ub[j])))
        acts = self.activities(x)
        resid_le = acts - self.rhs
        for i in range(self.n_rows):
            r = resid_le[i]
            s = self.senses[i]
            if (s == LE and r > tol) or (s == GE and -r > tol) or \
               (s == EQ and abs(r) > tol):
                out.append(("row", self.row_tags[i], float(abs(r))))
        return out

    def is_feasible(self, x, tol=1e-6, integrality=True):
        if self.violation_report(x, tol):
            return False
        if integrality:
            bcols = self.binary_cols()
            xb = np.asarray(x, dtype=float)[bcols]
            if np.any(np.abs(xb - np.round(xb)) > tol):
                return False
        return True

    def objective_value(self, x):
        return float(np.dot(self.obj, np.asarray(x, dtype=float)))

    def with_bounds(self, lb, ub):
        """Copy sharing all structure but with replaced variable bounds."""
        return MipProblem(
            name=self.name, var_names=self.var_names, var_kinds=self.var_kinds,
            lb=np.asarray(lb, dtype=float), ub=np.asarray(ub, dtype=float),
            obj=self.obj, var_tags=self.var_tags,
            row_ptr=self.row_ptr, row_cols=self.row_cols, row_vals=self.row_vals,
            senses=self.senses, rhs=self.rhs, row_tags=self.row_tags,
            row_names=self.row_names, meta=dict(self.meta))

    def with_extra_vars(self, specs):
        """Copy with variables appended; specs = [(name, kind, lb, ub, obj, tag)].

        Existing rows keep their column indices, so appended variables start
        with no row entries; pair with with_extra_rows to constrain them.
        """
        names = list(self.var_names)
        kinds = list(self.var_kinds)
        lb, ub = list(self.lb), list(self.ub)
        obj = list(self.obj)
        tags = list(self.var_tags)
        seen = set(tags)
        for (name, kind, lo, hi, c, tag) in specs:
            if tag in seen:
                raise ValueError("duplicate variable tag %r" % (tag,))
            seen.add(tag)
            names.append(name)
            kinds.append(kind)
            lb.append(float(lo))
            ub.append(float(hi))
            obj.append(float(c))
            tags.append(tag)
        return MipProblem(
            name=self.name, var_names=tuple(names),
            var_kinds=np.array(kinds, dtype="U1"),
            lb=np.array(lb, dtype=float), ub=np.array(ub, dtype=float),
            obj=np.array(obj, dtype=float), var_tags=tuple(tags),
            row_ptr=self.row_ptr, row_cols=self.row_cols, row_vals=self.row_vals,
            senses=self.senses, rhs=self.rhs, row_tags=self.row_tags,
            row_names=self.row_names, meta=dict(self.meta))

    def with_extra_rows(self, rows):
        """Copy with rows appended; rows = [(cols, vals, sense, rhs, tag, name)]."""
        ptr = list(self.row_ptr)
        cols = [self.row_cols]
        vals = [self.row_vals]
        senses = list(self.senses)
        rhs = list(self.rhs)
        rtags = list(self.row_tags)
        rnames = list(self.row_names)
        for (rc, rv, sense, b, tag, name) in rows:
            rc = np.asarray(rc, dtype=np.int64)
            rv = np.asarray(rv, dtype=float)
            keep = rv != 0.0
            rc, rv = rc[keep], rv[keep]
            order = np.argsort(rc)
            cols.append(rc[order])
            vals.append(rv[order])
            ptr.append(ptr[-1] + len(rc))
            senses.append(sense)
            rhs.append(b)
            rtags.append(tag)
            rnames.append(name)
        return MipProblem(
            name=self.name, var_names=self.var_names, var_kinds=self.var_kinds,
            lb=self.lb, ub=self.ub, obj=self.obj, var_tags=self.var_tags,
            row_ptr=np.array(ptr, dtype=np.int64),
            row_cols=np.concatenate(cols) if cols else np.empty(0, np.int64),
            row_vals=np.concatenate(vals) if vals else np.empty(0, float),
            senses=np.array(senses, dtype=np.int8), rhs=np.array(rhs, dtype=float),
            row_tags=tuple(rtags), row_names=tuple(rnames), meta=dict(self.meta))

    def with_objective(self, obj):
        return MipProblem(
            name=self.name, var_names=self.var_names, var_kinds=self.var_kinds,
            lb=self.lb, ub=self.ub, obj=np.asarray(obj, dtype=float),
            var_tags=self.var_tags, row_ptr=self.row_ptr, row_cols=self.row_cols,
            row_vals=self.row_vals, senses=self.senses, rhs=self.rhs,
            row_tags=self.row_tags, row_names=self.row_names, meta=dict(self.meta))


@dataclass
class MipSolution:
    status: str
    values: object          # np array over variables, or None
    objective: float
    bound: float
    wall_time: float
    nodes: int = 0
    iterations: int = 0
    incumbent_log: list = field(default_factory=list)  # dicts: wall_ms, objective, bound, values
    violated: list = field(default_factory=list)       # row tags, when infeasible

    @property
    def feasible(self):
        return self.status in (OPTIMAL, FEASIBLE) and self.values is not None


def fix_and_sub(m, u_vals, mask):
    """Sub-MIP where u variables with mask=0 are fixed to u_vals.

    Entries with mask=1 stay free; non-u variables are untouched; tags are
    preserved (the copy shares rows with the original).
    """
    n, t = m.u_shape()
    u_vals = np.asarray(u_vals)
    mask = np.asarray(mask)
    if u_vals.shape != (n, t) or mask.shape != (n, t):
        raise ShapeMismatch("expected %dx%d commitment and mask" % (n, t))
    lb = m.lb.copy()
    ub = m.ub.copy()
    ucols = m.u_cols().reshape(n, t)
    fixed = mask == 0
    cols = ucols[fixed]
    vals = u_vals[fixed].astype(float)
    lb[cols] = vals
    ub[cols] = vals
    return m.with_bounds(lb, ub)
