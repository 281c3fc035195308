"""Bounded-variable revised primal simplex driver.

The per-iteration array work (pricing, ratio test, eta application) lives
in ucopt._kernels (compiled extension when available, numpy fallback
otherwise); this module owns everything around it: problem standardization,
the two-phase logic, the basis representation, warm restarts across bound
changes, and solution assembly.

Standard form: rows become equalities by adding one slack per row whose
bounds encode the sense (<= : [0, inf), >= : (-inf, 0], = : [0, 0]).  The
basis starts at the slack columns; feasibility is restored by a composite
phase 1 that minimizes total bound violation of basic variables, which works
from any starting basis and therefore also after branching tightens bounds.

The basis inverse is never formed.  Solves go through a sparse LU
factorization of the basis matrix plus a product-form eta file that absorbs
pivots between refactorizations; that keeps per-iteration cost near the
nonzero count instead of the square of the row count, which is what makes
full-horizon unit-commitment relaxations tractable here.
"""
import time

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .. import _kernels
from .._kernels.simplex_py import (AT_LOWER, AT_UPPER, BASIC, FREE,
                                   DONE, REFACTOR, UNBOUNDED, BUDGET, TROUBLE,
                                   RT_PIVOT, RT_FLIP, RT_UNBOUNDED, RT_BAN,
                                   C_SINCE_REFACTOR, C_TOTAL_PIVOTS, C_BLAND,
                                   C_DEGEN, C_LAST_ITERS,
                                   P_TOL_FEAS, P_TOL_DUAL, P_TOL_PIV,
                                   P_REFACTOR_EVERY, P_BLAND_AFTER)
from ..errors import NumericalTrouble
from .problem import (LE, EQ, GE, OPTIMAL, INFEASIBLE, UNBOUNDED as S_UNBOUNDED,
                      MipSolution)

TOL_FEAS = 1e-7
TOL_DUAL = 1e-7
TOL_PIV = 1e-9

LP_OPTIMAL, LP_INFEASIBLE, LP_UNBOUNDED = 0, 1, 2


def _pow2(x):
    """Round positive scale factors to the nearest power of two."""
    return np.exp2(np.round(np.log2(x)))


class SimplexEngine:
    """Reusable LP solver over one problem's constraint structure.

    Bounds may be replaced between solves; the basis and its factorization
    survive, which makes re-solves after branching or neighborhood fixing
    cheap.  One engine is single-threaded and must not be shared.
    """

    def __init__(self, problem, backend=None):
        self.problem = problem
        self.backend = backend if backend is not None else _kernels.selected
        m, n = problem.n_rows, problem.n_vars
        self.m, self.n = m, n
        rows = np.repeat(np.arange(m), np.diff(problem.row_ptr))
        vals = np.asarray(problem.row_vals, dtype=float)
        cols = np.asarray(problem.row_cols)
        # max-norm equilibration, rounded to powers of two so every scaled
        # quantity (coefficients, bounds, branching fixes) stays exact
        rmax = np.zeros(m)
        np.maximum.at(rmax, rows, np.abs(vals))
        self.row_scale = _pow2(np.where(rmax > 0, 1.0 / np.maximum(rmax, 1e-300), 1.0))
        cmax = np.zeros(n)
        np.maximum.at(cmax, cols, np.abs(vals) * self.row_scale[rows])
        self.col_scale = _pow2(np.where(cmax > 0, 1.0 / np.maximum(cmax, 1e-300), 1.0))
        scaled = vals * self.row_scale[rows] * self.col_scale[cols]
        self.A = sp.csr_matrix((scaled, cols, problem.row_ptr), shape=(m, n)).tocsc()
        self.A_T = self.A.T.tocsr()
        self.b = problem.rhs.astype(float) * self.row_scale
        self.lb = np.empty(n + m)
        self.ub = np.empty(n + m)
        self.lb[:n] = problem.lb / self.col_scale
        self.ub[:n] = problem.ub / self.col_scale
        # slack columns keep coefficient +1, so their scale is 1/row_scale;
        # their semantic bounds (0 and +-inf) are invariant under scaling
        slack_lb = np.where(problem.senses == LE, 0.0, -np.inf)
        slack_ub = np.where(problem.senses == GE, 0.0, np.inf)
        eq = problem.senses == EQ
        slack_lb[eq] = 0.0
        slack_ub[eq] = 0.0
        self.lb[n:] = slack_lb
        self.ub[n:] = slack_ub
        self.cost = np.zeros(n + m)
        self.cost[:n] = problem.obj * self.col_scale
        self.params = np.array([TOL_FEAS, TOL_DUAL, TOL_PIV, 100.0, 40.0])
        self.counters = np.zeros(8, dtype=np.int64)
        self._eta_cap = int(self.params[P_REFACTOR_EVERY]) + 8
        self._eta_mat = np.zeros((m, self._eta_cap), order="F")
        self._eta_rows = np.zeros(self._eta_cap, dtype=np.int64)
        self._reset_basis()

    def _reset_basis(self):
        m, n = self.m, self.n
        self.basis = np.arange(n, n + m, dtype=np.int64)
        self.vstat = np.empty(n + m, dtype=np.int8)
        self.vstat[:] = AT_LOWER
        lo_inf = ~np.isfinite(self.lb)
        hi_fin = np.isfinite(self.ub)
        self.vstat[lo_inf & hi_fin] = AT_UPPER
        self.vstat[lo_inf & ~hi_fin] = FREE
        self.vstat[self.basis] = BASIC
        self._lu = None  # all-slack basis is the identity
        self._eta_k = 0
        self.counters[C_SINCE_REFACTOR] = 0
        self.counters[C_BLAND] = 0
        self.counters[C_DEGEN] = 0
        self._recompute_xb()

    def set_bounds(self, lb_struct, ub_struct):
        self.lb[:self.n] = lb_struct / self.col_scale
        self.ub[:self.n] = ub_struct / self.col_scale
        # nonbasic statuses must keep pointing at finite bounds
        ns = self.vstat != BASIC
        bad_lo = ns & (self.vstat == AT_LOWER) & ~np.isfinite(self.lb)
        self.vstat[bad_lo & np.isfinite(self.ub)] = AT_UPPER
        self.vstat[bad_lo & ~np.isfinite(self.ub)] = FREE
        bad_hi = ns & (self.vstat == AT_UPPER) & ~np.isfinite(self.ub)
        self.vstat[bad_hi & np.isfinite(self.lb)] = AT_LOWER
        self.vstat[bad_hi & ~np.isfinite(self.lb)] = FREE

    def _ftran(self, v):
        """Solve B x = v against the current factorization."""
        x = self._lu.solve(v) if self._lu is not None else v.copy()
        if self._eta_k:
            self.backend.eta_fwd(self._eta_mat, self._eta_rows, self._eta_k, x)
        return x

    def _btran(self, v):
        """Solve B^T y = v against the current factorization."""
        y = np.array(v, dtype=float)
        if self._eta_k:
            self.backend.eta_tr(self._eta_mat, self._eta_rows, self._eta_k, y)
        return self._lu.solve(y, trans="T") if self._lu is not None else y

    def _nonbasic_values(self):
        vals = np.where(self.vstat == AT_UPPER, self.ub, self.lb)
        vals[self.vstat == FREE] = 0.0
        vals[self.basis] = 0.0
        return vals

    def _recompute_xb(self):
        vals = self._nonbasic_values()
        rhs_eff = self.b - self.A @ vals[:self.n] - vals[self.n:]
        self.xB = self._ftran(rhs_eff)

    def _refactor(self):
        m, n = self.m, self.n
        if m == 0:
            self._lu = None
            self._eta_k = 0
            self.counters[C_SINCE_REFACTOR] = 0
            self._recompute_xb()
            return
        ap, ai, ax = self.A.indptr, self.A.indices, self.A.data
        length = np.where(self.basis < n,
                          ap[np.minimum(self.basis, n - 1) + 1]
                          - ap[np.minimum(self.basis, n - 1)], 1)
        indptr = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(length, out=indptr[1:])
        idx = np.empty(indptr[-1], dtype=np.int32)
        val = np.empty(indptr[-1])
        for k, j in enumerate(self.basis):
            s = indptr[k]
            if j < n:
                p0, p1 = ap[j], ap[j + 1]
                idx[s:s + p1 - p0] = ai[p0:p1]
                val[s:s + p1 - p0] = ax[p0:p1]
            else:
                idx[s] = j - n
                val[s] = 1.0
        B = sp.csc_matrix((val, idx, indptr), shape=(m, m))
        try:
            lu = spla.splu(B)
        except (RuntimeError, ValueError):
            self._reset_basis()
            return
        # probe the factors: a near-singular basis can factorize without
        # complaint and return garbage, and restarting beats iterating on it
        e = np.zeros(m)
        for k in (0, m // 2, m - 1):
            e[k] = 1.0
            x = lu.solve(e)
            e[k] = 0.0
            if not np.all(np.isfinite(x)):
                self._reset_basis()
                return
            resid = B @ x
            resid[k] -= 1.0
            if np.abs(resid).max() > 1e-6:
                self._reset_basis()
                return
        self._lu = lu
        self._eta_k = 0
        self.counters[C_SINCE_REFACTOR] = 0
        self._recompute_xb()

    def _max_infeas(self):
        lo = self.lb[self.basis]
        hi = self.ub[self.basis]
        below = np.maximum(lo - self.xB, 0.0)
        above = np.maximum(self.xB - hi, 0.0)
        below[~np.isfinite(below)] = 0.0
        above[~np.isfinite(above)] = 0.0
        return max(below.max(initial=0.0), above.max(initial=0.0))

    def _pivot_chunk(self, phase, max_iter):
        """Run up to max_iter pivots for one phase.  Returns a loop code."""
        m, n = self.m, self.n
        kern = self.backend
        c = self.counters
        tol_feas = self.params[P_TOL_FEAS]
        tol_dual = self.params[P_TOL_DUAL]
        tol_piv = self.params[P_TOL_PIV]
        refactor_every = int(self.params[P_REFACTOR_EVERY])
        bland_after = int(self.params[P_BLAND_AFTER])
        fixed = (self.ub - self.lb) <= 1e-12
        banned = np.zeros(n + m, dtype=bool)
        z = np.empty(n + m)
        it = 0
        while it < max_iter:
            it += 1
            c[C_LAST_ITERS] = it
            if self._eta_k >= self._eta_cap - 1:
                return REFACTOR

            lo_b = self.lb[self.basis]
            up_b = self.ub[self.basis]
            below = self.xB < lo_b - tol_feas
            above = self.xB > up_b + tol_feas
            if phase == 1:
                if not (below.any() or above.any()):
                    return DONE
                w = above.astype(float) - below.astype(float)
                y = self._btran(w)
                z[:n] = -(self.A_T @ y)
                z[n:] = -y
            else:
                y = self._btran(self.cost[self.basis])
                z[:n] = self.cost[:n] - self.A_T @ y
                z[n:] = self.cost[n:] - y

            j = kern.price(z, self.vstat, fixed, banned, int(c[C_BLAND]),
                           tol_dual)
            if j < 0:
                if banned.any():
                    # improving columns exist but none offers a stable
                    # pivot; ask for a clean factorization before
                    # concluding anything
                    return TROUBLE if c[C_SINCE_REFACTOR] == 0 else REFACTOR
                return DONE
            direction = 1.0 if self.vstat[j] != AT_UPPER and z[j] < 0 else -1.0

            if j < n:
                aj = np.zeros(m)
                p0, p1 = self.A.indptr[j], self.A.indptr[j + 1]
                aj[self.A.indices[p0:p1]] = self.A.data[p0:p1]
            else:
                aj = np.zeros(m)
                aj[j - n] = 1.0
            alpha = self._ftran(aj)
            delta = direction * alpha
            own = self.ub[j] - self.lb[j] if self.vstat[j] != FREE else np.inf

            out, r, step = kern.chuzr(self.xB, lo_b, up_b, delta, below,
                                      above, own, tol_feas, tol_piv,
                                      int(c[C_BLAND]), self.basis)
            if out == RT_UNBOUNDED:
                return UNBOUNDED if phase == 2 else TROUBLE
            if out == RT_BAN:
                # pivoting here would make the basis near-singular; try
                # another entering column instead
                banned[j] = True
                continue
            if out == RT_FLIP:
                sig = np.abs(delta) > tol_piv
                self.xB[sig] -= delta[sig] * step
                self.vstat[j] = AT_UPPER if self.vstat[j] == AT_LOWER else AT_LOWER
                c[C_TOTAL_PIVOTS] += 1
                if step <= 1e-9:
                    c[C_DEGEN] += 1
                else:
                    c[C_DEGEN] = 0
                    c[C_BLAND] = 0
                if c[C_DEGEN] > bland_after:
                    c[C_BLAND] = 1
                continue

            if self.vstat[j] == AT_LOWER:
                enter_val = self.lb[j] + step
            elif self.vstat[j] == AT_UPPER:
                enter_val = self.ub[j] - step
            else:
                enter_val = direction * step
            leave = int(self.basis[r])
            if delta[r] > 0:
                leave_stat = AT_UPPER if above[r] else AT_LOWER
            else:
                leave_stat = AT_LOWER if below[r] else AT_UPPER

            self.xB -= delta * step
            self.xB[r] = enter_val
            ke = self._eta_k
            self._eta_mat[:, ke] = alpha
            self._eta_rows[ke] = r
            self._eta_k = ke + 1

            self.basis[r] = j
            self.vstat[leave] = leave_stat
            self.vstat[j] = BASIC

            c[C_TOTAL_PIVOTS] += 1
            c[C_SINCE_REFACTOR] += 1
            # steps at tolerance scale are stalling even if not exactly zero
            if step <= 1e-9:
                c[C_DEGEN] += 1
            else:
                c[C_DEGEN] = 0
                c[C_BLAND] = 0
            if c[C_DEGEN] > bland_after:
                c[C_BLAND] = 1
            if c[C_SINCE_REFACTOR] >= refactor_every:
                return REFACTOR
        return BUDGET

    def solve(self, iter_cap=None):
        """Run phases to completion. Returns (code, x, objective).

        code is LP_OPTIMAL / LP_INFEASIBLE / LP_UNBOUNDED; x covers the
        structural variables only.
        """
        m, n = self.m, self.n
        hard_cap = iter_cap if iter_cap is not None else 50000 + 60 * (m + n)
        chunk = max(400, int(self.params[P_REFACTOR_EVERY]) + 10)
        spent = 0
        confirm = 0
        troubles = 0
        unbounded_seen = False
        stall_best = None
        stall = 0
        self._recompute_xb()
        while spent <= hard_cap:
            phase = 1 if self._max_infeas() > TOL_FEAS else 2
            code = self._pivot_chunk(phase, chunk)
            spent += int(self.counters[C_LAST_ITERS])
            if phase == 2:
                # dual-tolerance churn can pivot forever at the optimum on
                # tolerance-scale steps; a feasible basis whose objective
                # has stopped moving is accepted as optimal
                obj_now = self._assemble()[1]
                if stall_best is None or \
                        obj_now < stall_best - 1e-9 * (1.0 + abs(stall_best)):
                    stall_best = obj_now
                    stall = 0
                else:
                    stall += 1
                if stall >= 15:
                    self._refactor()
                    if self._max_infeas() <= TOL_FEAS:
                        x, obj = self._assemble()
                        return LP_OPTIMAL, x, obj
                    stall = 0
            else:
                stall_best, stall = None, 0
            if code == REFACTOR:
                self._refactor()
                confirm = 0
                continue
            if code == BUDGET:
                confirm = 0
                continue
            if code == TROUBLE:
                troubles += 1
                if troubles == 1:
                    self._refactor()
                    continue
                if troubles == 2:
                    self._reset_basis()
                    continue
                raise NumericalTrouble("simplex could not stabilize a basis")
            if code == UNBOUNDED:
                if unbounded_seen:
                    return LP_UNBOUNDED, None, -np.inf
                self._refactor()
                unbounded_seen = True
                continue
            # DONE
            if phase == 1:
                if self._max_infeas() > TOL_FEAS:
                    if confirm >= 1:
                        return LP_INFEASIBLE, self._assemble()[0], np.inf
                    self._refactor()
                    confirm += 1
                continue
            if confirm >= 1:
                x, obj = self._assemble()
                return LP_OPTIMAL, x, obj
            self._refactor()
            if self._max_infeas() > TOL_FEAS:
                confirm = 0
                continue
            confirm += 1
        raise NumericalTrouble("simplex iteration cap exhausted")

    def _assemble(self):
        vals = np.where(self.vstat == AT_UPPER, self.ub, self.lb)
        vals[self.vstat == FREE] = 0.0
        vals[self.basis] = self.xB
        x = vals[:self.n] * self.col_scale
        return x, float(np.dot(self.problem.obj, x))

    def violated_rows(self, x, tol=1e-6):
        """Row tags violated by an unscaled assignment, in true units."""
        p = self.problem
        acts = p.activities(x)
        out = []
        for i in range(self.m):
            r = acts[i] - p.rhs[i]
            s = p.senses[i]
            if (s == LE and r > tol) or (s == GE and -r > tol) or \
               (s == EQ and abs(r) > tol):
                out.append(p.row_tags[i])
        return out


def solve_lp(m, engine=None):
    """Continuous relaxation of a MipProblem.

    Binary kinds are ignored (their [0,1] bounds stay).  Returns a
    MipSolution with status Optimal, Infeasible or Unbounded.
    """
    t0 = time.perf_counter()
    eng = engine if engine is not None else SimplexEngine(m)
    code, x, obj = eng.solve()
    wall = time.perf_counter() - t0
    if code == LP_OPTIMAL:
        return MipSolution(status=OPTIMAL, values=x, objective=obj, bound=obj,
                           wall_time=wall,
                           iterations=int(eng.counters[C_TOTAL_PIVOTS]))
    if code == LP_UNBOUNDED:
        return MipSolution(status=S_UNBOUNDED, values=None, objective=-np.inf,
                           bound=-np.inf, wall_time=wall)
    violated = eng.violated_rows(x) if x is not None else []
    return MipSolution(status=INFEASIBLE, values=None, objective=np.inf,
                       bound=np.inf, wall_time=wall, violated=violated)
