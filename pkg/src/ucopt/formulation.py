"""UCP MIP builders and the fixed-commitment evaluator.

Two formulations of the same physical problem are supported.  OneBin uses
commitment, production and startup-cost variables (u, P, S); ThreeBin adds
explicit startup/shutdown indicators (s, d), which tightens the relaxation.
Variable indexing is deterministic: the u block row-major by (g, t), then P,
then S, then (ThreeBin) s and d.

Periods are 0-based throughout the package.  References to a unit's state
before the horizon resolve through its initial status: it has been in state
u0 for |t0| periods, and in the opposite state before that.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInstance, ShapeMismatch
from .instance import derive_constants, history_state, validate_instance
from .mip import (BINARY, CONTINUOUS, LE, EQ, GE, OPTIMAL,
                  ProblemBuilder, SimplexEngine)
from .mip.simplex import LP_OPTIMAL

ONE_BIN = "OneBin"
THREE_BIN = "ThreeBin"
FORMS = (ONE_BIN, THREE_BIN)


def build_mip(inst, form):
    """Assemble the MIP for one instance in the requested formulation."""
    if form not in FORMS:
        raise ValueError("unknown formulation %r" % form)
    report = validate_instance(inst)
    if report:
        raise InvalidInstance("; ".join(report))
    N, T = inst.n_units, inst.horizon
    dc = derive_constants(inst)
    b = ProblemBuilder(inst.name)

    u = np.empty((N, T), dtype=np.int64)
    P = np.empty((N, T), dtype=np.int64)
    S = np.empty((N, T), dtype=np.int64)
    for g, unit in enumerate(inst.units):
        for t in range(T):
            u[g, t] = b.add_var("u_%d_%d" % (g, t), BINARY, 0.0, 1.0,
                                unit.alpha, tag=("u", g, t))
    for g, unit in enumerate(inst.units):
        for t in range(T):
            P[g, t] = b.add_var("P_%d_%d" % (g, t), CONTINUOUS, 0.0,
                                unit.p_max, unit.beta, tag=("P", g, t))
    for g, unit in enumerate(inst.units):
        for t in range(T):
            S[g, t] = b.add_var("S_%d_%d" % (g, t), CONTINUOUS, 0.0,
                                np.inf, 1.0, tag=("S", g, t))
    if form == THREE_BIN:
        s = np.empty((N, T), dtype=np.int64)
        d = np.empty((N, T), dtype=np.int64)
        for g in range(N):
            for t in range(T):
                s[g, t] = b.add_var("s_%d_%d" % (g, t), BINARY, 0.0, 1.0,
                                    0.0, tag=("s", g, t))
        for g in range(N):
            for t in range(T):
                d[g, t] = b.add_var("d_%d_%d" % (g, t), BINARY, 0.0, 1.0,
                                    0.0, tag=("d", g, t))

    # C1: startup cost definition
    for g, unit in enumerate(inst.units):
        if form == ONE_BIN:
            steps = dc.k_step[g]
            for t in range(T):
                tp = t + 1
                for tau in range(1, dc.n_d[g] + 1):
                    coefs = [(S[g, t], 1.0), (u[g, t], -steps[tau - 1])]
                    dead = False
                    for j in range(1, tau + 1):
                        p = tp - j
                        if p >= 1:
                            coefs.append((u[g, p - 1], steps[tau - 1]))
                        elif history_state(unit, p) == 1:
                            dead = True
                            break
                    if dead:
                        continue
                    b.add_row(coefs, GE, 0.0, tag=("C1", g, t, tau))
        else:
            win = unit.t_off + unit.t_cold
            for t in range(T):
                tp = t + 1
                b.add_row([(S[g, t], 1.0), (s[g, t], -unit.c_hot)],
                          GE, 0.0, tag=("C1", g, t, 0))
                coefs = [(S[g, t], 1.0), (s[g, t], -unit.c_cold)]
                for q in range(max(tp - win, 1), tp):
                    coefs.append((d[g, q - 1], unit.c_cold))
                b.add_row(coefs, GE, -unit.c_cold * dc.f_init[g][t],
                          tag=("C1", g, t, 1))

    # C2: spinning reserve
    for t in range(T):
        b.add_row([(u[g, t], inst.units[g].p_max) for g in range(N)],
                  GE, inst.demand[t] + inst.reserve[t], tag=("C2", t))

    # C3: generation limits
    for g, unit in enumerate(inst.units):
        for t in range(T):
            b.add_row([(u[g, t], unit.p_min), (P[g, t], -1.0)],
                      LE, 0.0, tag=("C3", g, t, 0))
            b.add_row([(P[g, t], 1.0), (u[g, t], -unit.p_max)],
                      LE, 0.0, tag=("C3", g, t, 1))

    # C4: power balance
    for t in range(T):
        b.add_row([(P[g, t], 1.0) for g in range(N)],
                  EQ, inst.demand[t], tag=("C4", t))

    # C5: initial-status locks
    for g, unit in enumerate(inst.units):
        for t in range(dc.u_lock[g] + dc.l_lock[g]):
            b.add_row([(u[g, t], 1.0)], EQ, float(unit.u0), tag=("C5", g, t))

    # C6: minimum up/down time (+ state linking for ThreeBin)
    for g, unit in enumerate(inst.units):
        if form == ONE_BIN:
            for t in range(T):
                tp = t + 1
                prev_const = history_state(unit, 0) if tp == 1 else None
                for q in range(tp + 1, min(tp + unit.t_on - 1, T) + 1):
                    coefs = [(u[g, t], 1.0), (u[g, q - 1], -1.0)]
                    rhs = 0.0
                    if prev_const is None:
                        coefs.append((u[g, t - 1], -1.0))
                    else:
                        rhs = float(prev_const)
                    b.add_row(coefs, LE, rhs, tag=("C6", g, t, q - 1, 0))
                for q in range(tp + 1, min(tp + unit.t_off - 1, T) + 1):
                    coefs = [(u[g, t], -1.0), (u[g, q - 1], 1.0)]
                    rhs = 1.0
                    if prev_const is None:
                        coefs.append((u[g, t - 1], 1.0))
                    else:
                        rhs = 1.0 - float(prev_const)
                    b.add_row(coefs, LE, rhs, tag=("C6", g, t, q - 1, 1))
        else:
            for t in range(T):
                tp = t + 1
                if tp >= dc.u_lock[g] + 1:
                    coefs = [(s[g, q - 1], 1.0)
                             for q in range(max(tp - unit.t_on, 0) + 1, tp + 1)]
                    coefs.append((u[g, t], -1.0))
                    b.add_row(coefs, LE, 0.0, tag=("C6", g, t, 0))
                if tp >= dc.l_lock[g] + 1:
                    coefs = [(d[g, q - 1], 1.0)
                             for q in range(max(tp - unit.t_off, 0) + 1, tp + 1)]
                    coefs.append((u[g, t], 1.0))
                    b.add_row(coefs, LE, 1.0, tag=("C6", g, t, 1))
            for t in range(T):
                tp = t + 1
                coefs = [(s[g, t], 1.0), (d[g, t], -1.0), (u[g, t], -1.0)]
                rhs = 0.0
                if tp == 1:
                    rhs = -float(history_state(unit, 0))
                else:
                    coefs.append((u[g, t - 1], 1.0))
                b.add_row(coefs, EQ, rhs, tag=("C6", g, t, 2))

    # C7: ramp limits (periods 1..T-1; there is no pre-horizon production)
    for g, unit in enumerate(inst.units):
        for t in range(1, T):
            if form == ONE_BIN:
                b.add_row([(P[g, t], 1.0), (P[g, t - 1], -1.0),
                           (u[g, t], -unit.ramp_start),
                           (u[g, t - 1], unit.ramp_start - unit.ramp_up)],
                          LE, 0.0, tag=("C7", g, t, 0))
                b.add_row([(P[g, t - 1], 1.0), (P[g, t], -1.0),
                           (u[g, t], unit.ramp_shut - unit.ramp_down),
                           (u[g, t - 1], -unit.ramp_shut)],
                          LE, 0.0, tag=("C7", g, t, 1))
            else:
                b.add_row([(P[g, t], 1.0), (P[g, t - 1], -1.0),
                           (u[g, t], -(unit.ramp_up + unit.p_min)),
                           (u[g, t - 1], unit.p_min),
                           (s[g, t], -(unit.ramp_start - unit.ramp_up - unit.p_min))],
                          LE, 0.0, tag=("C7", g, t, 0))
                b.add_row([(P[g, t - 1], 1.0), (P[g, t], -1.0),
                           (u[g, t - 1], -(unit.ramp_down + unit.p_min)),
                           (u[g, t], unit.p_min),
                           (d[g, t], -(unit.ramp_shut - unit.ramp_down - unit.p_min))],
                          LE, 0.0, tag=("C7", g, t, 1))

    m = b.build()
    m.meta.update(form=form, instance=inst.name, n_units=N, horizon=T)
    return m


def canonical_switches(inst, u):
    """Startup/shutdown indicator matrices implied by a binary commitment."""
    N, T = inst.n_units, inst.horizon
    s = np.zeros((N, T))
    d = np.zeros((N, T))
    for g, unit in enumerate(inst.units):
        prev = float(unit.u0)
        for t in range(T):
            cur = float(u[g, t])
            s[g, t] = max(cur - prev, 0.0)
            d[g, t] = max(prev - cur, 0.0)
            prev = cur
    return s, d


def extract_commitment(m, values):
    """Round the u block of a full assignment into an N x T binary matrix."""
    n, t = m.u_shape()
    vals = np.asarray(values, dtype=float)[m.u_cols()]
    return np.round(vals).astype(np.int64).reshape(n, t)


@dataclass
class EvalResult:
    feasible: bool
    objective: float
    violations: list


class DispatchEvaluator:
    """Repeated commitment evaluation against one instance.

    Builds the MIP once and keeps a warm simplex engine; each call fixes the
    binary block and re-solves the dispatch LP.  Static checks on the pure-u
    constraints run first so violation reports carry exact identities.
    """

    def __init__(self, inst, form):
        self.inst = inst
        self.form = form
        self.problem = build_mip(inst, form)
        self.dc = derive_constants(inst)
        N, T = inst.n_units, inst.horizon
        self.shape = (N, T)
        idx = self.problem.tag_index()
        self.ucols = self.problem.u_cols().reshape(N, T)
        if form == THREE_BIN:
            self.scols = np.array([[idx[("s", g, t)] for t in range(T)]
                                   for g in range(N)])
            self.dcols = np.array([[idx[("d", g, t)] for t in range(T)]
                                   for g in range(N)])
        self.engine = SimplexEngine(self.problem)
        self.base_lb = self.problem.lb.copy()
        self.base_ub = self.problem.ub.copy()

    def _static_violations(self, u):
        inst = self.inst
        N, T = self.shape
        out = []
        for g, unit in enumerate(inst.units):
            for t in range(self.dc.u_lock[g] + self.dc.l_lock[g]):
                if u[g, t] != unit.u0:
                    out.append(("C5", g, t))
        for g, unit in enumerate(inst.units):
            prev = unit.u0
            for t in range(T):
                if u[g, t] > prev:        # switched on at t
                    for q in range(t + 1, min(t + unit.t_on, T)):
                        if u[g, q] != 1:
                            out.append(("C6", g, t, q, 0))
                elif u[g, t] < prev:      # switched off at t
                    for q in range(t + 1, min(t + unit.t_off, T)):
                        if u[g, q] != 0:
                            out.append(("C6", g, t, q, 1))
                prev = u[g, t]
        p_max = inst.unit_array("p_max")
        p_min = inst.unit_array("p_min")
        cap = u.T @ p_max
        floor = u.T @ p_min
        for t in range(T):
            if cap[t] < inst.demand[t] + inst.reserve[t] - 1e-9:
                out.append(("C2", t))
            if cap[t] < inst.demand[t] - 1e-9 or floor[t] > inst.demand[t] + 1e-9:
                out.append(("C4", t))
        return out

    def evaluate(self, u):
        u = np.asarray(u)
        if u.shape != self.shape:
            raise ShapeMismatch("commitment has shape %s, expected %s"
                                % (u.shape, self.shape))
        bad = [("u", g, t) for g, t in zip(*np.where(
            np.abs(u - np.round(u)) > 1e-6))]
        if bad:
            return EvalResult(False, np.inf, bad)
        u = np.round(u).astype(np.int64)
        static = self._static_violations(u)
        if static:
            return EvalResult(False, np.inf, static)
        lb = self.base_lb.copy()
        ub = self.base_ub.copy()
        uf = u.astype(float)
        lb[self.ucols] = uf
        ub[self.ucols] = uf
        if self.form == THREE_BIN:
            s, d = canonical_switches(self.inst, u)
            lb[self.scols] = s
            ub[self.scols] = s
            lb[self.dcols] = d
            ub[self.dcols] = d
        self.engine.set_bounds(lb.ravel(), ub.ravel())
        code, x, obj = self.engine.solve()
        if code == LP_OPTIMAL:
            return EvalResult(True, obj, [])
        rows = self.engine.violated_rows(x) if x is not None else []
        return EvalResult(False, np.inf, rows)

    def dispatch_values(self, u):
        """Full variable assignment for a feasible commitment (or None)."""
        res = self.evaluate(u)
        if not res.feasible:
            return None
        return self.engine._assemble()[0]


def evaluate_commitment(inst, form, u):
    """One-shot wrapper around DispatchEvaluator."""
    return DispatchEvaluator(inst, form).evaluate(u)
