"""Feasibility restoration: fractional scores to a feasible commitment.

The heuristic path rounds at 0.5 and then repairs in a fixed order: initial
status locks, minimum up/down runs (merge or extend, preferring flips whose
scores sit closest to 0.5), per-period reserve deficits (switching on the
cheapest full-load-cost unit, re-running the run repair after each switch),
and per-period balance deficits under startup/shutdown ramp caps (same
switch-on rule).  Whatever the heuristics cannot fix goes to a
feasibility-pump MIP that minimizes the Hamming distance to the broken
commitment and stops at the first incumbent.

Also provides the run-max score merge: within each maximal on-run of the
restored commitment, every score is replaced by the run's maximum, so the
search layer treats a run as one unit of commitment confidence.
"""
import time
from dataclasses import dataclass

import numpy as np

from .errors import NoFeasibleCommitment, ProvenInfeasible, ShapeMismatch
from .formulation import DispatchEvaluator, build_mip
from .instance import derive_constants
from .mip import CONTINUOUS, GE, INFEASIBLE, solve_mip


@dataclass
class RestorationResult:
    u_star: np.ndarray          # feasible commitment, (N, T) ints
    merged_scores: np.ndarray   # run-max merged copy of the input scores
    forced_on: set              # (g, t) on in u_star but rounded off
    pump_used: bool
    wall_time: float


def round_scores(scores):
    return (np.asarray(scores, dtype=float) >= 0.5).astype(np.int64)


def merge_run_scores(u, scores):
    """Run-max merge: each maximal on-run takes its maximum score."""
    u = np.asarray(u)
    out = np.array(scores, dtype=float)
    n, t = u.shape
    for g in range(n):
        for a, b in _on_runs(u[g]):
            out[g, a:b] = out[g, a:b].max()
    return out


def _on_runs(row):
    runs, start = [], None
    for t, v in enumerate(row):
        if v and start is None:
            start = t
        elif not v and start is not None:
            runs.append((start, t))
            start = None
    if start is not None:
        runs.append((start, len(row)))
    return runs


def _all_runs(row):
    """Maximal constant runs as (value, start, end)."""
    runs = []
    start = 0
    for t in range(1, len(row)):
        if row[t] != row[start]:
            runs.append((int(row[start]), start, t))
            start = t
    runs.append((int(row[start]), start, len(row)))
    return runs


def _updown_repair(unit, T, row, score_row, frozen):
    """Fix runs shorter than t_on/t_off in place.

    frozen marks periods that may not change value (locks, reserve
    switch-ons); each applied repair freezes the flipped periods so a later
    repair cannot undo it, which bounds the loop.  Returns False if some
    run stayed deficient because every candidate touched a frozen period.
    """
    frozen = frozen.copy()
    hist = abs(unit.t0)
    for _ in range(4 * T + 8):
        deficit = None
        for v, a, b in _all_runs(row):
            need = unit.t_on if v == 1 else unit.t_off
            eff = (b - a) + (hist if a == 0 and v == unit.u0 else 0)
            if b < T and eff < need:
                deficit = (v, a, b, need - eff)
                break
        if deficit is None:
            return True
        v, a, b, d = deficit

        def cost(ts):
            return sum(abs(score_row[t] - 0.5) for t in ts)

        cands = []
        merge = list(range(a, b))
        if not any(frozen[t] for t in merge):
            cands.append((cost(merge), merge, 1 - v))
        left = list(range(max(a - d, 0), a))
        if left and not any(frozen[t] for t in left):
            cands.append((cost(left), left, v))
        right = list(range(b, min(b + d, T)))
        if right and not any(frozen[t] for t in right):
            cands.append((cost(right), right, v))
        if not cands:
            return False
        _, flips, val = min(cands, key=lambda c: c[0])
        for t in flips:
            row[t] = val
            frozen[t] = True
    return False


def _ramp_capped_output(unit, row):
    """Max per-period output given the row's runs and the ramp limits.

    A run that starts inside the horizon climbs from ramp_start by ramp_up
    per period; a run that ends before the horizon must descend to
    ramp_shut by ramp_down steps.  Runs inherited from before the horizon
    start unconstrained.
    """
    T = len(row)
    out = np.zeros(T)
    for a, b in _on_runs(row):
        for t in range(a, b):
            cap = unit.p_max
            if not (a == 0 and unit.u0 == 1):
                cap = min(cap, unit.ramp_start + (t - a) * unit.ramp_up)
            if b < T:
                cap = min(cap, unit.ramp_shut + (b - 1 - t) * unit.ramp_down)
            out[t] = cap
    return out


def heuristic_restore(inst, form, scores):
    """Round, repair, and (only if needed) pump to a feasible commitment."""
    t_start = time.perf_counter()
    scores = np.asarray(scores, dtype=float)
    n, T = inst.n_units, inst.horizon
    if scores.shape != (n, T):
        raise ShapeMismatch("scores %s for %d units x %d periods"
                            % (scores.shape, n, T))
    rounded = round_scores(scores)
    u = rounded.copy()
    dc = derive_constants(inst)
    lock_len = [dc.u_lock[g] + dc.l_lock[g] for g in range(n)]
    locked = np.zeros((n, T), dtype=bool)
    for g in range(n):
        u[g, :lock_len[g]] = inst.units[g].u0
        locked[g, :lock_len[g]] = True

    for g in range(n):
        _updown_repair(inst.units[g], T, u[g], scores[g], locked[g])

    # reserve: switch on the best-priority off unit at the first violated
    # period, then re-repair that unit's runs without undoing the switch
    p_max = np.array([un.p_max for un in inst.units])
    need = np.asarray(inst.demand) + np.asarray(inst.reserve)
    prio = [((un.alpha + un.beta * un.p_max) / un.p_max, -un.p_max, g)
            for g, un in enumerate(inst.units)]
    forced_res = np.zeros((n, T), dtype=bool)
    for _ in range(n * T + 2):
        cap = u * p_max[:, None]
        short = np.flatnonzero(cap.sum(axis=0) < need - 1e-9)
        if len(short) == 0:
            break
        t = int(short[0])
        offs = [g for g in range(n) if u[g, t] == 0 and not locked[g, t]]
        if not offs:
            break
        g = min(offs, key=lambda gg: prio[gg])
        u[g, t] = 1
        forced_res[g, t] = True
        _updown_repair(inst.units[g], T, u[g], scores[g],
                       locked[g] | forced_res[g])

    # balance: reserve counts nameplate capacity, but a unit that has just
    # started (or is about to stop) only reaches its ramp-limited output,
    # so demand can be unservable with reserve satisfied.  Prefer widening
    # the run whose ramp cap binds (one more period of climb or descent
    # room); fall back to committing another unit by the priority rule.
    demand = np.asarray(inst.demand)
    for _ in range(n * T + 2):
        eff = np.array([_ramp_capped_output(inst.units[g], u[g])
                        for g in range(n)])
        short = np.flatnonzero(eff.sum(axis=0) < demand - 1e-9)
        if len(short) == 0:
            break
        t = int(short[0])
        grow = None
        for g, un in enumerate(inst.units):
            if u[g, t] == 0 or eff[g, t] >= un.p_max:
                continue
            a, b = next((a, b) for a, b in _on_runs(u[g]) if a <= t < b)
            for cell, a2, b2 in ((a - 1, a - 1, b), (b, a, b + 1)):
                if not (0 <= cell < T) or u[g, cell] or locked[g, cell]:
                    continue
                cap = un.p_max
                if not (a2 == 0 and un.u0 == 1):
                    cap = min(cap, un.ramp_start + (t - a2) * un.ramp_up)
                if b2 < T:
                    cap = min(cap, un.ramp_shut + (b2 - 1 - t) * un.ramp_down)
                gain = cap - eff[g, t]
                if gain > 1e-9 and (grow is None or gain > grow[0] + 1e-12):
                    grow = (gain, g, cell)
        if grow is not None:
            _, g, cell = grow
            u[g, cell] = 1
            forced_res[g, cell] = True
        else:
            offs = [g for g in range(n) if u[g, t] == 0 and not locked[g, t]]
            if not offs:
                break
            g = min(offs, key=lambda gg: prio[gg])
            u[g, t] = 1
            forced_res[g, t] = True
        _updown_repair(inst.units[g], T, u[g], scores[g],
                       locked[g] | forced_res[g])

    pump_used = False
    ev = DispatchEvaluator(inst, form)
    if not ev.evaluate(u).feasible:
        pump_used = True
        try:
            u = feasibility_pump(inst, form, u)
        except ProvenInfeasible as exc:
            raise NoFeasibleCommitment(str(exc)) from None

    forced_on = {(g, t) for g in range(n) for t in range(T)
                 if u[g, t] == 1 and rounded[g, t] == 0}
    return RestorationResult(
        u_star=u,
        merged_scores=merge_run_scores(u, scores),
        forced_on=forced_on,
        pump_used=pump_used,
        wall_time=time.perf_counter() - t_start)


def feasibility_pump(inst, form, u_bad):
    """Closest feasible commitment by Hamming distance, first incumbent.

    Minimizes sum |u - u_bad| over the full formulation; the absolute value
    is linearized with one nonnegative auxiliary per (g, t) and two
    inequalities.  Raises ProvenInfeasible when the instance itself has no
    feasible commitment.
    """
    u_bad = np.asarray(u_bad)
    n, T = inst.n_units, inst.horizon
    if u_bad.shape != (n, T):
        raise ShapeMismatch("commitment %s for %d units x %d periods"
                            % (u_bad.shape, n, T))
    m = build_mip(inst, form)
    m = m.with_objective(np.zeros(m.n_vars))
    specs = [("z_%d_%d" % (g, t), CONTINUOUS, 0.0, np.inf, 1.0, ("z", g, t))
             for g in range(n) for t in range(T)]
    zbase = m.n_vars
    m = m.with_extra_vars(specs)
    ucols = m.u_cols().reshape(n, T)
    rows = []
    for g in range(n):
        for t in range(T):
            z = zbase + g * T + t
            tgt = float(u_bad[g, t])
            rows.append(([z, ucols[g, t]], [1.0, -1.0], GE, -tgt,
                         ("PUMP", g, t, 0), "pump_%d_%d_lo" % (g, t)))
            rows.append(([z, ucols[g, t]], [1.0, 1.0], GE, tgt,
                         ("PUMP", g, t, 1), "pump_%d_%d_hi" % (g, t)))
    m = m.with_extra_rows(rows)
    sol = solve_mip(m, first_feasible=True)
    if sol.status == INFEASIBLE or sol.values is None:
        raise ProvenInfeasible("no feasible commitment exists for %s"
                               % inst.name)
    return np.round(sol.values[ucols.ravel()]).astype(np.int64).reshape(n, T)
