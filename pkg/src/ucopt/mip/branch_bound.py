"""Depth-first branch and bound over binary variables.

One SimplexEngine is built per solve and reused for every node: moving
between nodes only rewrites variable bounds, so the engine's basis carries
over and most node LPs finish in a handful of pivots.  Branching picks the
most fractional commitment (u) variable, falling back to the other binary
families only when every u is integral; the round-down child is explored
first so integer points show up early.
"""
import time

import numpy as np

from ..errors import ShapeMismatch
from .problem import (BINARY, OPTIMAL, FEASIBLE, INFEASIBLE, TIME_LIMIT,
                      UNBOUNDED, MipSolution)
from .simplex import (LP_OPTIMAL, LP_INFEASIBLE, LP_UNBOUNDED, SimplexEngine)

INT_TOL = 1e-6
DEFAULT_GAP = 1e-7


def _limits(limits):
    limits = dict(limits or {})
    time_limit = limits.pop("time", None)
    gap = limits.pop("gap", None)
    node_limit = limits.pop("node", None)
    if limits:
        raise ValueError("unknown limit keys: %s" % sorted(limits))
    return (float("inf") if time_limit is None else float(time_limit),
            DEFAULT_GAP if gap is None else float(gap),
            float("inf") if node_limit is None else float(node_limit))


def _start_is_feasible(m, start):
    start = np.asarray(start, dtype=float)
    if start.shape != (m.n_vars,):
        raise ShapeMismatch("start has shape %s, expected (%d,)"
                            % (start.shape, m.n_vars))
    for j in np.where(m.var_kinds == BINARY)[0]:
        if abs(start[j] - round(start[j])) > INT_TOL:
            return False
    return not m.violation_report(start, tol=1e-6)


def solve_mip(m, limits=None, start=None, first_feasible=False):
    """Solve to `gap` or until a time/node limit trips.

    limits: dict with optional keys time (seconds), gap (relative), node.
    start: optional full assignment; seeds the incumbent when feasible.
    first_feasible: stop as soon as any integer-feasible point is found.
    """
    t0 = time.perf_counter()
    time_limit, gap, node_limit = _limits(limits)

    binary_cols = np.where(m.var_kinds == BINARY)[0]
    u_cols = np.array([j for j in binary_cols if m.var_tags[j][0] == "u"],
                      dtype=np.int64)
    other_cols = np.array([j for j in binary_cols if m.var_tags[j][0] != "u"],
                          dtype=np.int64)

    inc_x, inc_obj = None, np.inf
    log = []

    def log_incumbent(bound):
        log.append({
            "wall_ms": (time.perf_counter() - t0) * 1000.0,
            "objective": inc_obj,
            "bound": bound,
            "values": inc_x.copy(),
        })

    if start is not None and _start_is_feasible(m, start):
        inc_x = np.asarray(start, dtype=float).copy()
        inc_obj = m.objective_value(inc_x)
        log_incumbent(-np.inf)

    eng = SimplexEngine(m)
    base_lb = m.lb.copy()
    base_ub = m.ub.copy()

    # stack entries: (fixes tuple of (col, val), subtree lower bound)
    stack = [((), -np.inf)]
    nodes = 0
    limit_hit = False
    stop = False

    def prune_at(obj):
        return obj >= inc_obj - gap * max(1.0, abs(inc_obj))

    while stack:
        if time.perf_counter() - t0 > time_limit or nodes >= node_limit:
            limit_hit = True
            break
        fixes, bnd_est = stack.pop()
        if inc_x is not None and prune_at(bnd_est):
            continue
        lb = base_lb.copy()
        ub = base_ub.copy()
        for col, val in fixes:
            lb[col] = ub[col] = val
        eng.set_bounds(lb, ub)
        code, x, obj = eng.solve()
        nodes += 1
        if code == LP_INFEASIBLE:
            continue
        if code == LP_UNBOUNDED:
            return MipSolution(status=UNBOUNDED, values=None, objective=-np.inf,
                               bound=-np.inf,
                               wall_time=time.perf_counter() - t0, nodes=nodes,
                               incumbent_log=log)
        if inc_x is not None and prune_at(obj):
            continue
        frac_u = np.abs(x[u_cols] - np.round(x[u_cols])) if len(u_cols) else []
        branch_col = -1
        if len(u_cols) and np.max(frac_u, initial=0.0) > INT_TOL:
            branch_col = int(u_cols[int(np.argmax(frac_u))])
        elif len(other_cols):
            frac_o = np.abs(x[other_cols] - np.round(x[other_cols]))
            if np.max(frac_o, initial=0.0) > INT_TOL:
                branch_col = int(other_cols[int(np.argmax(frac_o))])
        if branch_col < 0:
            # integer feasible
            if obj < inc_obj - 1e-12:
                inc_x, inc_obj = x.copy(), obj
                open_bounds = [b for _, b in stack]
                open_bounds.append(obj)
                log_incumbent(min(open_bounds))
            if first_feasible:
                stop = True
                break
            continue
        stack.append((fixes + ((branch_col, 1.0),), obj))
        stack.append((fixes + ((branch_col, 0.0),), obj))

    wall = time.perf_counter() - t0
    if not stack and not limit_hit and not stop:
        if inc_x is not None:
            return MipSolution(status=OPTIMAL, values=inc_x, objective=inc_obj,
                               bound=inc_obj, wall_time=wall, nodes=nodes,
                               incumbent_log=log)
        return MipSolution(status=INFEASIBLE, values=None, objective=np.inf,
                           bound=np.inf, wall_time=wall, nodes=nodes,
                           incumbent_log=log)
    bound = min((b for _, b in stack), default=np.inf)
    if inc_x is not None:
        bound = min(bound, inc_obj)
        status = FEASIBLE if nodes > 0 else TIME_LIMIT
        return MipSolution(status=status, values=inc_x, objective=inc_obj,
                           bound=bound, wall_time=wall, nodes=nodes,
                           incumbent_log=log)
    return MipSolution(status=TIME_LIMIT, values=None, objective=np.inf,
                       bound=bound, wall_time=wall, nodes=nodes,
                       incumbent_log=log)
