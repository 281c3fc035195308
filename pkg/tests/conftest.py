"""Shared instance generators for the test suite.

Two families:

* ``mk_tiny`` -- 2-3 units over 4-6 periods, small enough for the
  exhaustive oracle in :mod:`oracles` to price exactly.
* ``mk_inst`` -- 4+ units over 12 periods, used where the oracle is not
  needed (restoration, local search, pipelines).

Both reject parameter draws until the demand profile is comfortably
servable, so every returned instance passes ``validate_instance`` and is
known satisfiable.
"""
import dataclasses
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))

from ucopt.formulation import ONE_BIN, evaluate_commitment
from ucopt.instance import UcpInstance, UnitParams, derive_constants

# one line per sign-off check, echoed after the run summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance checks")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def with_params(unit, **kw):
    return dataclasses.replace(unit, **kw)


def mk_unit(r):
    p_max = r.uniform(80, 300)
    p_min = p_max * r.uniform(0.25, 0.45)
    ramp = (p_max - p_min) * r.uniform(0.5, 1.0)
    return UnitParams(
        alpha=r.uniform(100, 600), beta=r.uniform(5, 30),
        c_hot=r.uniform(50, 400), c_cold=r.uniform(400, 900),
        t_on=int(r.integers(1, 4)), t_off=int(r.integers(1, 4)),
        t_cold=int(r.integers(1, 3)),
        p_max=p_max, p_min=p_min, ramp_up=ramp, ramp_down=ramp,
        ramp_start=p_min + 0.75 * ramp, ramp_shut=p_min + 0.75 * ramp,
        u0=int(r.integers(0, 2)), t0=0)


def mk_inst(seed, n=4, T=12):
    """Random satisfiable instance; unit 0 always starts committed."""
    for trial in range(40):
        r = np.random.default_rng(seed + 9973 * trial)
        units = [mk_unit(r) for _ in range(n)]
        units[0] = with_params(units[0], u0=1)
        for i, un in enumerate(units):
            units[i] = with_params(
                un, t0=int(r.integers(1, 3)) if un.u0 else -1)
        cap = sum(un.p_max for un in units)
        off_until = [max(0, un.t_off + un.t0) if un.u0 == 0 else 0
                     for un in units]
        avail = [sum(un.p_max for un, lk in zip(units, off_until) if t >= lk)
                 for t in range(T)]
        floor = [sum(un.p_min for un, lk in zip(units, off_until) if t >= lk)
                 for t in range(T)]
        if any(1.06 * f > 0.8 * a for f, a in zip(floor, avail)):
            continue
        mid, amp = 0.58, 0.09
        demand = [min(max(cap * (mid + amp * math.sin(2 * math.pi * t / T)),
                          1.06 * floor[t]), 0.8 * avail[t]) for t in range(T)]
        reserve = [0.1 * d for d in demand]
        inst = UcpInstance(name="g%d" % seed, horizon=T, units=tuple(units),
                           demand=tuple(demand), reserve=tuple(reserve))
        # certify satisfiability: committing every unit the moment its lock
        # releases honors all locks and run lengths, so a feasible dispatch
        # for it proves the instance solvable
        u_all = np.array([[int(t >= lk) for t in range(T)]
                          for lk in off_until])
        if evaluate_commitment(inst, ONE_BIN, u_all).feasible:
            return inst
    raise RuntimeError("no viable instance near seed %d" % seed)


def mk_tiny_unit(r):
    p_max = r.uniform(50, 150)
    p_min = p_max * r.uniform(0.2, 0.5)
    ramp = (p_max - p_min) * r.uniform(0.6, 1.1)
    u0 = int(r.integers(0, 2))
    t0 = int(r.integers(1, 4)) if u0 else -int(r.integers(1, 5))
    return UnitParams(
        alpha=r.uniform(80, 400), beta=r.uniform(3, 20),
        c_hot=r.uniform(40, 200), c_cold=r.uniform(250, 800),
        t_on=int(r.integers(1, 4)), t_off=int(r.integers(1, 4)),
        t_cold=int(r.integers(0, 3)),
        p_max=p_max, p_min=p_min, ramp_up=ramp, ramp_down=ramp,
        ramp_start=p_min + r.uniform(0.5, 1.0) * ramp,
        ramp_shut=p_min + r.uniform(0.5, 1.0) * ramp,
        u0=u0, t0=t0)


def mk_tiny(seed, n, T):
    """Oracle-sized satisfiable instance (exhaustive enumeration friendly)."""
    for trial in range(60):
        r = np.random.default_rng(seed + 7919 * trial)
        units = [mk_tiny_unit(r) for _ in range(n)]
        off_until = [(u.t_off + u.t0 if u.u0 == 0 else 0) for u in units]
        avail = [sum(u.p_max for u, lk in zip(units, off_until) if t >= lk)
                 for t in range(T)]
        floor = [sum(u.p_min for u, lk in zip(units, off_until) if t >= lk)
                 for t in range(T)]
        if any(1.05 * f > 0.72 * a for f, a in zip(floor, avail)):
            continue
        cap = sum(u.p_max for u in units)
        demand = [min(max(cap * (0.45 + 0.15 * math.sin(2 * math.pi * t / T)
                               + 0.05 * float(r.normal())),
                          1.05 * floor[t]), 0.72 * avail[t]) for t in range(T)]
        if min(demand) <= 0.0:   # every unit locked off in some period
            continue
        reserve = [0.08 * d for d in demand]
        return UcpInstance("tiny%d" % seed, T, tuple(units),
                           tuple(demand), tuple(reserve))
    raise RuntimeError("no viable tiny instance at seed %d" % seed)


def max_scores(inst):
    """Scores that round to all-on outside each unit's initial off lock."""
    n, T = len(inst.units), inst.horizon
    dc = derive_constants(inst)
    sc = np.full((n, T), 0.9)
    for g in range(n):
        if inst.units[g].u0 == 0:
            sc[g, :dc.l_lock[g]] = 0.1
    return sc


def rand_scores(r, n, T):
    """Smooth per-unit sinusoid plus noise, clipped into (0, 1)."""
    freq = r.uniform(0.5, 1.5, size=n)
    phase = r.uniform(0, 2 * np.pi, size=n)
    amp = r.uniform(0.2, 0.45, size=n)
    base = r.uniform(0.35, 0.65, size=n)
    t = np.arange(T)
    sc = base[:, None] + amp[:, None] * np.sin(
        2 * np.pi * freq[:, None] * t[None, :] / T + phase[:, None])
    sc += r.normal(0, 0.05, size=(n, T))
    return np.clip(sc, 0.02, 0.98)
