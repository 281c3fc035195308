"""Unit-commitment instance data model.

An instance is a set of thermal units plus per-period demand and spinning
reserve over a horizon of T periods.  Unit fields:

    alpha       fixed cost per committed period ($)
    beta        variable cost per unit of output ($/MW)
    c_hot       hot startup cost ($), charged when downtime before the start
                is at most t_off + t_cold periods
    c_cold      cold startup cost ($), charged beyond that window
    t_on        minimum up time (periods)
    t_off      minimum down time (periods)
    t_cold      additional cooling time beyond t_off before a start counts
                as cold
    p_max       maximum output (MW)
    p_min       minimum output while committed (MW)
    ramp_up     max output increase between consecutive on periods (MW)
    ramp_down   max output decrease between consecutive on periods (MW)
    ramp_start  max output in the first period after a start (MW)
    ramp_shut   max output in the last period before a shutdown (MW)
    u0          initial commitment state (0/1)
    t0          periods the unit has already spent in state u0; positive
                when u0 = 1 and negative when u0 = 0

Instances are frozen after construction; every consumer treats them as
immutable values.
"""
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import InvalidInstance, MalformedInput

_UNIT_FIELDS = (
    "alpha", "beta", "c_hot", "c_cold", "t_on", "t_off", "t_cold",
    "p_max", "p_min", "ramp_up", "ramp_down", "ramp_start", "ramp_shut",
    "u0", "t0",
)


@dataclass(frozen=True)
class UnitParams:
    alpha: float
    beta: float
    c_hot: float
    c_cold: float
    t_on: int
    t_off: int
    t_cold: int
    p_max: float
    p_min: float
    ramp_up: float
    ramp_down: float
    ramp_start: float
    ramp_shut: float
    u0: int
    t0: int


@dataclass(frozen=True)
class UcpInstance:
    name: str
    horizon: int
    units: tuple
    demand: tuple
    reserve: tuple

    @property
    def n_units(self):
        return len(self.units)

    def unit_array(self, field_name):
        """Per-unit parameter vector as float64."""
        return np.array([getattr(u, field_name) for u in self.units], dtype=float)


@dataclass(frozen=True)
class DerivedConstants:
    """Per-unit constants implied by the instance data.

    u_lock[g]    leading periods the unit must stay committed
    l_lock[g]    leading periods the unit must stay down
    n_d[g]       depth of the stepwise startup-cost lookback window
    k_step[g]    startup-cost step values, k_step[g][tau-1] for tau = 1..n_d[g]
    f_init[g]    per-period flags, 1 when a pre-horizon shutdown still lies
                 inside the hot-start window at period t
    """
    u_lock: tuple
    l_lock: tuple
    n_d: tuple
    k_step: tuple
    f_init: tuple


def derive_constants(inst):
    """Compute lock lengths, startup-cost steps and hot-window flags."""
    T = inst.horizon
    u_lock, l_lock, n_d, k_step, f_init = [], [], [], [], []
    for u in inst.units:
        u_lock.append(int(max(0, min(T, u.u0 * (u.t_on - u.t0)))))
        l_lock.append(int(max(0, min(T, (1 - u.u0) * (u.t_off + u.t0)))))
        # one step past the hot window so a cold start is always chargeable,
        # even when the downtime run began before the horizon
        nd = int(u.t_off + u.t_cold + 1)
        n_d.append(nd)
        window = u.t_off + u.t_cold
        k_step.append(tuple(u.c_hot if tau <= window else u.c_cold
                            for tau in range(1, nd + 1)))
        flags = []
        for t in range(1, T + 1):
            lead = t - u.t_off - u.t_cold
            flags.append(1 if lead <= 0 and max(-u.t0, 0) < abs(lead - 1) + 1 else 0)
        f_init.append(tuple(flags))
    return DerivedConstants(tuple(u_lock), tuple(l_lock), tuple(n_d),
                            tuple(k_step), tuple(f_init))


def history_state(unit, p):
    """Commitment state of `unit` at pre-horizon period p (p <= 0).

    The unit has been in state u0 for |t0| periods ending at period 0, and in
    the opposite state before that.
    """
    if p > 0:
        raise ValueError("history_state is for periods <= 0")
    span = abs(unit.t0)
    return unit.u0 if p > -span else 1 - unit.u0


def validate_instance(inst):
    """Report parameter-range and cross-field violations.

    Returns a list of human-readable violation strings; an empty list means
    the instance is valid.  Never raises.
    """
    report = []
    if inst.horizon < 1:
        report.append("horizon must be >= 1")
        return report
    if len(inst.units) == 0:
        report.append("instance has no units")
    if len(inst.demand) != inst.horizon or len(inst.reserve) != inst.horizon:
        report.append("demand/reserve length must equal horizon")
        return report
    for t, (d, r) in enumerate(zip(inst.demand, inst.reserve), start=1):
        if not np.isfinite(d) or d <= 0:
            report.append("demand[%d] must be finite and > 0" % t)
        if not np.isfinite(r) or r < 0:
            report.append("reserve[%d] must be finite and >= 0" % t)
    for g, u in enumerate(inst.units):
        where = "unit %d: " % g
        if u.p_max <= 0 or u.p_min < 0 or u.p_min > u.p_max:
            report.append(where + "need 0 <= p_min <= p_max, p_max > 0")
        if u.t_on < 1 or u.t_off < 1 or u.t_cold < 0:
            report.append(where + "need t_on >= 1, t_off >= 1, t_cold >= 0")
        if u.alpha < 0 or u.beta < 0 or u.c_hot < 0 or u.c_cold < 0:
            report.append(where + "costs must be >= 0")
        if u.ramp_up < 0 or u.ramp_down < 0:
            report.append(where + "ramp rates must be >= 0")
        if u.ramp_start < u.p_min or u.ramp_shut < u.p_min:
            report.append(where + "ramp_start/ramp_shut must be >= p_min")
        if u.u0 not in (0, 1):
            report.append(where + "u0 must be 0 or 1")
        elif u.u0 == 1 and u.t0 < 1:
            report.append(where + "t0 must be >= 1 when u0 = 1")
        elif u.u0 == 0 and u.t0 > -1:
            report.append(where + "t0 must be <= -1 when u0 = 0")
    if inst.units and not report:
        cap = sum(u.p_max for u in inst.units)
        worst = int(np.argmax([d + r for d, r in zip(inst.demand, inst.reserve)]))
        need = inst.demand[worst] + inst.reserve[worst]
        if cap < need:
            report.append("capacity %.6g below demand+reserve %.6g at t=%d"
                          % (cap, need, worst + 1))
    return report


def instance_to_dict(inst):
    return {
        "name": inst.name,
        "horizon": inst.horizon,
        "units": [asdict(u) for u in inst.units],
        "demand": list(inst.demand),
        "reserve": list(inst.reserve),
    }


def instance_from_dict(doc):
    """Build an instance from a parsed JSON document.

    Unknown fields are rejected so that silently misspelled parameters cannot
    slip through.
    """
    if not isinstance(doc, dict):
        raise MalformedInput("instance document must be an object")
    top_known = {"name", "horizon", "units", "demand", "reserve"}
    extra = set(doc) - top_known
    if extra:
        raise MalformedInput("unknown instance fields: %s" % sorted(extra))
    missing = top_known - set(doc)
    if missing:
        raise MalformedInput("missing instance fields: %s" % sorted(missing))
    units = []
    for g, ud in enumerate(doc["units"]):
        if not isinstance(ud, dict):
            raise MalformedInput("unit %d must be an object" % g)
        extra = set(ud) - set(_UNIT_FIELDS)
        if extra:
            raise MalformedInput("unit %d has unknown fields: %s" % (g, sorted(extra)))
        missing = set(_UNIT_FIELDS) - set(ud)
        if missing:
            raise MalformedInput("unit %d missing fields: %s" % (g, sorted(missing)))
        try:
            units.append(UnitParams(
                alpha=float(ud["alpha"]), beta=float(ud["beta"]),
                c_hot=float(ud["c_hot"]), c_cold=float(ud["c_cold"]),
                t_on=int(ud["t_on"]), t_off=int(ud["t_off"]),
                t_cold=int(ud["t_cold"]),
                p_max=float(ud["p_max"]), p_min=float(ud["p_min"]),
                ramp_up=float(ud["ramp_up"]), ramp_down=float(ud["ramp_down"]),
                ramp_start=float(ud["ramp_start"]), ramp_shut=float(ud["ramp_shut"]),
                u0=int(ud["u0"]), t0=int(ud["t0"])))
        except (TypeError, ValueError) as exc:
            raise MalformedInput("unit %d: %s" % (g, exc))
    try:
        inst = UcpInstance(
            name=str(doc["name"]),
            horizon=int(doc["horizon"]),
            units=tuple(units),
            demand=tuple(float(v) for v in doc["demand"]),
            reserve=tuple(float(v) for v in doc["reserve"]),
        )
    except (TypeError, ValueError) as exc:
        raise MalformedInput(str(exc))
    report = validate_instance(inst)
    if report:
        raise InvalidInstance("; ".join(report))
    return inst


def load_instance(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedInput("not valid JSON: %s" % exc)
    return instance_from_dict(doc)


def save_instance(inst, path):
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=1)
        fh.write("\n")


def packaged_instance_path(name):
    """Filesystem path of a bundled example system, e.g. "unit8"."""
    from importlib import resources
    return str(resources.files("ucopt").joinpath("data", name + ".json"))
