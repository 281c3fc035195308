"""Benchmark pipeline over the ablation arms, plus input preparation.

generate_system grows a base system by duplication, ingest_loads maps a
year of load rows onto an instance's capacity, run_pipeline executes the
selected solver arms on one instance and records objective trajectories,
and compute_metrics turns those records into a plot-ready table.  File
handling lives in the CLI; everything here works on in-memory objects.

The four arms share one prediction and one restoration per instance, so
differences between their trajectories come from the search strategy
alone.  Trajectory timestamps include the preparation stages a strategy
actually needs (prediction, restoration, local search), which keeps time
cuts comparable across arms.
"""
import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInstance, MalformedCsv, MissingReference
from .formulation import (ONE_BIN, DispatchEvaluator, build_mip,
                          extract_commitment)
from .instance import UcpInstance, validate_instance
from .mip import solve_mip
from .policy import (file_scores_policy, load_weights, lp_fractional_policy,
                     rgcn_forward)
from .restore import heuristic_restore
from .search import LnsConfig, lns_run, local_search
from .trigraph import MODE_LP, attach_solution_features, encode

METHODS = ("IP-LNS", "IP-WS", "WS", "BnB")

SPLIT_TRAIN, SPLIT_VALIDATION, SPLIT_TEST = "train", "validation", "test"


@dataclass
class LoadProfile:
    """One ingested day: scaled demand plus the derived reserve."""
    day: int                    # 1-based row number in the source file
    split: str                  # train / validation / test
    demand: list
    reserve: list


@dataclass
class RunRecord:
    """Objective trajectory of one method on one instance.

    series holds (wall_ms, objective, bound) with nonincreasing
    objectives; bound is None where no dual bound was known.
    """
    instance: str
    method: str
    series: list = field(default_factory=list)
    status: str = ""


def record_to_dict(rec):
    def num(x):
        return None if x is None or not math.isfinite(x) else float(x)
    return {"instance": rec.instance, "method": rec.method,
            "status": rec.status,
            "series": [[float(ms), num(obj), num(bd)]
                       for ms, obj, bd in rec.series]}


def record_from_dict(doc):
    series = [(float(ms), None if obj is None else float(obj),
               None if bd is None else float(bd))
              for ms, obj, bd in doc["series"]]
    return RunRecord(instance=doc["instance"], method=doc["method"],
                     series=series, status=doc["status"])


def generate_system(base, copies):
    """Duplicate a base system `copies` times, scaling demand to match."""
    copies = int(copies)
    if copies < 1:
        raise ValueError("copies must be >= 1")
    inst = UcpInstance(
        name=base.name if copies == 1 else "%s_x%d" % (base.name, copies),
        horizon=base.horizon,
        units=tuple(base.units) * copies,
        demand=tuple(d * copies for d in base.demand),
        reserve=tuple(r * copies for r in base.reserve))
    problems = validate_instance(inst)
    if problems:
        raise InvalidInstance("; ".join(problems))
    return inst


def ingest_loads(path, inst, peak_ratio=0.8, reserve_ratio=0.1, jitter=0.0,
                 seed=0):
    """Map per-day load rows onto an instance's capacity.

    Each CSV row is one day with one load value per period; values are
    rescaled linearly so the day's peak equals peak_ratio times total
    capacity, then optionally perturbed multiplicatively by up to
    +-jitter.  Day numbers ending in 3 go to the validation split, in 7
    to the test split, everything else to train.
    """
    cap = sum(un.p_max for un in inst.units)
    T = inst.horizon
    rng = np.random.default_rng(seed)
    rows = []
    try:
        with open(path, newline="") as fh:
            for day, cells in enumerate(csv.reader(fh), start=1):
                if not cells:
                    continue
                try:
                    vals = [float(c) for c in cells]
                except ValueError as exc:
                    raise MalformedCsv("day %d: %s" % (day, exc)) from None
                if len(vals) != T:
                    raise MalformedCsv("day %d has %d values, expected %d"
                                       % (day, len(vals), T))
                peak = max(vals)
                if peak <= 0:
                    raise MalformedCsv("day %d has no positive load" % day)
                scale = peak_ratio * cap / peak
                demand = [v * scale for v in vals]
                if jitter:
                    demand = [d * (1.0 + rng.uniform(-jitter, jitter))
                              for d in demand]
                last = day % 10
                split = SPLIT_VALIDATION if last == 3 else \
                    SPLIT_TEST if last == 7 else SPLIT_TRAIN
                rows.append(LoadProfile(
                    day=day, split=split, demand=demand,
                    reserve=[reserve_ratio * d for d in demand]))
    except OSError as exc:
        raise MalformedCsv("cannot read %s: %s" % (path, exc)) from None
    return rows


_PIPE_DEFAULTS = {
    "form": ONE_BIN,
    "methods": METHODS,
    "policy": "lp",           # lp | rgcn | file
    "weights": None,          # weight file for rgcn, score file for file
    "seed": 0,
    "node_limit": 2000,       # per-arm branch-and-bound budget
    "time_limit": None,       # per-arm seconds, optional
    "max_step": 20,           # LNS iteration cap
}


def _pipe_config(config):
    cfg = dict(_PIPE_DEFAULTS)
    for key, val in (config or {}).items():
        if key not in cfg:
            raise ValueError("unknown pipeline option %r" % key)
        if val is not None:
            cfg[key] = val
    bad = [mth for mth in cfg["methods"] if mth not in METHODS]
    if bad:
        raise ValueError("unknown methods %r" % bad)
    return cfg


def policy_scores(m, policy="lp", weights=None):
    """Arm-independent prediction stage.

    Returns (scores, nbr_policy): the scores drive restoration and
    local-search freezing; nbr_policy maps an incumbent-featured graph to
    fresh scores each LNS iteration (constant except for rgcn, which
    re-reads the attached incumbent).
    """
    if policy == "lp":
        scores = lp_fractional_policy(m)
        return scores, lambda gk: scores
    if policy == "rgcn":
        if not weights:
            raise ValueError("policy 'rgcn' needs a weights path")
        w = load_weights(weights)
        lp_scores = lp_fractional_policy(m)
        base = encode(m)
        lp_vals = np.zeros(m.n_vars)
        lp_vals[m.u_cols()] = lp_scores.ravel()
        g0 = attach_solution_features(base, lp_vals, MODE_LP)
        return rgcn_forward(g0, w), lambda gk: rgcn_forward(gk, w)
    if policy == "file":
        if not weights:
            raise ValueError("policy 'file' needs a score-file path")
        scores = file_scores_policy(weights, m.u_shape())
        return scores, lambda gk: scores
    raise ValueError("unknown policy %r" % policy)


def _mip_limits(cfg, node_scale=1.0):
    limits = {"node": max(1, int(cfg["node_limit"] * node_scale))}
    if cfg["time_limit"] is not None:
        limits["time"] = cfg["time_limit"] * node_scale
    return limits


def _series_from_solve(sol, offset_ms):
    out = [(offset_ms + e["wall_ms"], e["objective"], e["bound"])
           for e in sol.incumbent_log]
    if sol.values is not None:
        # terminal marker carries the final bound at full elapsed time
        out.append((offset_ms + sol.wall_time * 1000.0, sol.objective,
                    sol.bound))
    return out


def run_pipeline(inst, config=None):
    """Execute the configured arms on one instance.

    Returns one RunRecord per method.  The prediction and restoration
    stages run once and are shared, so every warm-started arm begins from
    the same commitment.
    """
    cfg = _pipe_config(config)
    m = build_mip(inst, cfg["form"])
    records = []

    warm_arms = [mth for mth in cfg["methods"] if mth != "BnB"]
    if warm_arms:
        t0 = time.perf_counter()
        scores, nbr_policy = policy_scores(m, cfg["policy"], cfg["weights"])
        res = heuristic_restore(inst, cfg["form"], scores)
        ev = DispatchEvaluator(inst, cfg["form"])
        start_vals = ev.dispatch_values(res.u_star)
        obj_star = float(np.dot(m.obj, start_vals))
        prep_ms = (time.perf_counter() - t0) * 1000.0

        ls_vals = None
        ls_ms = obj_ls = None
        if "IP-LNS" in warm_arms or "IP-WS" in warm_arms:
            t0 = time.perf_counter()
            ls_cfg = LnsConfig(sub_node=max(50, cfg["node_limit"] // 20),
                               sub_time=cfg["time_limit"])
            u_ls = local_search(m, scores, res.u_star, ls_cfg)
            ls_vals = ev.dispatch_values(u_ls)
            obj_ls = float(np.dot(m.obj, ls_vals))
            ls_ms = (time.perf_counter() - t0) * 1000.0

    for mth in cfg["methods"]:
        if mth == "BnB":
            sol = solve_mip(m, limits=_mip_limits(cfg))
            records.append(RunRecord(inst.name, mth,
                                     _series_from_solve(sol, 0.0),
                                     sol.status))
            continue
        if mth == "WS":
            sol = solve_mip(m, limits=_mip_limits(cfg), start=start_vals)
            series = [(prep_ms, obj_star, None)]
            series += _series_from_solve(sol, prep_ms)
            records.append(RunRecord(inst.name, mth, series, sol.status))
            continue
        if mth == "IP-WS":
            sol = solve_mip(m, limits=_mip_limits(cfg, 0.95),
                            start=ls_vals)
            series = [(prep_ms, obj_star, None),
                      (prep_ms + ls_ms, obj_ls, None)]
            series += _series_from_solve(sol, prep_ms + ls_ms)
            records.append(RunRecord(inst.name, mth, series, sol.status))
            continue
        # IP-LNS
        lns_cfg = LnsConfig(max_step=cfg["max_step"],
                            sub_node=max(50, cfg["node_limit"]
                                         // cfg["max_step"]),
                            time_limit=cfg["time_limit"],
                            stall_limit=max(3, cfg["max_step"] // 4))
        u_fin, log = lns_run(m, extract_commitment(m, ls_vals), nbr_policy,
                             lns_cfg)
        series = [(prep_ms, obj_star, None),
                  (prep_ms + ls_ms, obj_ls, None)]
        series += [(prep_ms + ls_ms + e["wall_ms"], e["objective"],
                    e["bound"]) for e in log]
        records.append(RunRecord(inst.name, mth, series, "Feasible"))

    for rec in records:
        objs = [obj for _, obj, _ in rec.series if obj is not None]
        assert all(b <= a + 1e-6 for a, b in zip(objs, objs[1:]))
    return records


def _value_at(rec, cut_ms):
    """Best objective this record attained at or before cut_ms."""
    best = None
    for ms, obj, _ in rec.series:
        if ms <= cut_ms and obj is not None:
            best = obj if best is None else min(best, obj)
    return best


def default_cuts(records, points=8):
    """Logarithmic time grid spanning the recorded trajectories."""
    times = [ms for rec in records for ms, _, _ in rec.series]
    if not times:
        return []
    hi = max(times)
    lo = max(1.0, min(ms for ms in times if ms > 0.0) if any(
        ms > 0.0 for ms in times) else 1.0)
    if hi <= lo:
        return [hi]
    return [float(x) for x in np.geomspace(lo, hi, points)]


def compute_metrics(records, reference, cuts=None, survival_gap=1e-3):
    """Per-method, per-cut summary of a record set.

    reference maps instance id to the objective v* that gaps are measured
    against ((v - v*) / v*).  For each time cut: mean gap over the
    instances where the method had produced a value (None when it had
    none anywhere), best-performance rate (fraction of instances where
    the method matches the best value among methods at that cut, ties
    counting for all, over instances where any method has a value), and
    survival rate (fraction of all instances with gap <= survival_gap).
    """
    methods = sorted({rec.method for rec in records},
                     key=lambda mth: METHODS.index(mth)
                     if mth in METHODS else len(METHODS))
    instances = sorted({rec.instance for rec in records})
    for name in instances:
        if name not in reference:
            raise MissingReference("no reference objective for %r" % name)
    if cuts is None:
        cuts = default_cuts(records)

    by_key = {}
    for rec in records:
        by_key.setdefault((rec.instance, rec.method), []).append(rec)

    rows = []
    for cut in cuts:
        vals = {}
        for name in instances:
            for mth in methods:
                best = None
                for rec in by_key.get((name, mth), ()):
                    v = _value_at(rec, cut)
                    if v is not None:
                        best = v if best is None else min(best, v)
                vals[name, mth] = best
        covered = [name for name in instances
                   if any(vals[name, mth] is not None for mth in methods)]
        for mth in methods:
            gaps = []
            survived = 0
            best_hits = 0
            for name in instances:
                v = vals[name, mth]
                if v is None:
                    continue
                gap = (v - reference[name]) / reference[name]
                gaps.append(gap)
                if gap <= survival_gap:
                    survived += 1
            for name in covered:
                v = vals[name, mth]
                if v is None:
                    continue
                others = [vals[name, o] for o in methods
                          if vals[name, o] is not None]
                if v <= min(others) + 1e-9 * max(1.0, abs(min(others))):
                    best_hits += 1
            rows.append({
                "method": mth,
                "cut_ms": float(cut),
                "n_with_value": len(gaps),
                "mean_gap": sum(gaps) / len(gaps) if gaps else None,
                "best_rate": best_hits / len(covered) if covered else 0.0,
                "survival": survived / len(instances) if instances else 0.0,
            })
    return rows


def write_metrics_csv(rows, path):
    cols = ["method", "cut_ms", "n_with_value", "mean_gap", "best_rate",
            "survival"]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(cols)
        for row in rows:
            wr.writerow(["" if row[c] is None else row[c] for c in cols])
