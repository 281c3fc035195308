"""Command-line front end.

Subcommands cover the whole workflow: grow systems by duplication,
ingest load CSVs, export models as MPS, solve, restore, run the
neighborhood search, produce training datasets, and benchmark the
solver arms into plot-ready reports (JSON-lines trajectories plus a
CSV metric table).

Every subcommand accepts the shared flags (--form, --policy, --weights,
--seed, --time-limit, --node-limit, --out).  A JSON config file given
via --config supplies defaults for any of them; explicit flags win.
"""
import argparse
import glob
import json
import os
import sys

import numpy as np

from .bench import (METHODS, RunRecord, compute_metrics, default_cuts,
                    generate_system, ingest_loads, policy_scores,
                    record_from_dict, record_to_dict, run_pipeline,
                    write_metrics_csv)
from .datagen import (build_training_graphs, collect_pools, export_training_set,
                      gen_samples)
from .errors import MalformedInput, IoFailure, UcoptError
from .formulation import (ONE_BIN, THREE_BIN, DispatchEvaluator, build_mip,
                          extract_commitment)
from .instance import load_instance, save_instance
from .mip import export_mps, solve_mip
from .restore import heuristic_restore
from .search import LnsConfig, lns_run, local_search

FORMS = {"1bin": ONE_BIN, "3bin": THREE_BIN}

# flag destinations a --config file may set
CONFIG_KEYS = frozenset([
    "form", "policy", "weights", "seed", "time_limit", "node_limit", "out",
    "copies", "peak_ratio", "reserve_ratio", "jitter", "methods", "max_step",
    "cut_points", "first_feasible", "high_budget", "low_budget",
    "sample_budget", "reference",
])


def _load_config(argv):
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    if path is None:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoFailure("cannot read config %s: %s" % (path, exc)) from None
    except ValueError as exc:
        raise MalformedInput("config %s is not valid JSON: %s"
                             % (path, exc)) from None
    if not isinstance(doc, dict):
        raise MalformedInput("config %s must hold a JSON object" % path)
    out = {}
    for key, val in doc.items():
        dest = key.replace("-", "_")
        if dest not in CONFIG_KEYS:
            raise MalformedInput("unknown config key %r" % key)
        out[dest] = val
    return out


def build_parser(defaults=None):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--form", choices=sorted(FORMS), default="1bin")
    common.add_argument("--policy", choices=["rgcn", "lp", "file"],
                        default="lp")
    common.add_argument("--weights", metavar="PATH",
                        help="weight file for rgcn, score file for file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--time-limit", type=float, metavar="SEC")
    common.add_argument("--node-limit", type=int, metavar="N")
    common.add_argument("--out", metavar="DIR", default=".")
    common.add_argument("--config", metavar="PATH",
                        help="JSON file with defaults for any flag")

    parser = argparse.ArgumentParser(
        prog="ucopt", description="unit commitment optimization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = []

    p = sub.add_parser("gen-system", parents=[common],
                       help="duplicate a base system")
    subs.append(p)
    p.add_argument("instance")
    p.add_argument("--copies", type=int, default=1)

    p = sub.add_parser("ingest-loads", parents=[common],
                       help="map a load CSV onto an instance")
    subs.append(p)
    p.add_argument("csv")
    p.add_argument("instance")
    p.add_argument("--peak-ratio", type=float, default=0.8)
    p.add_argument("--reserve-ratio", type=float, default=0.1)
    p.add_argument("--jitter", type=float, default=0.0)

    p = sub.add_parser("build", parents=[common],
                       help="export the MIP as an MPS file")
    subs.append(p)
    p.add_argument("instance")

    p = sub.add_parser("solve", parents=[common],
                       help="branch-and-bound solve")
    subs.append(p)
    p.add_argument("instance")
    p.add_argument("--first-feasible", action="store_true")

    p = sub.add_parser("restore", parents=[common],
                       help="predict scores and restore a feasible commitment")
    subs.append(p)
    p.add_argument("instance")

    p = sub.add_parser("lns", parents=[common],
                       help="full pipeline: predict, restore, search")
    subs.append(p)
    p.add_argument("instance")
    p.add_argument("--max-step", type=int, default=50)

    p = sub.add_parser("datagen", parents=[common],
                       help="produce a training dataset from one instance")
    subs.append(p)
    p.add_argument("instance")
    p.add_argument("--high-budget", type=int, default=20000)
    p.add_argument("--low-budget", type=int, default=2000)
    p.add_argument("--sample-budget", type=int, default=5000)

    p = sub.add_parser("bench", parents=[common],
                       help="run solver arms and write records + metrics")
    subs.append(p)
    p.add_argument("instances", nargs="+",
                   help="instance files or directories of them")
    p.add_argument("--methods", nargs="+", default=list(METHODS),
                   choices=METHODS)
    p.add_argument("--max-step", type=int, default=20)
    p.add_argument("--cut-points", type=int, default=8)

    p = sub.add_parser("report", parents=[common],
                       help="recompute the metric table from records")
    subs.append(p)
    p.add_argument("records", help="records.jsonl from a bench run")
    p.add_argument("--reference", metavar="PATH",
                   help="reference objectives JSON (default: best-known)")
    p.add_argument("--cut-points", type=int, default=8)

    # subparsers re-parse into a fresh namespace, so config-file defaults
    # must be installed on every subparser, not just the root parser
    if defaults:
        for sp in subs:
            sp.set_defaults(**defaults)
    return parser


def _form(args):
    try:
        return FORMS[args.form]
    except KeyError:
        raise MalformedInput("unknown formulation %r" % args.form) from None


def _limits(args, default_nodes=20000):
    limits = {"node": args.node_limit or default_nodes}
    if args.time_limit is not None:
        limits["time"] = args.time_limit
    return limits


def _outpath(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _write_json(path, doc):
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
    except (OSError, ValueError) as exc:
        raise IoFailure("cannot write %s: %s" % (path, exc)) from None


def cmd_gen_system(args):
    base = load_instance(args.instance)
    inst = generate_system(base, args.copies)
    path = _outpath(args, inst.name + ".json")
    save_instance(inst, path)
    print("%s: %d units, %d periods -> %s"
          % (inst.name, inst.n_units, inst.horizon, path))
    return 0


def cmd_ingest_loads(args):
    inst = load_instance(args.instance)
    profiles = ingest_loads(args.csv, inst, peak_ratio=args.peak_ratio,
                            reserve_ratio=args.reserve_ratio,
                            jitter=args.jitter, seed=args.seed)
    counts = {}
    for p in profiles:
        day = inst.__class__(name="%s_day%03d" % (inst.name, p.day),
                             horizon=inst.horizon, units=inst.units,
                             demand=tuple(p.demand), reserve=tuple(p.reserve))
        sub = os.path.join(args.out, p.split)
        os.makedirs(sub, exist_ok=True)
        save_instance(day, os.path.join(sub, day.name + ".json"))
        counts[p.split] = counts.get(p.split, 0) + 1
    by = " ".join("%s=%d" % (s, counts.get(s, 0))
                  for s in ("train", "validation", "test"))
    print("%d days ingested (%s) -> %s" % (len(profiles), by, args.out))
    return 0


def cmd_build(args):
    inst = load_instance(args.instance)
    m = build_mip(inst, _form(args))
    path = _outpath(args, "%s_%s.mps" % (inst.name, args.form))
    try:
        with open(path, "w") as fh:
            fh.write(export_mps(m))
    except OSError as exc:
        raise IoFailure("cannot write %s: %s" % (path, exc)) from None
    print("%s: %d vars, %d rows -> %s" % (m.name, m.n_vars, m.n_rows, path))
    return 0


def cmd_solve(args):
    inst = load_instance(args.instance)
    m = build_mip(inst, _form(args))
    sol = solve_mip(m, limits=_limits(args),
                    first_feasible=args.first_feasible)
    doc = {"instance": inst.name, "form": args.form, "status": sol.status,
           "objective": sol.objective if sol.values is not None else None,
           "bound": None if not np.isfinite(sol.bound) else sol.bound,
           "nodes": sol.nodes, "wall_time": sol.wall_time}
    if sol.values is not None:
        doc["u"] = extract_commitment(m, sol.values).tolist()
    path = _outpath(args, "%s_solution.json" % inst.name)
    _write_json(path, doc)
    obj = "no incumbent" if sol.values is None else "%.6g" % sol.objective
    print("%s: %s, objective %s, %d nodes, %.2fs -> %s"
          % (inst.name, sol.status, obj, sol.nodes, sol.wall_time, path))
    return 0 if sol.values is not None else 1


def cmd_restore(args):
    inst = load_instance(args.instance)
    form = _form(args)
    m = build_mip(inst, form)
    scores, _ = policy_scores(m, args.policy, args.weights)
    res = heuristic_restore(inst, form, scores)
    ev = DispatchEvaluator(inst, form)
    obj = float(np.dot(m.obj, ev.dispatch_values(res.u_star)))
    doc = {"instance": inst.name, "form": args.form, "objective": obj,
           "pump_used": res.pump_used, "forced_on": len(res.forced_on),
           "wall_time": res.wall_time, "u": res.u_star.tolist()}
    path = _outpath(args, "%s_restore.json" % inst.name)
    _write_json(path, doc)
    print("%s: objective %.6g, pump=%s, %d forced on -> %s"
          % (inst.name, obj, res.pump_used, len(res.forced_on), path))
    return 0


def cmd_lns(args):
    inst = load_instance(args.instance)
    form = _form(args)
    m = build_mip(inst, form)
    scores, nbr_policy = policy_scores(m, args.policy, args.weights)
    res = heuristic_restore(inst, form, scores)
    ev = DispatchEvaluator(inst, form)
    nodes = args.node_limit or 2000
    ls_cfg = LnsConfig(sub_node=max(50, nodes // 20),
                       sub_time=args.time_limit)
    u_ls = local_search(m, scores, res.u_star, ls_cfg)
    cfg = LnsConfig(max_step=args.max_step,
                    sub_node=max(50, nodes // args.max_step),
                    time_limit=args.time_limit,
                    stall_limit=max(3, args.max_step // 4))
    u_fin, log = lns_run(m, u_ls, nbr_policy, cfg)
    obj0 = float(np.dot(m.obj, ev.dispatch_values(res.u_star)))
    obj = float(np.dot(m.obj, ev.dispatch_values(u_fin)))
    doc = {"instance": inst.name, "form": args.form, "objective": obj,
           "restored_objective": obj0, "iterations": len(log),
           "log": log, "u": u_fin.tolist()}
    path = _outpath(args, "%s_lns.json" % inst.name)
    _write_json(path, doc)
    print("%s: objective %.6g after %d iterations (restored %.6g) -> %s"
          % (inst.name, obj, len(log), obj0, path))
    return 0


def cmd_datagen(args):
    inst = load_instance(args.instance)
    form = _form(args)
    pools = collect_pools(inst, form, {"high": args.high_budget,
                                       "low": args.low_budget})
    samples = gen_samples(pools, node_budget=args.sample_budget,
                          seed=args.seed)
    graphs = build_training_graphs(pools)
    out_dir = os.path.join(args.out, "%s_%s_data" % (inst.name, args.form))
    manifest = export_training_set(pools, samples, graphs, out_dir)
    c = manifest["counts"]
    print("%s: %d positive, %d negative, %d initial -> %s"
          % (inst.name, c["positive"], c["negative"], c["initial"], out_dir))
    return 0


def _expand_instances(paths):
    files = []
    for p in paths:
        if os.path.isdir(p):
            found = sorted(glob.glob(os.path.join(p, "*.json")))
            if not found:
                raise MalformedInput("no instance files in %s" % p)
            files.extend(found)
        else:
            files.append(p)
    return files


def _best_finals(records):
    best = {}
    for rec in records:
        vals = [obj for _, obj, _ in rec.series if obj is not None]
        if vals:
            v = min(vals)
            cur = best.get(rec.instance)
            best[rec.instance] = v if cur is None else min(cur, v)
    return best


def _print_metrics(rows):
    print("%-8s %10s %6s %12s %10s %10s"
          % ("method", "cut_ms", "n", "mean_gap", "best_rate", "survival"))
    for r in rows:
        gap = "-" if r["mean_gap"] is None else "%.6f" % r["mean_gap"]
        print("%-8s %10.1f %6d %12s %10.3f %10.3f"
              % (r["method"], r["cut_ms"], r["n_with_value"], gap,
                 r["best_rate"], r["survival"]))


def _finish_report(args, records, reference):
    known = [rec for rec in records if rec.instance in reference]
    dropped = {rec.instance for rec in records} - set(reference)
    for name in sorted(dropped):
        print("warning: no objective recorded for %s; excluded" % name,
              file=sys.stderr)
    cuts = default_cuts(known, points=args.cut_points)
    rows = compute_metrics(known, reference, cuts)
    path = _outpath(args, "metrics.csv")
    write_metrics_csv(rows, path)
    _print_metrics(rows)
    print("metrics -> %s" % path)
    return rows


def cmd_bench(args):
    files = _expand_instances(args.instances)
    config = {"form": _form(args), "methods": list(args.methods),
              "policy": args.policy, "weights": args.weights,
              "seed": args.seed, "node_limit": args.node_limit,
              "time_limit": args.time_limit, "max_step": args.max_step}
    records = []
    for path in files:
        inst = load_instance(path)
        recs = run_pipeline(inst, config)
        records.extend(recs)
        done = ", ".join("%s %.6g" % (r.method, min(
            (o for _, o, _ in r.series if o is not None), default=float("nan")))
            for r in recs)
        print("%s: %s" % (inst.name, done))
    rec_path = _outpath(args, "records.jsonl")
    try:
        with open(rec_path, "w") as fh:
            for rec in records:
                fh.write(json.dumps(record_to_dict(rec), sort_keys=True))
                fh.write("\n")
    except OSError as exc:
        raise IoFailure("cannot write %s: %s" % (rec_path, exc)) from None
    reference = _best_finals(records)
    _write_json(_outpath(args, "reference.json"), reference)
    print("records -> %s" % rec_path)
    _finish_report(args, records, reference)
    return 0


def cmd_report(args):
    try:
        with open(args.records) as fh:
            records = [record_from_dict(json.loads(line))
                       for line in fh if line.strip()]
    except OSError as exc:
        raise IoFailure("cannot read %s: %s" % (args.records, exc)) from None
    except (KeyError, ValueError) as exc:
        raise MalformedInput("bad record line in %s: %s"
                             % (args.records, exc)) from None
    if not records:
        raise MalformedInput("no records in %s" % args.records)
    if args.reference:
        try:
            with open(args.reference) as fh:
                reference = {k: float(v) for k, v in json.load(fh).items()}
        except OSError as exc:
            raise IoFailure("cannot read %s: %s"
                            % (args.reference, exc)) from None
        except (ValueError, AttributeError) as exc:
            raise MalformedInput("bad reference file %s: %s"
                                 % (args.reference, exc)) from None
    else:
        reference = _best_finals(records)
    _finish_report(args, records, reference)
    return 0


COMMANDS = {
    "gen-system": cmd_gen_system,
    "ingest-loads": cmd_ingest_loads,
    "build": cmd_build,
    "solve": cmd_solve,
    "restore": cmd_restore,
    "lns": cmd_lns,
    "datagen": cmd_datagen,
    "bench": cmd_bench,
    "report": cmd_report,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser(_load_config(argv))
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except (UcoptError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
