"""Training-data generation: commitment pools and neighborhood samples.

Pool collection emulates a solution pool with a plain branch-and-bound
solver: each near-optimal commitment found is excluded with a no-good
cut and the model re-solved, so successive solves walk down the ranked
list of distinct commitments.  Incumbents observed along the way that
are meaningfully worse than the near-optimal pool become the "middle"
commitments that neighborhood samples are built around; a coarse-gap
sweep supplies a larger pool of mediocre "low" commitments.

A sample's mask is the cell-wise difference between a middle commitment
and a pool commitment; it is labeled by how much a budgeted restricted
solve over that mask improves the middle commitment.  Masks borrowed
from good commitments that recover most of the available improvement
are positives; masks from mediocre commitments that recover almost
nothing are negatives, padded by random perturbation when the low pool
alone cannot supply enough of them.
"""
import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from .errors import InstanceInfeasible, IoFailure, NoPositives
from .formulation import build_mip, extract_commitment
from .mip import GE, INFEASIBLE, SimplexEngine, solve_mip
from .mip.problem import fix_and_sub
from .mip.simplex import LP_OPTIMAL
from .trigraph import (MODE_INCUMBENT, MODE_LP, SCHEMA_VERSION,
                       attach_solution_features, deserialize, encode,
                       serialize)

log = logging.getLogger(__name__)

DATASET_FORMAT = "ucopt-dataset"
DATASET_VERSION = 1
HIGH_SIZE = 10
LOW_SIZE = 90
MIDDLE_GAP = 1e-5
LOW_GAP = 1e-2


@dataclass
class CommitmentPools:
    high: list        # (commitment, objective), near-optimal, ranked
    middle: list      # (commitment, objective), search incumbents
    low: list         # (commitment, objective), coarse-gap sweep
    instance: object
    form: str


@dataclass
class NeighborhoodSample:
    base: np.ndarray      # the middle commitment the mask applies to
    mask: np.ndarray      # N x T, 1 = free
    label: str            # "positive" | "negative"
    improvement: float    # objective gain of the budgeted restricted solve


def _no_good_row(ucols, u, idx):
    """Row excluding exactly the commitment u (flip at least one cell)."""
    flat = np.asarray(u).ravel()
    coefs = np.where(flat == 1, -1.0, 1.0)
    rhs = 1.0 - float(flat.sum())
    return (list(ucols), list(coefs), GE, rhs, ("CUT", idx, 0),
            "cut_%d" % idx)


def _budgets(budgets):
    out = {"high": 20000, "low": 2000}
    for key, val in (budgets or {}).items():
        if key not in out:
            raise ValueError("unknown budget %r" % key)
        out[key] = int(val)
    return out


def collect_pools(inst, form, budgets=None):
    """Ranked distinct commitments via repeated solve-and-exclude.

    budgets: optional dict with per-solve node budgets for the "high"
    and "low" sweeps; a zero budget empties that pool.  Raises
    InstanceInfeasible when the first solve proves there is no feasible
    commitment at all.
    """
    bud = _budgets(budgets)
    m = build_mip(inst, form)
    ucols = list(m.u_cols())
    seen = {}

    def add(pool, u, obj):
        key = u.tobytes()
        if key not in seen:
            seen[key] = True
            pool.append((u, float(obj)))
            return True
        return False

    high, middle_raw, low = [], [], []
    cur = m
    cuts = 0
    if bud["high"] > 0:
        for _ in range(HIGH_SIZE):
            sol = solve_mip(cur, limits={"node": bud["high"]})
            if sol.status == INFEASIBLE:
                if not high:
                    raise InstanceInfeasible(
                        "%s has no feasible commitment" % inst.name)
                break
            if sol.values is None:
                break
            u = extract_commitment(m, sol.values)
            add(high, u, sol.objective)
            for entry in sol.incumbent_log:
                middle_raw.append((extract_commitment(m, entry["values"]),
                                   float(entry["objective"])))
            cur = cur.with_extra_rows([_no_good_row(ucols, u, cuts)])
            cuts += 1

    middle = []
    if high:
        mean_high = float(np.mean([obj for _, obj in high]))
        scale = max(abs(mean_high), 1e-12)
        for u, obj in middle_raw:
            if (obj - mean_high) / scale > MIDDLE_GAP:
                add(middle, u, obj)

    if bud["low"] > 0:
        cur = m
        for _ in range(LOW_SIZE + HIGH_SIZE):
            if len(low) >= LOW_SIZE:
                break
            sol = solve_mip(cur, limits={"node": bud["low"], "gap": LOW_GAP})
            if sol.values is None:
                break
            u = extract_commitment(m, sol.values)
            add(low, u, sol.objective)
            for entry in sol.incumbent_log:
                if len(low) >= LOW_SIZE:
                    break
                add(low, extract_commitment(m, entry["values"]),
                    entry["objective"])
            cur = cur.with_extra_rows([_no_good_row(ucols, u, cuts)])
            cuts += 1

    return CommitmentPools(high=high, middle=middle, low=low,
                           instance=inst, form=form)


def _restricted_gain(m, base, base_obj, base_vals, mask, node_budget):
    """Objective improvement of a budgeted solve freeing only mask cells."""
    sub = fix_and_sub(m, base, mask)
    sol = solve_mip(sub, limits={"node": node_budget}, start=base_vals)
    if sol.values is None:
        return 0.0
    return max(0.0, base_obj - float(sol.objective))


def gen_samples(pools, alpha_p=0.6, alpha_size=0.2, alpha_c=10,
                alpha_n=0.05, node_budget=5000, seed=0, max_passes=40):
    """Label xor-derived neighborhood masks around each middle commitment.

    Masks against the high pool whose budgeted improvement reaches
    alpha_p of the best such improvement are positives (capped at
    alpha_size * N * T cells); masks against the low pool recovering at
    most alpha_n of it are negatives, collected until alpha_c per
    positive or the perturbation passes run out.  Middles with no
    improving candidate are skipped with a log record; NoPositives is
    raised only when that leaves nothing at all.
    """
    if not pools.high or not pools.middle:
        raise ValueError("pools must contain high and middle commitments")
    m = build_mip(pools.instance, pools.form)
    n, t = m.u_shape()
    size_cap = alpha_size * n * t
    rng = np.random.default_rng(seed)
    samples = []
    for mi, (x_hat, obj_hat) in enumerate(pools.middle):
        sub0 = fix_and_sub(m, x_hat, np.zeros((n, t), dtype=np.int64))
        sol0 = solve_mip(sub0)
        base_vals = sol0.values
        cands, used = [], set()
        for x_p, _ in pools.high:
            mask = (x_hat != x_p).astype(np.int64)
            size = int(mask.sum())
            if size == 0 or size > size_cap:
                continue
            key = mask.tobytes()
            if key in used:
                continue
            used.add(key)
            gain = _restricted_gain(m, x_hat, obj_hat, base_vals, mask,
                                    node_budget)
            cands.append((mask, gain))
        best = max((gain for _, gain in cands), default=0.0)
        if best <= 0.0:
            log.info("middle %d of %s: no improving neighborhood, skipped",
                     mi, pools.instance.name)
            continue
        pos = [(mask, gain) for mask, gain in cands
               if gain >= alpha_p * best - 1e-12]
        for mask, gain in pos:
            samples.append(NeighborhoodSample(base=x_hat.copy(), mask=mask,
                                              label="positive",
                                              improvement=gain))
        want = int(round(alpha_c * len(pos)))
        got = 0
        for pass_no in range(max_passes):
            if got >= want or not pools.low:
                break
            frac = min(0.05 * pass_no, 1.0)
            for x_n, _ in pools.low:
                if got >= want:
                    break
                mask = (x_hat != x_n).astype(np.int64)
                if frac > 0.0:
                    k = max(1, int(round(frac * mask.size)))
                    idx = rng.choice(mask.size, size=k, replace=False)
                    mask = mask.copy()
                    mask.ravel()[idx] ^= 1
                if mask.sum() == 0:
                    continue
                key = mask.tobytes()
                if key in used:
                    continue
                used.add(key)
                gain = _restricted_gain(m, x_hat, obj_hat, base_vals, mask,
                                        node_budget)
                if gain <= alpha_n * best + 1e-12:
                    samples.append(NeighborhoodSample(
                        base=x_hat.copy(), mask=mask, label="negative",
                        improvement=gain))
                    got += 1
    if not samples:
        raise NoPositives("no middle commitment produced a positive sample")
    return samples


def build_training_graphs(pools):
    """Graphs consumed by export: LP-featured base plus one incumbent-
    featured graph per middle commitment."""
    m = build_mip(pools.instance, pools.form)
    n, t = m.u_shape()
    g0 = encode(m)
    engine = SimplexEngine(m)
    code, x, _ = engine.solve()
    if code != LP_OPTIMAL:
        raise InstanceInfeasible("LP relaxation of %s unsolved"
                                 % pools.instance.name)
    out = {"initial": attach_solution_features(g0, x, MODE_LP), "bases": []}
    for x_hat, _ in pools.middle:
        sub = fix_and_sub(m, x_hat, np.zeros((n, t), dtype=np.int64))
        sol = solve_mip(sub)
        out["bases"].append(
            attach_solution_features(g0, sol.values, MODE_INCUMBENT))
    return out


def export_training_set(pools, samples, graphs, out_dir):
    """Write the dataset directory: manifest, graph files, record files.

    Layout: manifest.json lists every other file.  graph_lp.json holds
    the LP-featured instance graph; graph_mid_NNN.json the incumbent-
    featured graph of middle commitment NNN.  sample_NNNNN.json records
    reference their graph file by name and carry base, mask, label and
    improvement; initial_000.json pairs the LP graph with the best high
    commitment as target.
    """
    if graphs["initial"].meta.get("mode") != MODE_LP:
        raise ValueError("initial graph must carry LP features")
    for g in graphs["bases"]:
        if g.meta.get("mode") != MODE_INCUMBENT:
            raise ValueError("base graphs must carry incumbent features")
    if len(graphs["bases"]) != len(pools.middle):
        raise ValueError("need one base graph per middle commitment")
    base_index = {u.tobytes(): i for i, (u, _) in enumerate(pools.middle)}
    try:
        os.makedirs(out_dir, exist_ok=True)
        graph_files = {}
        lp_name = "graph_lp.json"
        with open(os.path.join(out_dir, lp_name), "wb") as fh:
            fh.write(serialize(graphs["initial"]))
        needed = {base_index[s.base.tobytes()] for s in samples}
        for i in sorted(needed):
            name = "graph_mid_%03d.json" % i
            with open(os.path.join(out_dir, name), "wb") as fh:
                fh.write(serialize(graphs["bases"][i]))
            graph_files[i] = name
        records = []
        counts = {"positive": 0, "negative": 0, "initial": 0}
        for si, s in enumerate(samples):
            counts[s.label] += 1
            name = "sample_%05d.json" % si
            doc = {"graph": graph_files[base_index[s.base.tobytes()]],
                   "base": s.base.tolist(),
                   "mask": s.mask.tolist(),
                   "label": s.label,
                   "improvement": s.improvement}
            with open(os.path.join(out_dir, name), "w") as fh:
                json.dump(doc, fh, sort_keys=True, allow_nan=False)
            records.append(name)
        if pools.high:
            target = min(pools.high, key=lambda p: p[1])[0]
            name = "initial_000.json"
            with open(os.path.join(out_dir, name), "w") as fh:
                json.dump({"graph": lp_name, "target": target.tolist()},
                          fh, sort_keys=True, allow_nan=False)
            records.append(name)
            counts["initial"] = 1
        manifest = {"format": DATASET_FORMAT,
                    "version": DATASET_VERSION,
                    "schema_version": SCHEMA_VERSION,
                    "instance": pools.instance.name,
                    "form": pools.form,
                    "counts": counts,
                    "graphs": [lp_name] + [graph_files[i]
                                           for i in sorted(graph_files)],
                    "records": records}
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
    except OSError as exc:
        raise IoFailure("cannot write dataset to %s: %s"
                        % (out_dir, exc)) from None
    return manifest


def load_dataset(path):
    """Read a dataset directory back into graphs and records."""
    try:
        with open(os.path.join(path, "manifest.json")) as fh:
            manifest = json.load(fh)
        graphs = {}
        for name in manifest["graphs"]:
            with open(os.path.join(path, name), "rb") as fh:
                graphs[name] = deserialize(fh.read())
        records = []
        for name in manifest["records"]:
            with open(os.path.join(path, name)) as fh:
                records.append(json.load(fh))
    except OSError as exc:
        raise IoFailure("cannot read dataset at %s: %s" % (path, exc)) \
            from None
    return manifest, graphs, records
