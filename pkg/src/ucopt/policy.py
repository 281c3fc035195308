"""Commitment scoring policies.

The learned policy is a relational GCN over the tripartite graph: per-kind
input embedders, `rounds` sweeps of six message-passing updates (variables
to objective, objective to constraints, variables to constraints,
constraints to objective, objective to variables, constraints to
variables), and a sigmoid head over the u nodes.  Message MLPs are separate
per relation and node kind; the three update MLPs (objective, per-family
constraint, per-kind variable) are each shared by the two updates that
write the same node class.

Everything that reduces across nodes or edges -- feature standardization
and message aggregation -- goes through math.fsum, which is correctly
rounded and therefore independent of summation order.  Per-node matrix
work stays in numpy, whose row results do not depend on row order.  The
net effect: permuting units permutes the scores bit-for-bit.

Two non-learned policies with the same calling convention: LP-relaxation
fractional values, and scores read back from a file written by the trainer.
"""
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (LpInfeasible, MalformedInput, NonFiniteOutput, OutOfRange,
                     SchemaMismatch, ShapeMismatch)
from .mip import solve_lp
from .trigraph import (CON_FAMILIES, CON_FEATS, OBJ_FEATS, SCHEMA_VERSION,
                       SOL_SLOT, VAR_FEATS, VAR_KINDS)

WEIGHT_FORMAT = "ucopt-policy-weights"
WEIGHT_VERSION = 1
LN_EPS = 1e-5


@dataclass
class PolicyWeights:
    hidden: int
    rounds: int
    schema_version: int
    blocks: dict                 # name -> np.ndarray


def expected_blocks(hidden):
    """Name -> shape for every parameter block at a given hidden width."""
    h = hidden
    spec = {}

    def mlp(prefix, n_in, n_out=h):
        spec[prefix + "_w1"] = (n_in, h)
        spec[prefix + "_b1"] = (h,)
        spec[prefix + "_w2"] = (h, n_out)
        spec[prefix + "_b2"] = (n_out,)

    for kind in VAR_KINDS:
        mlp("emb_%s" % kind, VAR_FEATS)
    for fam in CON_FAMILIES:
        mlp("emb_%s" % fam, CON_FEATS)
    mlp("emb_obj", OBJ_FEATS)
    for kind in VAR_KINDS:
        mlp("msg_vo_%s" % kind, 2 * h + 1)
        mlp("msg_ov_%s" % kind, 2 * h + 1)
        mlp("upd_v_%s" % kind, 2 * h)
    for fam in CON_FAMILIES:
        mlp("msg_oc_%s" % fam, 2 * h + 1)
        mlp("msg_co_%s" % fam, 2 * h + 1)
        mlp("upd_c_%s" % fam, 2 * h)
    for kind in VAR_KINDS:
        for fam in CON_FAMILIES:
            mlp("msg_vc_%s_%s" % (kind, fam), 2 * h + 1)
            mlp("msg_cv_%s_%s" % (fam, kind), 2 * h + 1)
    mlp("upd_o", 2 * h)
    mlp("head", h, 1)
    return spec


def random_weights(hidden=32, rounds=2, seed=0):
    """Xavier-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    blocks = {}
    for name, shape in expected_blocks(hidden).items():
        if name.endswith(("_b1", "_b2")):
            blocks[name] = np.zeros(shape)
        else:
            span = math.sqrt(6.0 / (shape[0] + shape[1]))
            blocks[name] = rng.uniform(-span, span, size=shape)
    return PolicyWeights(hidden=hidden, rounds=rounds,
                         schema_version=SCHEMA_VERSION, blocks=blocks)


def zero_weights(hidden=32, rounds=2):
    blocks = {name: np.zeros(shape)
              for name, shape in expected_blocks(hidden).items()}
    return PolicyWeights(hidden=hidden, rounds=rounds,
                         schema_version=SCHEMA_VERSION, blocks=blocks)


def save_weights(w, path):
    doc = {
        "format": WEIGHT_FORMAT,
        "version": WEIGHT_VERSION,
        "schema_version": w.schema_version,
        "hidden": w.hidden,
        "rounds": w.rounds,
        "blocks": {name: {"shape": list(arr.shape),
                          "data": [float(x) for x in arr.ravel()]}
                   for name, arr in w.blocks.items()},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))


def load_weights(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except ValueError as exc:
        raise MalformedInput("weight file does not parse: %s" % exc) from None
    if not isinstance(doc, dict) or doc.get("format") != WEIGHT_FORMAT:
        raise MalformedInput("not a policy weight file")
    if doc.get("version") != WEIGHT_VERSION:
        raise SchemaMismatch("weight file version %r, expected %r"
                             % (doc.get("version"), WEIGHT_VERSION))
    hidden = int(doc["hidden"])
    expected = expected_blocks(hidden)
    blocks = {}
    raw = doc.get("blocks", {})
    missing = sorted(set(expected) - set(raw))
    extra = sorted(set(raw) - set(expected))
    if missing or extra:
        raise SchemaMismatch("weight blocks mismatch: missing %s, extra %s"
                             % (missing[:3], extra[:3]))
    for name, shape in expected.items():
        entry = raw[name]
        arr = np.array(entry["data"], dtype=float)
        if tuple(entry["shape"]) != shape or arr.size != np.prod(shape):
            raise SchemaMismatch("block %s has shape %s, expected %s"
                                 % (name, entry["shape"], shape))
        blocks[name] = arr.reshape(shape)
    return PolicyWeights(hidden=hidden, rounds=int(doc["rounds"]),
                         schema_version=int(doc["schema_version"]),
                         blocks=blocks)


def _fsum_cols(mat):
    """Correctly-rounded column sums of a 2-D array."""
    cols = np.asarray(mat, dtype=float).T.tolist()
    return np.array([math.fsum(c) for c in cols])


def _standardize(mat, skip=None):
    """Per-column (x-mean)/std over the nodes of one kind; fsum-based."""
    mat = np.asarray(mat, dtype=float)
    n = len(mat)
    if n == 0:
        return mat.copy()
    out = np.empty_like(mat)
    for col in range(mat.shape[1]):
        vals = mat[:, col]
        if col == skip:
            out[:, col] = vals
            continue
        mu = math.fsum(vals.tolist()) / n
        var = math.fsum(((vals - mu) ** 2).tolist()) / n
        sd = math.sqrt(var)
        out[:, col] = (vals - mu) / (sd if sd > 1e-12 else 1.0)
    return out


def _layernorm(mat):
    """Row-wise layer normalization (no learned affine), eps=1e-5."""
    mat = np.atleast_2d(mat)
    mu = mat.mean(axis=1, keepdims=True)
    var = ((mat - mu) ** 2).mean(axis=1, keepdims=True)
    return (mat - mu) / np.sqrt(var + LN_EPS)


def _mlp(blocks, prefix, x):
    x = np.atleast_2d(x)
    hid = np.maximum(x @ blocks[prefix + "_w1"] + blocks[prefix + "_b1"], 0.0)
    return hid @ blocks[prefix + "_w2"] + blocks[prefix + "_b2"]


def _aggregate(n_targets, hidden, targets, messages):
    """fsum messages per target; targets: list of ints, messages: (k, H)."""
    out = np.zeros((n_targets, hidden))
    if not targets:
        return out
    groups = {}
    for row, j in enumerate(targets):
        groups.setdefault(j, []).append(row)
    for j, rows in groups.items():
        sub = messages[rows].T.tolist()
        for h in range(hidden):
            out[j, h] = math.fsum(sub[h])
    return out


def rgcn_forward(g, w):
    """Score the u variables of an attached graph. Returns an N x T array."""
    if g.meta.get("schema_version") != w.schema_version:
        raise SchemaMismatch("graph schema %r vs weight schema %r"
                             % (g.meta.get("schema_version"), w.schema_version))
    if "n_units" not in g.meta or "horizon" not in g.meta:
        raise SchemaMismatch("graph meta lacks n_units/horizon")
    blocks, H = w.blocks, w.hidden

    hv = {}
    for kind, feats in g.var_nodes.items():
        hv[kind] = _mlp(blocks, "emb_%s" % kind,
                        _standardize(feats, skip=SOL_SLOT))
    hc = {}
    for fam, feats in g.con_nodes.items():
        hc[fam] = _mlp(blocks, "emb_%s" % fam, _standardize(feats))
    # a single objective node cannot be standardized against its peers;
    # log damping keeps its count-like features in a sane range
    ho = _mlp(blocks, "emb_obj", np.log1p(g.obj_node))[0]

    vo_feat = {kind: dict(g.edges_vo.get(kind, ())) for kind in hv}
    for rnd in range(w.rounds):
        co_feat = {fam: dict(g.edges_co.get(fam, ())) for fam in hc}

        # variables -> objective
        targets, msgs = [], []
        for kind in VAR_KINDS:
            if kind not in hv or not g.edges_vo.get(kind):
                continue
            idx = [i for i, _ in g.edges_vo[kind]]
            coefs = np.array([[c] for _, c in g.edges_vo[kind]])
            x = np.hstack([hv[kind][idx], np.tile(ho, (len(idx), 1)), coefs])
            m = _mlp(blocks, "msg_vo_%s" % kind, x)
            targets += [0] * len(idx)
            msgs.append(m)
        agg = _aggregate(1, H, targets,
                         np.vstack(msgs) if msgs else np.zeros((0, H)))
        ho = _mlp(blocks, "upd_o",
                  np.concatenate([ho[None, :], _layernorm(agg)], axis=1))[0]

        # objective -> constraints
        for fam in CON_FAMILIES:
            if fam not in hc or len(hc[fam]) == 0:
                continue
            n = len(hc[fam])
            feat = np.array([[co_feat[fam].get(j, 0.0)] for j in range(n)])
            x = np.hstack([np.tile(ho, (n, 1)), hc[fam], feat])
            m = _mlp(blocks, "msg_oc_%s" % fam, x)
            hc[fam] = _mlp(blocks, "upd_c_%s" % fam,
                           np.concatenate([hc[fam], _layernorm(m)], axis=1))

        # variables -> constraints
        for fam in CON_FAMILIES:
            if fam not in hc or len(hc[fam]) == 0:
                continue
            targets, msgs = [], []
            for kind in VAR_KINDS:
                edges = g.edges_vc.get((kind, fam))
                if not edges or kind not in hv:
                    continue
                vi = [i for i, _, _ in edges]
                cj = [j for _, j, _ in edges]
                coefs = np.array([[c] for _, _, c in edges])
                x = np.hstack([hv[kind][vi], hc[fam][cj], coefs])
                msgs.append(_mlp(blocks, "msg_vc_%s_%s" % (kind, fam), x))
                targets += cj
            agg = _aggregate(len(hc[fam]), H, targets,
                             np.vstack(msgs) if msgs else np.zeros((0, H)))
            hc[fam] = _mlp(blocks, "upd_c_%s" % fam,
                           np.concatenate([hc[fam], _layernorm(agg)], axis=1))

        # constraints -> objective
        targets, msgs = [], []
        for fam in CON_FAMILIES:
            edges = g.edges_co.get(fam)
            if not edges or fam not in hc:
                continue
            cj = [j for j, _ in edges]
            feat = np.array([[r] for _, r in edges])
            x = np.hstack([hc[fam][cj], np.tile(ho, (len(cj), 1)), feat])
            msgs.append(_mlp(blocks, "msg_co_%s" % fam, x))
            targets += [0] * len(cj)
        agg = _aggregate(1, H, targets,
                         np.vstack(msgs) if msgs else np.zeros((0, H)))
        ho = _mlp(blocks, "upd_o",
                  np.concatenate([ho[None, :], _layernorm(agg)], axis=1))[0]

        # objective -> variables
        for kind in VAR_KINDS:
            if kind not in hv or len(hv[kind]) == 0:
                continue
            n = len(hv[kind])
            feat = np.array([[vo_feat[kind].get(i, 0.0)] for i in range(n)])
            x = np.hstack([np.tile(ho, (n, 1)), hv[kind], feat])
            m = _mlp(blocks, "msg_ov_%s" % kind, x)
            hv[kind] = _mlp(blocks, "upd_v_%s" % kind,
                            np.concatenate([hv[kind], _layernorm(m)], axis=1))

        # constraints -> variables
        for kind in VAR_KINDS:
            if kind not in hv or len(hv[kind]) == 0:
                continue
            targets, msgs = [], []
            for fam in CON_FAMILIES:
                edges = g.edges_vc.get((kind, fam))
                if not edges or fam not in hc:
                    continue
                vi = [i for i, _, _ in edges]
                cj = [j for _, j, _ in edges]
                coefs = np.array([[c] for _, _, c in edges])
                x = np.hstack([hc[fam][cj], hv[kind][vi], coefs])
                msgs.append(_mlp(blocks, "msg_cv_%s_%s" % (fam, kind), x))
                targets += vi
            agg = _aggregate(len(hv[kind]), H, targets,
                             np.vstack(msgs) if msgs else np.zeros((0, H)))
            hv[kind] = _mlp(blocks, "upd_v_%s" % kind,
                            np.concatenate([hv[kind], _layernorm(agg)], axis=1))

    logits = _mlp(blocks, "head", hv["u"])[:, 0]
    n_units = int(g.meta["n_units"])
    horizon = int(g.meta["horizon"])
    if len(logits) != n_units * horizon:
        raise ShapeMismatch("%d u nodes for %dx%d" % (len(logits), n_units,
                                                      horizon))
    if not np.all(np.isfinite(logits)):
        bad = int(np.flatnonzero(~np.isfinite(logits))[0])
        raise NonFiniteOutput("non-finite logit %r at u node %d"
                              % (logits[bad], bad))
    # piecewise sigmoid: no overflow for any finite logit
    pos = logits >= 0
    scores = np.empty_like(logits)
    scores[pos] = 1.0 / (1.0 + np.exp(-logits[pos]))
    ex = np.exp(logits[~pos])
    scores[~pos] = ex / (1.0 + ex)
    return np.clip(scores, 1e-12, 1.0 - 1e-12).reshape(n_units, horizon)


def lp_fractional_policy(m):
    """Relaxation values of the u block, clamped into (0,1)."""
    sol = solve_lp(m)
    if sol.status != "Optimal":
        raise LpInfeasible("LP relaxation is %s" % sol.status)
    n, t = m.u_shape()
    vals = sol.values[m.u_cols()].reshape(n, t)
    return np.clip(vals, 1e-6, 1.0 - 1e-6)


def save_scores(scores, path):
    scores = np.asarray(scores, dtype=float)
    doc = {"shape": list(scores.shape),
           "scores": [float(x) for x in scores.ravel()]}
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))


def file_scores_policy(path, expected_shape=None):
    """Load trainer-written scores; validates shape and the (0,1) range."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except ValueError as exc:
        raise MalformedInput("score file does not parse: %s" % exc) from None
    try:
        shape = tuple(int(x) for x in doc["shape"])
        flat = np.array(doc["scores"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput("score file malformed: %s" % exc) from None
    if len(shape) != 2 or flat.size != shape[0] * shape[1]:
        raise ShapeMismatch("score file shape %s does not match %d values"
                            % (shape, flat.size))
    if expected_shape is not None and shape != tuple(expected_shape):
        raise ShapeMismatch("score file shape %s, expected %s"
                            % (shape, tuple(expected_shape)))
    if np.any(~np.isfinite(flat)) or np.any(flat <= 0.0) or np.any(flat >= 1.0):
        raise OutOfRange("scores must lie strictly inside (0,1)")
    return flat.reshape(shape)
