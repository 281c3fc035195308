"""Loop-based mirror of the policy forward pass.

Deliberately naive: plain Python lists, explicit per-edge message loops,
``math.fsum`` for every reduction.  No shared code with the package
implementation beyond the graph data structure, so agreement between the
two is evidence that the vectorized version computes what it should.
"""
import math

import numpy as np

from ucopt.trigraph import CON_FAMILIES, SOL_SLOT, VAR_KINDS

LN_EPS = 1e-5


def _mlp(blocks, prefix, vec):
    w1, b1 = blocks[prefix + "_w1"], blocks[prefix + "_b1"]
    w2, b2 = blocks[prefix + "_w2"], blocks[prefix + "_b2"]
    hid = []
    for j in range(w1.shape[1]):
        s = math.fsum(float(vec[i]) * float(w1[i, j])
                      for i in range(w1.shape[0])) + float(b1[j])
        hid.append(s if s > 0.0 else 0.0)
    return [math.fsum(hid[i] * float(w2[i, j]) for i in range(w2.shape[0]))
            + float(b2[j]) for j in range(w2.shape[1])]


def _standardize(mat, skip=None):
    mat = np.asarray(mat, dtype=float)
    rows = [[float(x) for x in row] for row in mat]
    n = len(rows)
    if n == 0:
        return rows
    for col in range(mat.shape[1]):
        if col == skip:
            continue
        vals = [rows[i][col] for i in range(n)]
        mu = math.fsum(vals) / n
        sd = math.sqrt(math.fsum((v - mu) ** 2 for v in vals) / n)
        d = sd if sd > 1e-12 else 1.0
        for i in range(n):
            rows[i][col] = (rows[i][col] - mu) / d
    return rows


def _ln(row):
    n = len(row)
    mu = math.fsum(row) / n
    var = math.fsum((x - mu) ** 2 for x in row) / n
    d = math.sqrt(var + LN_EPS)
    return [(x - mu) / d for x in row]


def ref_forward(g, w):
    """Score the u nodes of an attached graph; returns an N x T array."""
    B, H = w.blocks, w.hidden
    hv = {k: [_mlp(B, "emb_%s" % k, row)
              for row in _standardize(feats, skip=SOL_SLOT)]
          for k, feats in g.var_nodes.items()}
    hc = {f: [_mlp(B, "emb_%s" % f, row) for row in _standardize(feats)]
          for f, feats in g.con_nodes.items()}
    ho = _mlp(B, "emb_obj", [math.log1p(float(x)) for x in g.obj_node])
    vo_feat = {k: dict(g.edges_vo.get(k, ())) for k in hv}

    for _ in range(w.rounds):
        co_feat = {f: dict(g.edges_co.get(f, ())) for f in hc}

        parts = [[] for _ in range(H)]
        for kind in VAR_KINDS:
            if kind not in hv or not g.edges_vo.get(kind):
                continue
            for i, c in g.edges_vo[kind]:
                msg = _mlp(B, "msg_vo_%s" % kind, hv[kind][i] + ho + [float(c)])
                for h in range(H):
                    parts[h].append(msg[h])
        ho = _mlp(B, "upd_o", ho + _ln([math.fsum(p) for p in parts]))

        for fam in CON_FAMILIES:
            if fam not in hc or not hc[fam]:
                continue
            hc[fam] = [
                _mlp(B, "upd_c_%s" % fam, hcj + _ln(_mlp(
                    B, "msg_oc_%s" % fam,
                    ho + hcj + [float(co_feat[fam].get(j, 0.0))])))
                for j, hcj in enumerate(hc[fam])]

        for fam in CON_FAMILIES:
            if fam not in hc or not hc[fam]:
                continue
            buckets = [[[] for _ in range(H)] for _ in hc[fam]]
            for kind in VAR_KINDS:
                edges = g.edges_vc.get((kind, fam))
                if not edges or kind not in hv:
                    continue
                for i, j, c in edges:
                    msg = _mlp(B, "msg_vc_%s_%s" % (kind, fam),
                               hv[kind][i] + hc[fam][j] + [float(c)])
                    for h in range(H):
                        buckets[j][h].append(msg[h])
            hc[fam] = [
                _mlp(B, "upd_c_%s" % fam,
                     hcj + _ln([math.fsum(buckets[j][h]) for h in range(H)]))
                for j, hcj in enumerate(hc[fam])]

        parts = [[] for _ in range(H)]
        for fam in CON_FAMILIES:
            edges = g.edges_co.get(fam)
            if not edges or fam not in hc:
                continue
            for j, rhs in edges:
                msg = _mlp(B, "msg_co_%s" % fam, hc[fam][j] + ho + [float(rhs)])
                for h in range(H):
                    parts[h].append(msg[h])
        ho = _mlp(B, "upd_o", ho + _ln([math.fsum(p) for p in parts]))

        for kind in VAR_KINDS:
            if kind not in hv or not hv[kind]:
                continue
            hv[kind] = [
                _mlp(B, "upd_v_%s" % kind, hvi + _ln(_mlp(
                    B, "msg_ov_%s" % kind,
                    ho + hvi + [float(vo_feat[kind].get(i, 0.0))])))
                for i, hvi in enumerate(hv[kind])]

        for kind in VAR_KINDS:
            if kind not in hv or not hv[kind]:
                continue
            buckets = [[[] for _ in range(H)] for _ in hv[kind]]
            for fam in CON_FAMILIES:
                edges = g.edges_vc.get((kind, fam))
                if not edges or fam not in hc:
                    continue
                for i, j, c in edges:
                    msg = _mlp(B, "msg_cv_%s_%s" % (fam, kind),
                               hc[fam][j] + hv[kind][i] + [float(c)])
                    for h in range(H):
                        buckets[i][h].append(msg[h])
            hv[kind] = [
                _mlp(B, "upd_v_%s" % kind,
                     hvi + _ln([math.fsum(buckets[i][h]) for h in range(H)]))
                for i, hvi in enumerate(hv[kind])]

    out = []
    for hvi in hv["u"]:
        z = _mlp(B, "head", hvi)[0]
        if z >= 0.0:
            s = 1.0 / (1.0 + math.exp(-z))
        else:
            e = math.exp(z)
            s = e / (1.0 + e)
        out.append(min(max(s, 1e-12), 1.0 - 1e-12))
    return np.array(out).reshape(int(g.meta["n_units"]),
                                 int(g.meta["horizon"]))
