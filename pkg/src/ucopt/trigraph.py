"""Tripartite graph encoding of tagged UCP problems.

Three node classes: one node per variable (grouped by kind u/P/S/s/d), one
per constraint (grouped by family C1..C7), and a single objective node.
Variable-constraint edges carry the matrix coefficient, variable-objective
edges the objective coefficient, and constraint-objective edges appear only
for constraints tight at an attached solution.

Node ordering inside a group is by tag, so index i of a u node is always
g * T + t regardless of how the problem was assembled.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import IncompleteSolution, MalformedInput, MissingTags, VersionMismatch

SCHEMA_VERSION = 1
VAR_KINDS = ("u", "P", "S", "s", "d")
CON_FAMILIES = ("C1", "C2", "C3", "C4", "C5", "C6", "C7")
BOUND_CAP = 1e9          # serialized JSON cannot carry infinities

# variable features: obj coef, lb, ub, is-binary, kind one-hot (5), period
# fraction, attached solution value (the no-normalize slot)
VAR_FEATS = 11
SOL_SLOT = 10
# constraint features: rhs, sense one-hot (3), nonzero count, family one-hot
CON_FEATS = 12
OBJ_FEATS = 3

MODE_LP = "LpRelax"
MODE_INCUMBENT = "Incumbent"


@dataclass
class TripartiteGraph:
    var_nodes: dict            # kind -> (n_kind, VAR_FEATS) array
    con_nodes: dict            # family -> (m_family, CON_FEATS) array
    obj_node: np.ndarray
    edges_vc: dict             # (kind, family) -> list of (i, j, coef)
    edges_vo: dict             # kind -> list of (i, coef)
    edges_co: dict             # family -> list of (j, rhs)
    meta: dict = field(default_factory=dict)
    col_map: list = None       # column -> (kind, i); not serialized

    @property
    def n_u(self):
        return len(self.var_nodes.get("u", ()))


def _check_tags(m):
    for tag in m.var_tags:
        if not (isinstance(tag, tuple) and len(tag) >= 3
                and tag[0] in VAR_KINDS
                and isinstance(tag[1], int) and isinstance(tag[2], int)):
            raise MissingTags("variable tag %r is not (kind, g, t)" % (tag,))
    for tag in m.row_tags:
        if not (isinstance(tag, tuple) and len(tag) >= 1
                and tag[0] in CON_FAMILIES):
            raise MissingTags("row tag %r has no C1..C7 family" % (tag,))


def encode(m):
    """Build the graph for a fully tagged MipProblem (no solution attached)."""
    _check_tags(m)
    horizon = max(tag[2] for tag in m.var_tags) + 1

    kinds = []
    for tag in m.var_tags:
        if tag[0] not in kinds:
            kinds.append(tag[0])
    kinds = [k for k in VAR_KINDS if k in kinds]
    var_nodes, col_map = {}, [None] * m.n_vars
    for kind in kinds:
        cols = sorted((c for c in range(m.n_vars) if m.var_tags[c][0] == kind),
                      key=lambda c: m.var_tags[c])
        feats = np.zeros((len(cols), VAR_FEATS))
        for i, c in enumerate(cols):
            tag = m.var_tags[c]
            feats[i, 0] = m.obj[c]
            feats[i, 1] = np.clip(m.lb[c], -BOUND_CAP, BOUND_CAP)
            feats[i, 2] = np.clip(m.ub[c], -BOUND_CAP, BOUND_CAP)
            feats[i, 3] = 1.0 if m.var_kinds[c] == "B" else 0.0
            feats[i, 4 + VAR_KINDS.index(kind)] = 1.0
            feats[i, 9] = (tag[2] + 1) / horizon
            col_map[c] = (kind, i)
        var_nodes[kind] = feats

    con_nodes, row_map = {}, [None] * m.n_rows
    for fam in CON_FAMILIES:
        rows = sorted((r for r in range(m.n_rows) if m.row_tags[r][0] == fam),
                      key=lambda r: m.row_tags[r])
        feats = np.zeros((len(rows), CON_FEATS))
        for j, r in enumerate(rows):
            feats[j, 0] = m.rhs[r]
            feats[j, 1 + int(m.senses[r]) + 1] = 1.0
            feats[j, 4] = m.row_ptr[r + 1] - m.row_ptr[r]
            feats[j, 5 + CON_FAMILIES.index(fam)] = 1.0
            row_map[r] = (fam, j)
        con_nodes[fam] = feats

    edges_vc = {}
    for r in range(m.n_rows):
        fam, j = row_map[r]
        cols, vals = m.row(r)
        for c, v in zip(cols, vals):
            kind, i = col_map[c]
            edges_vc.setdefault((kind, fam), []).append((i, j, float(v)))
    edges_vo = {}
    for c in range(m.n_vars):
        if m.obj[c] != 0.0:
            kind, i = col_map[c]
            edges_vo.setdefault(kind, []).append((i, float(m.obj[c])))
    edges_co = {fam: [] for fam in CON_FAMILIES}

    obj_node = np.array([float(m.n_vars), float(m.n_rows),
                         float(np.abs(m.obj).sum())])
    meta = {"schema_version": SCHEMA_VERSION, "mode": None}
    for key in ("form", "instance", "n_units", "horizon"):
        if key in m.meta:
            meta[key] = m.meta[key]
    return TripartiteGraph(var_nodes=var_nodes, con_nodes=con_nodes,
                           obj_node=obj_node, edges_vc=edges_vc,
                           edges_vo=edges_vo, edges_co=edges_co,
                           meta=meta, col_map=col_map)


def attach_solution_features(g, sol, mode):
    """Copy of g with solution values in the no-normalize slot and E^CO set.

    mode is "LpRelax" when sol is an LP relaxation, "Incumbent" when it is an
    integer-feasible point; the graph only records which was used.
    """
    if mode not in (MODE_LP, MODE_INCUMBENT):
        raise ValueError("unknown mode %r" % mode)
    if g.col_map is None:
        raise IncompleteSolution("graph has no column mapping; "
                                 "attach before serializing")
    sol = np.asarray(sol, dtype=float)
    if sol.shape != (len(g.col_map),) or not np.all(np.isfinite(sol)):
        raise IncompleteSolution("solution does not cover the %d variables"
                                 % len(g.col_map))
    var_nodes = {k: v.copy() for k, v in g.var_nodes.items()}
    for c, (kind, i) in enumerate(g.col_map):
        var_nodes[kind][i, SOL_SLOT] = sol[c]
    # activities per constraint from the graph's own edges
    acts = {fam: np.zeros(len(g.con_nodes[fam])) for fam in g.con_nodes}
    for (kind, fam), edges in g.edges_vc.items():
        for i, j, coef in edges:
            acts[fam][j] += coef * var_nodes[kind][i, SOL_SLOT]
    edges_co = {}
    for fam, feats in g.con_nodes.items():
        active = []
        for j in range(len(feats)):
            rhs = feats[j, 0]
            is_eq = feats[j, 2] == 1.0
            if is_eq or abs(acts[fam][j] - rhs) <= 1e-6:
                active.append((j, float(rhs)))
        edges_co[fam] = active
    meta = dict(g.meta)
    meta["mode"] = mode
    return TripartiteGraph(var_nodes=var_nodes,
                           con_nodes={k: v.copy() for k, v in g.con_nodes.items()},
                           obj_node=g.obj_node.copy(),
                           edges_vc={k: list(v) for k, v in g.edges_vc.items()},
                           edges_vo={k: list(v) for k, v in g.edges_vo.items()},
                           edges_co=edges_co, meta=meta,
                           col_map=list(g.col_map))


def serialize(g):
    """Deterministic JSON bytes; identical graphs give identical bytes."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "var_nodes": {k: [[float(x) for x in row] for row in v]
                      for k, v in g.var_nodes.items()},
        "con_nodes": {k: [[float(x) for x in row] for row in v]
                      for k, v in g.con_nodes.items()},
        "obj_node": [float(x) for x in g.obj_node],
        "edges_vc": {"%s|%s" % k: [[int(i), int(j), float(c)] for i, j, c in v]
                     for k, v in g.edges_vc.items()},
        "edges_vo": {k: [[int(i), float(c)] for i, c in v]
                     for k, v in g.edges_vo.items()},
        "edges_co": {k: [[int(j), float(r)] for j, r in v]
                     for k, v in g.edges_co.items()},
        "meta": g.meta,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"),
                      allow_nan=False).encode("utf-8")


def deserialize(data):
    """Parse serialized graph bytes, checking schema version and indices."""
    try:
        doc = json.loads(data.decode("utf-8") if isinstance(data, bytes) else data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedInput("graph JSON does not parse: %s" % exc) from None
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise MalformedInput("graph JSON missing schema_version")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise VersionMismatch("graph schema %r, expected %r"
                              % (doc["schema_version"], SCHEMA_VERSION))
    try:
        var_nodes = {k: np.array(v, dtype=float).reshape(-1, VAR_FEATS)
                     for k, v in doc["var_nodes"].items()}
        con_nodes = {k: np.array(v, dtype=float).reshape(-1, CON_FEATS)
                     for k, v in doc["con_nodes"].items()}
        obj_node = np.array(doc["obj_node"], dtype=float)
        edges_vc = {}
        for key, v in doc["edges_vc"].items():
            kind, fam = key.split("|")
            edges_vc[(kind, fam)] = [(int(i), int(j), float(c)) for i, j, c in v]
        edges_vo = {k: [(int(i), float(c)) for i, c in v]
                    for k, v in doc["edges_vo"].items()}
        edges_co = {k: [(int(j), float(r)) for j, r in v]
                    for k, v in doc["edges_co"].items()}
        meta = doc.get("meta", {})
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise MalformedInput("graph JSON malformed: %s" % exc) from None
    for (kind, fam), edges in edges_vc.items():
        if kind not in var_nodes or fam not in con_nodes:
            raise MalformedInput("edge group %s|%s references unknown node group"
                                 % (kind, fam))
        for i, j, _ in edges:
            if not (0 <= i < len(var_nodes[kind]) and 0 <= j < len(con_nodes[fam])):
                raise MalformedInput("edge (%d,%d) out of range for %s|%s"
                                     % (i, j, kind, fam))
    for kind, edges in edges_vo.items():
        if kind not in var_nodes:
            raise MalformedInput("objective edges for unknown kind %r" % kind)
        for i, _ in edges:
            if not 0 <= i < len(var_nodes[kind]):
                raise MalformedInput("objective edge %d out of range" % i)
    for fam, edges in edges_co.items():
        if fam not in con_nodes:
            raise MalformedInput("tightness edges for unknown family %r" % fam)
        for j, _ in edges:
            if not 0 <= j < len(con_nodes[fam]):
                raise MalformedInput("tightness edge %d out of range" % j)
    return TripartiteGraph(var_nodes=var_nodes, con_nodes=con_nodes,
                           obj_node=obj_node, edges_vc=edges_vc,
                           edges_vo=edges_vo, edges_co=edges_co, meta=meta,
                           col_map=None)
