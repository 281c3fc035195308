"""Local search and large-neighborhood search over commitments.

Both entry points operate on a full formulation MIP.  local_search fixes
every commitment variable whose score is confidently 0 or 1 and re-solves
the rest; lns_run repeatedly frees a small, score-guided neighborhood of
the incumbent, solves the restricted MIP warm-started at the incumbent,
and accepts the result (which can never be worse, since the incumbent
seeds the restricted solve).

Neighborhood selection combines three signals: the policy scores of the
incumbent-featured graph, a persistent descent weight gd that shrinks
every time an entry is selected, and a one-step weight ld that is reset
each iteration.  The free fraction zeta grows when an iteration fails to
improve and shrinks when it succeeds.
"""
import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .formulation import extract_commitment
from .mip import solve_mip
from .mip.problem import fix_and_sub
from .trigraph import MODE_INCUMBENT, attach_solution_features, encode


@dataclass
class LnsConfig:
    lt: float = 0.1            # scores <= lt are fixed to the incumbent
    ut: float = 0.9            # scores >= ut likewise
    psi_l: float = 1.1         # zeta growth factor on a non-improving step
    psi_u: float = 0.8         # zeta shrink factor on an improving step
    phi_l: float = 0.3         # upper bound on zeta
    phi_u: float = 0.1         # lower bound on zeta
    psi_gd: float = 0.9        # gd decay for selected entries
    psi_ld: float = 0.5        # ld value for selected entries
    phi_gd: float = 0.8        # extra gd decay when the entry changed value
    phi_ld: float = 0.01       # extra ld decay when the entry changed value
    zeta0: float = 0.2
    row_width: int = 1         # free periods at each end of every on-run
    max_step: int = 50
    time_limit: float = None
    sub_time: float = None     # per-iteration restricted-solve limits
    sub_node: int = None
    stall_limit: int = 5

    def __post_init__(self):
        if not 0.0 <= self.lt < self.ut <= 1.0:
            raise ValueError("need 0 <= lt < ut <= 1")
        if self.psi_l <= 1.0 or not 0.0 < self.psi_u < 1.0:
            raise ValueError("need psi_l > 1 and 0 < psi_u < 1")
        if not 0.0 < self.phi_u < self.phi_l <= 1.0:
            raise ValueError("need 0 < phi_u < phi_l <= 1")
        if not self.phi_u <= self.zeta0 <= self.phi_l:
            raise ValueError("zeta0 must lie in [phi_u, phi_l]")


@dataclass
class LnsState:
    """Mutable loop state; exposed for inspection and testing."""
    k: int
    u_inc: np.ndarray
    obj_inc: float
    zeta: float
    gd: np.ndarray
    ld: np.ndarray
    no_improve_count: int = 0
    elapsed: float = 0.0


def _sub_limits(cfg):
    limits = {}
    if cfg.sub_time is not None:
        limits["time"] = cfg.sub_time
    if cfg.sub_node is not None:
        limits["node"] = cfg.sub_node
    return limits


def _fixed_eval(m, u):
    """Objective and full assignment with every u variable pinned."""
    n, t = m.u_shape()
    sub = fix_and_sub(m, u, np.zeros((n, t), dtype=np.int64))
    sol = solve_mip(sub)
    if sol.values is None:
        return None, None
    return float(sol.objective), sol.values


def local_search(m, scores, u_star, cfg=None):
    """Re-optimize the low-confidence part of a restored commitment.

    Entries of `scores` at or beyond the lt/ut thresholds stay fixed to
    u_star; the rest are re-solved under cfg's restricted-solve limits,
    warm-started from u_star's dispatch.  Never returns a commitment
    worse than u_star; on a fully fixed mask or an unproductive solve it
    returns u_star itself.
    """
    cfg = cfg or LnsConfig()
    n, t = m.u_shape()
    scores = np.asarray(scores, dtype=float)
    u_star = np.asarray(u_star)
    if scores.shape != (n, t) or u_star.shape != (n, t):
        raise ShapeMismatch("scores and commitment must be %dx%d" % (n, t))
    base_obj, base_vals = _fixed_eval(m, u_star)
    if base_vals is None:
        raise ValueError("u_star is not feasible for this model")
    free = (scores > cfg.lt) & (scores < cfg.ut)
    if not free.any():
        return u_star.astype(np.int64).copy()
    sub = fix_and_sub(m, u_star, free.astype(np.int64))
    sol = solve_mip(sub, limits=_sub_limits(cfg), start=base_vals)
    if sol.values is None or sol.objective >= base_obj - 1e-9:
        return u_star.astype(np.int64).copy()
    return extract_commitment(m, sol.values)


def greedy_select(p, zeta, gd, ld):
    """Mask of the ceil(zeta*N*T) largest entries of p*gd*ld.

    Ties break toward the lowest flat (g, t) index.
    """
    p = np.asarray(p, dtype=float)
    n, t = p.shape
    w = (p * np.asarray(gd) * np.asarray(ld)).ravel()
    k = min(math.ceil(zeta * w.size), w.size)
    mask = np.zeros(w.size, dtype=np.int64)
    if k > 0:
        order = np.lexsort((np.arange(w.size), -w))
        mask[order[:k]] = 1
    return mask.reshape(n, t)


def row_neighborhood(u, width=1):
    """Free the first and last `width` periods of every maximal on-run."""
    u = np.asarray(u)
    mask = np.zeros(u.shape, dtype=np.int64)
    for g in range(u.shape[0]):
        edges = np.diff(np.concatenate(([0], u[g], [0])))
        starts = np.flatnonzero(edges == 1)
        ends = np.flatnonzero(edges == -1)
        for a, b in zip(starts, ends):
            w = min(width, b - a)
            mask[g, a:a + w] = 1
            mask[g, b - w:b] = 1
    return mask


def adaptive_size(zeta, improved, cfg):
    """Shrink the free fraction after an improvement, grow it otherwise."""
    if improved:
        return max(zeta * cfg.psi_u, cfg.phi_u)
    return min(zeta * cfg.psi_l, cfg.phi_l)


def weight_descend(gd, ld, mask, changed, cfg):
    """Decay selection weights so repeated neighborhoods drift apart.

    ld restarts from ones every call; selected entries get gd scaled by
    psi_gd and ld set to psi_ld, with the extra phi factors applied on
    top when the entry actually changed value in the step just taken.
    """
    gd = np.array(gd, dtype=float)
    ld = np.ones_like(gd)
    sel = np.asarray(mask) == 1
    chg = sel & (np.asarray(changed) != 0)
    gd[sel] *= cfg.psi_gd
    ld[sel] = cfg.psi_ld
    gd[chg] *= cfg.phi_gd
    ld[chg] *= cfg.phi_ld
    return gd, ld


def lns_run(m, u0, nbr_policy, cfg=None):
    """Iterated restricted re-solve around a feasible starting commitment.

    Each step scores the incumbent-featured graph with nbr_policy, frees
    the greedy-selected entries plus the on-run edges of the incumbent,
    and solves the restricted MIP warm-started at the incumbent, so the
    objective never increases.  Stops on max_step, time_limit, or
    stall_limit consecutive non-improving steps.  Returns the final
    commitment and a per-iteration log of dicts with k, zeta, mask_size,
    objective, bound (of the restricted solve), and wall_ms.
    """
    cfg = cfg or LnsConfig()
    t_start = time.perf_counter()
    n, t = m.u_shape()
    u0 = np.asarray(u0)
    if u0.shape != (n, t):
        raise ShapeMismatch("commitment must be %dx%d" % (n, t))
    obj0, vals = _fixed_eval(m, u0)
    if vals is None:
        raise ValueError("u0 is not feasible for this model")
    graph = encode(m)
    st = LnsState(k=0, u_inc=u0.astype(np.int64).copy(), obj_inc=obj0,
                  zeta=cfg.zeta0, gd=np.ones((n, t)), ld=np.ones((n, t)))
    log = []
    while st.k < cfg.max_step:
        if (cfg.time_limit is not None
                and time.perf_counter() - t_start >= cfg.time_limit):
            break
        gk = attach_solution_features(graph, vals, MODE_INCUMBENT)
        p = np.asarray(nbr_policy(gk), dtype=float)
        if p.shape != (n, t):
            raise ShapeMismatch("policy scores must be %dx%d" % (n, t))
        mask = greedy_select(p, st.zeta, st.gd, st.ld) | \
            row_neighborhood(st.u_inc, cfg.row_width)
        sub = fix_and_sub(m, st.u_inc, mask)
        sol = solve_mip(sub, limits=_sub_limits(cfg), start=vals)
        improved = (sol.values is not None
                    and sol.objective < st.obj_inc - 1e-9)
        changed = np.zeros((n, t), dtype=np.int64)
        if sol.values is not None and sol.objective <= st.obj_inc + 1e-9:
            u_new = extract_commitment(m, sol.values)
            changed = (u_new != st.u_inc).astype(np.int64)
            st.u_inc = u_new
            st.obj_inc = min(st.obj_inc, float(sol.objective))
            vals = sol.values
        st.gd, st.ld = weight_descend(st.gd, st.ld, mask, changed, cfg)
        zeta_used = st.zeta
        st.zeta = adaptive_size(st.zeta, improved, cfg)
        st.no_improve_count = 0 if improved else st.no_improve_count + 1
        st.k += 1
        st.elapsed = time.perf_counter() - t_start
        log.append({"k": st.k, "zeta": zeta_used,
                    "mask_size": int(mask.sum()),
                    "objective": st.obj_inc,
                    "bound": float(sol.bound),
                    "wall_ms": st.elapsed * 1000.0})
        if st.no_improve_count >= cfg.stall_limit:
            break
    return st.u_inc, log
