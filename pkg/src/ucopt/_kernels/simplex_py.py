"""Hot numeric primitives for the revised simplex driver.

Mirrors the compiled kernel in simplex_cy.pyx: same selection rules, same
tie-breaking, same outputs.  The driver (ucopt.mip.simplex) owns the basis
factorization, phase logic and all state updates; these functions cover the
per-iteration array work that dominates wall time: entering-column pricing,
the Harris two-pass ratio test, and product-form eta application.

Column layout: j < n are structural columns, j >= n is the slack of row
j - n with coefficient +1.  Row senses are encoded entirely in slack
bounds.  vstat codes: 0 nonbasic at lower, 1 nonbasic at upper, 2 basic,
3 nonbasic free (value 0).
"""
import numpy as np

AT_LOWER, AT_UPPER, BASIC, FREE = 0, 1, 2, 3
DONE, REFACTOR, UNBOUNDED, BUDGET, TROUBLE = 0, 1, 2, 3, 4

# counters layout
C_SINCE_REFACTOR, C_TOTAL_PIVOTS, C_BLAND, C_DEGEN, C_LAST_ITERS = range(5)
# params layout
P_TOL_FEAS, P_TOL_DUAL, P_TOL_PIV, P_REFACTOR_EVERY, P_BLAND_AFTER = range(5)

# ratio-test outcomes
RT_PIVOT, RT_FLIP, RT_UNBOUNDED, RT_BAN = 0, 1, 2, 3


def price(z, vstat, fixed, banned, bland, tol_dual):
    """Pick the entering column from reduced costs z.

    Returns the lowest-index eligible column under Bland's rule
    (bland != 0), the largest-|z| one otherwise, or -1 when no nonbasic
    column can improve.
    """
    can_up = ((vstat == AT_LOWER) | (vstat == FREE)) & (z < -tol_dual)
    can_dn = ((vstat == AT_UPPER) | (vstat == FREE)) & (z > tol_dual)
    eligible = (can_up | can_dn) & ~fixed & ~banned & (vstat != BASIC)
    if not eligible.any():
        return -1
    if bland:
        return int(np.argmax(eligible))
    score = np.where(eligible, np.abs(z), -1.0)
    return int(np.argmax(score))


def chuzr(xB, lo_b, up_b, delta, below, above, own, tol_feas, tol_piv,
          bland, basis):
    """Bounded-variable ratio test with Harris two-pass selection.

    delta is the entering column's effect on the basics (direction times
    the ftran of the column); own is the entering variable's own bound
    range (inf when free).  Basics block at the bound they would cross;
    rows already outside a bound block at that bound, which is what makes
    the same test drive phase 1.

    Returns (outcome, row, step): RT_PIVOT leaves basis position row
    after a step of length step, RT_FLIP is a bound flip of the entering
    variable, RT_UNBOUNDED means nothing blocks, RT_BAN asks the driver
    to ban the column because every usable pivot element is too small.
    """
    m = xB.shape[0]
    ratios = np.full(m, np.inf)
    sig = np.abs(delta) > tol_piv
    if sig.any():
        tpos = np.where(above, up_b, np.where(~below, lo_b, -np.inf))
        tneg = np.where(below, lo_b, np.where(~above, up_b, np.inf))
        target = np.where(delta > 0, tpos, tneg)
        ok = sig & np.isfinite(target)
        if ok.any():
            ratios[ok] = (xB[ok] - target[ok]) / delta[ok]
    np.maximum(ratios, 0.0, out=ratios)
    rmin = ratios.min() if m else np.inf

    if own <= rmin:
        if not np.isfinite(own):
            return RT_UNBOUNDED, -1, 0.0
        return RT_FLIP, -1, float(own)
    if not np.isfinite(rmin):
        return RT_UNBOUNDED, -1, 0.0

    # pass 1 relaxes every blocking bound by tol_feas to get a step
    # ceiling, pass 2 takes the largest stable pivot whose exact ratio
    # fits under it; any row passed over ends up at most tol_feas outside
    slack = np.zeros(m)
    slack[sig] = tol_feas / np.abs(delta[sig])
    theta_max = (ratios + slack).min()
    cand = np.flatnonzero(ratios <= theta_max)
    strong = cand[np.abs(delta[cand]) >= 1e-7]
    if len(strong) == 0:
        return RT_BAN, -1, 0.0
    if bland:
        # Bland needs lowest-index ties on the leaving side too
        r = int(strong[np.argmin(basis[strong])])
    else:
        r = int(strong[np.argmax(np.abs(delta[strong]))])
    return RT_PIVOT, r, float(ratios[r])


def eta_fwd(mat, rows, k, v):
    """Apply the first k product-form updates to v in place, in order.

    Column i of mat holds the pivot column alpha of update i including
    its pivot element at row rows[i].
    """
    for i in range(k):
        r = rows[i]
        t = v[r] / mat[r, i]
        if t != 0.0:
            v -= mat[:, i] * t
        v[r] = t
    return v


def eta_tr(mat, rows, k, v):
    """Apply the transposes of the first k updates to v in place.

    Reverse order of eta_fwd; only component rows[i] changes per update.
    """
    for i in range(k - 1, -1, -1):
        r = rows[i]
        v[r] -= (np.dot(mat[:, i], v) - v[r]) / mat[r, i]
    return v
