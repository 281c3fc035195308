# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: initializedcheck=False, language_level=3
"""Compiled twin of the numpy kernel primitives in simplex_py.

Same selection rules, same tie-breaking, same outcome codes; the loops here
fuse the row passes that the fallback issues as separate vector ops.  Float
results can differ from the fallback at rounding scale because summation
order differs; callers compare across backends with tolerances.
"""
import numpy as np

from libc.math cimport INFINITY, fabs, isfinite

AT_LOWER, AT_UPPER, BASIC, FREE = 0, 1, 2, 3
RT_PIVOT, RT_FLIP, RT_UNBOUNDED, RT_BAN = 0, 1, 2, 3


def price(z, vstat, fixed, banned, bland, tol_dual):
    """Pick the entering column from reduced costs z.  See simplex_py."""
    cdef double[::1] zv = z
    cdef signed char[::1] vs = vstat
    cdef unsigned char[::1] fx = fixed.view(np.uint8)
    cdef unsigned char[::1] bn = banned.view(np.uint8)
    cdef double td = tol_dual
    cdef bint bl = bland
    cdef Py_ssize_t nm = zv.shape[0], j, jbest = -1
    cdef double best = -1.0, a
    cdef int st
    cdef bint elig
    for j in range(nm):
        if fx[j] or bn[j]:
            continue
        st = vs[j]
        if st == 2:
            continue
        if (st == 0 or st == 3) and zv[j] < -td:
            elig = True
        elif (st == 1 or st == 3) and zv[j] > td:
            elig = True
        else:
            elig = False
        if not elig:
            continue
        if bl:
            return j
        a = fabs(zv[j])
        if a > best:
            best = a
            jbest = j
    return jbest


def chuzr(xB, lo_b, up_b, delta, below, above, own, tol_feas, tol_piv,
          bland, basis):
    """Harris two-pass bounded-variable ratio test.  See simplex_py."""
    cdef double[::1] x = xB
    cdef double[::1] lo = lo_b
    cdef double[::1] up = up_b
    cdef double[::1] d = delta
    cdef unsigned char[::1] bl = below.view(np.uint8)
    cdef unsigned char[::1] ab = above.view(np.uint8)
    cdef long long[::1] bas = basis
    cdef double v_own = own, tf = tol_feas, tp = tol_piv
    cdef bint use_bland = bland
    cdef Py_ssize_t m = x.shape[0], i, r = -1
    cdef double rmin = INFINITY, theta_max = INFINITY
    cdef double ad, tgt, ratio, bestp = -1.0
    cdef long long bbest = 0

    ratios_arr = np.full(m, np.inf)
    cdef double[::1] ratios = ratios_arr
    for i in range(m):
        ad = fabs(d[i])
        if ad > tp:
            if d[i] > 0:
                tgt = up[i] if ab[i] else (-INFINITY if bl[i] else lo[i])
            else:
                tgt = lo[i] if bl[i] else (INFINITY if ab[i] else up[i])
            if isfinite(tgt):
                ratio = (x[i] - tgt) / d[i]
                if ratio < 0.0:
                    ratio = 0.0
                ratios[i] = ratio
                if ratio < rmin:
                    rmin = ratio

    if v_own <= rmin:
        if not isfinite(v_own):
            return RT_UNBOUNDED, -1, 0.0
        return RT_FLIP, -1, v_own
    if not isfinite(rmin):
        return RT_UNBOUNDED, -1, 0.0

    for i in range(m):
        ad = fabs(d[i])
        if ad > tp:
            ratio = ratios[i] + tf / ad
        else:
            ratio = ratios[i]
        if ratio < theta_max:
            theta_max = ratio

    if use_bland:
        for i in range(m):
            if ratios[i] <= theta_max and fabs(d[i]) >= 1e-7:
                if r < 0 or bas[i] < bbest:
                    r = i
                    bbest = bas[i]
    else:
        for i in range(m):
            if ratios[i] <= theta_max and fabs(d[i]) >= 1e-7:
                ad = fabs(d[i])
                if ad > bestp:
                    bestp = ad
                    r = i
    if r < 0:
        return RT_BAN, -1, 0.0
    return RT_PIVOT, r, ratios[r]


def eta_fwd(mat, rows, k, v):
    """Apply the first k product-form updates to v in place, in order."""
    cdef double[::1, :] M = mat
    cdef long long[::1] R = rows
    cdef double[::1] x = v
    cdef Py_ssize_t m = x.shape[0], nk = k, q, i, r
    cdef double t
    for q in range(nk):
        r = R[q]
        t = x[r] / M[r, q]
        if t != 0.0:
            for i in range(m):
                x[i] -= M[i, q] * t
        x[r] = t
    return v


def eta_tr(mat, rows, k, v):
    """Apply the transposes of the first k updates to v in place."""
    cdef double[::1, :] M = mat
    cdef long long[::1] R = rows
    cdef double[::1] x = v
    cdef Py_ssize_t m = x.shape[0], m4 = m - (m & 3), nk = k, q, i, r
    cdef double a0, a1, a2, a3
    for q in range(nk - 1, -1, -1):
        r = R[q]
        # four-lane dot product so the reduction pipelines
        a0 = a1 = a2 = a3 = 0.0
        for i in range(0, m4, 4):
            a0 += M[i, q] * x[i]
            a1 += M[i + 1, q] * x[i + 1]
            a2 += M[i + 2, q] * x[i + 2]
            a3 += M[i + 3, q] * x[i + 3]
        for i in range(m4, m):
            a0 += M[i, q] * x[i]
        x[r] -= ((a0 + a1) + (a2 + a3) - x[r]) / M[r, q]
    return v
