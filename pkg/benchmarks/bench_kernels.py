"""Compare the compiled kernel against the numpy fallback.

Times end-to-end LP relaxation solves of unit-commitment models plus the
individual kernel primitives, for both backends in one process (the engine
accepts an explicit backend, so no environment juggling is needed).

Run from the repository root:

    python3 benchmarks/bench_kernels.py
"""
import time

import numpy as np

from ucopt._kernels import simplex_py
from ucopt._kernels.simplex_py import C_TOTAL_PIVOTS
from ucopt.formulation import ONE_BIN, THREE_BIN, build_mip
from ucopt.instance import load_instance, packaged_instance_path
from ucopt.mip.simplex import LP_OPTIMAL, SimplexEngine

try:
    from ucopt._kernels import simplex_cy
except ImportError:
    simplex_cy = None


def time_solve(problem, backend, repeats=3):
    best = np.inf
    obj = iters = None
    for _ in range(repeats):
        eng = SimplexEngine(problem, backend=backend)
        t0 = time.perf_counter()
        code, _, obj = eng.solve()
        best = min(best, time.perf_counter() - t0)
        assert code == LP_OPTIMAL
        iters = int(eng.counters[C_TOTAL_PIVOTS])
    return best, obj, iters


def time_call(fn, args, repeats=200):
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def micro(backend, m=4000, k=60, seed=0):
    """Per-call seconds for each primitive on synthetic data of LP scale."""
    r = np.random.default_rng(seed)
    # eta columns shaped like real pivot columns: mild off-diagonal mass,
    # pivot element near one, so chained application stays well scaled
    rows = r.permutation(m)[:k].astype(np.int64)
    mat = np.asfortranarray(r.normal(scale=0.02, size=(m, k)))
    mat[rows, np.arange(k)] = 1.0 + r.normal(scale=0.1, size=k)
    v = r.normal(size=m)
    z = r.normal(size=2 * m)
    vstat = r.integers(0, 4, size=2 * m).astype(np.int8)
    fixed = r.random(2 * m) < 0.05
    banned = np.zeros(2 * m, dtype=bool)
    xB = r.normal(size=m)
    lo = xB - r.random(m)
    up = xB + r.random(m)
    delta = r.normal(size=m)
    below = np.zeros(m, dtype=bool)
    above = np.zeros(m, dtype=bool)
    basis = np.arange(m, 2 * m, dtype=np.int64)
    return {
        "eta_fwd": time_call(backend.eta_fwd, (mat, rows, k, v.copy())),
        "eta_tr": time_call(backend.eta_tr, (mat, rows, k, v.copy())),
        "price": time_call(backend.price, (z, vstat, fixed, banned, 0, 1e-7)),
        "chuzr": time_call(backend.chuzr, (xB, lo, up, delta, below, above,
                                           np.inf, 1e-7, 1e-9, 0, basis)),
    }


def main():
    if simplex_cy is None:
        print("compiled kernel not built; nothing to compare")
        return

    print("end-to-end LP relaxations (best of 3):")
    cases = [("unit8 OneBin", ONE_BIN), ("unit8 ThreeBin", THREE_BIN)]
    inst = load_instance(packaged_instance_path("unit8"))
    for label, form in cases:
        problem = build_mip(inst, form)
        t_py, obj_py, it_py = time_solve(problem, simplex_py)
        t_cy, obj_cy, it_cy = time_solve(problem, simplex_cy)
        gap = abs(obj_py - obj_cy) / max(1.0, abs(obj_py))
        # pivot paths may diverge at rounding scale, so wall times carry
        # the iteration counts needed to read them fairly
        print("  %-16s python %6.2fs/%5d it  cython %6.2fs/%5d it  "
              "rel obj gap %.1e" % (label, t_py, it_py, t_cy, it_cy, gap))

    print("primitive micro-timings (m=4000, per call):")
    mic_py = micro(simplex_py)
    mic_cy = micro(simplex_cy)
    for name in mic_py:
        print("  %-8s python %8.1fus  cython %8.1fus  speedup %5.2fx"
              % (name, mic_py[name] * 1e6, mic_cy[name] * 1e6,
                 mic_py[name] / mic_cy[name]))


if __name__ == "__main__":
    main()
