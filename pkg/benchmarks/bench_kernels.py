"""Benchmark the numba kernels against the pure-numpy/python fallbacks.

Run from the repo root:

    python3 benchmarks/bench_kernels.py

The active path comes from CORRINT_KERNELS (auto/numba/numpy); this script
times both implementations in-process regardless, warming the jitted ones
first so compile time is reported separately from steady state.
"""
import time

import numpy as np

from corrint import _kernels


def _time(fn, *args, repeats=5):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_fwht():
    rng = np.random.default_rng(1)
    v = rng.normal(size=1 << 14)
    rows = []
    if _kernels.NUMBA_ACTIVE:
        t0 = time.perf_counter()
        _kernels.fwht_f64(v[:8])
        compile_s = time.perf_counter() - t0
        tn, out_n = _time(_kernels.fwht_f64, v)
        rows.append(("fwht 16384", "numba", tn, compile_s))
    else:
        out_n = None
    tv, out_v = _time(_kernels._fwht_vec, v)
    rows.append(("fwht 16384", "numpy", tv, 0.0))
    if out_n is not None:
        assert np.array_equal(out_n, out_v), "paths disagree"
    return rows


def bench_min_dists():
    rng = np.random.default_rng(2)
    targets = rng.normal(size=(128, 6))
    cloud = rng.normal(size=(50_000, 6))
    w = np.ones(6)
    rows = []
    if _kernels.NUMBA_ACTIVE:
        t0 = time.perf_counter()
        _kernels.min_dists(targets[:1], cloud[:4], _kernels.MODE_EUCLID, w)
        compile_s = time.perf_counter() - t0
        tn, out_n = _time(_kernels.min_dists, targets, cloud,
                          _kernels.MODE_EUCLID, w)
        rows.append(("min_dists 128x50k", "numba", tn, compile_s))
    else:
        out_n = None
    tv, out_v = _time(_kernels._min_dists_vec, targets, cloud,
                      _kernels.MODE_EUCLID, w)
    rows.append(("min_dists 128x50k", "numpy", tv, 0.0))
    if out_n is not None:
        assert np.array_equal(out_n, out_v), "paths disagree"
    return rows


def bench_exhaustive():
    from corrint.game import LargeGame, build_counterexample_game, find_equilibrium

    game = build_counterexample_game(2, 0, 2, 2, refinement=4)
    game = LargeGame(f_alg=game.f_alg, t_alg=game.f_alg, actions=game.actions,
                     payoff=game.payoff, externality=game.externality)
    rows = []
    label = "exhaustive 9^4 profiles"
    t0 = time.perf_counter()
    _, rep = find_equilibrium(game, mode="exhaustive", cap=10 ** 7)
    first = time.perf_counter() - t0
    t, _ = _time(lambda: find_equilibrium(game, mode="exhaustive", cap=10 ** 7),
                 repeats=3)
    rows.append((label, _kernels.KERNEL_PATH, t, max(0.0, first - t)))
    return rows


def main():
    print(f"active kernel path: {_kernels.KERNEL_PATH}")
    print(f"{'kernel':<26} {'path':<6} {'best (s)':>10} {'compile (s)':>12}")
    for bench in (bench_fwht, bench_min_dists, bench_exhaustive):
        for label, path, t, comp in bench():
            print(f"{label:<26} {path:<6} {t:>10.5f} {comp:>12.3f}")
    print("rerun with CORRINT_KERNELS=numpy to time the fallback "
          "end to end")


if __name__ == "__main__":
    main()
