"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The active path is chosen once at import time from the ``CORRINT_KERNELS``
environment variable: ``auto`` (default; numba when importable), ``numba``,
or ``numpy``.  The two paths run the same floating-point operations in the
same order: the transform and distance kernels agree bit-for-bit, the game
kernels evaluate ``sin`` through libm on both paths.
``benchmarks/bench_kernels.py`` compares their speed.

``CORRINT_THREADS`` bounds internal parallelism.  All kernels here are
serial, so the bound holds trivially; when numba is active the numba
threading layer is capped as well.
"""
from __future__ import annotations

import math
import os

import numpy as np

_MODE = os.environ.get("CORRINT_KERNELS", "auto").lower()
if _MODE not in ("auto", "numba", "numpy"):
    raise ValueError(f"CORRINT_KERNELS must be auto|numba|numpy, got {_MODE!r}")

NUMBA_ACTIVE = False
if _MODE in ("auto", "numba"):
    try:
        import numba
        from numba import njit

        NUMBA_ACTIVE = True
        threads = os.environ.get("CORRINT_THREADS")
        if threads:
            numba.set_num_threads(max(1, min(int(threads), numba.get_num_threads())))
    except ImportError:
        if _MODE == "numba":
            raise
KERNEL_PATH = "numba" if NUMBA_ACTIVE else "numpy"

# distance modes shared by both paths
MODE_WSUM = 1   # weighted l1:  sum_m w_m |dx_m|
MODE_EUCLID = 2
MODE_MAX = 3


def _fwht_loop(v):
    """Hadamard butterfly, naive loop form (numba source)."""
    out = v.copy()
    n = out.shape[0]
    h = 1
    while h < n:
        for start in range(0, n, 2 * h):
            for i in range(start, start + h):
                a = out[i]
                b = out[i + h]
                out[i] = a + b
                out[i + h] = a - b
        h *= 2
    return out


def _fwht_vec(v):
    """Vectorized butterfly; pairs the identical elements as the loop form."""
    out = v.copy()
    n = out.shape[0]
    h = 1
    while h < n:
        m = out.reshape(-1, 2 * h)
        a = m[:, :h].copy()
        b = m[:, h:].copy()
        m[:, :h] = a + b
        m[:, h:] = a - b
        h *= 2
    return out


def _min_dists_loop(targets, cloud, mode, weights):
    nt = targets.shape[0]
    nc = cloud.shape[0]
    d = targets.shape[1]
    res = np.empty(nt)
    for it in range(nt):
        best = math.inf
        for ic in range(nc):
            if mode == MODE_EUCLID:
                acc = 0.0
                for m in range(d):
                    dx = targets[it, m] - cloud[ic, m]
                    acc += dx * dx
                dist = math.sqrt(acc)
            elif mode == MODE_WSUM:
                acc = 0.0
                for m in range(d):
                    acc += weights[m] * abs(targets[it, m] - cloud[ic, m])
                dist = acc
            else:
                acc = 0.0
                for m in range(d):
                    dx = abs(targets[it, m] - cloud[ic, m])
                    if dx > acc:
                        acc = dx
                dist = acc
            if dist < best:
                best = dist
        res[it] = best
    return res


def _min_dists_vec(targets, cloud, mode, weights):
    nt = targets.shape[0]
    res = np.empty(nt)
    for it in range(nt):
        diff = cloud - targets[it]
        if mode == MODE_EUCLID:
            dist = np.sqrt(np.sum(diff * diff, axis=1))
        elif mode == MODE_WSUM:
            dist = np.sum(np.abs(diff) * weights, axis=1)
        else:
            dist = np.max(np.abs(diff), axis=1)
        res[it] = dist.min()
    return res


def _payoff_table(theta, phi, gamma, na, p2, dn, am, k):
    """Payoff of every (player, action) pair at scalar externality theta.

    p2[t, a] is the theta-independent product term, dn[t, a, i-1] the norm
    gap to the i-th mixed point of t's cell, na[a] the action norm, and
    am[i, rho] the planar root-of-unity modulus table.
    """
    natoms = phi.shape[0]
    nact = na.shape[0]
    out = np.empty((natoms, nact))
    for t in range(natoms):
        if theta == 0.0 or phi[t] <= gamma:
            for a in range(nact):
                out[t, a] = -p2[t, a]
            continue
        u = (phi[t] - gamma) / theta
        rho = int(math.floor(u)) % (k + 1)
        sinv = abs(math.sin(u * math.pi))
        for a in range(nact):
            hv = theta * sinv * (na[a] + am[0, rho])
            for i in range(1, k + 1):
                hv *= dn[t, a, i - 1] + am[i, rho]
            out[t, a] = -hv - p2[t, a]
    return out


def _exhaustive_scan(nact, block_mass, block_start, block_len,
                     actions, e_mean, beta, phi, gamma, na, p2, dn, am, k):
    """Scan every block-constant profile; return the minimum-residual one.

    Returns (min residual, best profile digits, min aggregate distance to
    e_mean over all profiles).  Deterministic: mixed-radix order, first
    strict improvement wins.
    """
    nblocks = block_mass.shape[0]
    d = actions.shape[1]
    total = 1
    for _ in range(nblocks):
        total *= nact
    digits = np.zeros(nblocks, dtype=np.int64)
    best_prof = np.zeros(nblocks, dtype=np.int64)
    agg = np.zeros(d)
    best_res = math.inf
    min_aggdist = math.inf
    for _step in range(total):
        for m in range(d):
            agg[m] = 0.0
        for b in range(nblocks):
            ab = digits[b]
            for m in range(d):
                agg[m] += block_mass[b] * actions[ab, m]
        acc = 0.0
        for m in range(d):
            dx = agg[m] - e_mean[m]
            acc += dx * dx
        aggdist = math.sqrt(acc)
        if aggdist < min_aggdist:
            min_aggdist = aggdist
        theta = beta * aggdist
        worst = 0.0
        for b in range(nblocks):
            chosen = digits[b]
            for j in range(block_len[b]):
                t = block_start[b] + j
                if theta == 0.0 or phi[t] <= gamma:
                    rho = -1
                    sinv = 0.0
                else:
                    u = (phi[t] - gamma) / theta
                    rho = int(math.floor(u)) % (k + 1)
                    sinv = abs(math.sin(u * math.pi))
                best_pay = -math.inf
                chosen_pay = 0.0
                for a in range(nact):
                    if rho < 0:
                        pay = -p2[t, a]
                    else:
                        hv = theta * sinv * (na[a] + am[0, rho])
                        for i in range(1, k + 1):
                            hv *= dn[t, a, i - 1] + am[i, rho]
                        pay = -hv - p2[t, a]
                    if pay > best_pay:
                        best_pay = pay
                    if a == chosen:
                        chosen_pay = pay
                regret = best_pay - chosen_pay
                if regret > worst:
                    worst = regret
            if worst >= best_res:
                break
        if worst < best_res:
            best_res = worst
            for b in range(nblocks):
                best_prof[b] = digits[b]
        pos = nblocks - 1
        while pos >= 0:
            digits[pos] += 1
            if digits[pos] < nact:
                break
            digits[pos] = 0
            pos -= 1
    return best_res, best_prof, min_aggdist


if NUMBA_ACTIVE:
    fwht_f64 = njit(cache=True)(_fwht_loop)
    fwht_i64 = fwht_f64
    min_dists = njit(cache=True)(_min_dists_loop)
    payoff_table = njit(cache=True)(_payoff_table)
    exhaustive_scan = njit(cache=True)(_exhaustive_scan)
else:
    fwht_f64 = _fwht_vec
    fwht_i64 = _fwht_vec
    min_dists = _min_dists_vec
    # the game kernels stay in loop form so both paths share libm's sin;
    # they are small enough to run interpreted within the stated budgets
    payoff_table = _payoff_table
    exhaustive_scan = _exhaustive_scan
