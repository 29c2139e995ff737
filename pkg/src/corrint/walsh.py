"""Walsh orthogonal system on [0,1] and its exact dyadic calculus.

Index convention: for n >= 1 with binary digits n = n_0 + 2 n_1 + ... +
2**(a-1) n_{a-1} (leading digit set) and a point l with fractional binary
digits l = l_0/2 + l_1/4 + ..., the n-th function takes the value
(-1)**(n_0 l_0 + n_1 l_1 + ... + n_{a-1} l_{a-1}); the 0-th function is
identically 1.  Dyadic rationals use their terminating expansion, and cell
membership follows half-open cells [p/2**L, (p+1)/2**L), which makes point
evaluation agree with cell signs on cell representatives (boundary points
carry no mass at desk scale).
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from . import _kernels
from .errors import PreconditionError


def index_bits(n: int) -> tuple[int, ...]:
    """Binary digits of n, least significant first; empty for n = 0."""
    if n < 0:
        raise PreconditionError(f"Walsh index must be >= 0, got {n}")
    return tuple((n >> j) & 1 for j in range(n.bit_length()))


def walsh_sign_on_cell(n: int, cell: int, level: int) -> int:
    """Sign of W_n on the dyadic cell [cell/2**level, (cell+1)/2**level)."""
    if n < 0:
        raise PreconditionError(f"Walsh index must be >= 0, got {n}")
    if n.bit_length() > level:
        raise PreconditionError(
            f"level {level} too coarse to resolve Walsh index {n}"
        )
    if not 0 <= cell < (1 << level):
        raise PreconditionError(f"cell {cell} outside level-{level} grid")
    acc = 0
    for j in range(n.bit_length()):
        acc += ((n >> j) & 1) & ((cell >> (level - 1 - j)) & 1)
    return -1 if acc & 1 else 1


def walsh_eval(n: int, l) -> int:
    """Evaluate W_n at l in [0,1]; returns +1 or -1."""
    if n < 0:
        raise PreconditionError(f"Walsh index must be >= 0, got {n}")
    lf = Fraction(l)
    if not 0 <= lf <= 1:
        raise PreconditionError(f"argument {l} outside [0,1]")
    if n == 0:
        return 1
    acc = 0
    frac = lf - int(lf)  # l = 1 uses the terminating expansion: all digits 0
    for j in range(n.bit_length()):
        frac *= 2
        digit = int(frac)
        frac -= digit
        acc += ((n >> j) & 1) & digit
    return -1 if acc & 1 else 1


def walsh_integral(n: int, lo: Fraction, hi: Fraction, level: int) -> Fraction:
    """Exact integral of W_n over the dyadic interval [lo, hi].

    lo and hi must be aligned to the level-``level`` grid and the level must
    resolve the index (level >= bit length of n).
    """
    lo = Fraction(lo)
    hi = Fraction(hi)
    if n.bit_length() > level:
        raise PreconditionError(f"level {level} too coarse for Walsh index {n}")
    scale = 1 << level
    p = lo * scale
    q = hi * scale
    if p.denominator != 1 or q.denominator != 1:
        raise PreconditionError(
            f"interval [{lo}, {hi}] not aligned to the level-{level} grid"
        )
    p, q = int(p), int(q)
    if not 0 <= p <= q <= scale:
        raise PreconditionError(f"interval [{lo}, {hi}] outside [0,1] or reversed")
    total = 0
    for cell in range(p, q):
        total += walsh_sign_on_cell(n, cell, level)
    return Fraction(total, scale)


def walsh_set(n: int, level: int) -> frozenset[int]:
    """Level-``level`` cells on which W_n = +1; exactly half of them for n >= 1."""
    if n.bit_length() > level:
        raise PreconditionError(f"level {level} too coarse for Walsh index {n}")
    return frozenset(
        cell for cell in range(1 << level)
        if walsh_sign_on_cell(n, cell, level) == 1
    )


def _bit_reverse_permutation(level: int) -> np.ndarray:
    idx = np.arange(1 << level)
    rev = np.zeros_like(idx)
    for _ in range(level):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def walsh_transform(step_values) -> np.ndarray:
    """Coefficients <f, W_n>, n = 0..2**L-1, of a level-L step function.

    Input is the cell-value list (length a power of two).  The butterfly
    recursion produces the Hadamard transform in natural order; the Walsh
    indexing used here differs from it by a bit reversal.
    """
    v = np.asarray(step_values, dtype=float)
    size = v.shape[0]
    if size == 0 or size & (size - 1):
        raise PreconditionError(f"input length {size} is not a power of two")
    level = size.bit_length() - 1
    out = _kernels.fwht_f64(v)
    return out[_bit_reverse_permutation(level)] / size


def walsh_inverse(coeffs) -> np.ndarray:
    """Cell values of sum_n c_n W_n from the coefficient list."""
    c = np.asarray(coeffs, dtype=float)
    size = c.shape[0]
    if size == 0 or size & (size - 1):
        raise PreconditionError(f"input length {size} is not a power of two")
    level = size.bit_length() - 1
    return _kernels.fwht_f64(c[_bit_reverse_permutation(level)])


def walsh_integer_spectrum(step_values: np.ndarray) -> np.ndarray:
    """Integer cell sums sum_c g_c W_n(cell c) for all n, via the butterfly.

    For integer step values this is exact; dividing by 2**L gives the exact
    dyadic integrals used by the inequality checks.
    """
    v = np.asarray(step_values, dtype=np.int64)
    size = v.shape[0]
    if size == 0 or size & (size - 1):
        raise PreconditionError(f"input length {size} is not a power of two")
    level = size.bit_length() - 1
    out = _kernels.fwht_i64(v)
    return out[_bit_reverse_permutation(level)]
