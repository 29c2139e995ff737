from fractions import Fraction

import numpy as np
import pytest

from corrint.errors import PreconditionError
from corrint.walsh import (
    walsh_eval,
    walsh_integer_spectrum,
    walsh_integral,
    walsh_inverse,
    walsh_set,
    walsh_sign_on_cell,
    walsh_transform,
)


def test_eval_examples():
    for l in (0, Fraction(1, 3), Fraction(1, 2), 1):
        assert walsh_eval(0, l) == 1
    assert walsh_eval(1, Fraction(1, 4)) == 1
    assert walsh_eval(1, Fraction(3, 4)) == -1
    with pytest.raises(PreconditionError):
        walsh_eval(1, Fraction(3, 2))


def test_eval_matches_cell_sign_on_representatives():
    level = 5
    for n in (0, 1, 2, 3, 7, 12, 31):
        for cell in range(1 << level):
            mid = Fraction(2 * cell + 1, 1 << (level + 1))
            assert walsh_eval(n, mid) == walsh_sign_on_cell(n, cell, level)


def test_integral_examples():
    one = Fraction(1)
    for n in (1, 2, 3, 9):
        assert walsh_integral(n, Fraction(0), one, 5) == 0
    assert walsh_integral(0, Fraction(0), one, 5) == 1
    assert walsh_integral(1, Fraction(0), Fraction(1, 2), 3) == Fraction(1, 2)
    with pytest.raises(PreconditionError):
        walsh_integral(1, Fraction(0), Fraction(1, 3), 3)
    with pytest.raises(PreconditionError):
        walsh_integral(8, Fraction(0), one, 3)  # level too coarse


def test_walsh_set_examples():
    assert walsh_set(0, 3) == frozenset(range(8))
    assert walsh_set(1, 1) == frozenset({0})
    for level in (3, 4):
        for n in range(1, 1 << level):
            assert len(walsh_set(n, level)) == 1 << (level - 1)


def test_orthogonality_integer_exact():
    level = 6
    ncells = 1 << level
    for m in range(8):
        for n in range(8):
            acc = sum(
                walsh_sign_on_cell(m, c, level) * walsh_sign_on_cell(n, c, level)
                for c in range(ncells)
            )
            assert acc == (ncells if m == n else 0)


def test_multiplicativity_via_xor():
    rng = np.random.default_rng(11)
    for _ in range(300):
        m = int(rng.integers(0, 32))
        n = int(rng.integers(0, 32))
        l = Fraction(int(rng.integers(1, 3 ** 7)), 3 ** 7)  # non-dyadic points
        assert walsh_eval(m, l) * walsh_eval(n, l) == walsh_eval(m ^ n, l)


def test_sign_sets_generate_dyadic_partition():
    # common refinement of {E_n, complement} over n < 2^L separates all cells
    level = 4
    ncells = 1 << level
    signatures = set()
    for cell in range(ncells):
        signatures.add(
            tuple(cell in walsh_set(n, level) for n in range(1, ncells))
        )
    assert len(signatures) == ncells


def test_transform_examples():
    ones = walsh_transform(np.ones(16))
    assert ones[0] == 1.0 and not np.any(ones[1:])
    level = 2
    w3 = np.array([walsh_sign_on_cell(3, c, level) for c in range(4)], dtype=float)
    coeffs = walsh_transform(w3)
    expect = np.zeros(4)
    expect[3] = 1.0
    assert np.array_equal(coeffs, expect)
    with pytest.raises(PreconditionError):
        walsh_transform(np.ones(6))


def test_transform_roundtrip_and_parseval():
    rng = np.random.default_rng(12)
    for size in (8, 32, 256):
        f = rng.normal(size=size)
        coeffs = walsh_transform(f)
        back = walsh_inverse(coeffs)
        assert np.max(np.abs(back - f)) <= 1e-12
        assert abs(np.sum(coeffs ** 2) - np.mean(f ** 2)) <= 1e-12


def test_integer_spectrum_matches_float_transform():
    rng = np.random.default_rng(13)
    g = rng.integers(-1, 2, size=64).astype(np.int64)
    spec = walsh_integer_spectrum(g)
    coeffs = walsh_transform(g.astype(float))
    assert np.max(np.abs(spec / 64.0 - coeffs)) <= 1e-14
