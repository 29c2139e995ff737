"""Regular conditional distributions of selections as finite transition
kernels, their mixtures, and a test-family pseudometric.

The kernel of a selection conditional on an algebra assigns to each block
the empirical distribution of the selection's values there, weighted by
exact rational masses; its barycenter recovers the conditional expectation.
A correspondence's kernel set is its Dirac embedding, so no separate
compactification object exists.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .correspondences import Selection, _vec_key
from .errors import DegenerateBlockError, PreconditionError, StructureError
from .spaces import SigmaPartition


@dataclass(frozen=True, init=False)
class TransitionKernel:
    """Blockwise finite distributions over vectors, weights exact rationals."""

    g_alg: SigmaPartition
    supports: tuple[tuple[np.ndarray, ...], ...]   # per block, canonical order
    weights: tuple[tuple[Fraction, ...], ...]

    def __init__(self, g_alg: SigmaPartition, per_block):
        """per_block: list aligned with g_alg.blocks of [(vector, weight), ...]."""
        supports = []
        weights = []
        for b, dist in zip(g_alg.blocks, per_block):
            merged: dict[bytes, tuple[np.ndarray, Fraction]] = {}
            for v, w in dist:
                w = Fraction(w)
                if w < 0:
                    raise StructureError(f"negative weight {w} in block {sorted(b)}")
                arr = np.ascontiguousarray(v, dtype=float)
                key = _vec_key(arr)
                if key in merged:
                    merged[key] = (merged[key][0], merged[key][1] + w)
                elif w > 0:
                    arr.setflags(write=False)
                    merged[key] = (arr, w)
            items = sorted(merged.values(), key=lambda it: tuple(it[0].tolist()))
            total = sum((w for _, w in items), Fraction(0))
            if total != 1:
                raise StructureError(
                    f"weights in block {sorted(b)} sum to {total}, not 1"
                )
            supports.append(tuple(v for v, _ in items))
            weights.append(tuple(w for _, w in items))
        object.__setattr__(self, "g_alg", g_alg)
        object.__setattr__(self, "supports", tuple(supports))
        object.__setattr__(self, "weights", tuple(weights))

    @property
    def dim(self) -> int:
        return self.supports[0][0].shape[0]

    def barycenters(self) -> list[np.ndarray]:
        out = []
        for sup, ws in zip(self.supports, self.weights):
            acc = np.zeros(self.dim)
            for v, w in zip(sup, ws):
                acc += float(w) * v
            out.append(acc)
        return out

    def equals_exactly(self, other: "TransitionKernel") -> bool:
        if self.g_alg.blocks != other.g_alg.blocks:
            return False
        for sa, wa, sb, wb in zip(
            self.supports, self.weights, other.supports, other.weights
        ):
            if wa != wb or len(sa) != len(sb):
                return False
            if any(not np.array_equal(x, y) for x, y in zip(sa, sb)):
                return False
        return True

    def to_json(self) -> list[dict]:
        return [
            {
                "block": sorted(b),
                "support": [[float(x) for x in v] for v in sup],
                "weights": [f"{w.numerator}/{w.denominator}" for w in ws],
            }
            for b, sup, ws in zip(self.g_alg.blocks, self.supports, self.weights)
        ]


def rcd_of_selection(sel: Selection, g_alg: SigmaPartition) -> TransitionKernel:
    """Empirical blockwise distribution of the selection's values.

    The weight of value v in block B is the exact rational mass of
    {t in B : f(t) = v} over mass(B).
    """
    space = sel.corr.space
    if g_alg.atom_set != space.atom_set:
        raise StructureError("conditioning algebra does not cover the space")
    per_block = []
    for b in g_alg.blocks:
        bmass = space.mass(b)
        if bmass == 0:
            raise DegenerateBlockError(f"block {sorted(b)} has zero mass")
        dist = [(sel.at(a), space.mass_of(a) / bmass) for a in sorted(b)]
        per_block.append(dist)
    return TransitionKernel(g_alg, per_block)


def kernel_mix(
    k1: TransitionKernel, k2: TransitionKernel, alpha
) -> TransitionKernel:
    """Blockwise mixture alpha*k1 + (1-alpha)*k2 with support union."""
    alpha = Fraction(alpha)
    if not 0 <= alpha <= 1:
        raise PreconditionError(f"alpha must lie in [0,1], got {alpha}")
    if k1.g_alg.blocks != k2.g_alg.blocks:
        raise StructureError("kernels live on different block structures")
    per_block = []
    for sup1, w1, sup2, w2 in zip(k1.supports, k1.weights, k2.supports, k2.weights):
        dist = [(v, alpha * w) for v, w in zip(sup1, w1)]
        dist += [(v, (1 - alpha) * w) for v, w in zip(sup2, w2)]
        per_block.append(dist)
    return TransitionKernel(k1.g_alg, per_block)


def kernel_distance(
    k1: TransitionKernel,
    k2: TransitionKernel,
    test_family_size: int | None = None,
    clip_bound: float | None = None,
    block_masses=None,
) -> float:
    """Max gap of the two kernels' double integrals over the finite test
    family: block indicators times clipped coordinate functions, plus the
    constant 1.

    A pseudometric: it separates finitely supported kernels whenever the
    coordinate functions do.  The coordinate count can be truncated via
    ``test_family_size``; the clip bound defaults to covering every support
    point; ``block_masses`` weighs each block's contribution (1 when
    omitted).  Distance 0 with structurally distinct kernels is a
    separation failure the caller can detect via ``equals_exactly``.
    """
    if k1.g_alg.blocks != k2.g_alg.blocks:
        raise StructureError("kernels live on different block structures")
    d = k1.dim
    ncoords = d if test_family_size is None else max(0, min(d, test_family_size))
    if ncoords == 0:
        return 0.0
    if clip_bound is None:
        hi = 0.0
        for kern in (k1, k2):
            for sup in kern.supports:
                for v in sup:
                    hi = max(hi, float(np.max(np.abs(v))) if v.size else 0.0)
        clip_bound = hi if hi > 0 else 1.0
    nblocks = len(k1.g_alg.blocks)
    if block_masses is None:
        masses = np.ones(nblocks)
    else:
        masses = np.array([float(Fraction(m)) for m in block_masses])
        if masses.shape[0] != nblocks:
            raise StructureError("one mass per block required")

    def block_integrals(kern: TransitionKernel) -> np.ndarray:
        # rows: blocks; cols: clipped coordinates. Entry = sum_x w(x) clip(x_m).
        rows = []
        for sup, ws in zip(kern.supports, kern.weights):
            acc = np.zeros(ncoords)
            for v, w in zip(sup, ws):
                acc += float(w) * np.clip(v[:ncoords], -clip_bound, clip_bound)
            rows.append(acc)
        return np.array(rows)

    # the constant-1 test function integrates to 1 under both kernels,
    # contributing 0; the indicator-times-coordinate functions remain
    diffs = np.abs(block_integrals(k1) - block_integrals(k2)) * masses[:, None]
    return float(diffs.max())
