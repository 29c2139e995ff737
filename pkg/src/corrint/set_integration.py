"""Aumann integral sets, conditional-expectation sets, mixing, and the
convexity / hemicontinuity diagnostics.

All set computations are exact enumerations or exact Minkowski
accumulations over finite value sets; point clouds are deduplicated at
``DEDUP_TOL`` (collapsing float fuzz of equal rational combinations) and
membership questions use ``MEMBERSHIP_TOL``.  Nothing here samples: the
only randomness-flavored ingredient, the gap prober's weight sequence, is a
deterministic low-discrepancy stream.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .correspondences import Correspondence, Selection, block_choice_sets
from .errors import (
    CapacityError,
    DegenerateBlockError,
    DivisibilityError,
    PreconditionError,
    StructureError,
)
from .spaces import DiscreteSpace, SigmaPartition, is_refinement
from .vectors import NORM_EUCLID, Workspace, norm_mode

DEDUP_TOL = 1e-12
MEMBERSHIP_TOL = 1e-9


def _metric_of(metric) -> tuple[int, np.ndarray]:
    """Resolve a Workspace, a flavor string, or None into a kernel metric."""
    if metric is None:
        return None  # caller substitutes dimension-aware default
    if isinstance(metric, Workspace):
        return metric.metric_mode()
    raise PreconditionError(f"metric must be a Workspace or None, got {metric!r}")


def _mode_for(metric, d: int) -> tuple[int, np.ndarray]:
    resolved = _metric_of(metric)
    if resolved is None:
        return norm_mode(NORM_EUCLID, d)
    return resolved


def dedup_points(points: np.ndarray, tol: float = DEDUP_TOL) -> np.ndarray:
    """Lexicographically sorted rows with near-duplicate neighbors merged.

    Two rows whose every coordinate differs by less than ``tol`` collapse to
    the first (lexicographically smallest) representative; the sweep merges
    lexicographic neighbors, which covers the intended case of float fuzz
    around identical exact values.
    """
    pts = np.ascontiguousarray(points, dtype=float)
    if pts.ndim != 2:
        raise StructureError(f"expected (n, d) points, got shape {pts.shape}")
    if pts.shape[0] == 0:
        return pts
    order = np.lexsort(pts.T[::-1])
    pts = pts[order]
    keep = [0]
    rep = pts[0]
    for i in range(1, pts.shape[0]):
        if np.max(np.abs(pts[i] - rep)) >= tol:
            keep.append(i)
            rep = pts[i]
    return pts[keep]


def _coarse_dedup(points: np.ndarray, tol: float = DEDUP_TOL) -> np.ndarray:
    """Fast intermediate dedup on the tol-quantized grid (exact values merge)."""
    q = np.round(points / tol).astype(np.int64)
    _, idx = np.unique(q, axis=0, return_index=True)
    return points[np.sort(idx)]


@dataclass(frozen=True, init=False)
class PointCloudSet:
    """Finite set of vectors in canonical (lexicographic) order."""

    points: np.ndarray

    def __init__(self, points, tol: float = DEDUP_TOL):
        pts = dedup_points(np.asarray(points, dtype=float), tol)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    def nearest_distance(self, v, metric=None) -> float:
        mode, weights = _mode_for(metric, self.ambient_dim)
        target = np.asarray(v, dtype=float).reshape(1, -1)
        return float(_kernels.min_dists(target, self.points, mode, weights)[0])

    def contains(self, v, tol: float = MEMBERSHIP_TOL, metric=None) -> bool:
        return self.nearest_distance(v, metric) <= tol

    def to_json(self, meta: dict | None = None) -> dict:
        doc = {"points": [[float(x) for x in p] for p in self.points]}
        if meta:
            doc["meta"] = meta
        return doc

    def to_csv(self) -> str:
        lines = [",".join(repr(float(x)) for x in p) for p in self.points]
        return "\n".join(lines) + "\n"


def cloud_metadata(
    corr: Correspondence, alg: SigmaPartition, cap: int, mode: str
) -> dict:
    """Provenance block for cloud exports: correspondence hash, algebra,
    cap, and accumulation mode."""
    import hashlib
    import json as _json

    digest = hashlib.sha256(
        _json.dumps(corr.to_json(), sort_keys=True).encode()
    ).hexdigest()
    return {
        "corr_sha256": digest,
        "blocks": alg.to_json(),
        "cap": cap,
        "mode": mode,
    }


def integrate_selection(sel: Selection) -> np.ndarray:
    """Mass-weighted sum of the selection, atoms in ascending id order."""
    space = sel.corr.space
    total = np.zeros(sel.corr.dim)
    for m, v in zip(space.masses, sel.choice):
        total += float(m) * v
    return total


def conditional_expectation(sel: Selection, g_alg: SigmaPartition) -> list[np.ndarray]:
    """Per-block averages of the selection, blocks in canonical order.

    The weight of an atom inside its block is the exact rational
    mass(t)/mass(B), converted once to float.
    """
    space = sel.corr.space
    if g_alg.atom_set != space.atom_set:
        raise StructureError("conditioning algebra does not cover the space")
    out = []
    for b in g_alg.blocks:
        bmass = space.mass(b)
        if bmass == 0:
            raise DegenerateBlockError(f"block {sorted(b)} has zero mass")
        acc = np.zeros(sel.corr.dim)
        for a in sorted(b):
            acc += float(space.mass_of(a) / bmass) * sel.at(a)
        out.append(acc)
    return out


def _block_contributions(
    space: DiscreteSpace, alg: SigmaPartition, sets, scale: Fraction
) -> list[np.ndarray]:
    """Per-block arrays of scaled admissible contributions mass(B)/scale * v."""
    out = []
    for b, cs in zip(alg.blocks, sets):
        w = float(space.mass(b) / scale)
        out.append(np.array([w * v for v in cs]))
    return out


def _minkowski_fold(contribs: list[np.ndarray], cap: int, d: int) -> np.ndarray:
    """Exact Minkowski accumulation with dedup pruning after every block.

    Consecutive blocks with bit-identical contribution sets are folded as a
    single multiset sum (compositions of the run length), which keeps the
    refined-uniform case polynomial instead of exponential.
    """
    acc = np.zeros((1, d))
    i = 0
    nb = len(contribs)
    while i < nb:
        run = 1
        while i + run < nb and contribs[i + run].shape == contribs[i].shape \
                and contribs[i + run].tobytes() == contribs[i].tobytes():
            run += 1
        block_set = contribs[i]
        if run == 1:
            step = block_set
        else:
            step = _multiset_sums(block_set, run)
        total = acc.shape[0] * step.shape[0]
        if total > max(cap, 1) * 64:
            raise CapacityError(total, cap)
        acc = (acc[:, None, :] + step[None, :, :]).reshape(-1, d)
        acc = _coarse_dedup(acc)
        if acc.shape[0] > cap:
            raise CapacityError(acc.shape[0], cap)
        i += run
    return acc


def _multiset_sums(options: np.ndarray, r: int) -> np.ndarray:
    """All sums of r choices (with repetition) from the option rows."""
    p = options.shape[0]
    counts = _count_vectors(r, p)
    return counts.astype(float) @ options


def _count_vectors(total: int, parts: int) -> np.ndarray:
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    rows = []
    for head in range(total + 1):
        rest = _count_vectors(total - head, parts - 1)
        head_col = np.full((rest.shape[0], 1), head, dtype=np.int64)
        rows.append(np.hstack([head_col, rest]))
    return np.vstack(rows)


def aumann_integral_set(
    corr: Correspondence,
    alg: SigmaPartition,
    cap: int = 2_000_000,
    mode: str = "auto",
) -> PointCloudSet:
    """The exact finite set of integrals of alg-measurable selections.

    ``mode='enumerate'`` demands the full selection product fit under
    ``cap`` (CapacityError reports the exact count); ``'minkowski'``
    accumulates blockwise with dedup pruning, which is exact because value
    sets are finite; ``'auto'`` enumerates when it fits and accumulates
    otherwise.
    """
    if mode not in ("auto", "enumerate", "minkowski"):
        raise PreconditionError(f"unknown mode {mode!r}")
    sets = block_choice_sets(corr, alg)
    count = 1
    for cs in sets:
        if not cs:
            return PointCloudSet(np.zeros((0, corr.dim)))
        count *= len(cs)
    contribs = _block_contributions(corr.space, alg, sets, Fraction(1))
    if mode == "enumerate" and count > cap:
        raise CapacityError(count, cap)
    if mode == "auto" and count > cap:
        mode = "minkowski"
    if mode == "minkowski":
        pts = _minkowski_fold(contribs, cap, corr.dim)
    else:
        pts = np.zeros((1, corr.dim))
        for c in contribs:
            pts = (pts[:, None, :] + c[None, :, :]).reshape(-1, corr.dim)
        # no intermediate dedup: canonical enumeration order is the contract
    return PointCloudSet(pts)


@dataclass(frozen=True)
class ConditionalSet:
    """Exact set of conditional expectations, one vector per block.

    The per-block value sets are independent across blocks, so the set is
    their product; ``functions`` materializes it (within cap) as an array of
    shape (count, nblocks, d) in canonical order.
    """

    g_alg: SigmaPartition
    block_sets: tuple[np.ndarray, ...]
    functions: np.ndarray = field(compare=False)

    def __len__(self) -> int:
        return self.functions.shape[0]

    def contains_function(self, func, tol: float = MEMBERSHIP_TOL, metric=None) -> bool:
        """Membership via the product structure: per block, a set hit."""
        func = np.asarray(func, dtype=float)
        if func.shape != (len(self.block_sets), self.block_sets[0].shape[1]):
            raise StructureError(
                f"expected ({len(self.block_sets)}, d) block-indexed vectors"
            )
        for target, bs in zip(func, self.block_sets):
            mode, weights = _mode_for(metric, bs.shape[1])
            dist = float(_kernels.min_dists(target.reshape(1, -1), bs, mode, weights)[0])
            if dist > tol:
                return False
        return True


def conditional_set(
    corr: Correspondence,
    t_alg: SigmaPartition,
    g_alg: SigmaPartition,
    cap: int = 2_000_000,
) -> ConditionalSet:
    """All conditional expectations E(f|g_alg) of t_alg-measurable selections.

    Requires t_alg to refine g_alg.  Per conditioning block the attainable
    averages form an exact Minkowski sum over the inner t-blocks; the
    product across blocks is materialized within ``cap``.
    """
    if not is_refinement(t_alg, g_alg):
        raise PreconditionError("t_alg must refine g_alg")
    space = corr.space
    sets = block_choice_sets(corr, t_alg)
    inner_of = {id(gb): [] for gb in g_alg.blocks}
    for tb, cs in zip(t_alg.blocks, sets):
        if not cs:
            raise PreconditionError(
                f"no admissible value on block {sorted(tb)}"
            )
        for gb in g_alg.blocks:
            if tb <= gb:
                inner_of[id(gb)].append((tb, cs))
                break
    block_sets = []
    total = 1
    for gb in g_alg.blocks:
        gmass = space.mass(gb)
        if gmass == 0:
            raise DegenerateBlockError(f"block {sorted(gb)} has zero mass")
        contribs = [
            np.array([float(space.mass(tb) / gmass) * v for v in cs])
            for tb, cs in inner_of[id(gb)]
        ]
        pts = _minkowski_fold(contribs, cap, corr.dim)
        pts = dedup_points(pts)
        block_sets.append(pts)
        total *= pts.shape[0]
    if total > cap:
        raise CapacityError(total, cap)
    counts = [bs.shape[0] for bs in block_sets]
    nb = len(block_sets)
    funcs = np.zeros((total, nb, corr.dim))
    rep = total
    for j, bs in enumerate(block_sets):
        rep //= counts[j]
        tile = total // (rep * counts[j])
        idx = np.tile(np.repeat(np.arange(counts[j]), rep), tile)
        funcs[:, j, :] = bs[idx]
    return ConditionalSet(g_alg, tuple(block_sets), funcs)


def lyapunov_mix(
    selections: list[Selection],
    weights,
    f_alg: SigmaPartition,
    t_alg: SigmaPartition,
) -> Selection:
    """A finer-measurable selection whose conditional expectation is the
    weighted mixture of the inputs', exactly.

    Inside every f_alg block the t_alg sub-blocks are grouped into parts
    whose mass fractions equal the weights (round-robin when the sub-blocks
    are uniform and the weights equal, exact consecutive filling otherwise);
    the part assigned to weight j plays selection j's block value.  The
    parts hit every f_alg block in exact proportion, i.e. they form an
    independent-supplement-style assignment, so E(g|G) mixes exactly for
    every sub-algebra G of f_alg.
    """
    if not selections:
        raise PreconditionError("need at least one selection")
    ws = [Fraction(w) for w in weights]
    if len(ws) != len(selections):
        raise PreconditionError("one weight per selection required")
    if any(w < 0 for w in ws) or sum(ws) != 1:
        raise PreconditionError("weights must be non-negative and sum to 1")
    corr = selections[0].corr
    space = corr.space
    if any(s.corr is not corr for s in selections[1:]):
        raise PreconditionError("selections must share one correspondence")
    for s in selections:
        if not s.is_measurable_against(f_alg):
            raise PreconditionError("selections must be f_alg-measurable")
    if not is_refinement(t_alg, f_alg):
        raise PreconditionError("t_alg must refine f_alg")

    # degenerate mixture: a unit weight returns that selection itself
    for w, s in zip(ws, selections):
        if w == 1:
            return s

    choice_map: dict[int, np.ndarray] = {}
    for fb in f_alg.blocks:
        inner = [tb for tb in t_alg.blocks if tb <= fb]
        inner.sort(key=min)
        fmass = space.mass(fb)
        sub_masses = [space.mass(tb) for tb in inner]
        uniform = len(set(sub_masses)) == 1
        rep = min(fb)
        if uniform and len(set(ws)) == 1:
            n = len(ws)
            if len(inner) % n:
                raise DivisibilityError(
                    f"block {sorted(fb)}: {len(inner)} sub-blocks not divisible by {n}"
                )
            for pos, tb in enumerate(inner):
                v = selections[pos % n].at(rep)
                for a in tb:
                    choice_map[a] = v
        else:
            quotas = [w * fmass for w in ws]
            gi = 0
            acc = Fraction(0)
            for tb, tm in zip(inner, sub_masses):
                while gi < len(ws) and quotas[gi] == 0:
                    gi += 1
                if gi >= len(ws):
                    raise DivisibilityError(
                        f"block {sorted(fb)} cannot realize weights "
                        f"{[str(w) for w in ws]} with its sub-block masses"
                    )
                v = selections[gi].at(rep)
                for a in tb:
                    choice_map[a] = v
                acc += tm
                if acc == quotas[gi]:
                    acc = Fraction(0)
                    gi += 1
                elif acc > quotas[gi]:
                    raise DivisibilityError(
                        f"block {sorted(fb)} cannot realize weights "
                        f"{[str(w) for w in ws]} with its sub-block masses"
                    )
            while gi < len(ws) and quotas[gi] == 0:
                gi += 1
            if gi != len(ws):
                raise DivisibilityError(
                    f"block {sorted(fb)} cannot realize weights "
                    f"{[str(w) for w in ws]} with its sub-block masses"
                )
    return Selection(corr, t_alg, choice_map)


def _vdc(i: int, base: int) -> float:
    v, f = 0.0, 1.0 / base
    while i:
        v += (i % base) * f
        i //= base
        f /= base
    return v


_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53)


def _support_vertices(points: np.ndarray, seed: int, ndirs: int = 64) -> np.ndarray:
    """Deterministic extreme points: support maximizers over a fixed
    low-discrepancy direction family (plus the coordinate directions).

    Within a maximizing face the lexicographically largest point is kept,
    which is itself an extreme point of the cloud's hull.
    """
    n, d = points.shape
    dirs = []
    for m in range(d):
        e = np.zeros(d)
        e[m] = 1.0
        dirs.append(e)
        dirs.append(-e)
    for j in range(ndirs):
        u = np.array([
            _vdc(seed + j + 1, _PRIMES[m % len(_PRIMES)]) - 0.5 for m in range(d)
        ])
        nu = float(np.sqrt(np.sum(u * u)))
        if nu > 1e-9:
            dirs.append(u / nu)
    chosen: dict[bytes, np.ndarray] = {}
    for u in dirs:
        scores = points @ u
        top = scores.max()
        cand = points[scores >= top - 1e-12]
        order = np.lexsort(cand.T[::-1])
        v = cand[order[-1]]
        chosen.setdefault(v.tobytes(), v)
    vs = sorted(chosen.values(), key=lambda v: tuple(v.tolist()))
    return np.array(vs)


def convexity_gap(
    cloud: PointCloudSet,
    samples: int = 128,
    metric=None,
    seed: int = 0,
) -> float:
    """Distance from sampled convex combinations of cloud points back to the
    cloud: 0 for convex clouds, positive where midpoints are missing.

    Probes are all pairwise midpoints of the cloud's support vertices plus
    ``samples`` deterministic low-discrepancy convex combinations of them;
    the same seed reproduces the same probes bit for bit.
    """
    if len(cloud) == 0:
        raise PreconditionError("gap of an empty cloud is undefined")
    pts = cloud.points
    if len(cloud) == 1:
        return 0.0
    verts = _support_vertices(pts, seed)
    nv = verts.shape[0]
    targets = []
    for i in range(nv):
        for j in range(i + 1, nv):
            targets.append((verts[i] + verts[j]) / 2.0)
    for s in range(samples):
        raw = np.array([
            _vdc(seed + s + 1, _PRIMES[m % len(_PRIMES)]) for m in range(nv)
        ])
        w = -np.log(np.maximum(raw, 1e-12))
        w = w / w.sum()
        targets.append(w @ verts)
    mode, weights = _mode_for(metric, pts.shape[1])
    dists = _kernels.min_dists(np.array(targets), pts, mode, weights)
    return float(dists.max())


def hausdorff_semidistance(a: PointCloudSet, b: PointCloudSet, metric=None) -> float:
    """max over a of min over b of the pointwise distance (asymmetric)."""
    if len(a) == 0 or len(b) == 0:
        raise PreconditionError("semidistance needs non-empty clouds")
    mode, weights = _mode_for(metric, a.ambient_dim)
    return float(_kernels.min_dists(a.points, b.points, mode, weights).max())


def function_semidistance(
    fa: np.ndarray, fb: np.ndarray, masses, metric=None
) -> float:
    """Hausdorff semidistance between sets of block-indexed functions.

    The distance between two functions is the block-mass-weighted sum of
    per-block vector distances (the L1 reading; with one block of mass 1 it
    reduces to the plain vector metric).
    """
    if fa.shape[0] == 0 or fb.shape[0] == 0:
        raise PreconditionError("semidistance needs non-empty function sets")
    w = np.array([float(m) for m in masses])
    mode, weights = _mode_for(metric, fa.shape[2])
    worst = 0.0
    for f in fa:
        best = np.inf
        for g in fb:
            dist = 0.0
            for j in range(fa.shape[1]):
                dj = float(_kernels.min_dists(
                    f[j].reshape(1, -1), g[j].reshape(1, -1), mode, weights)[0])
                dist += w[j] * dj
            if dist < best:
                best = dist
        worst = max(worst, best)
    return worst


def uhc_diagnostic(
    family: list[Correspondence],
    limit: Correspondence,
    t_alg: SigmaPartition,
    g_alg: SigmaPartition | None,
    cap: int = 2_000_000,
    metric=None,
) -> list[float]:
    """Semidistance of each family member's set to the limit's set.

    Uses the conditional-expectation sets when a non-trivial conditioning
    algebra is given, the integral sets otherwise; the caller asserts the
    expected monotone decay.
    """
    trivial = g_alg is None or len(g_alg.blocks) == 1
    if trivial:
        limit_cloud = aumann_integral_set(limit, t_alg, cap)
        out = []
        for fy in family:
            cloud = aumann_integral_set(fy, t_alg, cap)
            out.append(hausdorff_semidistance(cloud, limit_cloud, metric))
        return out
    limit_set = conditional_set(limit, t_alg, g_alg, cap)
    masses = [limit.space.mass(b) for b in g_alg.blocks]
    out = []
    for fy in family:
        cs = conditional_set(fy, t_alg, g_alg, cap)
        out.append(
            function_semidistance(cs.functions, limit_set.functions, masses, metric)
        )
    return out
