"""Large games with an aggregate externality at desk scale.

The headline construction pairs the truncated series maps psi_i with the
payoff

    G(t)(a, b) = -h(phi(t), a, psi_1(phi(t)), ..., psi_k(phi(t)), theta)
                 - ||a|| * prod_i ||a - m_i(t)||,

where m_i(t) = psi_i(phi(t))/(k+1) + sum_j psi_j(phi(t))/(k+1) are the
mixed points, theta = beta * d(b, mean of the e_i) with beta = (1-gamma)/(4M),
and h carries the oscillating factor theta * |sin((l-gamma)/theta * pi)|
together with planar root-of-unity gaps (|alpha^i - alpha^j| =
2|sin(pi (i-j)/(k+1))|, used directly).  Off the mean aggregate, a player's
unique zero-payoff action is dictated by the residue of
floor((l-gamma)/theta) mod (k+1): the zero action on residue 0, the
residue's mixed point otherwise.  At the mean aggregate every one of the
k+1 candidate actions is optimal, and the canonical tie-break (round-robin
across each block's atoms) realizes the balanced partition whose parts are
independent of the characteristic algebra.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import _kernels
from .correspondences import CounterexampleBundle, build_counterexample
from .errors import CapacityError, PreconditionError, StructureError
from .spaces import (
    SigmaPartition,
    independence_product_check,
    is_refinement,
)
from .vectors import NORM_EUCLID, norm, zero_vector
from .walsh import walsh_integer_spectrum

EXTERNALITY_INTEGRAL = "integral"
EXTERNALITY_CONDITIONAL = "conditional"

MODE_BR_ITERATE = "br_iterate"
MODE_EXHAUSTIVE = "exhaustive"

TIE_TOL = 1e-10


def root_of_unity_gap(i: int, j: int, k: int) -> float:
    """|alpha^i - alpha^j| for the primitive (k+1)-th root of unity."""
    return 2.0 * abs(math.sin(math.pi * (i - j) / (k + 1)))


@dataclass(frozen=True)
class CounterexamplePayoff:
    """Parameters of the explicit payoff; actions live in the bundle's space."""

    bundle: CounterexampleBundle
    M: float
    beta: float
    flavor: str = NORM_EUCLID

    @property
    def k(self) -> int:
        return self.bundle.k

    def mixed_points(self, cell: int) -> np.ndarray:
        """The k mixed points of a cell, rows i = 1..k."""
        b = self.bundle
        psi = np.array([f.values[cell] for f in b.f_list])
        total = psi.sum(axis=0)
        return (psi + total) / (b.k + 1)


@dataclass(frozen=True)
class GenericPayoff:
    """Caller-supplied evaluation contract payoff(t, action, aggregate)."""

    fn: Callable[[int, np.ndarray, object], float]


@dataclass(frozen=True)
class LargeGame:
    """Finite player space, characteristic algebra, actions, payoff.

    Explicit-payoff games take their player space from the bundle's model;
    generic games must supply ``player_space``.
    """

    f_alg: SigmaPartition
    t_alg: SigmaPartition
    actions: np.ndarray          # (nact, d)
    payoff: CounterexamplePayoff | GenericPayoff
    externality: str = EXTERNALITY_INTEGRAL
    player_space: object = None

    def __post_init__(self):
        if self.externality not in (EXTERNALITY_INTEGRAL, EXTERNALITY_CONDITIONAL):
            raise PreconditionError(f"unknown externality {self.externality!r}")
        acts = np.ascontiguousarray(self.actions, dtype=float)
        if acts.ndim != 2 or acts.shape[0] == 0:
            raise StructureError("need a non-empty (nact, d) action array")
        acts.setflags(write=False)
        object.__setattr__(self, "actions", acts)
        if isinstance(self.payoff, CounterexamplePayoff):
            maxn = max(norm(a, self.payoff.flavor) for a in acts)
            if self.payoff.M < maxn - 1e-12:
                raise StructureError(
                    f"M = {self.payoff.M} below the action norm bound {maxn}"
                )
        elif self.player_space is None:
            raise StructureError("generic games need an explicit player_space")
        if not is_refinement(self.t_alg, self.f_alg):
            raise PreconditionError("t_alg must refine f_alg")

    @property
    def space(self):
        if isinstance(self.payoff, CounterexamplePayoff):
            return self.payoff.bundle.model.space
        return self.player_space

    @property
    def nact(self) -> int:
        return self.actions.shape[0]


@dataclass(frozen=True)
class StrategyProfile:
    """One action index per atom, aligned with the space's id order."""

    play: tuple[int, ...]

    def to_json(self) -> list[int]:
        return list(self.play)


@dataclass
class EquilibriumReport:
    residual: float
    aggregate: list
    aggregate_case: str                 # exact-mean | tol-approximate | off-mean
    iterations: int = 0
    trace: list = field(default_factory=list)
    min_aggregate_distance: float | None = None
    partition_masses: list | None = None
    independence_table: list | None = None
    lemma_bound: tuple | None = None
    applicable: bool = True
    note: str = ""

    def all_pass(self) -> bool:
        ok = self.applicable
        if self.independence_table is not None:
            ok = ok and all(row[4] for row in self.independence_table)
        if self.lemma_bound is not None:
            ok = ok and self.lemma_bound[2]
        return ok

    def to_json(self) -> dict:
        doc = {
            "residual": self.residual,
            "aggregate": self.aggregate,
            "aggregate_case": self.aggregate_case,
            "iterations": self.iterations,
            "trace": self.trace,
            "applicable": self.applicable,
        }
        if self.min_aggregate_distance is not None:
            doc["min_aggregate_distance"] = self.min_aggregate_distance
        if self.partition_masses is not None:
            doc["partition_masses"] = self.partition_masses
        if self.independence_table is not None:
            doc["independence_table"] = [
                {"part": i, "walsh_index": n, "lhs": lhs, "rhs": rhs, "pass": ok}
                for (i, n, lhs, rhs, ok) in self.independence_table
            ]
        if self.lemma_bound is not None:
            doc["lemma_bound"] = {
                "sum": self.lemma_bound[0],
                "bound": self.lemma_bound[1],
                "pass": self.lemma_bound[2],
            }
        if self.note:
            doc["note"] = self.note
        return doc


def build_counterexample_game(
    k: int,
    gamma,
    N: int,
    L: int,
    refinement: int = 1,
    extra_actions=(),
    externality: str = EXTERNALITY_INTEGRAL,
    flavor: str = NORM_EUCLID,
    M: float | None = None,
    t_alg: SigmaPartition | None = None,
) -> LargeGame:
    """The explicit game over a dyadic model.

    Actions: the zero vector first, then the mixed points of every cell in
    (cell, i) order, then any extra probe points.  M defaults to the larger
    of 1-gamma and the action norm bound, which keeps beta <= 1/4.
    """
    bundle = build_counterexample(k, gamma, N, L, refinement)
    model = bundle.model
    acts = [zero_vector(bundle.d)]
    for c in range(model.ncells):
        psi = np.array([f.values[c] for f in bundle.f_list])
        total = psi.sum(axis=0)
        for i in range(k):
            acts.append((psi[i] + total) / (k + 1))
    for extra in extra_actions:
        acts.append(np.asarray(extra, dtype=float))
    actions = np.array(acts)
    maxn = max(norm(a, flavor) for a in actions)
    if M is None:
        M = max(float(1 - Fraction(gamma)), maxn)
    beta = float(1 - Fraction(gamma)) / (4.0 * M)
    payoff = CounterexamplePayoff(bundle=bundle, M=M, beta=beta, flavor=flavor)
    return LargeGame(
        f_alg=bundle.f_alg,
        t_alg=t_alg if t_alg is not None else SigmaPartition.singletons(model.space),
        actions=actions,
        payoff=payoff,
        externality=externality,
    )


def payoff_h(l, a, xs, theta: float, gamma=0, k: int | None = None,
             flavor: str = NORM_EUCLID) -> float:
    """The oscillating penalty h(l, a, x_1..x_k, theta); zero when theta = 0
    or l lies in the atomic part [0, gamma]."""
    gamma_f = float(Fraction(gamma))
    lf = float(Fraction(l))
    if k is None:
        k = len(xs)
    if len(xs) != k:
        raise PreconditionError(f"need k = {k} profile points, got {len(xs)}")
    if theta < 0:
        raise PreconditionError(f"theta must be >= 0, got {theta}")
    if theta == 0.0 or lf <= gamma_f:
        return 0.0
    a = np.asarray(a, dtype=float)
    xs = [np.asarray(x, dtype=float) for x in xs]
    total = np.zeros_like(a)
    for x in xs:
        total = total + x
    u = (lf - gamma_f) / theta
    rho = int(math.floor(u))
    val = theta * abs(math.sin(u * math.pi)) * (norm(a, flavor) + root_of_unity_gap(0, rho, k))
    for i in range(1, k + 1):
        mix_i = (xs[i - 1] + total) / (k + 1)
        val *= norm(a - mix_i, flavor) + root_of_unity_gap(i, rho, k)
    return val


def _ctables(game: LargeGame):
    """Precomputed arrays for the explicit payoff over all (atom, action)."""
    pay = game.payoff
    if not isinstance(pay, CounterexamplePayoff):
        raise PreconditionError("tables exist only for the explicit payoff")
    b = pay.bundle
    model = b.model
    space = model.space
    natoms = len(space.ids)
    nact = game.nact
    k = b.k
    gamma_f = float(b.gamma)
    phi = np.array([float(model.phi(a)) for a in space.ids])
    na = np.array([norm(a, pay.flavor) for a in game.actions])
    dn = np.zeros((natoms, nact, k))
    p2 = np.zeros((natoms, nact))
    zero_mix = np.zeros((k, b.d))
    for ti, atom in enumerate(space.ids):
        cell = model.cell_of(atom)
        mixes = zero_mix if cell is None else pay.mixed_points(cell)
        for ai in range(nact):
            a = game.actions[ai]
            prod = na[ai]
            for i in range(k):
                gap = norm(a - mixes[i], pay.flavor)
                dn[ti, ai, i] = gap
                prod *= gap
            p2[ti, ai] = prod
    am = np.zeros((k + 1, k + 1))
    for i in range(k + 1):
        for r in range(k + 1):
            am[i, r] = root_of_unity_gap(i, r, k)
    masses = np.array([float(m) for m in space.masses])
    return phi, gamma_f, na, p2, dn, am, masses


def payoff_G(game: LargeGame, t: int, a, b) -> float:
    """Payoff of player t taking action a against societal aggregate b."""
    pay = game.payoff
    if isinstance(pay, GenericPayoff):
        return float(pay.fn(t, np.asarray(a, dtype=float), b))
    bnd = pay.bundle
    model = bnd.model
    a = np.asarray(a, dtype=float)
    bv = np.asarray(b, dtype=float)
    theta = pay.beta * norm(bv - bnd.e_mean(), pay.flavor)
    cell = model.cell_of(t)
    if cell is None:
        xs = [zero_vector(bnd.d) for _ in range(bnd.k)]
    else:
        xs = [f.values[cell] for f in bnd.f_list]
    h = payoff_h(model.phi(t), a, xs, theta, bnd.gamma, bnd.k, pay.flavor)
    total = np.zeros(bnd.d)
    for x in xs:
        total = total + x
    prod = norm(a, pay.flavor)
    for i in range(bnd.k):
        prod *= norm(a - (xs[i] + total) / (bnd.k + 1), pay.flavor)
    return -h - prod


def aggregate_of(game: LargeGame, profile: StrategyProfile):
    """Integral aggregate (one vector) or conditional aggregate (per block)."""
    space = game.space
    acts = game.actions
    if game.externality == EXTERNALITY_INTEGRAL:
        total = np.zeros(acts.shape[1])
        for m, p in zip(space.masses, profile.play):
            total += float(m) * acts[p]
        return total
    out = []
    lookup = dict(zip(space.ids, profile.play))
    for blk in game.f_alg.blocks:
        bmass = space.mass(blk)
        acc = np.zeros(acts.shape[1])
        for a in sorted(blk):
            acc += float(space.mass_of(a) / bmass) * acts[lookup[a]]
        out.append(acc)
    return out


def _payoffs_at_aggregate(game: LargeGame, aggregate) -> np.ndarray:
    """(natoms, nact) payoff table at a fixed aggregate."""
    pay = game.payoff
    space = game.space
    if isinstance(pay, GenericPayoff):
        table = np.empty((len(space.ids), game.nact))
        for ti, atom in enumerate(space.ids):
            b = aggregate if game.externality == EXTERNALITY_INTEGRAL \
                else aggregate[game.f_alg.block_index_of(atom)]
            for ai in range(game.nact):
                table[ti, ai] = payoff_G(game, atom, game.actions[ai], b)
        return table
    phi, gamma_f, na, p2, dn, am, _ = _ctables(game)
    e_mean = pay.bundle.e_mean()
    k = pay.k
    if game.externality == EXTERNALITY_INTEGRAL:
        theta = pay.beta * norm(np.asarray(aggregate) - e_mean, pay.flavor)
        return _kernels.payoff_table(theta, phi, gamma_f, na, p2, dn, am, k)
    table = np.empty((len(space.ids), game.nact))
    for bi, blk in enumerate(game.f_alg.blocks):
        theta = pay.beta * norm(np.asarray(aggregate[bi]) - e_mean, pay.flavor)
        sub = _kernels.payoff_table(theta, phi, gamma_f, na, p2, dn, am, k)
        for atom in blk:
            ti = space.ids.index(atom)
            table[ti] = sub[ti]
    return table


def best_response(game: LargeGame, t: int, b, tie_tol: float = TIE_TOL) -> list[int]:
    """All argmax action indices at the tie tolerance, ascending."""
    vals = np.array([payoff_G(game, t, game.actions[ai], b) for ai in range(game.nact)])
    top = vals.max()
    return [int(i) for i in np.flatnonzero(vals >= top - tie_tol)]


def residual_of(game: LargeGame, profile: StrategyProfile) -> tuple[float, object]:
    """Max regret over players at the profile's own aggregate."""
    agg = aggregate_of(game, profile)
    table = _payoffs_at_aggregate(game, agg)
    tops = table.max(axis=1)
    chosen = table[np.arange(table.shape[0]), list(profile.play)]
    return float((tops - chosen).max()), agg


def _zero_action_index(game: LargeGame) -> int:
    for i, a in enumerate(game.actions):
        if not np.any(a):
            return i
    return 0


def _canonical_tie_sets(game: LargeGame) -> list[list[int]] | None:
    """Per atom, the zero action plus its own cell's mixed points (ascending).

    These are exactly the candidate optimal actions of the explicit payoff;
    None for generic payoffs.
    """
    pay = game.payoff
    if not isinstance(pay, CounterexamplePayoff):
        return None
    b = pay.bundle
    model = b.model
    zero_idx = _zero_action_index(game)
    out = []
    for atom in model.space.ids:
        cell = model.cell_of(atom)
        if cell is None:
            out.append([zero_idx])
            continue
        mix = pay.mixed_points(cell)
        ids = [zero_idx]
        for i in range(b.k):
            target = mix[i]
            for ai in range(game.nact):
                if np.array_equal(game.actions[ai], target):
                    ids.append(ai)
                    break
        out.append(sorted(set(ids)))
    return out


def _block_positions(game: LargeGame) -> dict[int, int]:
    """Atom -> position within its characteristic block (canonical order)."""
    pos = {}
    for blk in game.f_alg.blocks:
        for p, a in enumerate(sorted(blk)):
            pos[a] = p
    return pos


def balanced_profile(game: LargeGame) -> StrategyProfile:
    """The constructive candidate equilibrium: round-robin over each block.

    Atom at position p of its characteristic block plays the p-th canonical
    candidate (zero action, then the cell's mixed points).  When k+1 divides
    every block's atom count its aggregate is the mean of the e_i and the
    induced parts form the balanced independent partition.
    """
    tie_sets = _canonical_tie_sets(game)
    if tie_sets is None:
        raise PreconditionError("balanced profile needs the explicit payoff")
    positions = _block_positions(game)
    play = []
    for ti, atom in enumerate(game.space.ids):
        cands = tie_sets[ti]
        play.append(cands[positions[atom] % len(cands)])
    return StrategyProfile(tuple(play))


def find_equilibrium(
    game: LargeGame,
    mode: str = MODE_BR_ITERATE,
    max_iter: int = 50,
    tol: float = 1e-9,
    cap: int = 20_000_000,
    start: StrategyProfile | None = None,
    tie_tol: float = TIE_TOL,
    damping: float = 0.0,
) -> tuple[StrategyProfile, EquilibriumReport]:
    """Search for a pure equilibrium.

    br_iterate: undamped best-response iteration from the all-zero-action
    profile (or ``start``), per-player argmax with deterministic
    tie-breaking: lowest index, except that a full tie across a player's
    canonical candidate set resolves round-robin by the player's position
    inside its characteristic block, which realizes the balanced partition.
    ``damping`` in [0, 1) smooths the aggregate the responses are computed
    against (generic games may need it; the explicit game's contraction
    makes 0 the right default).  Non-convergence returns the best profile
    seen with its residual rather than raising.

    exhaustive: scans every t_alg-measurable profile (capacity-checked) and
    returns the minimum-residual one, plus the minimum aggregate distance
    to the mean of the e_i encountered anywhere in the scan.
    """
    space = game.space
    natoms = len(space.ids)
    if mode == MODE_EXHAUSTIVE:
        return _find_exhaustive(game, cap, tol)
    if mode != MODE_BR_ITERATE:
        raise PreconditionError(f"unknown mode {mode!r}")
    if not 0.0 <= damping < 1.0:
        raise PreconditionError(f"damping must lie in [0, 1), got {damping}")

    tie_sets = _canonical_tie_sets(game)
    positions = _block_positions(game)
    profile = start if start is not None else \
        StrategyProfile(tuple([_zero_action_index(game)] * natoms))
    trace = []
    best = None
    smoothed = None
    it = 0
    for it in range(max_iter + 1):
        res, agg = residual_of(game, profile)
        trace.append(res)
        if best is None or res < best[0]:
            best = (res, profile, agg)
        if res <= tol or it == max_iter:
            break
        if damping == 0.0 or smoothed is None:
            smoothed = agg
        elif game.externality == EXTERNALITY_INTEGRAL:
            smoothed = damping * np.asarray(smoothed) + (1 - damping) * np.asarray(agg)
        else:
            smoothed = [
                damping * np.asarray(s) + (1 - damping) * np.asarray(a)
                for s, a in zip(smoothed, agg)
            ]
        table = _payoffs_at_aggregate(game, smoothed)
        new_play = []
        for ti, atom in enumerate(space.ids):
            vals = table[ti]
            top = vals.max()
            ties = [int(i) for i in np.flatnonzero(vals >= top - tie_tol)]
            if len(ties) > 1 and tie_sets is not None \
                    and set(tie_sets[ti]) <= set(ties):
                cands = tie_sets[ti]
                new_play.append(cands[positions[atom] % len(cands)])
            else:
                new_play.append(ties[0])
        profile = StrategyProfile(tuple(new_play))
    res, profile, agg = best
    report = _report_for(game, res, agg, iterations=it, trace=trace, tol=tol)
    return profile, report


def _report_for(game, res, agg, iterations, trace, tol,
                min_aggdist=None) -> EquilibriumReport:
    pay = game.payoff
    case = "off-mean"
    agg_json = None
    if game.externality == EXTERNALITY_INTEGRAL:
        agg_json = [float(x) for x in np.asarray(agg)]
    else:
        agg_json = [[float(x) for x in v] for v in agg]
    if isinstance(pay, CounterexamplePayoff) and game.externality == EXTERNALITY_INTEGRAL:
        dist = norm(np.asarray(agg) - pay.bundle.e_mean(), pay.flavor)
        if dist <= 1e-12:
            case = "exact-mean"
        elif dist <= tol:
            case = "tol-approximate"
    return EquilibriumReport(
        residual=res,
        aggregate=agg_json,
        aggregate_case=case,
        iterations=iterations,
        trace=trace,
        min_aggregate_distance=min_aggdist,
    )


def _find_exhaustive(game: LargeGame, cap: int, tol: float):
    space = game.space
    nblocks = len(game.t_alg.blocks)
    if game.nact ** nblocks > cap:
        raise CapacityError(game.nact ** nblocks, cap)
    pay = game.payoff
    if isinstance(pay, CounterexamplePayoff) \
            and game.externality == EXTERNALITY_INTEGRAL:
        phi, gamma_f, na, p2, dn, am, masses = _ctables(game)
        # atoms of each t-block must be contiguous in id order for the kernel
        starts, lens, bmass = [], [], []
        order = []
        for blk in game.t_alg.blocks:
            atoms = sorted(blk)
            idxs = [space.ids.index(a) for a in atoms]
            starts.append(len(order))
            lens.append(len(idxs))
            order.extend(idxs)
            bmass.append(float(space.mass(blk)))
        perm = np.array(order)
        res, prof_digits, min_aggdist = _kernels.exhaustive_scan(
            game.nact,
            np.array(bmass),
            np.array(starts, dtype=np.int64),
            np.array(lens, dtype=np.int64),
            game.actions,
            pay.bundle.e_mean(),
            pay.beta,
            phi[perm],
            gamma_f,
            na,
            np.ascontiguousarray(p2[perm]),
            np.ascontiguousarray(dn[perm]),
            am,
            pay.k,
        )
        play = [0] * len(space.ids)
        for bi, blk in enumerate(game.t_alg.blocks):
            for a in blk:
                play[space.ids.index(a)] = int(prof_digits[bi])
        profile = StrategyProfile(tuple(play))
        res2, agg = residual_of(game, profile)
        report = _report_for(game, res2, agg, iterations=0, trace=[res2],
                             tol=tol, min_aggdist=float(min_aggdist))
        return profile, report
    # generic fallback: direct scan
    best = None
    min_aggdist = None
    digits = [0] * nblocks
    total = game.nact ** nblocks
    lookup = {a: bi for bi, blk in enumerate(game.t_alg.blocks) for a in blk}
    for _ in range(total):
        play = tuple(digits[lookup[a]] for a in space.ids)
        profile = StrategyProfile(play)
        res, agg = residual_of(game, profile)
        if isinstance(pay, CounterexamplePayoff) \
                and game.externality == EXTERNALITY_INTEGRAL:
            dist = norm(np.asarray(agg) - pay.bundle.e_mean(), pay.flavor)
            min_aggdist = dist if min_aggdist is None else min(min_aggdist, dist)
        if best is None or res < best[0]:
            best = (res, profile, agg)
        pos = nblocks - 1
        while pos >= 0:
            digits[pos] += 1
            if digits[pos] < game.nact:
                break
            digits[pos] = 0
            pos -= 1
    res, profile, agg = best
    report = _report_for(game, res, agg, iterations=0, trace=[res],
                         tol=tol, min_aggdist=min_aggdist)
    return profile, report


def verify_equilibrium_partition(
    game: LargeGame, profile: StrategyProfile, max_walsh_index: int | None = None
) -> EquilibriumReport:
    """Check the balanced-partition claim on a profile playing only the
    canonical candidate actions.

    Reports each part's exact mass and, for every Walsh block of the
    model's level (up to ``max_walsh_index`` when given), the exact
    independence identity within the interval part.  At truncation level N
    only the identities for indices <= N are forced by the aggregate
    equation, so exhaustively found equilibria should be checked with that
    cutoff; the round-robin construction satisfies every index.  A profile
    playing any other action (or not zero on the atomic part) is flagged
    not applicable instead of checked.
    """
    pay = game.payoff
    if not isinstance(pay, CounterexamplePayoff):
        raise PreconditionError("partition verification needs the explicit game")
    b = pay.bundle
    model = b.model
    space = model.space
    k = b.k
    res, agg = residual_of(game, profile)
    report = _report_for(game, res, agg, iterations=0, trace=[res], tol=1e-9)

    parts: list[set[int]] = [set() for _ in range(k + 1)]
    zero_idx = _zero_action_index(game)
    for atom, p in zip(space.ids, profile.play):
        cell = model.cell_of(atom)
        if cell is None:
            if p != zero_idx:
                report.applicable = False
                report.note = "atomic-part player does not play the zero action"
                return report
            continue
        action = game.actions[p]
        if p == zero_idx:
            parts[0].add(atom)
            continue
        mix = pay.mixed_points(cell)
        hit = None
        for i in range(k):
            if np.array_equal(action, mix[i]):
                hit = i + 1
                break
        if hit is None:
            report.applicable = False
            report.note = f"player {atom} plays outside the candidate set"
            return report
        parts[hit].add(atom)

    interval_mass = 1 - b.gamma
    masses = [space.mass(p) if p else Fraction(0) for p in parts]
    report.partition_masses = [f"{m.numerator}/{m.denominator}" for m in masses]
    table = []
    top = model.ncells if max_walsh_index is None \
        else min(model.ncells, max_walsh_index + 1)
    for n in range(1, top):
        dn_set = model.walsh_block(n)
        dn_mass = space.mass(dn_set)
        for i, part in enumerate(parts):
            lhs = space.mass(part & dn_set) * interval_mass
            rhs = masses[i] * dn_mass
            table.append((
                i, n,
                f"{lhs.numerator}/{lhs.denominator}",
                f"{rhs.numerator}/{rhs.denominator}",
                lhs == rhs,
            ))
    report.independence_table = table
    return report


def case1_indicator_parts(
    k: int, mesh_exp: int, shift: int = 0, roles=None
) -> list[np.ndarray]:
    """Case-1 style disjoint indicators on the 2**mesh_exp mesh of (gamma, 1].

    Cell c takes the role roles[(c + shift) mod (k+1)]; role 0 marks the
    uncovered cells and role i the support of the i-th indicator.  Defaults
    reproduce the canonical residue pattern.
    """
    if roles is None:
        roles = list(range(k + 1))
    if sorted(roles) != list(range(k + 1)):
        raise PreconditionError("roles must permute 0..k")
    ncell = 1 << mesh_exp
    parts = [np.zeros(ncell, dtype=np.int64) for _ in range(k)]
    for c in range(ncell):
        r = roles[(c + shift) % (k + 1)]
        if r >= 1:
            parts[r - 1][c] = 1
    return parts


def lemma_bound_check(parts, d0, gamma=0, L: int | None = None):
    """The weighted Walsh-coefficient sum of q_i + sum_j q_j - 1 against 4*d0.

    ``parts`` are {0,1} cell indicators on the uniform mesh of (gamma, 1]
    whose cell width is d0 (the mesh must be dyadic after rescaling to
    [0,1]).  Integrals are exact dyadic cell sums; the weighted sum is
    truncated at index 2**L - 1 when L is given (terms beyond the mesh
    resolution vanish identically).  Returns (worst sum over i, 4*d0,
    verdict).
    """
    gamma = Fraction(gamma)
    d0 = Fraction(d0)
    qs = [np.asarray(q, dtype=np.int64) for q in parts]
    if not qs:
        raise PreconditionError("need at least one indicator part")
    ncell = qs[0].shape[0]
    if any(q.shape != (ncell,) for q in qs):
        raise StructureError("indicator parts live on different meshes")
    if any(np.any((q != 0) & (q != 1)) for q in qs):
        raise PreconditionError("parts must be {0,1} indicators")
    if np.any(sum(qs) > 1):
        raise PreconditionError("indicator supports overlap")
    if ncell & (ncell - 1):
        raise PreconditionError(f"mesh size {ncell} is not a power of two")
    if d0 * ncell != 1 - gamma:
        raise PreconditionError(
            f"cell width {d0} times {ncell} cells does not tile (gamma, 1]"
        )
    mesh_exp = ncell.bit_length() - 1
    n_top = ncell if L is None else min(ncell, 1 << L)
    qsum = sum(qs)
    worst = 0.0
    for qi in qs:
        g = qi + qsum - 1
        spectrum = walsh_integer_spectrum(g)
        total = 0.0
        for n in range(n_top):
            integral = float(1 - gamma) * int(spectrum[n]) / ncell
            total += (0.5 ** n) * abs(integral)
        worst = max(worst, total)
    bound = 4.0 * float(d0)
    return worst, bound, bool(worst < bound)
