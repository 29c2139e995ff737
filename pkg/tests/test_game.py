import cmath
import math
from fractions import Fraction

import numpy as np
import pytest

from corrint.correspondences import build_counterexample
from corrint.errors import CapacityError, PreconditionError
from corrint.game import (
    EXTERNALITY_CONDITIONAL,
    balanced_profile,
    GenericPayoff,
    LargeGame,
    StrategyProfile,
    aggregate_of,
    best_response,
    build_counterexample_game,
    case1_indicator_parts,
    find_equilibrium,
    lemma_bound_check,
    payoff_G,
    payoff_h,
    residual_of,
    root_of_unity_gap,
    verify_equilibrium_partition,
)
from corrint.spaces import DiscreteSpace, SigmaPartition
from corrint.vectors import basis_vector, norm, zero_vector


def _h_reference(l, a, xs, theta, gamma, k):
    """From-scratch scalar reimplementation using complex roots of unity."""
    if theta == 0 or l <= gamma:
        return 0.0
    alpha = cmath.exp(2j * cmath.pi / (k + 1))
    u = (l - gamma) / theta
    rho = math.floor(u)
    total = sum(xs)
    val = theta * abs(math.sin(u * math.pi))
    val *= np.linalg.norm(a) + abs(1 - alpha ** rho)
    for i in range(1, k + 1):
        mix = xs[i - 1] / (k + 1) + total / (k + 1)
        val *= np.linalg.norm(a - mix) + abs(alpha ** i - alpha ** rho)
    return val


def test_root_of_unity_gap_matches_complex():
    for k in (1, 2, 3, 5):
        alpha = cmath.exp(2j * cmath.pi / (k + 1))
        for i in range(k + 1):
            for j in range(-3, 8):
                assert abs(
                    root_of_unity_gap(i, j, k) - abs(alpha ** i - alpha ** j)
                ) <= 1e-12


def test_payoff_h_branches():
    xs = [basis_vector(0, 6), basis_vector(1, 6)]
    assert payoff_h(0.3, np.ones(6), xs, 0.0) == 0.0
    assert payoff_h(Fraction(1, 8), np.ones(6), xs, 0.5, gamma=Fraction(1, 4)) == 0.0


def test_payoff_h_against_independent_reference():
    rng = np.random.default_rng(51)
    k = 2
    xs = [basis_vector(0, 6), basis_vector(1, 6)]
    got = payoff_h(0.3, zero_vector(6), xs, 0.25, gamma=0, k=k)
    want = _h_reference(0.3, zero_vector(6), xs, 0.25, 0.0, k)
    assert abs(got - want) <= 1e-12
    for _ in range(200):
        l = float(rng.uniform(0, 1))
        theta = float(rng.uniform(0.01, 0.6))
        a = rng.normal(size=6)
        xs = [rng.normal(size=6) for _ in range(k)]
        got = payoff_h(l, a, xs, theta, gamma=0, k=k)
        want = _h_reference(l, a, xs, theta, 0.0, k)
        assert abs(got - want) <= 1e-12 * max(1.0, abs(want))


@pytest.fixture(scope="module")
def small_game():
    return build_counterexample_game(2, 0, 2, 2, refinement=3)


def test_payoff_G_zero_cases(small_game):
    g = small_game
    b = g.payoff.bundle
    e_mean = b.e_mean()
    t = g.space.ids[0]
    cell = b.model.cell_of(t)
    # theta = 0: zero action and the mixed points all give exactly 0
    assert payoff_G(g, t, zero_vector(b.d), e_mean) == 0.0
    mix = g.payoff.mixed_points(cell)
    for i in range(b.k):
        assert payoff_G(g, t, mix[i], e_mean) == 0.0
    # any other action is strictly negative at theta = 0
    other = 0.5 * mix[0]
    assert payoff_G(g, t, other, e_mean) < 0.0
    # every payoff value is non-positive
    rng = np.random.default_rng(52)
    for _ in range(50):
        a = rng.normal(size=b.d)
        bb = rng.normal(size=b.d)
        assert payoff_G(g, t, a, bb) <= 0.0


def test_best_response_atomic_part_plays_zero():
    g = build_counterexample_game(2, Fraction(1, 4), 2, 2, refinement=3)
    t2 = g.payoff.bundle.model.atomic_atom
    rng = np.random.default_rng(53)
    for _ in range(10):
        b = rng.normal(size=g.payoff.bundle.d)
        assert best_response(g, t2, b) == [0]


def test_best_response_case2_ties(small_game):
    g = small_game
    b = g.payoff.bundle
    t = g.space.ids[0]
    cell = b.model.cell_of(t)
    br = best_response(g, t, b.e_mean())
    mix = g.payoff.mixed_points(cell)
    expected = {0}
    for i in range(b.k):
        for ai in range(g.nact):
            if np.array_equal(g.actions[ai], mix[i]):
                expected.add(ai)
    assert set(br) == expected


def test_best_response_case1_residue_zero(small_game):
    g = small_game
    bnd = g.payoff.bundle
    e_mean = bnd.e_mean()
    # choose an off-mean aggregate with theta large enough that every
    # player's residue is 0: floor(phi/theta) = 0 for all phi < theta
    dist_needed = 1.01 / g.payoff.beta
    b = e_mean + dist_needed * basis_vector(0, bnd.d)
    for t in g.space.ids:
        assert best_response(g, t, b) == [0]


def test_single_player_game_exhaustive():
    space = DiscreteSpace.uniform(1)
    actions = np.array([[0.0], [1.0], [2.0]])
    pay = GenericPayoff(lambda t, a, agg: -abs(a[0] - 1.7))
    game = LargeGame(
        f_alg=SigmaPartition.trivial(space),
        t_alg=SigmaPartition.singletons(space),
        actions=actions,
        payoff=pay,
        player_space=space,
    )
    prof, rep = find_equilibrium(game, mode="exhaustive", cap=100)
    assert prof.play == (2,)
    assert rep.residual == 0.0


def test_br_iteration_reaches_balanced_equilibrium():
    g = build_counterexample_game(2, 0, 2, 3, refinement=3)
    prof, rep = find_equilibrium(g, max_iter=50, tol=1e-9)
    assert rep.residual < 1e-9
    assert rep.iterations <= 50
    e_mean = g.payoff.bundle.e_mean()
    assert norm(np.asarray(rep.aggregate) - e_mean, "euclid") < 1e-9
    assert rep.aggregate_case == "exact-mean"


def test_br_iteration_reports_progress_without_convergence():
    g = build_counterexample_game(2, 0, 2, 2, refinement=3)
    prof, rep = find_equilibrium(g, max_iter=0, tol=1e-15)
    assert rep.residual > 0  # no exception on non-convergence
    assert len(rep.trace) == 1


def test_exhaustive_certified_equilibrium_residual_exactly_zero():
    # dyadic masses and k = 1 make the balanced aggregate bit-equal to the
    # e-mean, so the certified equilibrium has residual exactly 0
    g = build_counterexample_game(1, 0, 1, 2, refinement=2)
    prof, rep = find_equilibrium(g, mode="exhaustive", cap=10 ** 6)
    assert rep.residual == 0.0
    assert rep.aggregate_case == "exact-mean"


def test_equilibrium_set_invariant_under_action_reorder():
    g = build_counterexample_game(1, 0, 1, 2, refinement=2)
    perm = list(range(g.nact))[::-1]
    actions2 = g.actions[perm]
    g2 = LargeGame(f_alg=g.f_alg, t_alg=g.t_alg, actions=actions2,
                   payoff=g.payoff, externality=g.externality)
    _, rep1 = find_equilibrium(g, mode="exhaustive", cap=10 ** 6)
    _, rep2 = find_equilibrium(g2, mode="exhaustive", cap=10 ** 6)
    assert rep1.residual == rep2.residual == 0.0


def test_exhaustive_capacity_error():
    g = build_counterexample_game(2, 0, 2, 3)
    with pytest.raises(CapacityError):
        find_equilibrium(g, mode="exhaustive", cap=1000)


def test_nonexistence_when_algebras_coincide():
    g = build_counterexample_game(2, 0, 2, 2, refinement=4)
    g = LargeGame(f_alg=g.f_alg, t_alg=g.f_alg, actions=g.actions,
                  payoff=g.payoff, externality=g.externality)
    prof, rep = find_equilibrium(g, mode="exhaustive", cap=10 ** 7)
    assert rep.residual > 1e-3  # bounded away from zero on this instance
    assert rep.min_aggregate_distance > 1e-3


def test_verify_partition_on_equilibrium():
    g = build_counterexample_game(2, 0, 3, 3, refinement=3)
    prof, rep = find_equilibrium(g, max_iter=50, tol=1e-9)
    v = verify_equilibrium_partition(g, prof)
    assert v.applicable
    assert v.partition_masses == ["1/3", "1/3", "1/3"]
    assert all(row[4] for row in v.independence_table)
    # rows cover every Walsh block of the level, for each part
    assert len(v.independence_table) == (2 ** 3 - 1) * 3


def test_verify_partition_gamma_quarter():
    # cold-start iteration can cycle at atom scale on coarse positive-gamma
    # instances; the balanced candidate is an equilibrium and certifies it
    g = build_counterexample_game(2, Fraction(1, 4), 2, 2, refinement=3)
    start = balanced_profile(g)
    prof, rep = find_equilibrium(g, max_iter=50, tol=1e-9, start=start)
    assert rep.residual < 1e-9
    assert rep.iterations == 0
    v = verify_equilibrium_partition(g, prof)
    assert v.applicable
    assert v.partition_masses == ["1/4", "1/4", "1/4"]
    assert all(row[4] for row in v.independence_table)


def test_verify_partition_flags_unbalanced_profile():
    g = build_counterexample_game(2, 0, 2, 2, refinement=3)
    bnd = g.payoff.bundle
    model = bnd.model
    # play the first mixed point exactly on the cells of one Walsh block and
    # the zero action elsewhere: the part coincides with that block, which
    # cannot be independent of it
    d1 = model.walsh_block(1)
    play = []
    for atom in g.space.ids:
        cell = model.cell_of(atom)
        if atom in d1:
            mix = g.payoff.mixed_points(cell)
            for ai in range(g.nact):
                if np.array_equal(g.actions[ai], mix[0]):
                    play.append(ai)
                    break
        else:
            play.append(0)
    v = verify_equilibrium_partition(g, StrategyProfile(tuple(play)))
    assert v.applicable
    assert v.partition_masses[1] == "1/2"
    assert not all(row[4] for row in v.independence_table)


def test_exhaustive_equilibrium_independent_up_to_truncation():
    # the aggregate equation forces independence only for Walsh indices up
    # to the truncation level; the first equilibrium in scan order meets
    # those rows while the round-robin profile meets every row
    g = build_counterexample_game(1, 0, 1, 2, refinement=2)
    prof, rep = find_equilibrium(g, mode="exhaustive", cap=10 ** 6)
    assert rep.residual == 0.0
    v_forced = verify_equilibrium_partition(g, prof, max_walsh_index=1)
    assert v_forced.applicable and all(r[4] for r in v_forced.independence_table)
    v_rr = verify_equilibrium_partition(g, balanced_profile(g))
    assert all(r[4] for r in v_rr.independence_table)


def test_verify_partition_not_applicable_outside_candidates():
    g = build_counterexample_game(2, 0, 2, 2, refinement=3,
                                  extra_actions=[np.full(6, 0.3)])
    play = tuple([g.nact - 1] * len(g.space.ids))
    v = verify_equilibrium_partition(g, StrategyProfile(play))
    assert not v.applicable


def test_case1_contraction_step():
    # one best-response update from a far aggregate contracts the distance
    # by the 4k/(k+1)*beta factor whenever the mesh stays above atom width
    g = build_counterexample_game(2, 0, 2, 3, refinement=3)
    bnd = g.payoff.bundle
    e_mean = bnd.e_mean()
    k = bnd.k
    rng = np.random.default_rng(54)
    natoms = len(g.space.ids)
    atom_width = 1.0 / natoms
    checked = 0
    profile = StrategyProfile(tuple([0] * natoms))
    for trial in range(40):
        play = tuple(int(x) for x in rng.integers(0, g.nact, natoms))
        profile = StrategyProfile(play)
        agg = aggregate_of(g, profile)
        dist = norm(agg - e_mean, "euclid")
        d0 = g.payoff.beta * dist
        if d0 < atom_width:
            continue
        checked += 1
        table_profile, _ = find_equilibrium(g, max_iter=1, tol=0.0,
                                            start=profile)
        new_agg = aggregate_of(g, table_profile)
        new_dist = norm(new_agg - e_mean, "euclid")
        assert new_dist <= (4 * k / (k + 1)) * d0 + 1e-12
    assert checked >= 10


def test_generic_game_damped_iteration():
    # mismatch responses flip between the extremes undamped; the damped
    # aggregate walks into the interior fixed point, which is a true
    # equilibrium of the game
    space = DiscreteSpace.uniform(1)
    actions = np.array([[0.0], [0.5], [1.0]])

    def pay(t, a, agg):
        return -abs(a[0] - (1.0 - agg[0]))

    game = LargeGame(
        f_alg=SigmaPartition.trivial(space),
        t_alg=SigmaPartition.singletons(space),
        actions=actions,
        payoff=GenericPayoff(pay),
        player_space=space,
    )
    _, undamped = find_equilibrium(game, max_iter=30, tol=1e-9)
    assert undamped.residual == 1.0  # two-cycle between the extremes
    _, damped = find_equilibrium(game, max_iter=30, tol=1e-9, damping=0.5)
    assert damped.residual == 0.0
    with pytest.raises(PreconditionError):
        find_equilibrium(game, damping=1.0)


def test_conditional_externality_aggregate_shape():
    g = build_counterexample_game(2, 0, 2, 2, refinement=3,
                                  externality=EXTERNALITY_CONDITIONAL)
    prof = StrategyProfile(tuple([0] * len(g.space.ids)))
    agg = aggregate_of(g, prof)
    assert len(agg) == len(g.f_alg.blocks)
    res, _ = residual_of(g, prof)
    assert res >= 0.0


def test_lemma_bound_canonical_case():
    parts = case1_indicator_parts(2, 3)
    total, bound, ok = lemma_bound_check(parts, Fraction(1, 8))
    assert ok and bound == 0.5
    assert total < bound


def test_lemma_bound_shifted_and_relabelled():
    rng = np.random.default_rng(55)
    for s in (3, 5):
        d0 = Fraction(1, 1 << s)
        for _ in range(50):
            k = int(rng.integers(1, 5))
            parts = case1_indicator_parts(
                k, s,
                shift=int(rng.integers(0, k + 1)),
                roles=[int(x) for x in rng.permutation(k + 1)],
            )
            total, bound, ok = lemma_bound_check(parts, d0)
            assert ok, (k, s, total, bound)


def test_lemma_bound_degenerate_all_zero_flagged():
    # all-zero indicators: integrand is the constant -1; the weighted sum is
    # exactly 1, so the bound can only hold in the d0 > 1/4 regime
    parts = [np.zeros(8, dtype=np.int64)]
    total, bound, ok = lemma_bound_check(parts, Fraction(1, 8))
    assert abs(total - 1.0) <= 1e-15
    assert not ok
    total2, bound2, ok2 = lemma_bound_check(
        [np.zeros(2, dtype=np.int64)], Fraction(1, 2)
    )
    assert ok2  # 4*d0 = 2 > 1


def test_lemma_bound_overlap_rejected():
    q = np.ones(8, dtype=np.int64)
    with pytest.raises(PreconditionError):
        lemma_bound_check([q, q], Fraction(1, 8))


def test_lemma_bound_truncation_argument():
    parts = case1_indicator_parts(2, 4)
    full = lemma_bound_check(parts, Fraction(1, 16))
    truncated = lemma_bound_check(parts, Fraction(1, 16), L=4)
    assert full[0] == truncated[0]  # terms past the mesh vanish identically


def test_game_requires_refining_algebras():
    g = build_counterexample_game(2, 0, 2, 2, refinement=2)
    crossed = SigmaPartition(
        [{a, b} for a, b in zip(g.space.ids[0::2], g.space.ids[1::2])]
    )
    # t_alg must refine f_alg; a crossing partition is rejected
    with pytest.raises(PreconditionError):
        LargeGame(f_alg=g.f_alg, t_alg=SigmaPartition.trivial(g.space),
                  actions=g.actions, payoff=g.payoff)
