import numpy as np
import pytest
import scipy.sparse as sp

from coherentsets import (BoxSet, Grid, TransferMatrix, connectify, eta_match,
                          map_family, normalize_l1, optimal_pair, optimal_sequence,
                          rho_profile, sign_convention, threshold_set, ulam_map)


def identity_tm(n):
    return TransferMatrix(sp.identity(n, format="csc"), 0.0, 1.0)


def shift_tm(n, by):
    return TransferMatrix(sp.csc_matrix(np.roll(np.eye(n), by, axis=0)), 0.0, 1.0)


def test_threshold_set_extremes():
    g = Grid.circle(10)
    w = np.linspace(-1, 1, 10)
    assert len(threshold_set(g, w, -2.0, "+")) == 10
    assert len(threshold_set(g, w, w.max(), "+")) == 0
    assert len(threshold_set(g, w, -2.0, "-")) == 0


def test_threshold_set_markov_mode_zero_level():
    g = Grid.circle(6)
    P = ulam_map(g, map_family("single"), 1, 30)
    values, vectors = np.linalg.eig(P.toarray())
    f2 = sign_convention(vectors[:, np.argsort(-values.real)[1]].real)
    assert threshold_set(g, f2, 0.0, "+").indices == (0, 1, 2)


def test_eta_match_exact_counts():
    rng = np.random.default_rng(2)
    w = rng.standard_normal(50)
    for j in (1, 5, 25):
        c = eta_match(w, j / 50, "+")
        assert np.sum(w > c) == j


def test_eta_match_antisymmetric_half():
    w = np.concatenate([-np.arange(1, 6), np.arange(1, 6)]) / 5.0
    c = eta_match(w, 0.5, "+")
    assert set(np.nonzero(w > c)[0]) == set(np.nonzero(w > 0)[0])


def test_eta_match_target_range():
    with pytest.raises(ValueError):
        eta_match(np.arange(4.0), 0.9, "+")


def test_optimal_pair_identity_is_perfect():
    g = Grid.circle(30)
    rng = np.random.default_rng(5)
    w = rng.standard_normal(30)
    for direction in "+-":
        pair = optimal_pair(g, w, w, identity_tm(30), direction)
        assert pair.rho_star == pytest.approx(1.0)


def test_optimal_pair_aligned_permutation():
    g = Grid.circle(12)
    rng = np.random.default_rng(6)
    w_src = rng.standard_normal(12)
    w_dst = np.roll(w_src, 3)
    pair = optimal_pair(g, w_src, w_dst, shift_tm(12, 3), "+")
    assert pair.rho_star == pytest.approx(1.0)
    assert sorted((i + 3) % 12 for i in pair.src.indices) == list(pair.dst.indices)


def test_optimal_pair_scale_invariance():
    g = Grid.circle(24)
    rng = np.random.default_rng(7)
    w_src, w_dst = rng.standard_normal(24), rng.standard_normal(24)
    A = rng.random((24, 24))
    P = TransferMatrix(sp.csc_matrix(A / A.sum(axis=0)), 0.0, 1.0)
    base = optimal_pair(g, w_src, w_dst, P, "+")
    scaled = optimal_pair(g, 3.7 * w_src, 11.0 * w_dst, P, "+")
    assert scaled.src.indices == base.src.indices
    assert scaled.dst.indices == base.dst.indices
    assert scaled.rho_star == pytest.approx(base.rho_star)


def test_optimal_pair_negation_direction_symmetry():
    g = Grid.circle(24)
    rng = np.random.default_rng(8)
    w_src, w_dst = rng.standard_normal(24), rng.standard_normal(24)
    A = rng.random((24, 24))
    P = TransferMatrix(sp.csc_matrix(A / A.sum(axis=0)), 0.0, 1.0)
    plus = optimal_pair(g, w_src, w_dst, P, "+")
    minus = optimal_pair(g, -w_src, -w_dst, P, "-")
    assert plus.src.indices == minus.src.indices
    assert plus.dst.indices == minus.dst.indices
    assert plus.rho_star == pytest.approx(minus.rho_star)
    assert plus.c_star == pytest.approx(-minus.c_star)


def test_optimal_pair_consistent_with_direct_ratio():
    from coherentsets import rho_hat
    g = Grid.circle(40)
    rng = np.random.default_rng(9)
    w_src, w_dst = rng.standard_normal(40), rng.standard_normal(40)
    A = rng.random((40, 40))
    P = TransferMatrix(sp.csc_matrix(A / A.sum(axis=0)), 0.0, 1.0)
    pair = optimal_pair(g, w_src, w_dst, P, "+")
    assert pair.rho_star == rho_hat(P, pair.src, pair.dst)
    # every scan entry agrees with a direct evaluation of its candidate sets
    for i in range(len(pair.scan.counts)):
        src = threshold_set(g, w_src, pair.scan.thresholds[i], "+")
        dst = threshold_set(g, w_dst, pair.scan.matched_thresholds[i], "+")
        assert len(src) == pair.scan.counts[i]
        assert len(dst) == pair.scan.matched_counts[i]
        assert pair.scan.rhos[i] == pytest.approx(rho_hat(P, src, dst), abs=1e-12)


def test_optimal_pair_measures_stay_below_half():
    g = Grid.circle(30)
    rng = np.random.default_rng(10)
    w_src, w_dst = rng.standard_normal(30), rng.standard_normal(30)
    A = rng.random((30, 30))
    P = TransferMatrix(sp.csc_matrix(A / A.sum(axis=0)), 0.0, 1.0)
    pair = optimal_pair(g, w_src, w_dst, P, "+")
    assert np.all(pair.scan.measures <= 0.5)
    assert pair.src.measure <= 0.5 and pair.dst.measure <= 0.5


def test_optimal_sequence_single_step_matches_pair():
    g = Grid.circle(40)
    rng = np.random.default_rng(11)
    w0, w1 = rng.standard_normal(40), rng.standard_normal(40)
    A = rng.random((40, 40))
    P = TransferMatrix(sp.csc_matrix(A / A.sum(axis=0)), 0.0, 1.0)
    fam = optimal_sequence(g, [w0, w1], [P], "+")
    pair = optimal_pair(g, w0, w1, P, "+")
    assert fam.mean_rho == pytest.approx(pair.rho_star, abs=1e-12)


def test_optimal_sequence_measures_near_common_level():
    g = Grid.circle(60)
    rng = np.random.default_rng(12)
    ws = [rng.standard_normal(60) for _ in range(4)]
    Ps = []
    for _ in range(3):
        A = rng.random((60, 60))
        Ps.append(TransferMatrix(sp.csc_matrix(A / A.sum(axis=0)), 0.0, 1.0))
    fam = optimal_sequence(g, ws, Ps, "+")
    for s in fam.raw_sets:
        assert abs(s.measure - fam.ell_star) <= 1.0 / 60 + 1e-12
    for s in fam.sets:
        assert len(s) == len(fam.raw_sets[0])


def test_optimal_sequence_negation_symmetry():
    g = Grid.circle(30)
    rng = np.random.default_rng(13)
    ws = [rng.standard_normal(30) for _ in range(3)]
    Ps = []
    for _ in range(2):
        A = rng.random((30, 30))
        Ps.append(TransferMatrix(sp.csc_matrix(A / A.sum(axis=0)), 0.0, 1.0))
    plus = optimal_sequence(g, ws, Ps, "+")
    minus = optimal_sequence(g, [-w for w in ws], Ps, "-")
    assert [s.indices for s in plus.sets] == [s.indices for s in minus.sets]
    assert plus.mean_rho == pytest.approx(minus.mean_rho)


def test_rho_profile_spans_both_branches():
    g = Grid.circle(20)
    rng = np.random.default_rng(14)
    ws = [rng.standard_normal(20) for _ in range(2)]
    A = rng.random((20, 20))
    P = TransferMatrix(sp.csc_matrix(A / A.sum(axis=0)), 0.0, 1.0)
    measures, curve = rho_profile(g, ws, [P])
    assert measures[0] == pytest.approx(1 / 20)
    assert measures[-1] == pytest.approx(19 / 20)
    assert np.all((curve >= 0) & (curve <= 1 + 1e-12))


def test_connectify_gap_fill():
    g = Grid.circle(100)
    ragged = BoxSet(g, tuple(range(12, 58)) + (60,))
    repaired = connectify(ragged)
    assert repaired.indices == tuple(range(12, 59))


def test_connectify_connected_passthrough():
    g = Grid.circle(50)
    arc = BoxSet(g, tuple(range(40, 50)) + (0, 1))
    assert connectify(arc) is arc


def test_connectify_equal_components_prefers_lower():
    g = Grid.circle(100)
    two = BoxSet(g, tuple(range(10, 20)) + tuple(range(50, 60)))
    repaired = connectify(two)
    assert repaired.indices == tuple(range(10, 30))


def test_connectify_minimizes_symmetric_difference():
    g = Grid.circle(100)
    ragged = BoxSet(g, tuple(range(12, 58)) + (60,))
    repaired = connectify(ragged)
    best = len(ragged.symmetric_difference(repaired))
    for start in range(100):
        arc = BoxSet(g, tuple((start + i) % 100 for i in range(len(ragged))))
        assert len(ragged.symmetric_difference(arc)) >= best


def test_connectify_rejects_bad_input():
    g2 = Grid.cylinder(4, 4)
    with pytest.raises(ValueError, match="1D"):
        connectify(BoxSet(g2, (0, 2)))
    g1 = Grid.circle(10)
    with pytest.raises(ValueError, match="empty"):
        connectify(BoxSet(g1, ()))


def test_connectify_nonperiodic_axis():
    g = Grid(lower=(0.0,), upper=(1.0,), shape=(20,), periodic=(False,))
    ragged = BoxSet(g, (0, 1, 2, 5))
    repaired = connectify(ragged)
    assert repaired.indices == (0, 1, 2, 3)
