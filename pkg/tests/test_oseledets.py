import numpy as np
import pytest
import scipy.sparse as sp

from coherentsets import (Grid, NonConvergenceError, align_parity, compose,
                          convergence_delta, map_family, normalize_l1,
                          oseledets_from_steps, positive_part_bound, retime,
                          sign_convention, top_k_singular, ulam_map)


def random_stochastic(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.random((n, n))
    return sp.csc_matrix(A / A.sum(axis=0))


def single_map_matrix():
    return ulam_map(Grid.circle(6), map_family("single"), 1, 30)


def test_identity_all_singular_values_one():
    res = top_k_singular(sp.identity(25, format="csc"), 3)
    assert np.allclose(res.singular_values, 1.0)
    gram = res.vectors.T @ res.vectors
    assert np.abs(gram - np.eye(3)).max() < 1e-10


@pytest.mark.parametrize("n,seed", [(50, 3), (200, 8), (300, 21)])
def test_iterative_matches_dense_oracle(n, seed):
    A = random_stochastic(n, seed)
    it = top_k_singular(A, 3, method="iterative")
    dn = top_k_singular(A, 3, method="dense")
    assert np.abs(it.singular_values - dn.singular_values).max() < 1e-8
    for j in range(3):
        assert abs(np.dot(it.vectors[:, j], dn.vectors[:, j])) > 1 - 1e-6


def test_dense_limit_guard():
    with pytest.raises(ValueError, match="dense route"):
        top_k_singular(sp.identity(5000, format="csc"), 2, method="dense")


def test_non_convergence_carries_residual():
    A = random_stochastic(60, 1)
    with pytest.raises(NonConvergenceError) as err:
        top_k_singular(A, 2, tol=0.0, max_iter=5)
    assert err.value.residual > 0


def test_single_map_eigenvalues_and_mode_set():
    P = single_map_matrix()
    values = np.sort(np.abs(np.linalg.eigvals(P.toarray())))[::-1]
    assert abs(values[0] - 1.0) < 1e-12
    assert abs(values[1] - (1 + np.sqrt(2)) / 3) < 1e-12
    assert abs(values[2] - (np.sqrt(2) - 1) / 3) < 1e-12

    steps = [retime(P, k) for k in range(20)]
    approx = oseledets_from_steps(steps, 20, 10, 3, checkpoints=(0,))
    w2 = approx.mode(0.0, 2)
    assert set(np.nonzero(w2 > 0)[0]) == {0, 1, 2}
    assert abs(approx.amplitudes[0] - 1.0) < 1e-10
    # per-step amplitude of a non-normal matrix converges to |lambda_2| as the
    # window grows; at window 20 the finite-window bias is a few 1e-3
    assert abs(approx.amplitudes[1] - (1 + np.sqrt(2)) / 3) < 0.01


def test_mode_vectors_unit_norm_and_shared_parity():
    P = single_map_matrix()
    steps = [retime(P, k) for k in range(24)]
    approx = oseledets_from_steps(steps, 20, 10, 2, checkpoints=(0, 1, 2, 3))
    for t in approx.times:
        for j in (1, 2):
            v = approx.mode(t, j)
            assert abs(np.abs(v).sum() - 1.0) < 1e-12
    # pushing the second mode one step stays positively aligned with the next
    for t in (0.0, 1.0, 2.0):
        pushed = steps[0].matrix @ approx.mode(t, 2)
        assert np.dot(pushed, approx.mode(t + 1.0, 2)) > 0


def test_periodic_cocycle_amplitude():
    g = Grid.circle(6)
    fam = map_family("periodic3")
    mats = [ulam_map(g, fam, j + 1, 3, t_start=float(j)) for j in range(3)]
    steps = [retime(mats[k % 3], k) for k in range(18)]
    approx = oseledets_from_steps(steps, 18, 9, 2, checkpoints=(0, 1, 2))
    per_triple = approx.amplitudes[1] ** 3
    assert per_triple == pytest.approx((13 + np.sqrt(233)) / 54, abs=0.02)


def test_sign_convention_and_alignment():
    v = np.array([0.2, -0.7, 0.1])
    assert np.array_equal(sign_convention(v), -v)
    assert np.array_equal(sign_convention(-v), -v)
    ref = np.array([1.0, 0.0, 0.0])
    assert np.array_equal(align_parity(np.array([-2.0, 0.1, 0.0]), ref),
                          np.array([2.0, -0.1, 0.0]))


def test_normalize_l1_rejects_zero():
    with pytest.raises(ValueError):
        normalize_l1(np.zeros(4))


def test_delta_decays_for_constant_cocycle():
    # a constant cocycle is perfectly equivariant in the limit: the pushed
    # seed converges to the eigenvector geometrically, so the defect decays
    # like the eigenvalue ratio and is tiny once the push is deep enough
    P = single_map_matrix()
    steps = {k: retime(P, k) for k in range(-19, 20)}
    series = dict(convergence_delta(steps, [3, 6, 9, 12]))
    assert series[6] < series[3] and series[9] < series[6]
    assert series[12] < 1e-7


def test_delta_matches_manual_computation():
    g = Grid.circle(40)
    fam = map_family("aperiodic4")
    from coherentsets import driving_symbols
    track = driving_symbols()
    steps = {k: ulam_map(g, fam, track.symbol(k), 25, t_start=float(k))
             for k in range(-8, 9)}
    (N, delta), = convergence_delta(steps, [6])

    def mode(base):
        window = [steps[k] for k in range(base - 6, base + 6)]
        spectral = top_k_singular(compose(window), 2, span=12.0)
        v = compose([steps[k] for k in range(base - 6, base)]).matrix @ spectral.vectors[:, 1]
        return normalize_l1(v)

    pushed = normalize_l1(steps[0].matrix @ mode(0))
    later = mode(1)
    manual = min(np.abs(later - pushed).sum(), np.abs(later + pushed).sum())
    assert delta == pytest.approx(manual, abs=1e-12)
    # an overall flip of either vector cannot change the defect
    flipped = min(np.abs(-later - pushed).sum(), np.abs(-later + pushed).sum())
    assert manual == pytest.approx(flipped)


def test_positive_part_bound_no_decay():
    eye = sp.identity(8, format="csc")
    f = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0]) / 8.0
    lhs, rhs, ok = positive_part_bound(eye, f)
    assert lhs == pytest.approx(0.0, abs=1e-15)
    assert rhs == pytest.approx(0.0, abs=1e-15)
    assert ok


def test_positive_part_bound_on_markov_mode():
    P = single_map_matrix()
    values, vectors = np.linalg.eig(P.toarray())
    j = np.argsort(-values.real)[1]
    f2 = normalize_l1(vectors[:, j].real)
    lhs, rhs, ok = positive_part_bound(P, f2)
    assert ok
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_positive_part_bound_random_zero_sum():
    P = single_map_matrix()
    rng = np.random.default_rng(13)
    for _ in range(100):
        f = rng.standard_normal(6)
        f -= f.mean()
        f = normalize_l1(f)
        lhs, rhs, ok = positive_part_bound(P, f)
        assert ok, (lhs, rhs)


def test_positive_part_bound_preconditions():
    eye = sp.identity(4, format="csc")
    with pytest.raises(ValueError, match="zero sum"):
        positive_part_bound(eye, np.array([0.5, 0.5, 0.0, 0.0]))
    with pytest.raises(ValueError, match="unit 1-norm"):
        positive_part_bound(eye, np.array([1.0, -1.0, 0.0, 0.0]))
