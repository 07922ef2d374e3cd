"""Acceptance suite: the reference experiments at their stated tolerances.

Each criterion prints one ``[acceptance]`` line (visible with ``pytest -s``
or ``-rA``).  Two assertions about 1D set coordinates (criteria 3c and 3e)
fail deliberately and are expected to stay red: the reference interval
coordinates are internally inconsistent with the generating map, whose
optimizer maximum is attained on the family shifted by exactly half the
circle (same measures, same ratios).  The failure messages carry the
numbers.
"""

import time

import numpy as np
import pytest

from coherentsets import (Grid, apply_density, compose, map_family, normalize_l1,
                          positive_part_bound, retime, rho_hat, sign_convention,
                          top_k_singular, ulam_map)
from coherentsets.config import make_config
from coherentsets.experiments import run_experiment
from coherentsets.reporting import write_bundle

SINGLE_MATRIX = np.array([
    [1, 1, 0, 1, 0, 0],
    [1, 1, 1, 0, 0, 0],
    [1, 1, 1, 0, 0, 0],
    [0, 0, 1, 0, 1, 1],
    [0, 0, 0, 1, 1, 1],
    [0, 0, 0, 1, 1, 1],
]) / 3.0

TABLE_RHO = (0.89, 0.87, 0.87, 0.96, 0.90, 0.87)
TABLE_SETS = ((11, 58), (12, 59), (35, 82), (7, 54), (35, 82), (35, 82))


def report(criterion: str, ok: bool, detail: str = "") -> None:
    print(f"[acceptance] criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def aperiodic():
    t0 = time.perf_counter()
    result = run_experiment(make_config("aperiodic4"))
    return result, time.perf_counter() - t0


@pytest.fixture(scope="session")
def wave2d():
    t0 = time.perf_counter()
    result = run_experiment(make_config("wave2d", overrides={"workers": 2}),
                            log=lambda m: print(f"[wave2d] {m}", flush=True))
    return result, time.perf_counter() - t0


# -- criterion 1: exact spectrum of the single-map case ----------------------

def test_criterion_1_single_map_exact():
    t0 = time.perf_counter()
    grid = Grid.circle(6)
    P = ulam_map(grid, map_family("single"), 1, 30)
    matrix_exact = np.array_equal(P.toarray(), SINGLE_MATRIX)
    values, vectors = np.linalg.eig(P.toarray())
    order = np.argsort(-np.abs(values))
    lam = values[order].real
    eig_ok = (abs(lam[0] - 1.0) < 1e-12
              and abs(lam[1] - (1 + np.sqrt(2)) / 3) < 1e-12
              and abs(lam[2] - (1 - np.sqrt(2)) / 3) < 1e-12)
    f2 = sign_convention(vectors[:, order[1]].real)
    set_ok = set(np.nonzero(f2 > 0)[0]) == {0, 1, 2}
    elapsed = time.perf_counter() - t0
    ok = matrix_exact and eig_ok and set_ok and elapsed < 1.0
    report("1 (exact single-map spectrum)", ok,
           f"eigs={np.round(lam[:3], 12).tolist()} elapsed={elapsed:.2f}s")
    assert matrix_exact, "projected matrix differs from the reference entries"
    assert eig_ok, f"eigenvalues {lam[:3]} miss {{1, (1±sqrt2)/3}} at 1e-12"
    assert set_ok, f"positive part of the second mode is {np.nonzero(f2 > 0)[0]}"
    assert elapsed < 1.0


# -- criterion 2: exact periodic cocycle --------------------------------------

def test_criterion_2_periodic_cocycle_exact():
    t0 = time.perf_counter()
    grid = Grid.circle(6)
    fam = map_family("periodic3")
    mats = [ulam_map(grid, fam, j + 1, 30, t_start=float(j)) for j in range(3)]
    triple = compose(mats)
    values, vectors = np.linalg.eig(triple.toarray())
    order = np.argsort(-np.abs(values))
    lam = values[order].real
    eig_ok = (abs(lam[0] - 1.0) < 1e-12
              and abs(lam[1] - (13 + np.sqrt(233)) / 54) < 1e-12
              and abs(lam[2] - (13 - np.sqrt(233)) / 54) < 1e-12)

    w = sign_convention(normalize_l1(vectors[:, order[1]].real))
    expected = [{0, 1, 2}, {2, 3, 4}, {0, 4, 5}]
    sets_ok = True
    details = []
    for k in range(3):
        got = set(np.nonzero(w > 0)[0])
        details.append(sorted(got))
        # one-box slack: symmetric difference of at most one box
        sets_ok = sets_ok and len(got ^ expected[k]) <= 1
        if k < 2:
            w = normalize_l1(mats[k].matrix @ w)
    elapsed = time.perf_counter() - t0
    ok = eig_ok and sets_ok and elapsed < 1.0
    report("2 (exact periodic cocycle)", ok,
           f"eigs={np.round(lam[:3], 12).tolist()} sign sets={details}")
    assert eig_ok, f"triple-product eigenvalues {lam[:3]} off at 1e-12"
    assert sets_ok, f"pushed sign-pattern sets {details} != {expected}"
    assert elapsed < 1.0


# -- criterion 3: aperiodic 1D experiment --------------------------------------

def test_criterion_3a_amplitudes(aperiodic):
    result, _ = aperiodic
    summary = dict(result.summary)
    amps = [summary[f"amp_{j}"] for j in (1, 2, 3)]
    targets = (1.00, 0.84, 0.46)
    ok = all(abs(a - t) <= 0.03 for a, t in zip(amps, targets))
    report("3a (top three amplitudes within ±0.03)", ok,
           f"got {np.round(amps, 4).tolist()} vs {targets}")
    assert ok, f"amplitudes {amps} not within ±0.03 of {targets}"


def _best_pair(result):
    pairs = result.artifacts["pairs"]
    return max(pairs.values(), key=lambda p: p.rho_star)


def test_criterion_3b_pair_ratio(aperiodic):
    result, _ = aperiodic
    pair = _best_pair(result)
    ok = abs(pair.rho_star - 0.890) <= 0.02
    report("3b (optimal pair ratio 0.890 ± 0.02)", ok,
           f"rho*={pair.rho_star:.4f} measure={pair.src.measure:.2f}")
    assert ok, f"optimal pair ratio {pair.rho_star:.4f} outside 0.890±0.02"


def test_criterion_3c_pair_set_coordinates_as_stated(aperiodic):
    """Stated source interval [0.11, 0.58]; the maximum lives on its half shift.

    Under the generating map the stated interval pair carries ratio 0.851,
    incompatible with the required 0.890±0.02, while the half-shifted family
    attains it exactly; both families share measures and ratios by the mirror
    symmetry of the unperturbed map halves.  Kept as stated, expected red.
    """
    result, _ = aperiodic
    pair = _best_pair(result)
    idx = sorted(pair.src.indices)
    lo, hi = idx[0], idx[-1] + 1
    ok = abs(lo - 11) <= 1 and abs(hi - 58) <= 1
    report("3c (pair source interval [0.11,0.58] ± one box)", ok,
           f"got boxes [{lo}, {hi}) = [{lo / 100:.2f}, {hi / 100:.2f})")
    assert ok, (
        f"optimal source set spans [{lo / 100:.2f}, {hi / 100:.2f}) "
        f"(= the stated interval shifted by 0.50 on the circle); the stated "
        f"[0.11, 0.58) attains only 0.851 under the map and cannot satisfy "
        f"criterion 3b simultaneously")


def _best_family(result):
    fams = result.artifacts["families"]
    return max(fams.values(), key=lambda f: f.mean_rho)


def test_criterion_3d_sequence_values(aperiodic):
    result, elapsed = aperiodic
    fam = _best_family(result)
    ell_ok = abs(fam.ell_star - 0.47) <= 0.02
    mean_ok = abs(fam.mean_rho - 0.891) <= 0.02
    rho_ok = all(abs(r - t) <= 0.03 for r, t in zip(fam.rho, TABLE_RHO))
    ok = ell_ok and mean_ok and rho_ok and elapsed < 30.0
    report("3d (sequence: level 0.47, mean 0.891, six ratios ±0.03)", ok,
           f"ell*={fam.ell_star:.2f} mean={fam.mean_rho:.4f} "
           f"rho={np.round(fam.rho, 3).tolist()} elapsed={elapsed:.1f}s")
    assert ell_ok, f"common measure {fam.ell_star} outside 0.47±0.02"
    assert mean_ok, f"mean ratio {fam.mean_rho:.4f} outside 0.891±0.02"
    assert rho_ok, f"per-step ratios {fam.rho} vs {TABLE_RHO} beyond ±0.03"
    assert elapsed < 30.0


def test_criterion_3e_sequence_set_coordinates_as_stated(aperiodic):
    """Stated family intervals; the optimizer's family is their half shift.

    Same root cause as criterion 3c: every family set matches the stated one
    after a shift by half the circle, with the stated per-step ratios.  Kept
    as stated, expected red.
    """
    result, _ = aperiodic
    fam = _best_family(result)
    got = []
    ok = True
    for s, (lo_ref, hi_ref) in zip(fam.sets, TABLE_SETS):
        idx = sorted(s.indices)
        runs = np.split(np.asarray(idx), np.nonzero(np.diff(idx) > 1)[0] + 1)
        start = runs[-1][0] if len(runs) > 1 else idx[0]
        lo, hi = start, start + len(s)
        got.append((lo, hi))
        ok = ok and abs(lo - lo_ref) <= 2 and abs((hi % 100) - (hi_ref % 100)) <= 2
    report("3e (sequence set intervals ± two boxes)", ok, f"got {got}")
    assert ok, (
        f"family sets {got} are the stated {TABLE_SETS} shifted by 50 boxes "
        f"(half the circle); the stated coordinates cannot carry the required "
        f"ratios under the generating map")


# -- criterion 4: defect series ------------------------------------------------

def test_criterion_4_defect_series(aperiodic):
    result, elapsed = aperiodic
    delta = dict(result.artifacts["delta"])
    trend_ok = delta[15] < delta[3]
    small_ok = all(delta[N] < 0.05 for N in range(15, 20))
    ok = trend_ok and small_ok and elapsed < 120.0
    report("4 (defect series: decays, below 0.05 by depth 15)", ok,
           f"delta(3)={delta[3]:.4f} delta(15)={delta[15]:.2e} elapsed={elapsed:.1f}s")
    assert trend_ok, f"delta(15)={delta[15]} not below delta(3)={delta[3]}"
    assert small_ok, f"defect above 0.05 beyond depth 15: {delta}"
    assert elapsed < 120.0


# -- criterion 5: driven-flow experiment (desk scale) --------------------------

def test_criterion_5_wave2d_properties(wave2d):
    result, elapsed = wave2d
    summary = dict(result.summary)
    L1, L2, L3 = (summary[f"amp_{j}"] for j in (1, 2, 3))
    cos = summary["pushforward_cos"]
    rho_p = summary["pair_plus_rho"]
    rho_m = summary["pair_minus_rho"]
    l1_ok = 0.9 < L1 < 1.2
    l23_ok = 0.9 < L2 < 1.05 and 0.9 < L3 < 1.05 and abs(L2 - L3) < 0.05
    cos_ok = cos >= 0.9
    rho_ok = rho_p >= 0.90 and rho_m >= 0.90
    ok = l1_ok and l23_ok and cos_ok and rho_ok
    report("5 (driven flow: amplitude bands, alignment, pair ratios)", ok,
           f"L=({L1:.4f},{L2:.4f},{L3:.4f}) cos={cos:.3f} "
           f"rho=({rho_p:.4f},{rho_m:.4f}) elapsed={elapsed / 60:.1f}min "
           f"(target <30min)")
    assert l1_ok, f"leading amplitude {L1} outside (0.9, 1.2)"
    assert l23_ok, f"amplitudes ({L2}, {L3}) outside (0.9, 1.05) or split >= 0.05"
    assert cos_ok, f"push-forward alignment {cos} below 0.9"
    assert rho_ok, f"pair ratios ({rho_p}, {rho_m}) below 0.90"


# -- criterion 6: structural invariants ----------------------------------------

def test_criterion_6_structural_invariants(aperiodic, wave2d):
    t0 = time.perf_counter()
    # exact column stochasticity across every constructed matrix
    ap_result, _ = aperiodic
    wv_result, _ = wave2d
    mats = list(ap_result.artifacts["steps"].values())
    mats += [wv_result.artifacts["P_N"], wv_result.artifacts["P_M"]]
    mats += list(wv_result.artifacts["pushes"].values())
    grid6 = Grid.circle(6)
    single = ulam_map(grid6, map_family("single"), 1, 30)
    mats.append(single)
    columns_ok = all(tm.counts_column_exact() for tm in mats)

    # mass conservation
    rng = np.random.default_rng(23)
    mass_ok = True
    for tm in (single, wv_result.artifacts["P_M"]):
        f = rng.standard_normal(tm.n)
        drift = abs(apply_density(tm, f).sum() - f.sum())
        mass_ok = mass_ok and drift < 1e-12 * max(1.0, np.abs(f).sum())

    # orthonormality of the returned singular bases
    def orth_err(vectors):
        gram = vectors.T @ vectors
        return float(np.abs(gram - np.eye(gram.shape[0])).max())
    orth_ok = (orth_err(ap_result.artifacts["modes"].spectral.vectors) < 1e-8
               and orth_err(wv_result.artifacts["modes"].spectral.vectors) < 1e-8)

    # matrix-free agrees with the dense oracle (values, 1e-8, sizes <= 512)
    import scipy.sparse as sp
    solver_ok = True
    cases = [single.matrix]
    for n, seed in ((50, 3), (300, 7)):
        A = np.random.default_rng(seed).random((n, n))
        cases.append(sp.csc_matrix(A / A.sum(axis=0)))
    steps = ap_result.artifacts["steps"]
    cases.append(compose([steps[k] for k in range(-10, 10)]).matrix)
    for case in cases:
        it = top_k_singular(case, 3, method="iterative")
        dn = top_k_singular(case, 3, method="dense")
        solver_ok = solver_ok and bool(
            np.abs(it.singular_values - dn.singular_values).max() < 1e-8)

    # positive-part push inequality on the exact matrix
    bound_ok = True
    for _ in range(100):
        f = rng.standard_normal(6)
        f -= f.mean()
        lhs, rhs, holds = positive_part_bound(single, normalize_l1(f))
        bound_ok = bound_ok and holds

    # trivial retention ratio
    rho_ok = rho_hat(single, [0, 3, 4], list(range(6))) == pytest.approx(1.0, abs=1e-12)

    elapsed = time.perf_counter() - t0
    ok = columns_ok and mass_ok and orth_ok and solver_ok and bound_ok and rho_ok
    report("6 (structural invariants)", ok,
           f"columns={columns_ok} mass={mass_ok} orth={orth_ok} "
           f"solver={solver_ok} bound={bound_ok} rho={rho_ok} "
           f"elapsed={elapsed:.1f}s")
    assert columns_ok and mass_ok and orth_ok and solver_ok and bound_ok and rho_ok
    assert elapsed < 30.0


# -- criterion 7: determinism ----------------------------------------------------

def test_criterion_7_worker_count_determinism(tmp_path):
    bundles = []
    for workers in (1, 3):
        cfg = make_config("aperiodic4", overrides={"workers": workers})
        result = run_experiment(cfg)
        out = write_bundle(result, tmp_path / f"w{workers}", figures=False)
        bundles.append(out)
    a = (bundles[0] / "summary.csv").read_bytes()
    b = (bundles[1] / "summary.csv").read_bytes()
    # worker count appears in the echoed configuration; results must not differ
    a = b"\n".join(line for line in a.splitlines() if not line.startswith(b"config_workers"))
    b = b"\n".join(line for line in b.splitlines() if not line.startswith(b"config_workers"))
    ok = a == b
    extra = all((bundles[0] / name).read_bytes() == (bundles[1] / name).read_bytes()
                for name in ("amplitudes.csv", "delta.csv", "rho_mean.csv"))
    report("7 (worker-count determinism)", ok and extra, "summary bytes identical")
    assert ok, "summary.csv differs between worker counts"
    assert extra, "artifact CSVs differ between worker counts"
