"""The four canonical experiments, as pure computations returning a bundle.

Each runner builds its transfer matrices, extracts modes and coherent sets,
collects a flat machine-readable summary, and records internal invariant
checks (exact column stochasticity, orthonormality, mass conservation).
Writing the bundle to disk lives in :mod:`coherentsets.reporting`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .coherent import CoherentFamily, PairResult, optimal_pair, optimal_sequence, rho_profile
from .grid import BoxSet, Grid, components
from .oseledets import (OseledetsApprox, align_parity, convergence_delta, normalize_l1,
                        oseledets_from_matrices, oseledets_from_steps, sign_convention,
                        top_k_singular)
from .systems import FlowSystem, driving_symbols, map_family
from .transfer import TransferMatrix, apply_density, compose, retime, rho_hat, ulam_flow_multi, ulam_map

__all__ = ["ExperimentResult", "run_experiment"]


@dataclass
class ExperimentResult:
    name: str
    config: ExperimentConfig
    summary: list[tuple[str, object]] = field(default_factory=list)
    artifacts: dict[str, object] = field(default_factory=dict)
    checks: list[tuple[str, bool, str]] = field(default_factory=list)

    @property
    def all_checks_pass(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def check(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append((name, bool(ok), detail))


def _boxset_runs(boxset: BoxSet) -> str:
    """Canonical 'start+length' runs of a 1D set, wrap-aware."""
    grid = boxset.grid
    comps = components(boxset)
    parts = []
    for comp in comps:
        idx = set(comp.indices)
        n = grid.n
        start = comp.indices[0]
        if grid.dim == 1 and grid.periodic[0] and 0 in idx and (n - 1) in idx and len(idx) < n:
            for s in sorted(idx):
                if (s - 1) % n not in idx:
                    start = s
                    break
        parts.append(f"{start}+{len(comp)}")
    return ";".join(parts)


def _stochastic_checks(result: ExperimentResult, label: str, mats) -> None:
    exact = all(tm.counts_column_exact() for tm in mats)
    result.check(f"{label}: integer column counts sum to Q", exact)
    tol_ok = all(tm.is_column_stochastic(1e-12) for tm in mats)
    result.check(f"{label}: float column sums within 1e-12 of 1", tol_ok)


def _mass_check(result: ExperimentResult, label: str, tm: TransferMatrix) -> None:
    rng = np.random.default_rng(7)
    f = rng.standard_normal(tm.n)
    drift = abs(apply_density(tm, f).sum() - f.sum())
    result.check(f"{label}: mass conservation under push-forward",
                 drift < 1e-12 * max(1.0, np.abs(f).sum()), f"drift={drift:.3e}")


def _orthonormal_check(result: ExperimentResult, label: str, vectors: np.ndarray) -> None:
    gram = vectors.T @ vectors
    err = float(np.abs(gram - np.eye(gram.shape[0])).max())
    result.check(f"{label}: singular vectors orthonormal to 1e-8", err < 1e-8,
                 f"err={err:.3e}")


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(abs(np.dot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b)))


def _eig_by_magnitude(matrix: np.ndarray):
    values, vectors = np.linalg.eig(matrix)
    order = np.argsort(-np.abs(values))
    return values[order], vectors[:, order]


def _pair_summary(result: ExperimentResult, tag: str, pair: PairResult) -> None:
    result.summary += [
        (f"pair_{tag}_rho", pair.rho_star),
        (f"pair_{tag}_c", pair.c_star),
        (f"pair_{tag}_eta", pair.eta_star),
        (f"pair_{tag}_measure", pair.src.measure),
        (f"pair_{tag}_src_runs", _boxset_runs(pair.src)),
        (f"pair_{tag}_dst_runs", _boxset_runs(pair.dst)),
    ]


def _family_summary(result: ExperimentResult, tag: str, fam: CoherentFamily) -> None:
    result.summary += [
        (f"family_{tag}_ell", fam.ell_star),
        (f"family_{tag}_mean_rho", fam.mean_rho),
    ]
    for k, rho in enumerate(fam.rho):
        result.summary.append((f"family_{tag}_rho_{k}", rho))
    for k, s in enumerate(fam.sets):
        result.summary.append((f"family_{tag}_set_{k}", _boxset_runs(s)))


# ---------------------------------------------------------------------------
# map experiments
# ---------------------------------------------------------------------------

def run_single_map(cfg: ExperimentConfig, log=None) -> ExperimentResult:
    result = ExperimentResult("single-map", cfg)
    grid = Grid.circle(cfg.boxes[0])
    family = map_family("single")
    P = ulam_map(grid, family, 1, cfg.test_points, t_start=0.0)
    _stochastic_checks(result, "transfer", [P])
    _mass_check(result, "transfer", P)

    values, vectors = _eig_by_magnitude(P.toarray())
    imag = float(np.abs(values.imag[:3]).max())
    result.check("leading eigenvalues real", imag < 1e-12, f"imag={imag:.3e}")
    f2 = sign_convention(normalize_l1(vectors[:, 1].real))
    positive = BoxSet(grid, tuple(np.nonzero(f2 > 0)[0]))

    M, N = int(cfg.decay_span), int(cfg.push_span)
    steps = [retime(P, k) for k in range(M)]
    approx = oseledets_from_steps(steps, M, N, cfg.modes, checkpoints=(0,))
    _orthonormal_check(result, "modes", approx.spectral.vectors)
    cos2 = _cosine(approx.mode(0.0, 2), f2)
    result.check("pushed second mode parallel to exact eigenvector", cos2 > 1 - 1e-8,
                 f"cos={cos2:.12f}")

    for j in range(3):
        result.summary.append((f"eig_{j + 1}", float(values[j].real)))
    for j in range(cfg.modes):
        result.summary.append((f"amp_{j + 1}", float(approx.amplitudes[j])))
    result.summary += [
        ("f2_positive_runs", _boxset_runs(positive)),
        ("pipeline_cos_2", cos2),
    ]
    result.artifacts.update({
        "transfer": P, "eigenvalues": values, "f2": f2, "f2_positive": positive,
        "modes": approx,
    })
    return result


def run_periodic3(cfg: ExperimentConfig, log=None) -> ExperimentResult:
    result = ExperimentResult("periodic3", cfg)
    grid = Grid.circle(cfg.boxes[0])
    family = map_family("periodic3")
    mats = [ulam_map(grid, family, j + 1, cfg.test_points, t_start=float(j))
            for j in range(3)]
    _stochastic_checks(result, "transfer", mats)
    triple = compose(mats)
    values, vectors = _eig_by_magnitude(triple.toarray())
    imag = float(np.abs(values.imag[:3]).max())
    result.check("leading eigenvalues real", imag < 1e-12, f"imag={imag:.3e}")

    w = sign_convention(normalize_l1(vectors[:, 1].real))
    pushed = {0: w}
    for k in range(2):
        pushed[k + 1] = normalize_l1(mats[k].matrix @ pushed[k])
    pos_sets = {k: BoxSet(grid, tuple(np.nonzero(v > 0)[0])) for k, v in pushed.items()}

    M, N = int(cfg.decay_span), int(cfg.push_span)
    steps = [retime(mats[k % 3], k) for k in range(M)]
    approx = oseledets_from_steps(steps, M, N, cfg.modes,
                                  checkpoints=tuple(int(t) for t in cfg.checkpoints))
    _orthonormal_check(result, "modes", approx.spectral.vectors)
    base = int(cfg.push_span) % 3
    cos = _cosine(approx.mode(0.0, 2), pushed[base])
    result.check("cocycle pipeline matches triple-product eigenvector", cos > 0.999999,
                 f"cos={cos:.9f}")

    for j in range(3):
        result.summary.append((f"triple_eig_{j + 1}", float(values[j].real)))
    for k in range(3):
        result.summary.append((f"f2_positive_runs_{k}", _boxset_runs(pos_sets[k])))
    result.summary.append((f"amp_2_per_step", float(approx.amplitudes[1])))
    result.summary.append(("pipeline_cos", cos))
    result.artifacts.update({
        "transfer_steps": mats, "triple": triple, "triple_eigenvalues": values,
        "pushed_modes": pushed, "positive_sets": pos_sets, "modes": approx,
    })
    return result


def run_aperiodic4(cfg: ExperimentConfig, log=None) -> ExperimentResult:
    result = ExperimentResult("aperiodic4", cfg)
    grid = Grid.circle(cfg.boxes[0])
    family = map_family("aperiodic4")
    M, N = int(cfg.decay_span), int(cfg.push_span)
    checkpoints = tuple(int(t) for t in cfg.checkpoints)
    d_lo, d_hi = cfg.delta_range if cfg.delta_range else (2, 19)

    k_lo = min(-N, -d_hi)
    k_hi = max(-N + M - 1, checkpoints[-1] - 1, d_hi)
    track = driving_symbols(min(k_lo, -25), max(k_hi, 25))
    result.check("symbol window admissible for the subshift", track.is_admissible())

    if log:
        log(f"building {k_hi - k_lo + 1} one-step transfer matrices (n={grid.n}, "
            f"Q={cfg.test_points})")
    steps = {k: ulam_map(grid, family, track.symbol(k), cfg.test_points, t_start=float(k))
             for k in range(k_lo, k_hi + 1)}
    _stochastic_checks(result, "transfer", list(steps.values()))
    _mass_check(result, "transfer", steps[0])

    approx = oseledets_from_steps([steps[k] for k in range(-N, k_hi + 1)], M, N,
                                  cfg.modes, checkpoints=checkpoints)
    _orthonormal_check(result, "modes", approx.spectral.vectors)
    amp1 = float(approx.amplitudes[0])
    result.check("leading amplitude near one (measure preserved)", 0.9 < amp1 < 1.2,
                 f"amp_1={amp1:.4f}")
    for j in range(cfg.modes):
        result.summary.append((f"amp_{j + 1}", float(approx.amplitudes[j])))

    if log:
        log("scanning coherent pairs and the common-measure family")
    w2 = {t: approx.mode(float(t), 2) for t in checkpoints}
    pairs: dict[str, PairResult] = {}
    families: dict[str, CoherentFamily] = {}
    K = len(checkpoints) - 1
    for direction, tag in (("+", "plus"), ("-", "minus")):
        pair = optimal_pair(grid, w2[0], w2[1], steps[0], direction)
        pairs[direction] = pair
        _pair_summary(result, tag, pair)
        fam = optimal_sequence(grid, [w2[t] for t in checkpoints],
                               [steps[t] for t in checkpoints[:K]], direction)
        families[direction] = fam
        _family_summary(result, tag, fam)
        agree = abs(pair.rho_star - rho_hat(steps[0], pair.src, pair.dst))
        result.check(f"pair scan consistent with direct ratio ({direction})",
                     agree < 1e-12, f"diff={agree:.3e}")

    if log:
        log(f"equivariance defect series for N={d_lo}..{d_hi}")
    delta = convergence_delta(steps, range(d_lo, d_hi + 1))
    for Nval, d in delta:
        result.summary.append((f"delta_{Nval}", d))

    measures, curve = rho_profile(grid, [w2[t] for t in checkpoints],
                                  [steps[t] for t in checkpoints[:K]])
    result.artifacts.update({
        "steps": steps, "modes": approx, "delta": delta, "pairs": pairs,
        "families": families, "rho_curve": (measures, curve), "track": track,
    })
    return result


# ---------------------------------------------------------------------------
# driven-flow experiment
# ---------------------------------------------------------------------------

def _gyre_involution(nx: int, ny: int) -> np.ndarray:
    """Box permutation for (x, y) -> (x + half period, wall reflection).

    The driven wave field is exactly equivariant under this involution for
    every driving path, and the midpoint test lattice maps onto itself, so
    transfer matrices commute with it exactly.
    """
    flat = np.arange(nx * ny)
    ix, iy = flat % nx, flat // nx
    return ((ix + nx // 2) % nx) + nx * (ny - 1 - iy)


def run_wave2d(cfg: ExperimentConfig, log=None) -> ExperimentResult:
    result = ExperimentResult("wave2d", cfg)
    nx, ny = cfg.boxes
    grid = Grid.cylinder(nx, ny)
    M, N = float(cfg.decay_span), float(cfg.push_span)
    # the driving orbit enters at the earliest time any matrix starts; reverse
    # reaches of the chaotic driving leave its attractor and are meaningless
    system = FlowSystem(h=cfg.step, perturbed=True, ztilde_mode="scaled",
                        z0_time=-N)
    Q, workers = cfg.test_points, cfg.workers
    compare_at = float(cfg.compare_at if cfg.compare_at is not None else 10.0)

    if log:
        log(f"flow matrices from t={-N}: spans {N} and {M} (n={grid.n}, Q={Q})")
    P_N, P_M = ulam_flow_multi(grid, system, -N, [N, M], Q, workers=workers)
    if log:
        log(f"checkpoint matrices from t=0: spans {', '.join(str(t) for t in cfg.checkpoints)}")
    push_list = ulam_flow_multi(grid, system, 0.0, list(cfg.checkpoints), Q,
                                workers=workers)
    pushes = dict(zip(cfg.checkpoints, push_list))
    if log:
        log(f"independent matrices from t={compare_at - N}: spans {N} and {M}")
    P_N2, P_M2 = ulam_flow_multi(grid, system, compare_at - N, [N, M], Q,
                                 workers=workers)
    _stochastic_checks(result, "transfer", [P_N, P_M, P_N2, P_M2, *push_list])
    _mass_check(result, "transfer", P_M)

    if log:
        log("extracting modes")
    involution = _gyre_involution(nx, ny)
    approx = oseledets_from_matrices(P_M, P_N, cfg.modes, pushes=pushes,
                                     involution=involution)
    approx2 = oseledets_from_matrices(P_M2, P_N2, cfg.modes, involution=involution)
    _orthonormal_check(result, "modes", approx.spectral.vectors)
    _orthonormal_check(result, "independent modes", approx2.spectral.vectors)

    for j in range(cfg.modes):
        result.summary.append((f"amp_{j + 1}", float(approx.amplitudes[j])))
    for j in range(cfg.modes):
        result.summary.append((f"amp_indep_{j + 1}", float(approx2.amplitudes[j])))
    amp1 = float(approx.amplitudes[0])
    result.check("leading amplitude near one (volume preserved)", 0.9 < amp1 < 1.2,
                 f"amp_1={amp1:.4f}")
    P_cmp = pushes[compare_at]
    diag_fraction = float(P_cmp.matrix.diagonal().sum() / grid.n)
    result.check("most mass leaves its box over the comparison span",
                 diag_fraction < 0.5, f"diag fraction={diag_fraction:.3f}")

    # the mode whose sign splits the two mirror gyres is the antisymmetric
    # member of the leading pair; both computations must pick the same one
    coh = 2
    if approx.odd_fraction is not None and approx.odd_fraction[:2].max() > 0.5:
        coh = 1 + int(np.argmax(approx.odd_fraction[:2]))
    coh_ind = 2
    if approx2.odd_fraction is not None and approx2.odd_fraction[:2].max() > 0.5:
        coh_ind = 1 + int(np.argmax(approx2.odd_fraction[:2]))
    for j in range(cfg.modes):
        result.summary.append((f"odd_fraction_{j + 1}",
                               float(approx.odd_fraction[j])))
    result.summary.append(("coherence_mode", coh))

    pushed_end = approx.mode(compare_at, coh)
    independent = align_parity(approx2.mode(0.0, coh_ind), pushed_end)
    cos = _cosine(pushed_end, independent)
    result.summary.append(("pushforward_cos", cos))

    if log:
        log("scanning coherent pairs")
    pairs: dict[str, PairResult] = {}
    for direction, tag in (("+", "plus"), ("-", "minus")):
        pair = optimal_pair(grid, approx.mode(0.0, coh), independent, P_cmp, direction)
        pairs[direction] = pair
        result.summary += [
            (f"pair_{tag}_rho", pair.rho_star),
            (f"pair_{tag}_c", pair.c_star),
            (f"pair_{tag}_eta", pair.eta_star),
            (f"pair_{tag}_measure", pair.src.measure),
            (f"pair_{tag}_src_components", len(components(pair.src))),
            (f"pair_{tag}_dst_components", len(components(pair.dst))),
        ]
        agree = abs(pair.rho_star - rho_hat(P_cmp, pair.src, pair.dst))
        result.check(f"pair scan consistent with direct ratio ({direction})",
                     agree < 1e-12, f"diff={agree:.3e}")

    result.artifacts.update({
        "grid": grid, "modes": approx, "modes_compare": approx2, "pairs": pairs,
        "P_N": P_N, "P_M": P_M, "pushes": pushes,
        "independent_mode2": independent,
    })
    return result


_RUNNERS = {
    "single-map": run_single_map,
    "periodic3": run_periodic3,
    "aperiodic4": run_aperiodic4,
    "wave2d": run_wave2d,
}


def run_experiment(cfg: ExperimentConfig, log=None) -> ExperimentResult:
    cfg.validate()
    return _RUNNERS[cfg.experiment](cfg, log=log)
