"""Slowly decaying modes of matrix cocycles.

The leading right singular vectors of a long-span transfer matrix seed the
equivariant mode family: pushing them forward along the cocycle approximates
the time-dependent modes, and the singular values raised to one over the span
give per-unit-time decay amplitudes.  The solver works matrix-free through
repeated application of v -> P^T (P v); a dense route is kept alongside as an
independent oracle for moderate sizes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .transfer import Cocycle, TransferMatrix, compose

__all__ = [
    "SpectralResult", "OseledetsApprox", "NonConvergenceError",
    "normalize_l1", "sign_convention", "align_parity",
    "top_k_singular", "oseledets_approx", "oseledets_from_steps",
    "oseledets_from_matrices", "convergence_delta", "positive_part_bound",
    "resolve_degenerate_sectors",
]

_DENSE_LIMIT = 4096


class NonConvergenceError(RuntimeError):
    """Orthogonal iteration failed to settle; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def normalize_l1(v: np.ndarray) -> np.ndarray:
    """Scale to unit 1-norm; the zero vector has no direction to keep."""
    v = np.asarray(v, dtype=float)
    total = np.abs(v).sum()
    if total == 0:
        raise ValueError("cannot normalize the zero vector")
    return v / total


def sign_convention(v: np.ndarray) -> np.ndarray:
    """Orient a vector so its largest-magnitude entry is positive.

    Near-ties (within 1e-12 relative) resolve to the lowest index so that
    exactly symmetric vectors still orient deterministically.
    """
    v = np.asarray(v, dtype=float)
    peak = np.abs(v).max()
    if peak == 0:
        return v
    lead = int(np.nonzero(np.abs(v) >= peak * (1.0 - 1e-12))[0][0])
    return -v if v[lead] < 0 else v


def align_parity(v: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Flip v if it points against the reference vector."""
    return -v if float(np.dot(v, reference)) < 0 else np.asarray(v, dtype=float)


@dataclass(frozen=True)
class SpectralResult:
    """Top singular triplet data of a long-span transfer matrix.

    ``vectors`` holds orthonormal right singular vectors as columns;
    ``amplitudes`` are the per-unit-time values sigma**(1/span).
    """

    singular_values: np.ndarray
    vectors: np.ndarray
    amplitudes: np.ndarray
    span: float
    method: str
    iterations: int
    residual: float

    @property
    def k(self) -> int:
        return self.vectors.shape[1]


def _as_matrix(operator):
    if isinstance(operator, TransferMatrix):
        return operator.matrix, operator.t_end - operator.t_start
    return operator, None


def _subspace_distance(a: np.ndarray, b: np.ndarray) -> float:
    # sine of the largest principal angle, computed without cancellation
    residual = b - a @ (a.T @ b)
    return float(np.linalg.norm(residual, 2))


def top_k_singular(operator, k: int, tol: float = 1e-10, max_iter: int = 5000,
                   method: str = "iterative", oversample: int = 2,
                   span: float | None = None, seed: int = 0) -> SpectralResult:
    """Leading k singular values and right singular vectors.

    ``iterative`` runs block orthogonal iteration on the normal operator
    v -> P^T (P v) with a small oversampled block, re-orthonormalizing each
    sweep and extracting Ritz pairs; convergence is declared once the top-k
    Ritz subspace rotates less than ``tol`` between sweeps.  ``dense`` takes
    a full decomposition of the dense matrix and serves as the validation
    oracle for sizes up to a few thousand.

    The amplitudes are sigma**(1/span); the span defaults to the operator's
    time interval when available, else 1.
    """
    matrix, meta_span = _as_matrix(operator)
    n = matrix.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k must be in [1, {n}]")
    span = float(span if span is not None else (meta_span if meta_span else 1.0))
    if span <= 0:
        raise ValueError("span must be positive")

    if method == "dense":
        if n > _DENSE_LIMIT:
            raise ValueError(f"dense route limited to n <= {_DENSE_LIMIT}")
        dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, dtype=float)
        _, s, vt = np.linalg.svd(dense)
        values = s[:k]
        vectors = vt[:k].T.copy()
        return SpectralResult(values, vectors, values ** (1.0 / span), span,
                              "dense", 0, 0.0)
    if method != "iterative":
        raise ValueError("method must be 'iterative' or 'dense'")

    block = min(n, k + max(0, oversample))
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((n, block)))
    prev_top: np.ndarray | None = None
    prev_theta: np.ndarray | None = None
    rotation = np.inf
    best_rotation = np.inf
    stagnant = 0
    for sweep in range(1, max_iter + 1):
        image = matrix.T @ (matrix @ basis)
        basis, _ = np.linalg.qr(image)
        ritz_matrix = basis.T @ (matrix.T @ (matrix @ basis))
        ritz_matrix = 0.5 * (ritz_matrix + ritz_matrix.T)
        theta, rot = np.linalg.eigh(ritz_matrix)
        order = np.argsort(theta)[::-1]
        theta = theta[order]
        ritz_vectors = basis @ rot[:, order]
        top = ritz_vectors[:, :k]
        # a top-j subspace is numerically determined only when the value gap
        # at its boundary is resolved; within a degenerate cluster any basis
        # is equally valid and its rotation carries no information
        padded = np.concatenate([theta, [0.0]])
        resolved = 0
        for j in range(1, k + 1):
            if padded[j - 1] - padded[j] > 1e-11 * max(theta[0], 0.0):
                resolved = j
        if prev_top is not None and prev_theta is not None:
            values_settled = bool(np.all(np.abs(theta[:k] - prev_theta[:k])
                                         <= max(tol, 1e-13) * max(theta[0], 1e-300)))
            if resolved:
                rotation = _subspace_distance(prev_top[:, :resolved], top[:, :resolved])
            else:
                rotation = 0.0
            values = np.sqrt(np.clip(theta[:k], 0.0, None))
            if rotation < tol and values_settled:
                return SpectralResult(values, top, values ** (1.0 / span), span,
                                      "iterative", sweep, rotation)
            # clustered boundary values can pin the per-sweep rotation at a
            # roundoff plateau; once it stops improving the Ritz values are
            # long converged (their error is quadratic in the vector error)
            if rotation < 0.95 * best_rotation:
                best_rotation = rotation
                stagnant = 0
            else:
                stagnant += 1
                if stagnant >= 100 and best_rotation < 1e-4 and values_settled:
                    return SpectralResult(values, top, values ** (1.0 / span), span,
                                          "iterative", sweep, rotation)
        prev_top = top
        prev_theta = theta
    raise NonConvergenceError(
        f"orthogonal iteration did not converge in {max_iter} sweeps "
        f"(last rotation {rotation:.3e})", rotation)


def resolve_degenerate_sectors(vectors: np.ndarray, values: np.ndarray,
                               involution: np.ndarray,
                               rel_tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Rotate near-degenerate singular-vector groups onto symmetry sectors.

    When the dynamics commutes with a grid involution (a permutation with
    period two), modes localized on mirror-image structures come in pairs of
    nearly equal singular value, and any rotation inside such a pair is an
    equally valid singular basis.  This picks the canonical gauge: within
    each group of values agreeing to ``rel_tol`` (relative to the leading
    value), the basis is rotated so each vector is purely symmetric or purely
    antisymmetric under the involution, ordered symmetric-first.

    Returns the rotated vectors and the antisymmetric-energy fraction of
    each (0 for symmetric modes, 1 for antisymmetric ones).
    """
    vectors = np.array(vectors, dtype=float)
    n, k = vectors.shape
    involution = np.asarray(involution, dtype=np.int64)
    if involution.shape != (n,) or not np.array_equal(involution[involution],
                                                      np.arange(n)):
        raise ValueError("involution must be a self-inverse permutation of the boxes")
    scale = max(float(values[0]), 1e-300)
    start = 0
    while start < k:
        stop = start + 1
        while stop < k and values[start] - values[stop] <= rel_tol * scale:
            stop += 1
        if stop - start > 1:
            block = vectors[:, start:stop]
            odd = 0.5 * (block - block[involution, :])
            gram = odd.T @ odd
            _, rot = np.linalg.eigh(0.5 * (gram + gram.T))
            vectors[:, start:stop] = block @ rot  # symmetric-most first
        start = stop
    odd_fraction = np.array([
        float(np.linalg.norm(0.5 * (vectors[:, j] - vectors[involution, j])) ** 2
              / max(np.linalg.norm(vectors[:, j]) ** 2, 1e-300))
        for j in range(k)
    ])
    return vectors, odd_fraction


@dataclass(frozen=True)
class OseledetsApprox:
    """Approximate equivariant modes at a list of checkpoint times.

    ``vectors[t]`` is an (n, k) array whose columns are the per-mode vectors
    at checkpoint t, each of unit 1-norm.  Orientation is fixed at the first
    checkpoint (largest-magnitude entry positive) and inherited by push
    forward, so the family shares one parity.  ``odd_fraction`` records each
    mode's antisymmetric energy when a symmetry involution was supplied.
    """

    amplitudes: np.ndarray
    times: tuple[float, ...]
    vectors: dict[float, np.ndarray]
    spectral: SpectralResult
    decay_span: float
    push_span: float
    odd_fraction: np.ndarray | None = None

    @property
    def k(self) -> int:
        return len(self.amplitudes)

    def mode(self, time: float, j: int) -> np.ndarray:
        """Mode j (1-based) at a checkpoint time."""
        return self.vectors[time][:, j - 1]


def oseledets_from_steps(steps: Sequence[TransferMatrix], M: int, N: int, k: int,
                         checkpoints: Sequence[int] = (0,),
                         method: str = "iterative", tol: float = 1e-10,
                         max_iter: int = 5000) -> OseledetsApprox:
    """Mode family of a discrete cocycle given its unit-step matrices.

    ``steps[i]`` must cover step -N + i, so the list spans the decay window
    of length M and reaches every requested checkpoint.  Singular vectors of
    the M-step product seed the modes; pushing them N + t steps lands the
    approximation at checkpoint t.
    """
    if not 0 <= N <= M:
        raise ValueError("need 0 <= N <= M")
    checkpoints = sorted(int(t) for t in checkpoints)
    if checkpoints[0] < 0:
        raise ValueError("checkpoints precede the push window")
    needed = max(M, N + checkpoints[-1])
    if len(steps) < needed:
        raise ValueError(f"need {needed} step matrices, got {len(steps)}")
    Cocycle(tuple(steps[:needed]))  # validates contiguity

    spectral = top_k_singular(compose(steps[:M]), k, tol=tol, max_iter=max_iter,
                              method=method, span=float(M))
    seeds = spectral.vectors.copy()

    vectors: dict[float, np.ndarray] = {}
    current = seeds
    position = 0
    for t in checkpoints:
        while position < N + t:
            current = steps[position].matrix @ current
            position += 1
        vectors[float(t)] = np.column_stack([normalize_l1(current[:, j]) for j in range(k)])
    first = checkpoints[0]
    flips = np.array([
        1.0 if np.array_equal(sign_convention(vectors[float(first)][:, j]),
                              vectors[float(first)][:, j]) else -1.0
        for j in range(k)
    ])
    for t in vectors:
        vectors[t] = vectors[t] * flips
    return OseledetsApprox(amplitudes=spectral.amplitudes,
                           times=tuple(float(t) for t in checkpoints),
                           vectors=vectors, spectral=spectral,
                           decay_span=float(M), push_span=float(N))


def oseledets_from_matrices(P_M: TransferMatrix, P_N: TransferMatrix, k: int,
                            pushes: Mapping[float, TransferMatrix] | None = None,
                            involution: np.ndarray | None = None,
                            method: str = "iterative", tol: float = 1e-10,
                            max_iter: int = 5000) -> OseledetsApprox:
    """Mode family from long-flow matrices (continuous-time route).

    ``P_M`` spans the decay window starting at the pushed-back time, ``P_N``
    the push window ending at the base time; checkpoints beyond the base are
    reached with the ``pushes`` matrices, keyed by their span past the base.
    An ``involution`` the dynamics commutes with pins the gauge of
    near-degenerate mode pairs to symmetry sectors before pushing.
    """
    if abs(P_M.t_start - P_N.t_start) > 1e-9:
        raise ValueError("decay and push windows must start together")
    spectral = top_k_singular(P_M, k, tol=tol, max_iter=max_iter, method=method)
    seeds = spectral.vectors
    odd_fraction = None
    if involution is not None:
        seeds, odd_fraction = resolve_degenerate_sectors(
            seeds, spectral.singular_values, involution)
    base = P_N.t_end - P_N.t_start
    pushed = P_N.matrix @ seeds
    base_vectors = np.column_stack([sign_convention(normalize_l1(pushed[:, j]))
                                    for j in range(k)])
    vectors = {0.0: base_vectors}
    times = [0.0]
    for t, tm in sorted((pushes or {}).items()):
        moved = tm.matrix @ base_vectors
        vectors[float(t)] = np.column_stack([normalize_l1(moved[:, j]) for j in range(k)])
        times.append(float(t))
    return OseledetsApprox(amplitudes=spectral.amplitudes, times=tuple(times),
                           vectors=vectors, spectral=spectral,
                           decay_span=P_M.t_end - P_M.t_start, push_span=base,
                           odd_fraction=odd_fraction)


def oseledets_approx(ctx, M, N, k, checkpoints=(0,), **kwargs) -> OseledetsApprox:
    """Dispatch on context: a sequence of unit steps or prebuilt long matrices."""
    if isinstance(ctx, (list, tuple)):
        return oseledets_from_steps(ctx, int(M), int(N), k, checkpoints, **kwargs)
    if isinstance(ctx, dict):
        return oseledets_from_matrices(ctx["P_M"], ctx["P_N"], k,
                                       pushes=ctx.get("pushes"), **kwargs)
    raise TypeError("ctx must be a step sequence or a matrix dict")


def _second_mode(steps: Sequence[TransferMatrix], window: int, push: int) -> np.ndarray:
    spectral = top_k_singular(compose(steps[:window]), 2, span=float(window))
    v = spectral.vectors[:, 1]
    v = compose(steps[:push]).matrix @ v if push else v
    return normalize_l1(v)


def convergence_delta(step_at: Callable[[int], TransferMatrix] | Mapping[int, TransferMatrix],
                      N_range: Sequence[int]) -> list[tuple[int, float]]:
    """Equivariance defect of the second mode against its one-step push.

    For each N the mode is approximated with decay window 2N and push N at
    two consecutive base times; the defect is the 1-norm distance between the
    later mode and the pushed earlier mode, both unit-normalized, with signs
    aligned so an overall flip of either vector cannot inflate the distance.
    """
    if isinstance(step_at, Mapping):
        table = step_at
        step_at = lambda j: table[j]  # noqa: E731
    out = []
    for N in N_range:
        N = int(N)
        steps0 = [step_at(j) for j in range(-N, N)]
        steps1 = [step_at(j) for j in range(1 - N, 1 + N)]
        v0 = _second_mode(steps0, 2 * N, N)
        v1 = _second_mode(steps1, 2 * N, N)
        pushed = normalize_l1(step_at(0).matrix @ v0)
        delta = min(np.abs(v1 - pushed).sum(), np.abs(v1 + pushed).sum())
        out.append((N, float(delta)))
    return out


def positive_part_bound(operator, f2: np.ndarray) -> tuple[float, float, bool]:
    """Check that pushing the positive part stays close to the pushed-mode positive part.

    For a zero-sum, unit-1-norm vector under a nonnegative sum-preserving
    matrix the gap ||P f+ - (P f)+||_1 equals (1 - ||P f||_1)/2, so the bound
    holds with equality at the matrix level.  Returns (lhs, rhs, holds).
    """
    matrix = operator.matrix if isinstance(operator, TransferMatrix) else operator
    f2 = np.asarray(f2, dtype=float)
    if abs(f2.sum()) > 1e-8:
        raise ValueError("mode vector must have zero sum")
    if abs(np.abs(f2).sum() - 1.0) > 1e-8:
        raise ValueError("mode vector must have unit 1-norm")
    pushed_pos = matrix @ np.clip(f2, 0.0, None)
    pushed = matrix @ f2
    lhs = float(np.abs(pushed_pos - np.clip(pushed, 0.0, None)).sum())
    rhs = float((1.0 - np.abs(pushed).sum()) / 2.0)
    return lhs, rhs, lhs <= rhs + 1e-10
