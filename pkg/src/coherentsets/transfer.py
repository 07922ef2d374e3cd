"""Projected transfer operators as sparse column-stochastic matrices.

Entry (i, j) estimates the fraction of box j that lands in box i over the
matrix's time interval, so densities evolve by left multiplication on column
vectors.  Matrices built from test-point counts keep the integer counts next
to the floating-point probabilities: column stochasticity is exact at the
count level (each column's counts sum to the number of test points).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .grid import BoxSet, Grid, locate, test_points
from .systems import FlowSystem, MapFamily, flow_points

__all__ = [
    "TransferMatrix", "Cocycle", "ulam_map", "ulam_flow", "ulam_flow_multi",
    "compose", "retime", "apply_density", "rho_hat",
    "save_coordinate_matrix", "load_coordinate_matrix",
]

_CHAIN_TOL = 1e-9


@dataclass(frozen=True)
class TransferMatrix:
    """Sparse estimate of a projected transfer operator over [t_start, t_end]."""

    matrix: sp.csc_matrix
    t_start: float
    t_end: float
    Q: int | None = None
    counts: sp.csc_matrix | None = None
    kind: str = "map"

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=0)).ravel()

    def counts_column_exact(self) -> bool:
        """Exact stochasticity: every column's integer counts sum to Q."""
        if self.counts is None or self.Q is None:
            return False
        sums = np.asarray(self.counts.sum(axis=0)).ravel()
        return bool(np.all(sums == self.Q))

    def is_column_stochastic(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.column_sums() - 1.0) <= tol))

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        return self.matrix.T @ v


@dataclass(frozen=True)
class Cocycle:
    """Time-ordered transfer matrices with contiguous intervals."""

    factors: tuple[TransferMatrix, ...]

    def __post_init__(self) -> None:
        if not self.factors:
            raise ValueError("cocycle needs at least one factor")
        for a, b in zip(self.factors, self.factors[1:]):
            if abs(a.t_end - b.t_start) > _CHAIN_TOL:
                raise ValueError(
                    f"non-contiguous cocycle: factor ending at {a.t_end} "
                    f"followed by factor starting at {b.t_start}")

    @property
    def t_start(self) -> float:
        return self.factors[0].t_start

    @property
    def t_end(self) -> float:
        return self.factors[-1].t_end

    def product(self) -> TransferMatrix:
        return compose(self)


def _counts_to_transfer(rows, cols, grid, Q, t_start, t_end, kind) -> TransferMatrix:
    data = np.ones(len(rows), dtype=np.int64)
    counts = sp.coo_matrix((data, (rows, cols)), shape=(grid.n, grid.n)).tocsc()
    counts.sum_duplicates()
    matrix = counts.astype(float)
    matrix.data /= Q
    return TransferMatrix(matrix=matrix, t_start=float(t_start), t_end=float(t_end),
                          Q=Q, counts=counts, kind=kind)


def _all_test_points(grid: Grid, Q: int) -> np.ndarray:
    pts = [test_points(grid, j, Q) for j in range(grid.n)]
    return np.concatenate(pts) if grid.dim == 1 else np.vstack(pts)


def ulam_map(grid: Grid, family: MapFamily, symbol: int, Q: int,
             t_start: float = 0.0) -> TransferMatrix:
    """One-step transfer matrix of a map, estimated from Q test points per box.

    Column j is the empirical image distribution of box j's midpoint lattice;
    the interval covered is [t_start, t_start + 1].
    """
    if Q < 1:
        raise ValueError("Q must be >= 1")
    pts = _all_test_points(grid, Q)
    images = family.apply(symbol, pts)
    rows = locate(grid, images)
    cols = np.repeat(np.arange(grid.n, dtype=np.int64), Q)
    return _counts_to_transfer(rows, cols, grid, Q, t_start, t_start + 1.0, "map")


def ulam_flow_multi(grid: Grid, system: FlowSystem, start: float,
                    durations: Sequence[float], Q: int,
                    workers: int = 1) -> list[TransferMatrix]:
    """Transfer matrices over [start, start + d] for several spans d from one flow.

    All spans share the same test points and one integration; snapshots are
    taken as each requested time is reached.  The matrix per span is the
    single-flow estimate (no intermediate projections).
    """
    if Q < 1:
        raise ValueError("Q must be >= 1")
    durations = sorted(float(d) for d in durations)
    if durations[0] <= 0:
        raise ValueError("durations must be positive")
    pts = _all_test_points(grid, Q)
    record_times = [start + d for d in durations]
    records, _, _ = flow_points(system, start, durations[-1], pts,
                                record_times=record_times, workers=workers)
    cols = np.repeat(np.arange(grid.n, dtype=np.int64), Q)
    out = []
    for d, snapshot in zip(durations, records):
        rows = locate(grid, snapshot)
        out.append(_counts_to_transfer(rows, cols, grid, Q, start, start + d, "flow"))
    return out


def ulam_flow(grid: Grid, system: FlowSystem, start: float, duration: float,
              Q: int, workers: int = 1) -> TransferMatrix:
    """Transfer matrix of the flow over [start, start + duration]."""
    return ulam_flow_multi(grid, system, start, [duration], Q, workers=workers)[0]


def retime(tm: TransferMatrix, t_start: float) -> TransferMatrix:
    """The same operator relabelled to start at another time (span preserved)."""
    span = tm.t_end - tm.t_start
    return TransferMatrix(matrix=tm.matrix, t_start=float(t_start),
                          t_end=float(t_start) + span, Q=tm.Q, counts=tm.counts,
                          kind=tm.kind)


def compose(cocycle: Cocycle | Sequence[TransferMatrix]) -> TransferMatrix:
    """Ordered product of a cocycle, later intervals applied on the left."""
    if not isinstance(cocycle, Cocycle):
        cocycle = Cocycle(tuple(cocycle))
    factors = cocycle.factors
    if len(factors) == 1:
        return factors[0]
    product = factors[0].matrix
    for tm in factors[1:]:
        product = tm.matrix @ product
    return TransferMatrix(matrix=sp.csc_matrix(product), t_start=cocycle.t_start,
                          t_end=cocycle.t_end, kind="product")


def apply_density(operator, f: np.ndarray) -> np.ndarray:
    """Push a coefficient vector forward; total mass is preserved."""
    matrix = operator.matrix if isinstance(operator, TransferMatrix) else operator
    f = np.asarray(f, dtype=float)
    if f.shape[0] != matrix.shape[1]:
        raise ValueError(f"density length {f.shape[0]} != matrix size {matrix.shape[1]}")
    return matrix @ f


def _as_indices(boxes) -> np.ndarray:
    if isinstance(boxes, BoxSet):
        return boxes.as_array()
    return np.asarray(boxes, dtype=np.int64)


def rho_hat(operator, src, dst) -> float:
    """Fraction of the source set's mass sent into the destination set.

    Valid as a coherence ratio because all boxes have equal measure:
    (sum over j in src, i in dst of P_ij) / |src|.
    """
    src_idx = _as_indices(src)
    dst_idx = _as_indices(dst)
    if src_idx.size == 0:
        raise ValueError("source set is empty")
    matrix = operator.matrix if isinstance(operator, TransferMatrix) else operator
    if sp.issparse(matrix):
        block = matrix[:, src_idx][dst_idx, :]
        total = float(block.sum())
    else:
        total = float(np.asarray(matrix)[np.ix_(dst_idx, src_idx)].sum())
    return total / src_idx.size


def save_coordinate_matrix(path, tm: TransferMatrix) -> None:
    """Coordinate-format text dump: metadata header then 'row col value' lines."""
    coo = tm.matrix.tocoo()
    order = np.lexsort((coo.row, coo.col))
    lines = [
        f"# n {tm.n}",
        f"# t_start {tm.t_start!r}",
        f"# t_end {tm.t_end!r}",
        f"# Q {tm.Q if tm.Q is not None else 'none'}",
        f"# kind {tm.kind}",
        f"# nnz {coo.nnz}",
    ]
    for k in order:
        lines.append(f"{coo.row[k]} {coo.col[k]} {float(coo.data[k])!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_coordinate_matrix(path) -> TransferMatrix:
    meta: dict[str, str] = {}
    rows, cols, vals = [], [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(" ")
                meta[key] = value
                continue
            r, c, v = line.split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(v))
    n = int(meta["n"])
    matrix = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()
    q = None if meta.get("Q") in (None, "none") else int(meta["Q"])
    return TransferMatrix(matrix=matrix, t_start=float(meta["t_start"]),
                          t_end=float(meta["t_end"]), Q=q, counts=None,
                          kind=meta.get("kind", "map"))
