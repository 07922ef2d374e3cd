"""Coherent-set extraction from mode vectors.

Sets are superlevel (or sublevel) sets of a mode vector.  Because the mode is
piecewise constant on boxes, only its distinct entries matter as thresholds:
the scan enumerates those, measure-matches the partner set, and maximizes the
mass-retention ratio.  Reported optimal thresholds follow the midpoint rule:
when the maximum is attained on an interval of thresholds, its midpoint is
returned.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import BoxSet, Grid, components
from .transfer import TransferMatrix, rho_hat

__all__ = [
    "ThresholdScan", "PairResult", "CoherentFamily",
    "threshold_set", "eta_match", "optimal_pair", "optimal_sequence",
    "connectify", "rho_profile",
]


def _check_direction(direction: str) -> None:
    if direction not in ("+", "-"):
        raise ValueError("direction must be '+' or '-'")


def threshold_set(grid: Grid, w: np.ndarray, c: float, direction: str = "+") -> BoxSet:
    """Boxes where the mode is strictly above (+) or below (-) the threshold."""
    _check_direction(direction)
    w = np.asarray(w, dtype=float)
    mask = w > c if direction == "+" else w < c
    return BoxSet(grid, tuple(np.nonzero(mask)[0]))


@dataclass(frozen=True)
class _Levels:
    """Achievable threshold sets of one vector in one direction.

    ``order`` enumerates boxes so that every achievable set is a prefix;
    candidate i selects the first ``counts[i]`` boxes, is produced by any
    threshold in the half-open segment between ``thresholds[i]`` and
    ``segment_ends[i]``, and has measure counts[i]/n.
    """

    direction: str
    order: np.ndarray
    thresholds: np.ndarray
    segment_ends: np.ndarray
    counts: np.ndarray

    def prefix_set(self, grid: Grid, count: int) -> BoxSet:
        return BoxSet(grid, tuple(self.order[:count]))


def _levels(w: np.ndarray, direction: str, max_count: int) -> _Levels:
    _check_direction(direction)
    w = np.asarray(w, dtype=float)
    signed = -w if direction == "+" else w
    order = np.argsort(signed, kind="stable")
    sorted_vals = w[order]
    # group boundaries of equal values along the enumeration order
    change = np.nonzero(np.diff(sorted_vals))[0]
    cum_counts = change + 1                      # achievable nonempty prefix sizes
    thresholds = sorted_vals[change + 1]         # set is {w > thr} resp. {w < thr}
    segment_ends = sorted_vals[change]           # other end of the constancy segment
    keep = cum_counts <= max_count
    return _Levels(direction, order, thresholds[keep], segment_ends[keep],
                   cum_counts[keep])


def _match_count(levels: _Levels, target: int, prefer_larger_threshold: bool = True):
    """Index of the achievable count nearest the target.

    Equidistant pairs resolve toward the larger threshold when requested
    (the default), i.e. the smaller set in the '+' direction and the larger
    set in the '-' direction.
    """
    counts = levels.counts
    if counts.size == 0:
        raise ValueError("no feasible threshold candidates")
    pos = int(np.searchsorted(counts, target))
    if pos == 0:
        return 0
    if pos == counts.size:
        return counts.size - 1
    lo, hi = pos - 1, pos
    d_lo, d_hi = target - counts[lo], counts[hi] - target
    if d_lo < d_hi:
        return lo
    if d_hi < d_lo:
        return hi
    if levels.direction == "+":
        return lo if prefer_larger_threshold else hi
    return hi if prefer_larger_threshold else lo


def eta_match(w_dst: np.ndarray, target_measure: float, direction: str = "+") -> float:
    """Threshold on the destination vector whose set measure best matches the target."""
    w_dst = np.asarray(w_dst, dtype=float)
    n = w_dst.shape[0]
    if not 0.0 < target_measure <= 0.5:
        raise ValueError("target measure must lie in (0, 1/2]")
    levels = _levels(w_dst, direction, n // 2)
    idx = _match_count(levels, round(target_measure * n))
    return float(levels.thresholds[idx])


def _staircase_totals(matrix, src_order: np.ndarray, dst_order: np.ndarray,
                      src_counts: np.ndarray, dst_counts: np.ndarray) -> np.ndarray:
    """Mass sums over a monotone staircase of (source, destination) prefixes.

    Every matrix entry is visited once: a column entry joins when its column
    enters the source prefix (if its row is already inside) and otherwise
    when its row enters the destination prefix.
    """
    n = matrix.shape[0]
    coo = matrix.tocoo()
    src_rank = np.empty(n, dtype=np.int64)
    src_rank[src_order] = np.arange(n)
    dst_rank = np.empty(n, dtype=np.int64)
    dst_rank[dst_order] = np.arange(n)
    ec = src_rank[coo.col]
    er = dst_rank[coo.row]
    vals = coo.data.astype(float)

    by_col = np.argsort(ec, kind="stable")
    ec_sorted, er_by_col, val_by_col = ec[by_col], er[by_col], vals[by_col]
    by_row = np.argsort(er, kind="stable")
    er_sorted, ec_by_row, val_by_row = er[by_row], ec[by_row], vals[by_row]

    totals = np.empty(len(src_counts))
    total = 0.0
    pc = pr = 0
    r_prev = 0
    for i, (m, r) in enumerate(zip(src_counts, dst_counts)):
        pc_new = int(np.searchsorted(ec_sorted, m, side="left"))
        if pc_new > pc:
            sl = slice(pc, pc_new)
            total += float(val_by_col[sl][er_by_col[sl] < r_prev].sum())
            pc = pc_new
        pr_new = int(np.searchsorted(er_sorted, r, side="left"))
        if pr_new > pr:
            sl = slice(pr, pr_new)
            total += float(val_by_row[sl][ec_by_row[sl] < m].sum())
            pr = pr_new
        r_prev = r
        totals[i] = total
    return totals


@dataclass(frozen=True)
class ThresholdScan:
    """Per-candidate scan record of one pair optimization."""

    direction: str
    thresholds: np.ndarray
    counts: np.ndarray
    measures: np.ndarray
    matched_thresholds: np.ndarray
    matched_counts: np.ndarray
    rhos: np.ndarray


@dataclass(frozen=True)
class PairResult:
    """Optimal measure-matched pair of threshold sets and its retention ratio."""

    direction: str
    c_star: float
    eta_star: float
    rho_star: float
    src: BoxSet
    dst: BoxSet
    scan: ThresholdScan


def _as_matrix(operator):
    return operator.matrix if isinstance(operator, TransferMatrix) else operator


def optimal_pair(grid: Grid, w_src: np.ndarray, w_dst: np.ndarray, operator,
                 direction: str = "+") -> PairResult:
    """Scan source thresholds, measure-match the destination, maximize retention.

    Both vectors must share the same parity.  Candidate thresholds are the
    distinct source entries with set measure in (0, 1/2]; equidistant measure
    matches are resolved toward the larger retention ratio.  The returned
    threshold is the midpoint of the maximizing threshold interval and the
    returned ratio is recomputed directly on the returned sets.
    """
    _check_direction(direction)
    matrix = _as_matrix(operator)
    n = grid.n
    src_levels = _levels(np.asarray(w_src, dtype=float), direction, n // 2)
    dst_levels = _levels(np.asarray(w_dst, dtype=float), direction, n // 2)
    if src_levels.counts.size == 0 or dst_levels.counts.size == 0:
        raise ValueError("no feasible threshold candidates")

    match_a = np.array([_match_count(dst_levels, int(m), True) for m in src_levels.counts])
    match_b = np.array([_match_count(dst_levels, int(m), False) for m in src_levels.counts])
    rho_a = _staircase_totals(matrix, src_levels.order, dst_levels.order,
                              src_levels.counts, dst_levels.counts[match_a]) / src_levels.counts
    rho_b = _staircase_totals(matrix, src_levels.order, dst_levels.order,
                              src_levels.counts, dst_levels.counts[match_b]) / src_levels.counts
    use_b = rho_b > rho_a
    rhos = np.where(use_b, rho_b, rho_a)
    matched = np.where(use_b, match_b, match_a)

    best = float(rhos.max())
    peak = np.nonzero(rhos == best)[0]
    run_start = run_end = int(peak[0])
    while run_end + 1 in peak:
        run_end += 1
    # candidates are ordered by growing count; the threshold interval spans from
    # the last run member's threshold to the first member's segment end
    c_star = 0.5 * (src_levels.thresholds[run_end] + src_levels.segment_ends[run_start])

    src = threshold_set(grid, w_src, float(c_star), direction)
    eta_idx = int(matched[run_start])
    for j in range(run_start, run_end + 1):
        if src_levels.counts[j] == len(src):
            eta_idx = int(matched[j])
            break
    eta_star = float(dst_levels.thresholds[eta_idx])
    dst = dst_levels.prefix_set(grid, int(dst_levels.counts[eta_idx]))
    rho_star = rho_hat(matrix, src, dst)

    scan = ThresholdScan(direction=direction,
                         thresholds=src_levels.thresholds.copy(),
                         counts=src_levels.counts.copy(),
                         measures=src_levels.counts / n,
                         matched_thresholds=dst_levels.thresholds[matched],
                         matched_counts=dst_levels.counts[matched],
                         rhos=rhos)
    return PairResult(direction=direction, c_star=float(c_star), eta_star=eta_star,
                      rho_star=float(rho_star), src=src, dst=dst, scan=scan)


@dataclass(frozen=True)
class CoherentFamily:
    """Equal-measure family of sets tracked through time.

    ``mean_rho`` is the scan value at the optimal common measure; ``rho``
    holds the per-step ratios recomputed on the final (connectivity-repaired)
    sets.
    """

    direction: str
    ell_star: float
    mean_rho: float
    thresholds: tuple[float, ...]
    sets: tuple[BoxSet, ...]
    raw_sets: tuple[BoxSet, ...]
    rho: tuple[float, ...]
    connected: tuple[bool, ...]


def optimal_sequence(grid: Grid, ws: Sequence[np.ndarray], operators: Sequence,
                     direction: str = "+") -> CoherentFamily:
    """Common-measure threshold family maximizing the mean retention ratio.

    Scans every achievable measure in (0, 1/2] (multiples of 1/n), picks per
    time the threshold whose set measure is nearest the target, and keeps the
    measure with the best mean ratio.  One-dimensional sets are repaired to
    intervals afterwards; ratios are recomputed on the repaired sets.
    """
    _check_direction(direction)
    if len(ws) != len(operators) + 1:
        raise ValueError("need one more mode vector than operators")
    n = grid.n
    K = len(operators)
    levels = [_levels(np.asarray(w, dtype=float), direction, n // 2) for w in ws]
    targets = np.arange(1, n // 2 + 1)
    picks = [np.array([_match_count(lv, int(m)) for m in targets]) for lv in levels]

    mean = np.zeros(len(targets))
    for k in range(K):
        src_counts = levels[k].counts[picks[k]]
        dst_counts = levels[k + 1].counts[picks[k + 1]]
        totals = _staircase_totals(_as_matrix(operators[k]), levels[k].order,
                                   levels[k + 1].order, src_counts, dst_counts)
        mean += totals / src_counts
    mean /= K

    best = int(np.argmax(mean))
    ell_star = float(targets[best]) / n
    thresholds = tuple(float(levels[k].thresholds[picks[k][best]]) for k in range(K + 1))
    raw_sets = tuple(levels[k].prefix_set(grid, int(levels[k].counts[picks[k][best]]))
                     for k in range(K + 1))
    if grid.dim == 1:
        sets = tuple(connectify(s) for s in raw_sets)
        connected = tuple(True for _ in sets)
    else:
        sets = raw_sets
        connected = tuple(len(components(s)) <= 1 for s in sets)
    rho = tuple(float(rho_hat(_as_matrix(operators[k]), sets[k], sets[k + 1]))
                for k in range(K))
    return CoherentFamily(direction=direction, ell_star=ell_star,
                          mean_rho=float(mean[best]), thresholds=thresholds,
                          sets=sets, raw_sets=raw_sets, rho=rho, connected=connected)


def rho_profile(grid: Grid, ws: Sequence[np.ndarray], operators: Sequence,
                measures_above_half: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Mean retention ratio against the common measure, for reporting.

    Measures up to 1/2 use superlevel sets; beyond 1/2 (when requested) the
    sublevel branch supplies the sets of matching measure, mirroring how the
    two branches cover complementary measures.
    """
    n = grid.n
    K = len(operators)
    top = n - 1 if measures_above_half else n // 2
    targets = np.arange(1, top + 1)
    curves = np.zeros(len(targets))
    for direction, lo, hi in (("+", 1, n // 2), ("-", n // 2 + 1, top)):
        sel = (targets >= lo) & (targets <= hi)
        if not np.any(sel):
            continue
        sub = targets[sel]
        levels = [_levels(np.asarray(w, dtype=float), direction, top) for w in ws]
        picks = [np.array([_match_count(lv, int(m)) for m in sub]) for lv in levels]
        mean = np.zeros(len(sub))
        for k in range(K):
            src_counts = levels[k].counts[picks[k]]
            dst_counts = levels[k + 1].counts[picks[k + 1]]
            totals = _staircase_totals(_as_matrix(operators[k]), levels[k].order,
                                       levels[k + 1].order, src_counts, dst_counts)
            mean += totals / src_counts
        curves[sel] = mean / K
    return targets / n, curves


def _component_start(grid: Grid, comp: BoxSet) -> int:
    n = grid.n
    idx = set(comp.indices)
    if grid.periodic[0] and 0 in idx and (n - 1) in idx and len(idx) < n:
        for s in sorted(idx):
            if (s - 1) % n not in idx:
                return s
    return comp.indices[0]


def connectify(boxset: BoxSet) -> BoxSet:
    """Replace a 1D set by the equal-count interval nearest to it.

    Among all contiguous runs of the same box count (arcs, when the axis is
    periodic), returns the one minimizing the symmetric difference; remaining
    ties resolve to the run starting nearest the first component's start,
    then to the smallest start index.  Connected inputs pass through.
    """
    grid = boxset.grid
    if grid.dim != 1:
        raise ValueError("interval repair applies to 1D sets only")
    if len(boxset) == 0:
        raise ValueError("cannot repair the empty set")
    comps = components(boxset)
    if len(comps) <= 1:
        return boxset
    n, b = grid.n, len(boxset)
    periodic = grid.periodic[0]
    mask = boxset.mask().astype(np.int64)
    if periodic:
        cum = np.concatenate([[0], np.cumsum(np.concatenate([mask, mask]))])
        starts = np.arange(n)
    else:
        cum = np.concatenate([[0], np.cumsum(mask)])
        starts = np.arange(n - b + 1)
    overlaps = cum[starts + b] - cum[starts]
    best = overlaps.max()
    anchor = _component_start(grid, comps[0])
    candidates = starts[overlaps == best]
    if periodic:
        dist = np.minimum((candidates - anchor) % n, (anchor - candidates) % n)
    else:
        dist = np.abs(candidates - anchor)
    start = int(candidates[np.lexsort((candidates, dist))[0]])
    indices = (start + np.arange(b)) % n if periodic else start + np.arange(b)
    return BoxSet(grid, tuple(int(i) for i in indices))
