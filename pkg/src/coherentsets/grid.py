"""Uniform box partitions of the state space and box-set utilities.

A :class:`Grid` partitions a rectangle (circle or cylinder when axes are
periodic) into equal-volume boxes, indexed row-major with the first axis
fastest.  Box sets carry their grid so measures and connectivity are always
computed with the right periodicity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Grid", "BoxSet", "DomainError", "locate", "test_points", "components", "measure"]

TWO_PI = 2.0 * np.pi


class DomainError(ValueError):
    """A point lies outside a nonperiodic axis range."""


@dataclass(frozen=True)
class Grid:
    """Uniform partition of a 1D or 2D rectangular domain.

    Boxes are half-open on their upper faces; the last box along a
    nonperiodic axis is closed so every domain point has a unique box.
    Flat indices run with the first axis fastest: ``flat = i1 * shape[0] + i0``.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    shape: tuple[int, ...]
    periodic: tuple[bool, ...]

    def __post_init__(self) -> None:
        dims = {len(self.lower), len(self.upper), len(self.shape), len(self.periodic)}
        if dims != {len(self.shape)}:
            raise ValueError("lower/upper/shape/periodic must have equal length")
        if len(self.shape) not in (1, 2):
            raise ValueError("only 1D and 2D grids are supported")
        if any(s < 1 for s in self.shape):
            raise ValueError("box counts must be positive")
        if any(u <= lo for lo, u in zip(self.lower, self.upper)):
            raise ValueError("upper bounds must exceed lower bounds")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def n(self) -> int:
        """Total number of boxes."""
        out = 1
        for s in self.shape:
            out *= s
        return out

    @property
    def widths(self) -> tuple[float, ...]:
        return tuple((u - lo) / s for lo, u, s in zip(self.lower, self.upper, self.shape))

    @classmethod
    def circle(cls, n: int) -> "Grid":
        """n boxes on the unit circle [0, 1) with periodic wraparound."""
        return cls(lower=(0.0,), upper=(1.0,), shape=(n,), periodic=(True,))

    @classmethod
    def cylinder(cls, nx: int, ny: int) -> "Grid":
        """nx-by-ny boxes on [0, 2*pi] x [0, pi], periodic in x only."""
        return cls(lower=(0.0, 0.0), upper=(TWO_PI, np.pi), shape=(nx, ny), periodic=(True, False))

    # -- indexing ---------------------------------------------------------

    def axis_indices(self, axis: int, coords: np.ndarray) -> np.ndarray:
        """Box index along one axis for an array of coordinates."""
        lo, hi = self.lower[axis], self.upper[axis]
        count = self.shape[axis]
        x = np.asarray(coords, dtype=float)
        if self.periodic[axis]:
            x = lo + np.mod(x - lo, hi - lo)
        else:
            if np.any((x < lo) | (x > hi)):
                bad = x[(x < lo) | (x > hi)]
                raise DomainError(f"coordinate {bad.flat[0]!r} outside [{lo}, {hi}] on axis {axis}")
        idx = np.floor((x - lo) / (hi - lo) * count).astype(np.int64)
        # upper-face points: wrap on periodic axes, close the last box otherwise
        idx[idx >= count] = 0 if self.periodic[axis] else count - 1
        return idx

    def ravel(self, per_axis: tuple[np.ndarray, ...]) -> np.ndarray:
        flat = np.zeros_like(per_axis[0])
        stride = 1
        for ax, idx in enumerate(per_axis):
            flat = flat + idx * stride
            stride *= self.shape[ax]
        return flat

    def unravel(self, flat: np.ndarray) -> tuple[np.ndarray, ...]:
        flat = np.asarray(flat, dtype=np.int64)
        out = []
        for s in self.shape:
            out.append(flat % s)
            flat = flat // s
        return tuple(out)

    def box_centers(self) -> np.ndarray:
        """Centers of all boxes, shape (n,) in 1D or (n, 2) in 2D."""
        axes = [
            self.lower[a] + (np.arange(self.shape[a]) + 0.5) * self.widths[a]
            for a in range(self.dim)
        ]
        if self.dim == 1:
            return axes[0]
        xx, yy = np.meshgrid(axes[0], axes[1], indexing="xy")
        return np.column_stack([xx.ravel(), yy.ravel()])

    def box_bounds(self, index: int) -> tuple[tuple[float, float], ...]:
        per_axis = self.unravel(np.asarray([index]))
        return tuple(
            (self.lower[a] + per_axis[a][0] * self.widths[a],
             self.lower[a] + (per_axis[a][0] + 1) * self.widths[a])
            for a in range(self.dim)
        )


@dataclass(frozen=True)
class BoxSet:
    """Sorted collection of box indices on a grid; measures are |set| / n."""

    grid: Grid
    indices: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        if idx and (idx[0] < 0 or idx[-1] >= self.grid.n):
            raise ValueError(f"box index outside [0, {self.grid.n})")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, index: int) -> bool:
        return index in set(self.indices)

    @property
    def measure(self) -> float:
        return len(self.indices) / self.grid.n

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.int64)

    def mask(self) -> np.ndarray:
        m = np.zeros(self.grid.n, dtype=bool)
        m[list(self.indices)] = True
        return m

    def union(self, other: "BoxSet") -> "BoxSet":
        self._check_grid(other)
        return BoxSet(self.grid, self.indices + other.indices)

    def intersection(self, other: "BoxSet") -> "BoxSet":
        self._check_grid(other)
        return BoxSet(self.grid, tuple(set(self.indices) & set(other.indices)))

    def symmetric_difference(self, other: "BoxSet") -> "BoxSet":
        self._check_grid(other)
        return BoxSet(self.grid, tuple(set(self.indices) ^ set(other.indices)))

    def _check_grid(self, other: "BoxSet") -> None:
        if other.grid != self.grid:
            raise ValueError("box sets live on different grids")


def locate(grid: Grid, points) -> np.ndarray | int:
    """Box index containing each point.

    Periodic coordinates are reduced modulo their period first; points
    outside a nonperiodic axis range raise :class:`DomainError`.
    """
    pts = np.asarray(points, dtype=float)
    scalar = False
    if grid.dim == 1:
        if pts.ndim == 0:
            scalar, pts = True, pts.reshape(1)
        flat = grid.axis_indices(0, pts)
    else:
        if pts.ndim == 1:
            scalar, pts = True, pts.reshape(1, 2)
        if pts.shape[-1] != 2:
            raise ValueError("2D grid expects points of shape (..., 2)")
        flat = grid.ravel(tuple(grid.axis_indices(a, pts[..., a]) for a in range(2)))
    return int(flat[0]) if scalar else flat


def test_points(grid: Grid, box: int, count: int) -> np.ndarray:
    """Deterministic midpoint lattice of ``count`` points inside one box.

    In 1D the points sit at offsets (q + 1/2)/count across the box; in 2D
    ``count`` must be a perfect square and the points form the analogous
    sqrt(count) x sqrt(count) lattice of cell midpoints.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if not 0 <= box < grid.n:
        raise ValueError(f"box index {box} outside [0, {grid.n})")
    per_axis = grid.unravel(np.asarray([box]))
    if grid.dim == 1:
        w = grid.widths[0]
        lo = grid.lower[0] + per_axis[0][0] * w
        return lo + (np.arange(count) + 0.5) / count * w
    side = round(float(np.sqrt(count)))
    if side * side != count:
        raise ValueError(f"2D test-point count must be a perfect square, got {count}")
    offsets = (np.arange(side) + 0.5) / side
    lows = [grid.lower[a] + per_axis[a][0] * grid.widths[a] for a in range(2)]
    xx, yy = np.meshgrid(lows[0] + offsets * grid.widths[0],
                         lows[1] + offsets * grid.widths[1], indexing="xy")
    return np.column_stack([xx.ravel(), yy.ravel()])


def _neighbours(grid: Grid, flat: int) -> list[int]:
    per_axis = [int(v[0]) for v in grid.unravel(np.asarray([flat]))]
    out = []
    for a in range(grid.dim):
        for step in (-1, 1):
            j = per_axis[a] + step
            if grid.periodic[a]:
                j %= grid.shape[a]
            elif not 0 <= j < grid.shape[a]:
                continue
            moved = list(per_axis)
            moved[a] = j
            out.append(int(grid.ravel(tuple(np.asarray([v]) for v in moved))[0]))
    return out


def components(boxset: BoxSet) -> list[BoxSet]:
    """Face-adjacent connected components, honouring periodic wraparound.

    Components are returned sorted by their smallest box index.
    """
    remaining = set(boxset.indices)
    comps: list[BoxSet] = []
    while remaining:
        seed = min(remaining)
        stack, comp = [seed], {seed}
        remaining.discard(seed)
        while stack:
            cur = stack.pop()
            for nb in _neighbours(boxset.grid, cur):
                if nb in remaining:
                    remaining.discard(nb)
                    comp.add(nb)
                    stack.append(nb)
        comps.append(BoxSet(boxset.grid, tuple(comp)))
    comps.sort(key=lambda c: c.indices[0])
    return comps


def measure(boxset: BoxSet) -> float:
    """Normalized Lebesgue measure: |indices| / n (full set has measure 1)."""
    return boxset.measure
