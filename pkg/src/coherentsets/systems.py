"""The driven dynamical systems: circle-map families, the aperiodic symbol
sequence that drives them, and the chaotically forced travelling wave.

Discrete time: piecewise-affine slope-3 circle maps, composed according to a
subshift-constrained symbol sequence.  Continuous time: a travelling-wave
velocity field on the cylinder [0, 2*pi] x [0, pi] whose generalized time is
the first component of a scaled chaotic driving system, integrated jointly
with classical fixed-step RK4.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import isqrt
from typing import Callable

import numpy as np

from . import _rk4

__all__ = [
    "MapFamily", "map_family", "eval_H", "eval_T", "rotate",
    "DrivingTrack", "driving_symbols", "ADJACENCY_4",
    "FlowSystem", "lorenz_rhs", "wave_rhs", "driving_state", "flow", "flow_points",
    "IntegrationError",
]

TWO_PI = 2.0 * np.pi

#: Default slope-3 perturbation sizes for the four-map family.
PERTURBATIONS_4 = tuple(v / 40.0 for v in (np.pi, 2.0 * np.sqrt(2.0), np.sqrt(3.0), np.e))

#: Integer offset vectors for the six-branch affine maps.
SINGLE_OFFSETS = (0, 0, 1, 4, 3, 3)
PERIODIC3_OFFSETS = ((3, 2, 2, 0, 5, 5), (2, 1, 4, 5, 4, 1), (1, 3, 3, 4, 0, 0))

#: Allowed symbol transitions for the four-map family (1-based symbols).
ADJACENCY_4 = np.array([[1, 1, 0, 0],
                        [0, 0, 1, 1],
                        [1, 1, 0, 0],
                        [0, 0, 1, 1]], dtype=np.int64)


class IntegrationError(RuntimeError):
    """The integrator produced a nonfinite state."""


# ---------------------------------------------------------------------------
# circle maps
# ---------------------------------------------------------------------------

def eval_H(a: float, x) -> np.ndarray | float:
    """Five-branch piecewise-linear circle map with near-invariant halves.

    For ``a`` close to zero the intervals [0, 1/2] and [1/2, 1] each recycle
    all but a 2a-fraction of their mass per application.  Values are reduced
    modulo 1.
    """
    xv = np.asarray(x, dtype=float)
    b1 = 1.0 / 6.0 + 0.5 * a
    b2 = 1.0 / 3.0 + 2.0 * a / 3.0
    b3 = 2.0 / 3.0 + 2.0 * a / 3.0
    b4 = 5.0 / 6.0 + 0.5 * a
    out = np.select(
        [xv < b1, xv < b2, xv < b3, xv < b4],
        [3.0 * xv, -3.0 * xv + 3.0 * a + 1.0, 3.0 * xv - a - 1.0, -3.0 * xv + 3.0 * a + 3.0],
        default=3.0 * xv - 2.0,
    )
    out = np.mod(out, 1.0)
    return float(out) if np.isscalar(x) else out


def rotate(x, quarter_turns: int = 1):
    """Rigid rotation by quarter_turns/4 on the unit circle."""
    out = np.mod(np.asarray(x, dtype=float) + quarter_turns * 0.25, 1.0)
    return float(out) if np.isscalar(x) else out


def _slope3(offsets: tuple[int, ...], x) -> np.ndarray | float:
    """Six-branch affine map 3x - (i-1)/2 + a_i/6 on branch i of the 6-partition.

    Integer offsets keep the 6-box partition invariant, so the projected
    transfer matrix is exact on that partition.
    """
    xv = np.asarray(x, dtype=float)
    branch = np.clip(np.floor(xv * 6.0).astype(np.int64), 0, 5)
    a = np.asarray(offsets, dtype=float)[branch]
    out = np.mod(3.0 * xv - branch / 2.0 + a / 6.0, 1.0)
    return float(out) if np.isscalar(x) else out


@dataclass(frozen=True)
class MapFamily:
    """A named collection of circle maps indexed by 1-based symbols."""

    name: str
    symbols: tuple[int, ...]
    adjacency: np.ndarray | None
    _maps: dict[int, Callable] = field(default_factory=dict, repr=False)

    def apply(self, symbol: int, x):
        if symbol not in self._maps:
            raise ValueError(f"unknown symbol {symbol} for family {self.name!r}")
        return self._maps[symbol](x)

    def map(self, symbol: int) -> Callable:
        if symbol not in self._maps:
            raise ValueError(f"unknown symbol {symbol} for family {self.name!r}")
        return self._maps[symbol]

    def allowed(self, sym_from: int, sym_to: int) -> bool:
        if self.adjacency is None:
            return True
        return bool(self.adjacency[sym_from - 1, sym_to - 1])


def map_family(name: str,
               perturbations: tuple[float, float, float, float] = PERTURBATIONS_4) -> MapFamily:
    """Construct one of the named map families.

    ``single``: one six-branch affine map with an almost-invariant half.
    ``periodic3``: three six-branch maps composed cyclically.
    ``aperiodic4``: four maps built from the five-branch map conjugated and
    composed with quarter rotations, driven by a subshift of finite type.
    """
    if name == "single":
        maps = {1: lambda x: _slope3(SINGLE_OFFSETS, x)}
        return MapFamily("single", (1,), None, maps)
    if name == "periodic3":
        maps = {j + 1: (lambda x, o=o: _slope3(o, x)) for j, o in enumerate(PERIODIC3_OFFSETS)}
        cyclic = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=np.int64)
        return MapFamily("periodic3", (1, 2, 3), cyclic, maps)
    if name == "aperiodic4":
        a1, a2, a3, a4 = perturbations
        maps = {
            1: lambda x: eval_H(a1, x),
            2: lambda x: rotate(eval_H(a2, x)),
            3: lambda x: eval_H(a3, rotate(x, -1)),
            4: lambda x: rotate(eval_H(a4, rotate(x, -1))),
        }
        return MapFamily("aperiodic4", (1, 2, 3, 4), ADJACENCY_4.copy(), maps)
    raise ValueError(f"unknown map family {name!r}")


def eval_T(family: MapFamily, symbol: int, x):
    """Image of x under the family's map for the given symbol, mod 1."""
    return family.apply(symbol, x)


# ---------------------------------------------------------------------------
# driving symbol sequence
# ---------------------------------------------------------------------------

def _inv_sqrt3_bit(i: int) -> int:
    """i-th binary digit of 1/sqrt(3), exact for every i >= 1.

    floor(2^i / sqrt(3)) = isqrt(4^i // 3) because 4^i = 1 (mod 3), so the
    digit comes out of integer square roots only; no floating point drift.
    """
    if i <= 0:
        return 0
    return isqrt(4 ** i // 3) - 2 * isqrt(4 ** (i - 1) // 3)


@dataclass(frozen=True)
class DrivingTrack:
    """A finite window of the driving symbol sequence with its subshift rule."""

    k_min: int
    k_max: int
    symbols: tuple[int, ...]
    adjacency: np.ndarray

    def symbol(self, k: int) -> int:
        if not self.k_min <= k <= self.k_max:
            raise ValueError(f"symbol index {k} outside window [{self.k_min}, {self.k_max}]")
        return self.symbols[k - self.k_min]

    def is_admissible(self) -> bool:
        return all(
            self.adjacency[self.symbols[j] - 1, self.symbols[j + 1] - 1] == 1
            for j in range(len(self.symbols) - 1)
        )


def driving_symbols(k_min: int = -25, k_max: int = 25) -> DrivingTrack:
    """Aperiodic symbol sequence from paired binary digits of 1/sqrt(3).

    Symbol k equals 1 + 2*b(k+25) + b(k+26) where b(i) is the i-th binary
    digit (zero for i <= 0).  Consecutive pairs are automatically admissible
    for the four-map subshift.
    """
    if k_max < k_min:
        raise ValueError("empty symbol window")
    syms = tuple(1 + 2 * _inv_sqrt3_bit(k + 25) + _inv_sqrt3_bit(k + 26)
                 for k in range(k_min, k_max + 1))
    return DrivingTrack(k_min, k_max, syms, ADJACENCY_4.copy())


# ---------------------------------------------------------------------------
# continuous-time driven flow
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowSystem:
    """Chaotic driving system plus the travelling-wave field it forces.

    ``ztilde_mode`` selects how the generalized time enters the wave field:
    ``scaled`` multiplies the first driving component by the driving time
    scale (used by the mixing experiment, with amplitude modulation and the
    jet perturbation), ``direct`` uses it unscaled with constant amplitude.
    """

    sigma: float = 10.0
    beta: float = 8.0 / 3.0
    rho: float = 28.0
    tau: float = 6.6685
    z0: tuple[float, float, float] = (0.0, 1.0, 1.5)
    z0_time: float = 0.0
    drift: float = 0.5
    amplitude: float = 1.0
    nu: float = 0.25
    epsilon: float = 1.0
    amp_coeff: float = 0.125
    amp_freq: float = float(np.sqrt(5.0))
    perturbed: bool = True
    ztilde_mode: str = "scaled"
    h: float = 0.01

    def __post_init__(self) -> None:
        if self.ztilde_mode not in ("scaled", "direct"):
            raise ValueError("ztilde_mode must be 'scaled' or 'direct'")
        if self.h <= 0:
            raise ValueError("integrator step must be positive")

    @property
    def ztilde_factor(self) -> float:
        return self.tau if self.ztilde_mode == "scaled" else 1.0


def lorenz_rhs(z, system: FlowSystem = FlowSystem()) -> np.ndarray:
    """Scaled driving vector field."""
    z1, z2, z3 = (float(v) for v in z)
    return np.array([
        system.sigma * (z2 - z1) / system.tau,
        (system.rho * z1 - z2 - z1 * z3) / system.tau,
        (-system.beta * z3 + z1 * z2) / system.tau,
    ])


def wave_rhs(ztilde: float, x, y, perturbed: bool = True,
             system: FlowSystem = FlowSystem()):
    """Travelling-wave velocity at generalized time ``ztilde``.

    The normal component vanishes on both walls y = 0 and y = pi.  In the
    perturbed wiring the amplitude is modulated and a localized forcing term
    is added to the x-component only.
    """
    xv = np.asarray(x, dtype=float)
    yv = np.asarray(y, dtype=float)
    if perturbed:
        amp = system.amplitude + system.amp_coeff * np.sin(system.amp_freq * ztilde)
    else:
        amp = system.amplitude
    phase = xv - system.nu * ztilde
    dx = system.drift - amp * np.sin(phase) * np.cos(yv)
    dy = amp * np.cos(phase) * np.sin(yv)
    if perturbed:
        g = np.sin(phase) * np.sin(yv) + 0.5 * yv - np.pi / 4.0
        dx = dx + system.epsilon * np.sin(0.5 * ztilde) / (g * g + 1.0) ** 2
    if np.isscalar(x) and np.isscalar(y):
        return float(dx), float(dy)
    return dx, dy


def _drive(system: FlowSystem, z, duration: float, h: float):
    """Integrate the driving system alone for a signed duration."""
    if duration == 0:
        return tuple(float(v) for v in z)
    hs = _rk4.step_sizes(abs(duration), h)
    if duration < 0:
        hs = -hs
    state = tuple(float(v) for v in z)
    for step in hs:
        state, _ = _rk4.lorenz_stages(state, float(step), system.sigma, system.beta,
                                      system.rho, system.tau)
    return state


def driving_state(system: FlowSystem, t: float) -> np.ndarray:
    """Driving state at time t on the orbit anchored at (z0_time, z0).

    Reaches before the anchor integrate in reverse with a tenfold finer step.
    The driving flow is invertible, but off its attractor it expands strongly
    in reverse, so long backward reaches are unreliable; anchor the orbit at
    the earliest time an experiment needs (``z0_time``) to keep every reach
    forward.
    """
    duration = t - system.z0_time
    h = system.h if duration >= 0 else system.h / 10.0
    z = _drive(system, system.z0, duration, h)
    if not all(np.isfinite(z)):
        raise IntegrationError(f"driving state nonfinite at t={t}")
    return np.asarray(z)


def flow_points(system: FlowSystem, t0: float, duration: float, points: np.ndarray,
                record_times=None, workers: int = 1):
    """Advect many cylinder points from time t0 for a positive duration.

    ``record_times`` (absolute times in (t0, t0+duration], on the step
    lattice) selects intermediate snapshots; the final time is always
    available as the in-place result.  Returns (records, z_final) where
    records is a list of (N, 2) arrays matching record_times order.
    """
    if duration <= 0:
        raise ValueError("points flow forward only")
    pts = np.array(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must have shape (N, 2)")
    hs = _rk4.step_sizes(duration, system.h)
    cum = np.cumsum(hs)
    rec_times = sorted(record_times) if record_times is not None else []
    rec_steps = []
    for t in rec_times:
        offset = t - t0
        k = int(np.argmin(np.abs(cum - offset)))
        if abs(cum[k] - offset) > 1e-9 * max(1.0, abs(offset)):
            raise ValueError(f"record time {t} is not on the integration lattice")
        rec_steps.append(k + 1)
    z_start = driving_state(system, t0)
    sphase, cphase, amp, shalf, z_final = _rk4.stage_tables(
        z_start, hs, system.sigma, system.beta, system.rho, system.tau,
        system.nu, system.ztilde_factor, system.amplitude, system.amp_coeff,
        system.amp_freq, system.perturbed)
    eps = system.epsilon if system.perturbed else 0.0
    x = np.ascontiguousarray(pts[:, 0])
    y = np.ascontiguousarray(pts[:, 1])
    rec_arr = np.asarray(rec_steps, dtype=np.int64)
    rec_x = np.empty((len(rec_steps), x.shape[0]))
    rec_y = np.empty((len(rec_steps), x.shape[0]))
    _rk4.set_workers(workers)
    _rk4.advect(x, y, hs, sphase, cphase, amp, shalf, system.drift, eps,
                rec_arr, rec_x, rec_y)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise IntegrationError("advection produced nonfinite coordinates")
    pts[:, 0] = x
    pts[:, 1] = y
    records = [np.column_stack([rec_x[r], rec_y[r]]) for r in range(len(rec_steps))]
    return records, pts, z_final


def flow(system: FlowSystem, t0: float, duration: float, state):
    """Evolve one combined state (z, x, y) for a signed duration.

    The combined system is autonomous in five dimensions, so ``t0`` only
    labels the start time.  Negative durations are allowed only when the
    advected coordinates are absent (state ``(z, None, None)`` or a bare
    driving triple): the driven point flows forward only.
    """
    if len(state) == 3 and np.ndim(state[0]) == 0:
        z, x, y = tuple(float(v) for v in state), None, None
    else:
        z, x, y = state
        z = tuple(float(v) for v in z)
    if duration == 0:
        return (np.asarray(z), x, y)
    if x is None:
        znew = _drive(system, z, duration, system.h if duration > 0 else system.h / 10.0)
        if not all(np.isfinite(znew)):
            raise IntegrationError("driving integration diverged")
        return (np.asarray(znew), None, None)
    if duration < 0:
        raise ValueError("advected coordinates flow forward only")
    hs = _rk4.step_sizes(duration, system.h)
    sphase, cphase, amp, shalf, z_final = _rk4.stage_tables(
        z, hs, system.sigma, system.beta, system.rho, system.tau,
        system.nu, system.ztilde_factor, system.amplitude, system.amp_coeff,
        system.amp_freq, system.perturbed)
    eps = system.epsilon if system.perturbed else 0.0
    xa = np.array([float(x)])
    ya = np.array([float(y)])
    _rk4.set_workers(1)
    _rk4.advect(xa, ya, hs, sphase, cphase, amp, shalf, system.drift, eps,
                np.empty(0, dtype=np.int64), np.empty((0, 1)), np.empty((0, 1)))
    if not (np.isfinite(xa[0]) and np.isfinite(ya[0]) and all(np.isfinite(z_final))):
        raise IntegrationError("flow produced a nonfinite state")
    return (np.asarray(z_final), float(xa[0]), float(ya[0]))
