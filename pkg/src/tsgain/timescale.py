"""Time-scale calculus primitives.

A time domain here is a repeating schedule of dense intervals and gaps
(scattered jumps).  Realizing a schedule over a finite horizon yields an
ordered point grid carrying per-point graininess mu: mu > 0 marks a
right-scattered point whose successor is t + mu, mu = 0 a right-dense one.
Delta integration and the generalized time-scale exponential operate on
realized grids; dense runs are subdivided at an internal quadrature step
h_int that is not part of the time scale itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "TimePoint",
    "Dense",
    "Gap",
    "TimeScaleProgram",
    "RealizedGrid",
    "realize",
    "delta_integral",
    "ts_exponential",
]

DEFAULT_H_INT = 1e-3
_NODE_ATOL = 1e-9


@dataclass(frozen=True)
class TimePoint:
    """A realized time instant with its graininess (gap to the successor)."""

    t: float
    mu: float

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError(f"graininess must be nonnegative, got {self.mu}")

    @property
    def is_scattered(self) -> bool:
        return self.mu > 0.0


@dataclass(frozen=True)
class Dense:
    """A right-dense interval of the given duration (graininess zero inside)."""

    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("Dense duration must be positive")


@dataclass(frozen=True)
class Gap:
    """A scattered jump: one point whose graininess equals the duration."""

    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("Gap duration must be positive")


Segment = Union[Dense, Gap]


@dataclass(frozen=True)
class TimeScaleProgram:
    """A repeating schedule of Dense/Gap segments starting at `origin`.

    Realization cycles through the segments until the requested horizon
    is covered, so a program is a periodic pattern (a single cycle covers
    non-repeating cases when the horizon fits inside it).
    """

    segments: tuple
    origin: float = 0.0

    def __init__(self, segments: Sequence[Segment], origin: float = 0.0):
        if len(segments) == 0:
            raise ValueError("program needs at least one segment")
        for seg in segments:
            if not isinstance(seg, (Dense, Gap)):
                raise ValueError(f"segment must be Dense or Gap, got {seg!r}")
        object.__setattr__(self, "segments", tuple(segments))
        object.__setattr__(self, "origin", float(origin))

    @classmethod
    def alternating(cls, dense: float, gap: float, origin: float = 0.0) -> "TimeScaleProgram":
        """Dense interval of length `dense`, then a gap of length `gap`, repeating."""
        return cls([Dense(dense), Gap(gap)], origin=origin)

    @classmethod
    def uniform(cls, h: float, origin: float = 0.0) -> "TimeScaleProgram":
        """Purely scattered sampling with constant graininess h."""
        return cls([Gap(h)], origin=origin)


class RealizedGrid:
    """Finite realization of a time-scale program.

    Immutable after construction.  `times` and `mus` expose the points as
    numpy arrays; consecutive points with mus[i] == 0 delimit quadrature
    steps inside a dense run, mus[i] > 0 is a scattered jump to times[i+1].
    """

    def __init__(self, points: Sequence[TimePoint], h_int: float):
        if len(points) < 2:
            raise ValueError("a grid needs at least two points")
        self.points = tuple(points)
        self.h_int = float(h_int)
        self.times = np.array([p.t for p in self.points])
        self.mus = np.array([p.mu for p in self.points])
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("grid times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def max_graininess(self) -> float:
        return float(np.max(self.mus))

    def index_of(self, t: float) -> int:
        """Index of the grid point at time t; raises if t is not a grid node."""
        j = int(np.searchsorted(self.times, t))
        for cand in (j - 1, j, j + 1):
            if 0 <= cand < len(self.times) and math.isclose(
                self.times[cand], t, rel_tol=1e-9, abs_tol=_NODE_ATOL
            ):
                return cand
        raise ValueError(f"time {t} is not a point of the realized grid")


def _dense_boundaries(duration: float, h_int: float):
    """Quadrature step endpoints (0, duration] with the last step shortened."""
    n = max(1, int(math.ceil(duration / h_int - 1e-9)))
    taus = [i * h_int for i in range(1, n)]
    taus.append(duration)
    if len(taus) >= 2 and taus[-2] >= duration - 1e-12 * max(1.0, duration):
        del taus[-2]
    return taus


def realize(program: TimeScaleProgram, horizon: float, h_int: float = DEFAULT_H_INT) -> RealizedGrid:
    """Realize a program over [origin, origin + horizon].

    Dense segments are subdivided at h_int (final subinterval shortened,
    never stretched); every gap produces exactly one scattered point.  A
    gap crossing the horizon keeps its full length, so the final point
    may land past origin + horizon; dense runs are clipped exactly.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if not h_int > 0:
        raise ValueError("h_int must be positive")
    end = program.origin + horizon
    tol = 1e-12 * max(1.0, abs(end))
    times = [program.origin]
    mus: list[float] = []
    cur = program.origin
    idx = 0
    while cur < end - tol:
        seg = program.segments[idx % len(program.segments)]
        idx += 1
        if isinstance(seg, Dense):
            d_eff = min(seg.duration, end - cur)
            for tau in _dense_boundaries(d_eff, h_int):
                mus.append(0.0)
                times.append(cur + tau)
            times[-1] = cur + d_eff  # land on the segment/horizon boundary exactly
            cur = times[-1]
        else:
            mus.append(seg.duration)
            times.append(cur + seg.duration)
            cur = times[-1]
    mus.append(0.0)
    points = [TimePoint(t, mu) for t, mu in zip(times, mus)]
    return RealizedGrid(points, h_int)


def _as_time_function(f) -> Callable[[float], complex]:
    if callable(f):
        return f
    value = complex(f)
    return lambda _t: value


def delta_integral(f, grid: RealizedGrid, t0: float | None = None, t1: float | None = None) -> float:
    """Delta integral of f over [t0, t1] along the grid.

    Scattered points contribute mu(t) * f(t) (left endpoint, exact by
    definition); dense runs are integrated with the trapezoid rule at the
    grid's quadrature step.  t0 and t1 must be grid nodes.
    """
    fn = _as_time_function(f)
    i0 = 0 if t0 is None else grid.index_of(t0)
    i1 = len(grid) - 1 if t1 is None else grid.index_of(t1)
    if i0 > i1:
        raise ValueError("t0 must not exceed t1")
    total = 0.0
    times, mus = grid.times, grid.mus
    for i in range(i0, i1):
        if mus[i] > 0.0:
            total += mus[i] * fn(times[i])
        else:
            dt = times[i + 1] - times[i]
            total += 0.5 * dt * (fn(times[i]) + fn(times[i + 1]))
    return total


def ts_exponential(lam, grid: RealizedGrid, t0: float, t: float) -> complex:
    """Generalized time-scale exponential e_lambda(t, t0) along the grid.

    Product of (1 + mu(s) * lambda(s)) over scattered points times
    exp(integral of lambda) over dense runs; the unique solution factor
    of z^Delta = lambda z.  Nonregressive points (1 + mu*lambda = 0)
    produce a zero factor by design rather than an error.
    """
    fn = _as_time_function(lam)
    i0 = grid.index_of(t0)
    i1 = grid.index_of(t)
    if i0 > i1:
        raise ValueError("t must not precede t0")
    value = 1.0 + 0.0j
    dense_accum = 0.0 + 0.0j
    times, mus = grid.times, grid.mus
    for i in range(i0, i1):
        if mus[i] > 0.0:
            value *= 1.0 + mus[i] * complex(fn(times[i]))
        else:
            dt = times[i + 1] - times[i]
            dense_accum += 0.5 * dt * (complex(fn(times[i])) + complex(fn(times[i + 1])))
    return value * np.exp(dense_accum)
