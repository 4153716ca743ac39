"""Gain adaptation and graininess policies.

The gain follows the prototypical update k^Delta = ||y||^2 (continuous
growth on dense runs lives in plant.run_dense; the scattered rule is
k+ = k + mu ||y||^2 here).  Graininess policies answer "how long may the
next sample period be at the current gain":

* MimoBound      mu_bar(k) = (lmin{CB + CB^T} / lmax{(CB)^T CB} - eps1) / k,
                 valid for MIMO plants, needs CB identified a priori.
* SisoBound      mu_bar(k) = c_safe / (k * CB) with 0 < c_safe < 2, the
                 classical SISO sampling bound mu*k*CB < 2.
* IlchmannTownley  mu(k) = 1 / (k log k), CB-free; it only satisfies the
                 SISO bound once k has grown enough, and it is huge just
                 above k = 1, so a startup value mu_init is used until
                 k > 1 + 1e-6.  Prefer gains already past the transient
                 when configuring scenarios with this policy.
* FixedGraininess  constant mu (uniform sampling).

A wiggle sequence multiplies the policy value by v in (0, 1] to avoid
sampling forever at an output zero crossing; policies and sequences are
immutable values, so consuming a wiggle returns an advanced copy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .errors import AssumptionError

__all__ = [
    "ControllerState",
    "RepeatingWiggle",
    "RandomWiggle",
    "MimoBound",
    "SisoBound",
    "IlchmannTownley",
    "FixedGraininess",
    "BlockingSchedule",
    "mu_bar",
    "default_eps1",
    "gain_update_scattered",
    "next_graininess",
    "wiggle_next",
    "make_repeating_wiggle",
]


@dataclass(frozen=True)
class ControllerState:
    """Current feedback gain, simulation time, and last applied graininess."""

    k: float
    t: float = 0.0
    mu_current: float = 0.0

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("gain must be positive")


def gain_update_scattered(state: ControllerState, y, mu: float) -> ControllerState:
    """Scattered-point gain update k+ = k + mu ||y||^2 (left-endpoint output)."""
    if not mu > 0:
        raise ValueError("scattered update requires positive graininess")
    yv = np.asarray(y, dtype=float).reshape(-1)
    return ControllerState(
        k=state.k + mu * float(yv @ yv),
        t=state.t + mu,
        mu_current=float(mu),
    )


def _cb_ratio(cb) -> float:
    """lmin{CB + CB^T} / lmax{(CB)^T CB}; raises if the symmetric part is not PD."""
    m = np.asarray(cb, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"CB must be square, got shape {m.shape}")
    lam_min = float(np.min(np.linalg.eigvalsh(m + m.T)))
    if lam_min <= 0:
        raise AssumptionError(
            f"CB + (CB)^T is not positive definite (min eigenvalue {lam_min})"
        )
    lam_max = float(np.max(np.linalg.eigvalsh(m.T @ m)))
    return lam_min / lam_max


def default_eps1(cb) -> float:
    """Default safety margin: 5% of the CB eigenvalue ratio."""
    return 0.05 * _cb_ratio(cb)


def mu_bar(k: float, cb, eps1: float) -> float:
    """Graininess upper bound (lmin{CB + CB^T} / lmax{(CB)^T CB} - eps1) / k.

    The product mu_bar * k depends only on CB and eps1, so the bound is
    inversely proportional to the gain.
    """
    if not k > 0:
        raise ValueError("gain must be positive")
    ratio = _cb_ratio(cb)
    if not 0 < eps1 < ratio:
        raise ValueError(
            f"eps1 must lie in (0, {ratio}) to keep the bound positive, got {eps1}"
        )
    return (ratio - eps1) / k


@dataclass(frozen=True)
class RepeatingWiggle:
    """Cyclic multiplier sequence; values are fixed in (0, 1]."""

    values: tuple
    index: int = 0

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) == 0:
            raise ValueError("wiggle sequence needs at least one value")
        for v in vals:
            if not 0 < v <= 1:
                raise ValueError(f"wiggle values must lie in (0, 1], got {v}")
        object.__setattr__(self, "values", vals)

    @property
    def period(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class RandomWiggle:
    """Seeded multiplier stream quantized to 1/2^bits, ..., 2^bits/2^bits."""

    resolution_bits: int = 8
    seed: int = 0
    index: int = 0

    def __post_init__(self):
        if self.resolution_bits < 1:
            raise ValueError("resolution_bits must be at least 1")


WiggleSequence = Union[RepeatingWiggle, RandomWiggle]


def wiggle_next(seq: WiggleSequence):
    """Next multiplier and the advanced sequence; deterministic for a given seed."""
    if isinstance(seq, RepeatingWiggle):
        v = seq.values[seq.index % seq.period]
        return v, replace(seq, index=seq.index + 1)
    if isinstance(seq, RandomWiggle):
        scale = 2**seq.resolution_bits
        rng = np.random.default_rng((seq.seed, seq.index))
        v = int(rng.integers(1, scale + 1)) / scale
        return v, replace(seq, index=seq.index + 1)
    raise TypeError(f"unknown wiggle sequence {seq!r}")


def make_repeating_wiggle(order: int, seed: int = 0) -> RepeatingWiggle:
    """Repeating sequence of order! + 1 random multipliers in (0, 1].

    Doubles stand in for the pairwise-irrational ideal; exact resonance
    would need eigenvalue gaps of impractical magnitude to survive it.
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    length = math.factorial(order) + 1
    rng = np.random.default_rng(seed)
    values = tuple(1.0 - rng.random(length))
    return RepeatingWiggle(values)


@dataclass(frozen=True)
class MimoBound:
    """Eigenvalue-ratio bound policy; CB assumed identified a priori."""

    cb: np.ndarray
    eps1: Optional[float] = None
    wiggle: Optional[WiggleSequence] = None

    def __post_init__(self):
        m = np.asarray(self.cb, dtype=float)
        if m.ndim == 0:
            m = m.reshape(1, 1)
        object.__setattr__(self, "cb", m)
        ratio = _cb_ratio(m)
        eps1 = 0.05 * ratio if self.eps1 is None else float(self.eps1)
        if not 0 < eps1 < ratio:
            raise ValueError(
                f"eps1 must lie in (0, {ratio}) to keep the bound positive, got {eps1}"
            )
        object.__setattr__(self, "eps1", eps1)
        object.__setattr__(self, "_ratio", ratio)

    def ceiling(self, k: float) -> float:
        return (self._ratio - self.eps1) / k


@dataclass(frozen=True)
class SisoBound:
    """Classical SISO bound mu * k * CB < 2 with safety product c_safe."""

    cb: float
    c_safe: float = 1.9
    wiggle: Optional[WiggleSequence] = None

    def __post_init__(self):
        cb = float(np.asarray(self.cb).reshape(()))
        if cb <= 0:
            raise AssumptionError(f"SISO CB must be positive, got {cb}")
        if not 0 < self.c_safe < 2:
            raise ValueError(f"c_safe must lie in (0, 2), got {self.c_safe}")
        object.__setattr__(self, "cb", cb)

    def ceiling(self, k: float) -> float:
        return self.c_safe / (k * self.cb)


@dataclass(frozen=True)
class IlchmannTownley:
    """CB-free policy mu(k) = 1 / (k log k), with a startup value for k <= 1."""

    mu_init: float = 0.1
    wiggle: Optional[WiggleSequence] = None

    def __post_init__(self):
        if not self.mu_init > 0:
            raise ValueError("mu_init must be positive")

    def ceiling(self, k: float) -> float:
        if k <= 1.0 + 1e-6:
            return self.mu_init
        return 1.0 / (k * math.log(k))


@dataclass(frozen=True)
class FixedGraininess:
    """Constant sample period (uniform h Z sampling)."""

    mu: float
    wiggle: Optional[WiggleSequence] = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")

    def ceiling(self, k: float) -> float:
        return self.mu


GraininessPolicy = Union[MimoBound, SisoBound, IlchmannTownley, FixedGraininess]


def next_graininess(
    policy: GraininessPolicy,
    state: ControllerState,
    blocked: bool,
    block_cap_fraction: float = 1.0,
):
    """Graininess for the next step and the (possibly advanced) policy.

    Unblocked control is continuous (returns 0).  When blocked, the
    policy ceiling at the current gain is scaled by the blocking cap and
    by the next wiggle multiplier (1 if no wiggle is configured), which
    keeps the applied value at or below the ceiling.
    """
    if not blocked:
        return 0.0, policy
    v = 1.0
    new_policy = policy
    if policy.wiggle is not None:
        v, advanced = wiggle_next(policy.wiggle)
        new_policy = replace(policy, wiggle=advanced)
    return block_cap_fraction * policy.ceiling(state.k) * v, new_policy


@dataclass(frozen=True)
class BlockingSchedule:
    """Blocking pattern: dense control for continuous_run seconds, then one
    blocked sample at block_cap_fraction of the policy ceiling."""

    continuous_run: float
    block_cap_fraction: float = 0.9

    def __post_init__(self):
        if not self.continuous_run > 0:
            raise ValueError("continuous_run must be positive")
        if not 0 < self.block_cap_fraction < 1:
            raise ValueError("block_cap_fraction must lie in (0, 1)")
