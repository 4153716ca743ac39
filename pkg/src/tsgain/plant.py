"""LTI truth model and its exact time-scale discretization.

A scattered step of graininess mu under zero-order-hold input advances the
continuous plant exactly via A_hat = expc(mu A) A, B_hat = expc(mu A) B:
x_next = x + mu (A_hat x + B_hat u) equals e^{mu A} x plus the held-input
convolution term.  Dense runs integrate the coupled state/gain ODE with
fixed-step classic Runge-Kutta so traces are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matfun import expc
from .timescale import _dense_boundaries

__all__ = ["LTIPlant", "DiscretizedPlant", "DenseRunResult", "discretize", "step_scattered", "run_dense"]


@dataclass(frozen=True)
class LTIPlant:
    """Truth model x' = Ax + Bu, y = Cx with initial state x0.

    The controller never reads A, B, C directly; they exist for the
    simulator and for a-priori audits.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.A, dtype=float)
        b = np.asarray(self.B, dtype=float)
        c = np.asarray(self.C, dtype=float)
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"A must be square, got shape {a.shape}")
        n = a.shape[0]
        if b.ndim == 1:
            b = b.reshape(-1, 1)
        if c.ndim == 1:
            c = c.reshape(1, -1)
        if b.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got shape {b.shape}")
        if c.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got shape {c.shape}")
        if x0.shape[0] != n:
            raise ValueError(f"x0 must have length {n}, got {x0.shape[0]}")
        for name, arr in (("A", a), ("B", b), ("C", c), ("x0", x0)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must have finite entries")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)
        object.__setattr__(self, "C", c)
        object.__setattr__(self, "x0", x0)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def cb(self) -> np.ndarray:
        """The m x m product C B (the controller bound policies' prior)."""
        return self.C @ self.B

    def output(self, x: np.ndarray) -> np.ndarray:
        return self.C @ x


@dataclass(frozen=True)
class DiscretizedPlant:
    """expc-discretized pair (A_hat, B_hat) at a fixed graininess."""

    a_hat: np.ndarray
    b_hat: np.ndarray
    mu: float


def discretize(plant: LTIPlant, mu: float) -> DiscretizedPlant:
    """A_hat = expc(mu A) A, B_hat = expc(mu A) B; exact (A, B) at mu = 0."""
    if mu < 0:
        raise ValueError("graininess must be nonnegative")
    if mu == 0.0:
        return DiscretizedPlant(plant.A.copy(), plant.B.copy(), 0.0)
    phi = expc(mu * plant.A)
    return DiscretizedPlant(phi @ plant.A, phi @ plant.B, float(mu))


def step_scattered(plant: LTIPlant, x: np.ndarray, k: float, mu: float):
    """One scattered step under sample-and-hold output feedback u = -k y.

    y is sampled at the left endpoint and held over [t, t + mu]; the
    returned state equals the exact continuous ZOH solution there.
    Returns (x_next, y).
    """
    if not mu > 0:
        raise ValueError("step_scattered requires positive graininess")
    x = np.asarray(x, dtype=float).reshape(-1)
    disc = discretize(plant, mu)
    y = plant.C @ x
    u = -k * y
    x_next = x + mu * (disc.a_hat @ x + disc.b_hat @ u)
    return x_next, y


@dataclass(frozen=True)
class DenseRunResult:
    """Samples of a dense run at the integration step (start point excluded)."""

    times: np.ndarray   # offsets from the run start, shape (N,)
    states: np.ndarray  # shape (N, n)
    outputs: np.ndarray  # shape (N, m), equals states @ C.T row-wise
    gains: np.ndarray   # shape (N,)

    @property
    def x_end(self) -> np.ndarray:
        return self.states[-1]

    @property
    def k_end(self) -> float:
        return float(self.gains[-1])


def run_dense(
    plant: LTIPlant,
    x: np.ndarray,
    k: float,
    duration: float,
    h_int: float,
    gain_law: bool = True,
) -> DenseRunResult:
    """Integrate x' = (A - k B C) x, k' = ||y||^2 over a dense run.

    Classic fixed-step RK4 on the coupled (x, k) system; with gain_law
    False the gain stays frozen at k.  Samples are recorded at every
    h_int (final subinterval shortened to land exactly on `duration`).
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    if not h_int > 0:
        raise ValueError("h_int must be positive")
    a, b, c = plant.A, plant.B, plant.C
    x = np.asarray(x, dtype=float).reshape(-1)

    def deriv(xv, kv):
        y = c @ xv
        dx = a @ xv - kv * (b @ y)
        dk = float(y @ y) if gain_law else 0.0
        return dx, dk

    taus = _dense_boundaries(duration, h_int)
    times = np.empty(len(taus))
    states = np.empty((len(taus), plant.n))
    outputs = np.empty((len(taus), plant.m))
    gains = np.empty(len(taus))
    prev_tau = 0.0
    cur_x = x
    cur_k = float(k)
    for i, tau in enumerate(taus):
        h = tau - prev_tau
        dx1, dk1 = deriv(cur_x, cur_k)
        dx2, dk2 = deriv(cur_x + 0.5 * h * dx1, cur_k + 0.5 * h * dk1)
        dx3, dk3 = deriv(cur_x + 0.5 * h * dx2, cur_k + 0.5 * h * dk2)
        dx4, dk4 = deriv(cur_x + h * dx3, cur_k + h * dk3)
        cur_x = cur_x + (h / 6.0) * (dx1 + 2.0 * dx2 + 2.0 * dx3 + dx4)
        cur_k = cur_k + (h / 6.0) * (dk1 + 2.0 * dk2 + 2.0 * dk3 + dk4)
        times[i] = tau
        states[i] = cur_x
        outputs[i] = c @ cur_x
        gains[i] = cur_k
        prev_tau = tau
    return DenseRunResult(times=times, states=states, outputs=outputs, gains=gains)
