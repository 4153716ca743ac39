"""Dense small-matrix numerics.

Matrix exponential, the entire function expc(X) = I + X/2 + X^2/6 + ...
(= integral of e^{Xs} over s in [0,1]), eigenvalue spectra, a continuous
Lyapunov solver, and transmission zeros of square LTI systems.  Everything
here targets small dense matrices (n <= 16); no sparse paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "mat_exp",
    "expc",
    "spectrum",
    "solve_lyapunov_continuous",
    "transmission_zeros",
    "SigmaDecomposition",
    "sigma_decomposition",
]

_MAX_SPECTRUM_DIM = 16


def _as_square(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=complex if np.iscomplexobj(x) else float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} requires a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} requires finite entries")
    return a


def mat_exp(x) -> np.ndarray:
    """Matrix exponential e^X by scaling and squaring on a Taylor kernel.

    Scales X by 2^-s until the 1-norm is at most 0.5, sums the Taylor
    series to machine precision, then squares s times.
    """
    a = _as_square(x, "mat_exp")
    n = a.shape[0]
    norm = np.linalg.norm(a, 1)
    s = 0
    if norm > 0.5:
        s = int(math.ceil(math.log2(norm / 0.5)))
        a = a / (2.0**s)
    eye = np.eye(n, dtype=a.dtype)
    term = eye.copy()
    acc = eye.copy()
    for j in range(1, 40):
        term = term @ a / j
        acc = acc + term
        if np.linalg.norm(term, 1) <= 1e-18 * np.linalg.norm(acc, 1):
            break
    for _ in range(s):
        acc = acc @ acc
    return acc


def expc(x) -> np.ndarray:
    """Entire matrix function I + X/2 + X^2/6 + ... + X^(j-1)/j! + ...

    Computed as the top-right block of e^M with M = [[X, I], [0, 0]],
    which equals the integral of e^{Xs} over s in [0,1].  This form has
    no singularity at non-invertible X, unlike (e^X - I) X^-1.
    """
    a = _as_square(x, "expc")
    n = a.shape[0]
    m = np.zeros((2 * n, 2 * n), dtype=a.dtype)
    m[:n, :n] = a
    m[:n, n:] = np.eye(n, dtype=a.dtype)
    return mat_exp(m)[:n, n:]


def spectrum(x) -> np.ndarray:
    """Eigenvalues of a square matrix, sorted by (real, imag).

    Repeated eigenvalues of defective matrices are returned with
    multiplicity; the call never fails on defectiveness.
    """
    a = _as_square(x, "spectrum")
    if a.shape[0] > _MAX_SPECTRUM_DIM:
        raise ValueError(
            f"spectrum supports n <= {_MAX_SPECTRUM_DIM}, got n = {a.shape[0]}"
        )
    w = np.linalg.eigvals(a)
    return np.array(sorted(w, key=lambda z: (z.real, z.imag)))


def solve_lyapunov_continuous(f, q) -> np.ndarray:
    """Solve F^T P + P F = -Q for symmetric positive definite P.

    Uses the Kronecker vectorization of the equation into an n^2 x n^2
    linear system; fine at the small sizes this package targets.

    Raises numpy.linalg.LinAlgError when F is not Hurwitz (no positive
    definite solution exists) and ValueError when Q is not symmetric
    positive definite.
    """
    fm = _as_square(f, "solve_lyapunov_continuous")
    qm = _as_square(q, "solve_lyapunov_continuous")
    if fm.shape != qm.shape:
        raise ValueError("F and Q must have the same shape")
    qnorm = np.linalg.norm(qm)
    if np.linalg.norm(qm - qm.T) > 1e-10 * max(1.0, qnorm):
        raise ValueError("Q must be symmetric")
    if np.min(np.linalg.eigvalsh((qm + qm.T) / 2.0)) <= 0.0:
        raise ValueError("Q must be positive definite")
    if np.max(np.linalg.eigvals(fm).real) >= 0.0:
        raise np.linalg.LinAlgError(
            "F is not Hurwitz; the Lyapunov equation has no positive definite solution"
        )
    n = fm.shape[0]
    eye = np.eye(n)
    # Row-major vec: vec(A X B) = (A kron B^T) vec(X).
    coeff = np.kron(fm.T, eye) + np.kron(eye, fm.T)
    p = np.linalg.solve(coeff, -qm.reshape(-1)).reshape(n, n)
    return (p + p.T) / 2.0


def transmission_zeros(a, b, c) -> np.ndarray:
    """Finite transmission zeros of the square system (A, B, C).

    Solves the generalized eigenproblem det(lambda*E - F) = 0 with
    F = [[A, B], [C, 0]] and E = diag(I, 0); eigenvalues at infinity
    (non-finite or |lambda| > 1e8) are dropped.
    """
    am = _as_square(a, "transmission_zeros")
    bm = np.asarray(b, dtype=float)
    cm = np.asarray(c, dtype=float)
    if bm.ndim == 1:
        bm = bm.reshape(-1, 1)
    if cm.ndim == 1:
        cm = cm.reshape(1, -1)
    n = am.shape[0]
    if bm.shape[0] != n or cm.shape[1] != n:
        raise ValueError("B and C dimensions do not match A")
    m_in, m_out = bm.shape[1], cm.shape[0]
    if m_in != m_out:
        raise ValueError(
            f"transmission_zeros supports square I/O only ({m_in} inputs vs {m_out} outputs)"
        )
    size = n + m_in
    pencil = np.zeros((size, size))
    pencil[:n, :n] = am
    pencil[:n, n:] = bm
    pencil[n:, :n] = cm
    weight = np.zeros((size, size))
    weight[:n, :n] = np.eye(n)
    w = scipy.linalg.eig(pencil, weight, right=False)
    finite = w[np.isfinite(w) & (np.abs(w) <= 1e8)]
    return np.array(sorted(finite, key=lambda z: (z.real, z.imag)))


@dataclass(frozen=True)
class SigmaDecomposition:
    """Deviation of expc(mu*A) from the identity, expc(mu*A) = I + sigma."""

    sigma: np.ndarray
    mu: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.sigma, 2))


def sigma_decomposition(a, mu: float) -> SigmaDecomposition:
    """Compute expc(mu*A) - I; its norm shrinks to 0 as mu -> 0."""
    am = _as_square(a, "sigma_decomposition")
    if mu < 0:
        raise ValueError("graininess must be nonnegative")
    sig = expc(mu * am) - np.eye(am.shape[0])
    return SigmaDecomposition(sigma=sig, mu=float(mu))
