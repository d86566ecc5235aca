"""Discrete fundamental martingale of fractional Gaussian increments.

For n uniform increments of the process on [0, 1], the covariance matrix is
the Toeplitz matrix (1/n^2H) A(|i - j|) with
A(k) = (|k-1|^2H + |k+1|^2H - 2 k^2H) / 2. Its inverse is built by the
bordered (Schur-complement) recursion, which exposes the conditional
variance lambda_n of each new increment given the past. Positivity of every
lambda_n is the local-non-determinism property that makes the construction
well posed; it is surfaced as a first-class value rather than buried inside
a generic factorization.

The fundamental weight vector w = 1^T R_n^{-1} turns the increment vector
into the discrete fundamental martingale M_n = w . Z, whose orthogonal
increments are checked by Monte Carlo elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LocalDeterminismError
from .rng import lane, normals

_LND_TOL = 1e-12


def increment_autocovariance(hurst: float, k: int) -> float:
    """A(k) for unit-step fractional increments; A(0) = 1."""
    if k < 0:
        raise ValueError("lag must be nonnegative")
    h2 = 2.0 * float(hurst)
    k = float(k)
    return 0.5 * (abs(k - 1.0) ** h2 + (k + 1.0) ** h2 - 2.0 * k ** h2)


def autocovariance_row(hurst: float, n: int) -> np.ndarray:
    """A(0), ..., A(n-1) as one vector."""
    k = np.arange(n, dtype=float)
    h2 = 2.0 * float(hurst)
    return 0.5 * (np.abs(k - 1.0) ** h2 + (k + 1.0) ** h2 - 2.0 * k ** h2)


@dataclass(frozen=True)
class IncrementCovariance:
    hurst: float
    n: int
    matrix: np.ndarray  # (1/n^2H) * Toeplitz(A)


def build_covariance(hurst: float, n: int) -> IncrementCovariance:
    """Scaled Toeplitz covariance of the n uniform increments on [0, 1]."""
    if n < 1:
        raise ValueError("n must be at least 1")
    row = autocovariance_row(hurst, n)
    idx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    matrix = row[idx] / float(n) ** (2.0 * hurst)
    return IncrementCovariance(float(hurst), n, matrix)


@dataclass
class InverseState:
    """Running inverse of the leading principal blocks of a covariance.

    inv is R_n^{-1}; lnd_margin is the Schur complement lambda_n from the
    most recent extension (the conditional variance of increment n+1 given
    increments 1..n, up to the outer scale).
    """

    inv: np.ndarray
    lnd_margin: float


def schur_extend_inverse(state: InverseState, border: np.ndarray, corner: float) -> InverseState:
    """Extend R_n^{-1} to R_{n+1}^{-1} given the new column and corner.

    The four blocks come from the bordered-inverse identity with
    lambda = corner - border^T R_n^{-1} border. A nonpositive (or
    numerically vanishing) lambda means the new increment is determined by
    the past, which the construction treats as a hard failure.
    """
    q = state.inv
    n = q.shape[0]
    if border.shape != (n,):
        raise ValueError("border length must match current size")
    qr = q @ border
    lam = float(corner - border @ qr)
    if lam <= _LND_TOL:
        raise LocalDeterminismError(
            f"conditional variance {lam:.3e} at size {n + 1} is not positive"
        )
    out = np.empty((n + 1, n + 1))
    out[:n, :n] = q + np.outer(qr, qr) / lam
    out[:n, n] = -qr / lam
    out[n, :n] = -qr / lam
    out[n, n] = 1.0 / lam
    return InverseState(out, lam)


def recursive_inverse(hurst: float, n: int, scale: float | None = None) -> tuple[InverseState, list[float]]:
    """R_n^{-1} via the bordered recursion, with the lambda trace.

    scale is the grid step entering as scale^2H; by default 1/n, matching
    increments of the process on [0, 1].
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if scale is None:
        scale = 1.0 / n
    s2h = float(scale) ** (2.0 * hurst)
    row = autocovariance_row(hurst, n) * s2h
    state = InverseState(np.array([[1.0 / row[0]]]), row[0])
    lams = [row[0]]
    for k in range(1, n):
        border = row[1:k + 1][::-1].copy()
        state = schur_extend_inverse(state, border, row[0])
        lams.append(state.lnd_margin)
    return state, lams


@dataclass(frozen=True)
class FundamentalWeights:
    hurst: float
    n: int
    scale: float
    scaled: np.ndarray  # 1^T (scale^2H Toeplitz(A))^{-1}
    unscaled: np.ndarray  # 1^T Toeplitz(A)^{-1}
    lnd_margins: tuple


def fundamental_weights(hurst: float, n: int, scale: float | None = None) -> FundamentalWeights:
    """Weight vector(s) w = 1^T R_n^{-1} for the fundamental martingale.

    The grid step affects w only through the factor scale^(-2H), so both the
    scaled and the unit-step versions are reported.
    """
    if scale is None:
        scale = 1.0 / n
    state, lams = recursive_inverse(hurst, n, scale=1.0)
    ones = np.ones(n)
    unscaled = ones @ state.inv
    scaled = unscaled / float(scale) ** (2.0 * hurst)
    return FundamentalWeights(float(hurst), n, float(scale), scaled, unscaled, tuple(lams))


def gershgorin_margin(hurst: float, n: int) -> float:
    """A(0) - sum_{k=1}^{n-1} |A(k)|, by direct summation of the row."""
    if n < 2:
        raise ValueError("n must be at least 2")
    row = autocovariance_row(hurst, n)
    return float(row[0] - np.abs(row[1:]).sum())


def martingale_orthogonality_stat(hurst: float, n: int, m_paths: int, seed: int) -> tuple[float, float]:
    """Monte Carlo check of E[M_n (M_{n+1} - M_n)] = 0.

    Samples m_paths increment vectors of length n+1 with the unit-step
    Toeplitz covariance (via its Cholesky factor), forms both martingale
    values from the weight vectors, and returns the sample mean of
    M_n * (M_{n+1} - M_n) with its standard error. The statistic is
    scale-free, so the unit step loses nothing.
    """
    if m_paths < 1000:
        raise ValueError("need at least 1e3 paths for a meaningful standard error")
    row = autocovariance_row(hurst, n + 1)
    idx = np.abs(np.subtract.outer(np.arange(n + 1), np.arange(n + 1)))
    cov = row[idx]
    chol = np.linalg.cholesky(cov)
    w_n = fundamental_weights(hurst, n, scale=1.0).unscaled
    w_n1 = fundamental_weights(hurst, n + 1, scale=1.0).unscaled
    g = normals(seed, lane("fgn"), m_paths, n + 1)
    z = g @ chol.T
    m_n = z[:, :n] @ w_n
    m_n1 = z @ w_n1
    prod = m_n * (m_n1 - m_n)
    est = float(prod.mean())
    stderr = float(prod.std(ddof=1) / np.sqrt(m_paths))
    return est, stderr
