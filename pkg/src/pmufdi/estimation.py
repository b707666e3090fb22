"""Least-squares PMU state estimation and residual-based bad data detection.

Matrices are time-by-channel: row ``t`` of ``W`` is the measurement vector
at instant ``t``, so ``W = X H^T`` in the noiseless case.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import chi2

from .grid import RANK_RTOL, JacobianSet


class UnobservableError(ValueError):
    pass


@dataclass
class ComplexMatrixSeries:
    """Time-by-channel complex matrix with column labels (rows are instants 1..N)."""

    data: np.ndarray
    labels: list[str]
    sample_rate: float = 30.0

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=complex))
        self.labels = list(self.labels)
        if self.data.shape[0] < 1:
            raise ValueError("series needs at least one time row")
        if self.data.shape[1] != len(self.labels):
            raise ValueError(
                f"{self.data.shape[1]} columns but {len(self.labels)} labels"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


def _mat(M) -> np.ndarray:
    if isinstance(M, ComplexMatrixSeries):
        return M.data
    return np.atleast_2d(np.asarray(M, dtype=complex))


def pinv(H: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via full SVD; raises if ``H`` lacks full column rank."""
    n, p = H.shape
    if n < p:
        raise UnobservableError(f"unobservable system: {n} measurements for {p} states")
    U, s, Vh = np.linalg.svd(H, full_matrices=False)
    if s[0] == 0 or s[-1] <= rtol * s[0]:
        rank = int(np.sum(s > rtol * s[0])) if s[0] else 0
        raise UnobservableError(f"unobservable system: rank(H) = {rank} < {p}")
    return (Vh.conj().T / s) @ U.conj().T


def _check(W: np.ndarray, jac: JacobianSet):
    if W.shape[1] != jac.n:
        raise ValueError(f"W has {W.shape[1]} channels, model has {jac.n}")


def estimate_states(W, jac: JacobianSet) -> np.ndarray:
    """``X_hat = W (H^+)^T``, the row-wise least-squares estimate."""
    W = _mat(W)
    _check(W, jac)
    return W @ pinv(jac.H).T


def conventional_residual(W, jac: JacobianSet) -> np.ndarray:
    W = _mat(W)
    X_hat = estimate_states(W, jac)
    return W - X_hat @ jac.H.T


def enhanced_residual(W, jac: JacobianSet) -> np.ndarray:
    """``[R, X_bar A^T]``: conventional residual plus the ZIB KCL mismatch."""
    W = _mat(W)
    X_bar = estimate_states(W, jac)
    R = W - X_bar @ jac.H.T
    return np.hstack([R, X_bar @ jac.A.T])


@dataclass(frozen=True)
class BddConfig:
    """``sigma`` is the total std of the complex measurement noise (0 = noiseless)."""

    sigma: float = 0.0
    alpha: float = 0.05
    noiseless_tol: float = 1e-8

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("noise sigma must be nonnegative")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class BddReport:
    statistic: np.ndarray
    threshold: float
    dof: int

    @property
    def flagged_rows(self) -> set[int]:
        """1-based time indices whose statistic exceeds the threshold."""
        return {int(t) + 1 for t in np.flatnonzero(self.statistic > self.threshold)}

    @property
    def flagged(self) -> bool:
        return bool(np.any(self.statistic > self.threshold))

    def rows(self) -> list[tuple[int, float, bool]]:
        return [
            (t + 1, float(s), bool(s > self.threshold)) for t, s in enumerate(self.statistic)
        ]


def _row_energy(M: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(M) ** 2, axis=1)


def conventional_bdd(W, jac: JacobianSet, config: BddConfig = BddConfig()) -> BddReport:
    """Per-instant chi-square test on the estimation residual.

    Complex noise with total variance ``sigma**2`` splits evenly between
    real and imaginary parts, so ``2 |r_t|^2 / sigma^2`` is chi-square with
    ``2 (n - p)`` degrees of freedom.
    """
    R = conventional_residual(W, jac)
    dof = 2 * (jac.n - jac.p)
    if config.sigma == 0:
        return BddReport(_row_energy(R), config.noiseless_tol, dof)
    stat = 2 * _row_energy(R) / config.sigma**2
    return BddReport(stat, float(chi2.ppf(1 - config.alpha, dof)), dof)


def enhanced_bdd(W, jac: JacobianSet, config: BddConfig = BddConfig()) -> BddReport:
    """Chi-square test on the enhanced residual.

    In noisy mode the ZIB block ``X_bar A^T`` is whitened by its noise
    covariance ``sigma^2 (A H^+)(A H^+)^*``; it is uncorrelated with the
    conventional residual, so the degrees of freedom simply add.
    """
    W = _mat(W)
    Re = enhanced_residual(W, jac)
    n, k = jac.n, jac.k
    dof = 2 * (n - jac.p) + 2 * k
    if config.sigma == 0:
        return BddReport(_row_energy(Re), config.noiseless_tol, dof)
    R, Z = Re[:, :n], Re[:, n:]
    stat = _row_energy(R)
    if k:
        G = jac.A @ pinv(jac.H)
        # rows of Z are z_t^T; quadratic form z^* (G G^*)^{-1} z
        S = np.linalg.pinv(G @ G.conj().T)
        stat = stat + np.real(np.einsum("ti,ij,tj->t", Z.conj(), S, Z))
    stat = 2 * stat / config.sigma**2
    return BddReport(stat, float(chi2.ppf(1 - config.alpha, dof)), dof)


def labelled(M: np.ndarray, labels: Sequence[str]) -> ComplexMatrixSeries:
    return ComplexMatrixSeries(M, list(labels))
