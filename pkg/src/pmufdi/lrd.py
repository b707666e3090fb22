"""Low-rank plus column-sparse decomposition detector.

Solves

    minimize    ||W_hat||_* + lam * ||C_hat||_{1,2}
    subject to  W_bar = W_hat + C_hat H_bar^T

with linearized ADMM.  The C-subproblem is coupled through ``H_bar^T``, so
it is replaced by one proximal-gradient step with step ``1/L``,
``L = ||H_bar||_2^2``, which keeps both updates in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import JacobianSet


@dataclass(frozen=True)
class LrdConfig:
    lam: float = 1.05
    rho: float = 1.0
    max_iter: int = 2000
    tol_primal: float = 1e-7
    tol_dual: float = 1e-7
    support_threshold: float = 0.05
    # C_hat columns below zero_tol * ||W_bar||_F are numerically zero
    zero_tol: float = 1e-4

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.tol_primal <= 0 or self.tol_dual <= 0:
            raise ValueError("tolerances must be positive")
        if self.support_threshold < 0:
            raise ValueError("support_threshold must be nonnegative")


@dataclass
class LrdResult:
    W_hat: np.ndarray
    C_hat: np.ndarray
    iterations: int
    converged: bool
    objective_trace: list[float] = field(default_factory=list)
    primal_residual_trace: list[float] = field(default_factory=list)
    column_norms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    normalized_column_norms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    detected_state_support: set[int] = field(default_factory=set)
    detected_measurement_support: set[int] = field(default_factory=set)
    lam: float = float("nan")
    dual: np.ndarray | None = None

    @property
    def l12_norm(self) -> float:
        return float(np.sum(self.column_norms))

    @property
    def objective(self) -> float:
        return objective_value(self.W_hat, self.C_hat, self.lam)


def svt(M: np.ndarray, tau: float) -> np.ndarray:
    """Singular value thresholding: prox of ``tau * ||.||_*`` at ``M``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    r = int(np.count_nonzero(s))
    return (U[:, :r] * s[:r]) @ Vh[:r]


def group_soft_threshold(M: np.ndarray, tau: float) -> np.ndarray:
    """Column-wise shrinkage: prox of ``tau * ||.||_{1,2}`` at ``M``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    norms = np.linalg.norm(M, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > tau, 1.0 - tau / norms, 0.0)
    return M * scale


def nuclear_norm(M: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(M, compute_uv=False)))


def l12_norm(M: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(M, axis=0)))


def objective_value(W_hat: np.ndarray, C_hat: np.ndarray, lam: float) -> float:
    return nuclear_norm(W_hat) + lam * l12_norm(C_hat)


def column_support(C_hat: np.ndarray, W_bar_norm: float, config: LrdConfig):
    """Column norms, their normalized values and the detected (0-based) columns.

    Norms are divided by the largest column norm, floored at
    ``zero_tol * ||W_bar||_F`` so that a numerically zero ``C_hat`` reports
    nothing instead of amplifying round-off to 1.
    """
    norms = np.linalg.norm(C_hat, axis=0)
    scale = max(float(norms.max(initial=0.0)), config.zero_tol * W_bar_norm)
    normalized = norms / scale if scale > 0 else np.zeros_like(norms)
    return norms, normalized, np.flatnonzero(normalized > config.support_threshold)


def solve_lrd(
    W_bar,
    jac: JacobianSet,
    config: LrdConfig = LrdConfig(),
    *,
    init: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
) -> LrdResult:
    """Run linearized ADMM from zero (or from ``init = (W_hat, C_hat, U)``)."""
    Wb = np.atleast_2d(np.asarray(W_bar, dtype=complex))
    if not np.all(np.isfinite(Wb)):
        raise ValueError("W_bar contains NaN or infinite entries")
    Hb = jac.H_bar
    if Wb.shape[1] != Hb.shape[0]:
        raise ValueError(f"W_bar has {Wb.shape[1]} channels, model has {Hb.shape[0]}")
    HbT = Hb.T
    Hb_adj = Hb.conj()  # adjoint of C -> C H_bar^T is M -> M conj(H_bar)
    L = float(np.linalg.norm(Hb, 2)) ** 2
    rho, lam = config.rho, config.lam
    wnorm = float(np.linalg.norm(Wb))
    denom = wnorm if wnorm > 0 else 1.0

    N, p = Wb.shape[0], Hb.shape[1]
    if init is None:
        W_hat = np.zeros_like(Wb)
        C_hat = np.zeros((N, p), dtype=complex)
        U = np.zeros_like(Wb)
    else:
        W_hat, C_hat, U = (np.array(a, dtype=complex) for a in init)

    obj_trace: list[float] = []
    res_trace: list[float] = []
    converged = False
    it = 0
    CH = C_hat @ HbT
    for it in range(1, config.max_iter + 1):
        W_prev, C_prev = W_hat, C_hat

        W_hat = svt(Wb - CH - U, 1.0 / rho)
        grad = (W_hat + CH - Wb + U) @ Hb_adj
        C_hat = group_soft_threshold(C_hat - grad / L, lam / (rho * L))
        CH = C_hat @ HbT
        resid = W_hat + CH - Wb
        U = U + resid

        r_norm = float(np.linalg.norm(resid)) / denom
        change = math.sqrt(
            float(np.linalg.norm(W_hat - W_prev)) ** 2
            + float(np.linalg.norm((C_hat - C_prev) @ HbT)) ** 2
        ) / denom
        res_trace.append(r_norm)
        obj_trace.append(objective_value(W_hat, C_hat, lam))
        if r_norm <= config.tol_primal and change <= config.tol_dual:
            converged = True
            break

    norms, normalized, cols = column_support(C_hat, wnorm, config)
    state_support = {jac.bus_ids[c] if jac.bus_ids else c + 1 for c in cols}
    meas = set()
    if len(cols):
        meas = set(np.flatnonzero(np.any(np.abs(Hb[:, cols]) > 0, axis=1)).tolist())
    return LrdResult(
        W_hat=W_hat,
        C_hat=C_hat,
        iterations=it,
        converged=converged,
        objective_trace=obj_trace,
        primal_residual_trace=res_trace,
        column_norms=norms,
        normalized_column_norms=normalized,
        detected_state_support=state_support,
        detected_measurement_support=meas,
        lam=lam,
        dual=U,
    )


def lambda_sweep(
    W_bar,
    jac: JacobianSet,
    lambdas,
    config: LrdConfig = LrdConfig(),
    warm_start: bool = True,
) -> list[tuple[float, float, set[int]]]:
    """``(lambda, ||C_hat||_{1,2}, support)`` for each lambda, in ascending order."""
    lambdas = [float(x) for x in lambdas]
    if any(x <= 0 for x in lambdas):
        raise ValueError("lambdas must be positive")
    if any(b < a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambdas must be ascending")
    out = []
    init = None
    for lam in lambdas:
        res = solve_lrd(W_bar, jac, _with_lam(config, lam), init=init)
        if warm_start:
            init = (res.W_hat, res.C_hat, res.dual)
        out.append((lam, res.l12_norm, res.detected_state_support))
    return out


def _with_lam(config: LrdConfig, lam: float) -> LrdConfig:
    from dataclasses import replace

    return replace(config, lam=lam)
