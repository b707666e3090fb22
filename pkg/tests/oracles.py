"""Reference solvers that share no code with the package.

Each one minimizes the defining objective directly with a general-purpose
optimizer instead of using a closed form.
"""

import numpy as np
from scipy.optimize import brentq, minimize


def _pack(*mats):
    return np.concatenate([np.concatenate([m.real.ravel(), m.imag.ravel()]) for m in mats])


def _unpack(v, shapes):
    out, pos = [], 0
    for shape in shapes:
        size = int(np.prod(shape))
        re, im = v[pos : pos + size], v[pos + size : pos + 2 * size]
        out.append((re + 1j * im).reshape(shape))
        pos += 2 * size
    return out


def svt_oracle(M, tau, seed=0):
    """argmin_X tau ||X||_* + 1/2 ||X - M||_F^2 via the factorized form.

    ``||X||_* = min over X = P Q^H of (||P||^2 + ||Q||^2) / 2``, so the prox
    is ``P Q^H`` at the minimum of a smooth function of (P, Q), found with
    L-BFGS from a random start.  With full inner dimension the landscape has
    no spurious local minima.
    """
    m, n = M.shape
    k = min(m, n)
    shapes = [(m, k), (n, k)]

    def fun(v):
        P, Q = _unpack(v, shapes)
        R = P @ Q.conj().T - M
        f = 0.5 * tau * (np.vdot(P, P).real + np.vdot(Q, Q).real) + 0.5 * np.vdot(R, R).real
        return f, _pack(tau * P + R @ Q, tau * Q + R.conj().T @ P)

    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(2 * (m + n) * k)
    res = minimize(fun, v0, jac=True, method="L-BFGS-B",
                   options={"maxiter": 20000, "gtol": 1e-13, "ftol": 1e-16, "maxcor": 30})
    P, Q = _unpack(res.x, shapes)
    return P @ Q.conj().T


def group_shrink_oracle(M, tau):
    """Column-wise argmin of tau ||x|| + 1/2 ||x - m||^2.

    Rotating x toward m never increases the objective, so the minimizer is
    ``s m / ||m||`` for some ``s >= 0``; ``s`` comes from a 1-D root search on the slope.
    """
    out = np.zeros_like(M)
    for j in range(M.shape[1]):
        m = M[:, j]
        r = np.linalg.norm(m)
        if r == 0:
            continue
        # derivative of the 1-D objective along the ray; convex, so its root (or 0) is the minimum
        slope = lambda s: tau + s - r
        s = 0.0 if slope(0.0) >= 0 else brentq(slope, 0.0, r, xtol=1e-16, rtol=4 * np.finfo(float).eps)
        out[:, j] = s * m / r
    return out


def lrd_subgradient_oracle(W_bar, H_bar, lam, epochs=24, steps=2000, seed=0):
    """Best value of f(C) = ||W_bar - C H_bar^T||_* + lam ||C||_{1,2} found by subgradient descent.

    Eliminating ``W_hat`` leaves an unconstrained nonsmooth convex problem.
    Each epoch restarts from the best iterate with normalized steps
    ``a / sqrt(t)`` and halves ``a`` for the next epoch.
    """
    N, p = W_bar.shape[0], H_bar.shape[1]
    HbT, Hc = H_bar.T, H_bar.conj()

    def f(C):
        return np.linalg.svd(W_bar - C @ HbT, compute_uv=False).sum() + lam * np.linalg.norm(C, axis=0).sum()

    rng = np.random.default_rng(seed)
    best_C = 1e-3 * (rng.standard_normal((N, p)) + 1j * rng.standard_normal((N, p)))
    best = f(best_C)
    a = 0.5 * np.linalg.norm(W_bar)
    for _ in range(epochs):
        C = best_C
        for t in range(1, steps + 1):
            U, sv, Vh = np.linalg.svd(W_bar - C @ HbT, full_matrices=False)
            keep = sv > 1e-12 * max(sv[0], 1e-300)
            norms = np.linalg.norm(C, axis=0)
            g = -(U[:, keep] @ Vh[keep]) @ Hc + lam * C / np.where(norms > 0, norms, np.inf)
            gn = np.linalg.norm(g)
            if gn == 0:
                return f(C)
            C = C - (a / np.sqrt(t)) * g / gn
            val = f(C)
            if val < best:
                best, best_C = val, C
        a *= 0.5
    return best
