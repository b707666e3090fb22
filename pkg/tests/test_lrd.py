import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import crandn, matrix_model
from oracles import group_shrink_oracle, svt_oracle
from pmufdi.lrd import (
    LrdConfig,
    column_support,
    group_soft_threshold,
    l12_norm,
    lambda_sweep,
    nuclear_norm,
    solve_lrd,
    svt,
)

seeds = st.integers(0, 2**32 - 1)


def random_matrix(seed, max_dim=6):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(1, max_dim + 1, 2)
    return rng, crandn(rng, m, n)


@settings(max_examples=25, deadline=None)
@given(seeds, st.floats(0.05, 3.0))
def test_svt_matches_factorized_oracle(seed, tau):
    _, M = random_matrix(seed)
    np.testing.assert_allclose(svt(M, tau), svt_oracle(M, tau, seed % 1000), atol=1e-5)


@settings(max_examples=50, deadline=None)
@given(seeds, st.floats(0.01, 3.0))
def test_group_shrink_matches_oracle(seed, tau):
    _, M = random_matrix(seed)
    np.testing.assert_allclose(group_soft_threshold(M, tau), group_shrink_oracle(M, tau), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(0.05, 2.0))
def test_group_shrink_is_a_minimizer(seed, tau):
    rng, M = random_matrix(seed)
    X = group_soft_threshold(M, tau)

    def obj(Z):
        return tau * l12_norm(Z) + 0.5 * np.linalg.norm(Z - M) ** 2

    base = obj(X)
    for _ in range(20):
        assert obj(X + 1e-3 * crandn(rng, *M.shape)) >= base - 1e-12


@settings(max_examples=50, deadline=None)
@given(seeds, st.floats(0.01, 2.0))
def test_prox_operators_nonexpansive(seed, tau):
    rng, A = random_matrix(seed)
    B = A + crandn(rng, *A.shape)
    for prox in (svt, group_soft_threshold):
        assert np.linalg.norm(prox(A, tau) - prox(B, tau)) <= np.linalg.norm(A - B) * (1 + 1e-12)


def test_prox_thresholds():
    M = np.diag([3.0, 1.0, 0.5]).astype(complex)
    np.testing.assert_allclose(svt(M, 1.0), np.diag([2.0, 0, 0]), atol=1e-14)
    assert np.all(svt(M, 5.0) == 0)
    G = np.array([[3.0, 0.3], [4.0, 0.4]], dtype=complex)
    np.testing.assert_allclose(group_soft_threshold(G, 1.0), [[2.4, 0], [3.2, 0]])
    with pytest.raises(ValueError):
        svt(M, 0)
    with pytest.raises(ValueError):
        group_soft_threshold(M, -1)


def test_norms():
    M = np.array([[3, 0], [4, 1j]])
    assert l12_norm(M) == pytest.approx(6.0)
    assert nuclear_norm(np.diag([2.0, 1j])) == pytest.approx(3.0)


def planted_rpca(seed, N=40, n=10, rank=2):
    rng = np.random.default_rng(seed)
    W = crandn(rng, N, rank) @ crandn(rng, rank, n)
    j = int(rng.integers(n))
    a = crandn(rng, N)
    Q, _ = np.linalg.qr(W)
    a -= Q @ (Q.conj().T @ a)
    a *= 3 * np.abs(W).max() / np.abs(a).max()
    Wb = W.copy()
    Wb[:, j] += a
    return W, Wb, j


def test_outlier_pursuit_with_identity_map():
    jac = matrix_model(np.eye(10))
    hits = 0
    for seed in range(100):
        _, Wb, j = planted_rpca(seed)
        res = solve_lrd(Wb, jac, LrdConfig(lam=0.9))
        hits += res.detected_state_support == {j + 1}
    assert hits >= 95


def test_constraint_satisfied_at_convergence(jac24, rts24_data):
    _, W = rts24_data
    res = solve_lrd(W, jac24)
    assert res.converged
    assert res.primal_residual_trace[-1] <= 1e-7
    np.testing.assert_allclose(res.W_hat + res.C_hat @ jac24.H_bar.T, W, atol=1e-6 * np.linalg.norm(W))
    assert len(res.objective_trace) == res.iterations


def test_no_attack_is_clean(jac24, rts24_data):
    res = solve_lrd(rts24_data[1], jac24)
    assert res.detected_state_support == set()
    assert res.l12_norm < 1e-4 * np.linalg.norm(rts24_data[1])


def small_instance(seed, attack=1.0):
    rng = np.random.default_rng(seed)
    jac = matrix_model(crandn(rng, 5, 3))
    Wb = np.outer(crandn(rng, 6), crandn(rng, 5)) + attack * (crandn(rng, 6, 3) * [1, 0, 0]) @ jac.H_bar.T
    return jac, Wb


def test_lyapunov_decreases():
    jac, Wb = small_instance(1, attack=4.0)
    cfg = LrdConfig(lam=0.7, max_iter=1)
    ref = solve_lrd(Wb, jac, LrdConfig(lam=0.7, max_iter=50000, tol_primal=1e-14, tol_dual=1e-14))
    L = np.linalg.norm(jac.H_bar, 2) ** 2
    N, n, p = Wb.shape[0], jac.n, jac.p
    state = (np.zeros((N, n), complex), np.zeros((N, p), complex), np.zeros((N, n), complex))
    values = []
    for _ in range(150):
        res = solve_lrd(Wb, jac, cfg, init=state)
        state = (res.W_hat, res.C_hat, res.dual)
        values.append(
            cfg.rho * L * np.linalg.norm(res.C_hat - ref.C_hat) ** 2
            + cfg.rho * np.linalg.norm(res.dual - ref.dual) ** 2
        )
    values = np.array(values)
    assert np.linalg.norm(ref.C_hat) > 1.0
    assert np.all(np.diff(values) <= 1e-9 * values[0])
    assert values[-1] < 1e-3 * values[0]


def test_objective_positively_homogeneous():
    jac, Wb = small_instance(3)
    cfg = LrdConfig(max_iter=20000, tol_primal=1e-10, tol_dual=1e-10)
    a = solve_lrd(Wb, jac, cfg).objective
    b = solve_lrd(4.0 * Wb, jac, cfg).objective
    assert b == pytest.approx(4.0 * a, rel=1e-6)


def test_warm_and_cold_sweeps_agree():
    jac, Wb = small_instance(5)
    cfg = LrdConfig(max_iter=20000, tol_primal=1e-10, tol_dual=1e-10)
    lams = np.linspace(0.6, 1.5, 6)
    warm = lambda_sweep(Wb, jac, lams, cfg, warm_start=True)
    cold = lambda_sweep(Wb, jac, lams, cfg, warm_start=False)
    for (la, na, sa), (lb, nb, sb) in zip(warm, cold):
        assert la == lb
        assert na == pytest.approx(nb, rel=1e-4, abs=1e-7)
        assert sa == sb
    norms = [x[1] for x in cold]
    assert all(b <= a + 1e-6 for a, b in zip(norms, norms[1:]))


def test_sweep_validates_lambdas():
    jac, Wb = small_instance(0)
    with pytest.raises(ValueError, match="ascending"):
        lambda_sweep(Wb, jac, [1.2, 1.1])
    with pytest.raises(ValueError, match="positive"):
        lambda_sweep(Wb, jac, [0.0, 1.0])


def test_rejects_nan_and_bad_shapes():
    jac, Wb = small_instance(1)
    bad = Wb.copy()
    bad[2, 3] = np.nan
    with pytest.raises(ValueError, match="NaN"):
        solve_lrd(bad, jac)
    with pytest.raises(ValueError, match="channels"):
        solve_lrd(Wb[:, :4], jac)


def test_zero_input():
    jac, Wb = small_instance(2)
    res = solve_lrd(np.zeros_like(Wb), jac)
    assert res.converged and res.detected_state_support == set()
    assert np.all(res.C_hat == 0)


def test_nonconvergence_is_reported():
    jac, Wb = small_instance(4)
    res = solve_lrd(Wb, jac, LrdConfig(max_iter=3))
    assert res.iterations == 3 and not res.converged


def test_column_support_floor():
    cfg = LrdConfig()
    C = np.zeros((4, 3), complex)
    C[:, 1] = 1e-12
    _, normalized, cols = column_support(C, 1.0, cfg)
    assert cols.size == 0 and normalized.max() < 1e-6
    C[:, 2] = 1.0
    _, normalized, cols = column_support(C, 1.0, cfg)
    assert cols.tolist() == [2] and normalized[2] == 1.0


@pytest.mark.parametrize(
    "kwargs", [{"lam": 0}, {"rho": -1}, {"max_iter": 0}, {"tol_primal": 0}, {"support_threshold": -0.1}]
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        LrdConfig(**kwargs)
