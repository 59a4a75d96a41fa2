import numpy as np
import pytest

from notmf import (
    MaskedMatrix,
    NumericalError,
    SingularityError,
    SizeCapError,
    VarCoefficients,
    apply_Lx,
    build,
    cgtf,
    objective,
    oracle_x,
    update_coefficients,
    update_spatial,
)
from notmf.operators import apply_psi

from conftest import literal_psi, random_instance


def dense_x_system(Y, W, coeffs, d, m, T, lam, rho, first_order=False):
    """S + lam * sum_k sum_h (Psi_k kron A_k)^T (Psi_h kron A_h) + rho I, built literally."""
    R = W.shape[0]
    S = np.zeros((R * T, R * T))
    for t in range(T):
        for i in range(Y.n_rows):
            if Y.mask[i, t]:
                S[t * R:(t + 1) * R, t * R:(t + 1) * R] += np.outer(W[:, i], W[:, i])
    As = [-np.eye(R)] + [coeffs.A[:, k * R:(k + 1) * R] for k in range(d)]
    blocks = [np.kron(literal_psi(d, m, T, k, first_order), As[k]) for k in range(d + 1)]
    V = sum(Bk.T @ Bh for Bk in blocks for Bh in blocks)
    return S + lam * V + rho * np.eye(R * T)


def vec(X):
    return X.reshape(-1, order="F")


# ---- spatial update ---------------------------------------------------------

def test_spatial_scalar_example():
    Y = MaskedMatrix([[2.0, 9.0]], [[True, False]])
    W = update_spatial(Y, np.array([[1.0, 5.0]]), rho=1.0)
    np.testing.assert_allclose(W, [[1.0]], rtol=1e-15)


def test_spatial_recovers_exact_factors(rng):
    W_true = rng.standard_normal((3, 8))
    X = rng.standard_normal((3, 20))
    Y = MaskedMatrix(W_true.T @ X, np.ones((8, 20), bool))
    np.testing.assert_allclose(update_spatial(Y, X, rho=0.0), W_true, atol=1e-8)


def test_spatial_empty_row_is_zero(rng):
    mask = rng.uniform(size=(4, 10)) < 0.7
    mask[2] = False
    Y = MaskedMatrix(rng.standard_normal((4, 10)), mask)
    X = rng.standard_normal((2, 10))
    for rho in (0.0, 1.0):
        W = update_spatial(Y, X, rho)
        assert np.all(W[:, 2] == 0)


def test_spatial_singular_names_row(rng):
    mask = np.ones((3, 6), bool)
    mask[1, 1:] = False
    Y = MaskedMatrix(rng.standard_normal((3, 6)), mask)
    with pytest.raises(SingularityError, match="row 1"):
        update_spatial(Y, rng.standard_normal((2, 6)), rho=0.0)


@pytest.mark.parametrize("seed", range(5))
def test_spatial_gradient_vanishes(seed):
    rng = np.random.default_rng(seed)
    Y, _, X, *_ = random_instance(rng, N=9, T=15, R=3)
    rho = 0.8
    W = update_spatial(Y, X, rho)
    grad = -X @ np.where(Y.mask, Y.values - W.T @ X, 0.0).T + rho * W
    assert np.linalg.norm(grad) <= 1e-8 * np.linalg.norm(X @ Y.filled.T)


def test_spatial_ignores_unobserved_values(rng):
    Y, _, X, *_ = random_instance(rng)
    other = MaskedMatrix(np.where(Y.mask, Y.values, 1e6), Y.mask)
    np.testing.assert_array_equal(update_spatial(Y, X, 1.0), update_spatial(other, X, 1.0))


# ---- the X operator ---------------------------------------------------------

def test_Lx_collapses_without_temporal_term():
    Y = MaskedMatrix(np.ones((1, 5)), np.ones((1, 5), bool))
    X = np.arange(5.0)[None]
    fam = build(1, 1, 5)
    out = apply_Lx(X, np.ones((1, 1)), Y, VarCoefficients.zeros(1, 1), fam, lam=0.0, rho=0.5)
    np.testing.assert_allclose(out, 1.5 * X)


def test_Lx_linear(rng):
    Y, W, X, coeffs, fam = random_instance(rng, d=2, m=2)
    X2 = rng.standard_normal(X.shape)
    L = lambda V: apply_Lx(V, W, Y, coeffs, fam, 1.3, 0.4)
    np.testing.assert_allclose(L(2.5 * X - 0.7 * X2), 2.5 * L(X) - 0.7 * L(X2), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("d,m,fo", [(1, 3, False), (2, 1, False), (1, 0, False), (2, 2, True)])
def test_Lx_matches_dense_system(d, m, fo):
    rng = np.random.default_rng(7 + d + m)
    N, T, R = 6, 12, 2
    Y, W, X, coeffs, fam = random_instance(rng, N, T, R, d, m, first_order=fo)
    lam, rho = 1.7, 0.3
    H = dense_x_system(Y, W, coeffs, d, m, T, lam, rho, fo)
    got = vec(apply_Lx(X, W, Y, coeffs, fam, lam, rho))
    np.testing.assert_allclose(got, H @ vec(X), rtol=0, atol=1e-10 * np.abs(H @ vec(X)).max())


@pytest.mark.parametrize("seed", range(5))
def test_Lx_self_adjoint_and_positive(seed):
    rng = np.random.default_rng(seed)
    Y, W, X1, coeffs, fam = random_instance(rng, N=7, T=15, R=3, d=2, m=2)
    X2 = rng.standard_normal(X1.shape)
    rho = 0.6
    L = lambda V: apply_Lx(V, W, Y, coeffs, fam, 2.0, rho)
    a, b = np.sum(L(X1) * X2), np.sum(X1 * L(X2))
    assert abs(a - b) <= 1e-10 * max(abs(a), 1.0)
    assert np.sum(L(X1) * X1) >= rho * np.sum(X1**2)


# ---- CG and the dense oracle -----------------------------------------------

def test_oracle_scalar_example():
    y = np.array([[1.0, -2.0, 4.0, 0.5]])
    Y = MaskedMatrix(y, np.ones_like(y, bool))
    X = oracle_x(Y, np.ones((1, 1)), VarCoefficients.zeros(1, 1), build(1, 1, 4), lam=0.0, rho=1.0)
    np.testing.assert_allclose(X, y / 2, atol=1e-14)


def test_oracle_residual(rng):
    Y, W, _, coeffs, fam = random_instance(rng, d=2, m=1)
    X = oracle_x(Y, W, coeffs, fam, 1.0, 0.5)
    rhs = W @ Y.filled
    res = apply_Lx(X, W, Y, coeffs, fam, 1.0, 0.5) - rhs
    assert np.linalg.norm(res) <= 1e-8 * np.linalg.norm(rhs)


def test_oracle_cap(rng):
    Y = MaskedMatrix(np.zeros((3, 1001)), np.ones((3, 1001), bool))
    with pytest.raises(SizeCapError):
        oracle_x(Y, np.ones((2, 3)), VarCoefficients.zeros(2, 1), build(1, 1, 1001), 1.0, 1.0)


def test_cg_exact_warm_start_stops_immediately(rng):
    Y, W, _, coeffs, fam = random_instance(rng)
    Xstar = oracle_x(Y, W, coeffs, fam, 1.0, 1.0)
    X, info = cgtf(Y, W, Xstar, coeffs, fam, 1.0, 1.0, n_x=50, tol=1e-6, return_info=True)
    assert info["iterations"] == 0
    np.testing.assert_array_equal(X, Xstar)


def test_cg_matches_oracle(rng):
    Y, W, _, coeffs, fam = random_instance(rng, N=6, T=12, R=2, d=1, m=3)
    Xo = oracle_x(Y, W, coeffs, fam, 1.0, 1.0)
    Xc = cgtf(Y, W, np.zeros_like(Xo), coeffs, fam, 1.0, 1.0, n_x=200, tol=1e-12)
    assert np.linalg.norm(Xc - Xo) <= 1e-6 * np.linalg.norm(Xo)


def test_cg_five_iterations_near_optimal_objective(rng):
    Y, W, X0, coeffs, fam = random_instance(rng, N=6, T=12, R=2, d=1, m=3)
    lam, rho = 1.0, 1.0
    Xo = oracle_x(Y, W, coeffs, fam, lam, rho)
    X5 = cgtf(Y, W, np.zeros_like(Xo), coeffs, fam, lam, rho, n_x=5)
    f_o = objective(Y, W, Xo, coeffs, fam, lam, rho)
    f_5 = objective(Y, W, X5, coeffs, fam, lam, rho)
    assert f_o <= f_5 <= 1.01 * f_o


def test_cg_error_energy_norm_decreases(rng):
    Y, W, X0, coeffs, fam = random_instance(rng, N=8, T=16, R=2, d=2, m=3)
    lam, rho = 1.0, 0.5
    Xo = oracle_x(Y, W, coeffs, fam, lam, rho)
    L = lambda V: apply_Lx(V, W, Y, coeffs, fam, lam, rho)
    errs = []
    for n in range(1, 15):
        E = cgtf(Y, W, X0, coeffs, fam, lam, rho, n_x=n, tol=0.0) - Xo
        errs.append(np.sum(E * L(E)))
    assert all(b <= a * (1 + 1e-10) for a, b in zip(errs, errs[1:]))


def test_cg_reports_non_finite(rng):
    Y, W, X0, coeffs, fam = random_instance(rng)
    W = W.copy()
    W[0, 0] = 1e200
    with pytest.raises(NumericalError, match="iteration"):
        cgtf(Y, W, X0, coeffs, fam, 1.0, 1.0, n_x=5)


# ---- coefficient update -----------------------------------------------------

def test_coefficients_scalar_recovery():
    v = 0.5 ** np.arange(30)
    x = np.concatenate([[0.0], np.cumsum(v)])[None]
    fam = build(1, 1, x.shape[1])
    A = update_coefficients(x, fam, lam=3.0).A
    np.testing.assert_allclose(A, [[0.5]], atol=1e-10)


def test_coefficients_zero_signal():
    fam = build(2, 3, 20)
    coeffs = update_coefficients(np.full((2, 20), 4.0), fam)
    assert np.array_equal(coeffs.A, np.zeros((2, 4)))


def test_diagonal_constraint_is_noop_at_rank_one(rng):
    X = np.cumsum(rng.standard_normal((1, 40)), axis=1)
    fam = build(2, 2, 40)
    full = update_coefficients(X, fam).A
    diag = update_coefficients(X, fam, diagonal_constraint=True).A
    np.testing.assert_allclose(full, diag, atol=1e-12)


@pytest.mark.parametrize("diag", [False, True])
def test_coefficient_gradient_vanishes(rng, diag):
    X = rng.standard_normal((3, 50))
    fam = build(2, 5, 50)
    coeffs = update_coefficients(X, fam, diagonal_constraint=diag)
    Z0 = apply_psi(fam, X, 0)
    lagged = np.vstack([apply_psi(fam, X, k) for k in (1, 2)])
    resid = Z0 - coeffs.A @ lagged
    grad = -resid @ lagged.T
    if diag:
        grad = grad * np.tile(np.eye(3), (1, 2))
    assert np.linalg.norm(grad) <= 1e-8 * np.linalg.norm(Z0) * np.linalg.norm(lagged)


def test_diagonal_constraint_zeroes_off_diagonals(rng):
    coeffs = update_coefficients(rng.standard_normal((3, 40)), build(2, 1, 40), diagonal_constraint=True)
    off = ~np.tile(np.eye(3, dtype=bool), (1, 2))
    assert np.all(coeffs.A[off] == 0)
