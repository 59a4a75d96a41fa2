"""Subproblem solvers for the alternating scheme.

* :func:`update_spatial` - ridge least squares for each column of W.
* :func:`cgtf` - conjugate gradient on the X normal equations, matrix-free.
* :func:`update_coefficients` - least squares for the stacked VAR matrix.
* :func:`oracle_x` - dense closed-form X solve, for verification on small
  problems only.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .data import MaskedMatrix
from .errors import DimensionError, NumericalError, SingularityError, SizeCapError
from .operators import OperatorFamily, dense_psi, difference, difference_adjoint

logger = logging.getLogger(__name__)

ORACLE_CAP = 2000


@dataclass(frozen=True, eq=False)
class VarCoefficients:
    """Horizontal stack A = [A_1 ... A_d] (R x dR).

    A_0 = -I is implied by the loss and never stored.
    """

    A: np.ndarray
    d: int
    diagonal_constraint: bool = False

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[1] != self.d * A.shape[0]:
            raise DimensionError(f"coefficient matrix {A.shape} is not R x (d*R) for d={self.d}")
        if self.diagonal_constraint:
            R = A.shape[0]
            off = ~np.tile(np.eye(R, dtype=bool), (1, self.d))
            if np.any(A[off] != 0):
                raise ValueError("diagonal-constrained coefficients have off-diagonal entries")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @classmethod
    def zeros(cls, R: int, d: int, diagonal_constraint: bool = False) -> "VarCoefficients":
        return cls(np.zeros((R, d * R)), d, diagonal_constraint)

    @property
    def rank(self) -> int:
        return self.A.shape[0]

    def block(self, k: int) -> np.ndarray:
        """A_k for k = 1..d."""
        if not 1 <= k <= self.d:
            raise IndexError(f"block {k} outside 1..{self.d}")
        R = self.rank
        return self.A[:, (k - 1) * R:k * R]


def var_residual(Z: np.ndarray, coeffs: VarCoefficients, out_cols: int) -> np.ndarray:
    """Z_0 - sum_k A_k Z_k where Z_k is the lag-k window of the differenced series."""
    d = coeffs.d
    E = Z[:, d:d + out_cols].copy()
    for k in range(1, d + 1):
        E -= coeffs.block(k) @ Z[:, d - k:d - k + out_cols]
    return E


def _check_shapes(Y: MaskedMatrix, W, X, fam=None):
    N, T = Y.shape
    if W is not None and (W.ndim != 2 or W.shape[1] != N):
        raise DimensionError(f"W has shape {W.shape}, expected (R, {N})")
    if X is not None and (X.ndim != 2 or X.shape[1] != T):
        raise DimensionError(f"X has shape {X.shape}, expected (R, {T})")
    if W is not None and X is not None and W.shape[0] != X.shape[0]:
        raise DimensionError(f"rank mismatch: W {W.shape} vs X {X.shape}")
    if fam is not None and fam.T != T:
        raise DimensionError(f"operator family built for T={fam.T}, data has T={T}")


GRAM_CHUNK = 2**24


def update_spatial(Y: MaskedMatrix, X: np.ndarray, rho: float) -> np.ndarray:
    """Solve for every w_i: (sum_t x_t x_t^T + rho I) w_i = sum_t x_t y_it over observed t.

    Rows without observations get w_i = 0.
    """
    X = np.asarray(X, dtype=float)
    _check_shapes(Y, None, X)
    R = X.shape[0]
    M = Y.mask.astype(float)
    # G[i] = X diag(mask_i) X^T, b[i] = X y_i; row chunks bound the N x R x T temporary
    G = np.empty((Y.n_rows, R, R))
    step = max(1, GRAM_CHUNK // max(1, R * X.shape[1]))
    for lo in range(0, Y.n_rows, step):
        G[lo:lo + step] = np.einsum("it,rt,st->irs", M[lo:lo + step], X, X, optimize=True)
    G += rho * np.eye(R)
    b = Y.filled @ X.T
    W = np.zeros((Y.n_rows, R))
    has_obs = M.any(axis=1)
    if rho == 0:
        active = np.flatnonzero(has_obs)
    else:
        active = np.arange(Y.n_rows)
    for i in active:
        try:
            L = np.linalg.cholesky(G[i])
        except np.linalg.LinAlgError:
            raise SingularityError(
                f"spatial system for row {i} is singular "
                f"({len(Y.row_observed(i))} observations, rank {R}, rho={rho})"
            ) from None
        W[i] = _cho_solve(L, b[i])
    return W.T


def _cho_solve(L, b):
    z = solve_triangular(L, b, lower=True, check_finite=False)
    return solve_triangular(L.T, z, lower=False, check_finite=False)


def temporal_gradient_terms(X, coeffs: VarCoefficients, fam: OperatorFamily) -> np.ndarray:
    """sum_k A_k^T (sum_h A_h X Psi_h^T) Psi_k with A_0 = -I."""
    d, h = fam.d, fam.out_cols
    Z = difference(fam, X)
    E = -var_residual(Z, coeffs, h)
    GZ = np.zeros_like(Z)
    GZ[:, d:d + h] -= E
    for k in range(1, d + 1):
        GZ[:, d - k:d - k + h] += coeffs.block(k).T @ E
    return difference_adjoint(fam, GZ)


def apply_Lx(X, W, Y_mask, coeffs: VarCoefficients, fam: OperatorFamily,
             lam: float, rho: float) -> np.ndarray:
    """W P_Omega(W^T X) + lam * sum_k A_k^T (sum_h A_h X Psi_h^T) Psi_k + rho X."""
    X = np.asarray(X, dtype=float)
    W = np.asarray(W, dtype=float)
    mask = Y_mask.mask if isinstance(Y_mask, MaskedMatrix) else np.asarray(Y_mask, dtype=bool)
    if X.ndim != 2 or W.ndim != 2 or X.shape[0] != W.shape[0]:
        raise DimensionError(f"incompatible W {W.shape} and X {X.shape}")
    if mask.shape != (W.shape[1], X.shape[1]):
        raise DimensionError(f"mask {mask.shape} does not match W^T X {(W.shape[1], X.shape[1])}")
    if coeffs.rank != X.shape[0]:
        raise DimensionError(f"coefficients of rank {coeffs.rank}, X has {X.shape[0]} rows")
    out = W @ np.where(mask, W.T @ X, 0.0)
    if lam != 0:
        out += lam * temporal_gradient_terms(X, coeffs, fam)
    out += rho * X
    return out


def cgtf(Y: MaskedMatrix, W, X0, coeffs: VarCoefficients, fam: OperatorFamily,
         lam: float, rho: float, n_x: int = 5, tol: float = 1e-8,
         return_info: bool = False):
    """Conjugate gradient for apply_Lx(X) = W P_Omega(Y), warm-started at X0.

    Stops after ``n_x`` iterations or once ||r|| <= tol * ||W P_Omega(Y)||
    (the initial residual norm for a zero start).
    With ``return_info`` also returns a dict with the residual history.
    """
    W = np.asarray(W, dtype=float)
    X = np.array(X0, dtype=float)
    _check_shapes(Y, W, X, fam)
    if n_x < 1:
        raise ValueError(f"n_x must be >= 1, got {n_x}")

    def L(V):
        return apply_Lx(V, W, Y.mask, coeffs, fam, lam, rho)

    with np.errstate(over="ignore", invalid="ignore"):
        rhs = W @ Y.filled
        r = rhs - L(X)
        q = r.copy()
        rr = float(np.vdot(r, r))
        stop = tol * float(np.linalg.norm(rhs))
        history = [np.sqrt(rr)]
        if not np.isfinite(rr):
            raise NumericalError("non-finite initial residual in CG (iteration 0)")
        it = 0
        while it < n_x and np.sqrt(rr) > stop and rr > 0:
            Lq = L(q)
            qLq = float(np.vdot(q, Lq))
            if not np.isfinite(qLq):
                raise NumericalError(f"non-finite values in CG at iteration {it}")
            if qLq <= 0:
                raise NumericalError(
                    f"CG breakdown at iteration {it}: q^T L q = {qLq} (operator not positive definite?)"
                )
            alpha = rr / qLq
            X += alpha * q
            r -= alpha * Lq
            rr_new = float(np.vdot(r, r))
            if not np.isfinite(rr_new) or not np.all(np.isfinite(X)):
                raise NumericalError(f"non-finite values in CG at iteration {it}")
            q = r + (rr_new / rr) * q
            rr = rr_new
            history.append(np.sqrt(rr))
            it += 1
    logger.debug("cgtf: %d iterations, residual %.3e -> %.3e", it, history[0], history[-1])
    if return_info:
        return X, {"iterations": it, "residuals": history}
    return X


def oracle_x(Y: MaskedMatrix, W, coeffs: VarCoefficients, fam: OperatorFamily,
             lam: float, rho: float) -> np.ndarray:
    """Dense vectorized solve of the X normal equations (column-major vec)."""
    W = np.asarray(W, dtype=float)
    R, T = W.shape[0], Y.n_cols
    _check_shapes(Y, W, None, fam)
    if R * T > ORACLE_CAP:
        raise SizeCapError(f"dense X solve with R*T={R * T} exceeds cap {ORACLE_CAP}")
    H = np.zeros((R * T, R * T))
    for t in range(T):
        Wt = W[:, Y.column_observed(t)]
        H[t * R:(t + 1) * R, t * R:(t + 1) * R] = Wt @ Wt.T
    blocks = [np.kron(dense_psi(fam, 0), -np.eye(R))]
    blocks += [np.kron(dense_psi(fam, k), coeffs.block(k)) for k in range(1, fam.d + 1)]
    K = sum(blocks)
    H += lam * K.T @ K
    H += rho * np.eye(R * T)
    rhs = (W @ Y.filled).reshape(-1, order="F")
    try:
        c = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise SingularityError("dense X system is not positive definite") from None
    return _cho_solve(c, rhs).reshape((R, T), order="F")


def _lstsq_rows(target, regressors):
    """min_B ||target - B regressors||_F via SVD (minimum-norm when rank deficient)."""
    sol, *_ = np.linalg.lstsq(regressors.T, target.T, rcond=None)
    return sol.T


def update_coefficients(X, fam: OperatorFamily, lam: float = 1.0,
                        diagonal_constraint: bool = False) -> VarCoefficients:
    """Least-squares VAR coefficients on the differenced latent series.

    ``lam`` scales both sides of the normal equations and cancels; it is
    accepted for signature symmetry with the other updates.
    """
    X = np.asarray(X, dtype=float)
    if fam.out_cols < 1:
        raise DimensionError("no output columns to regress on")
    d, h = fam.d, fam.out_cols
    R = X.shape[0]
    Z = difference(fam, X)
    target = Z[:, d:d + h]
    lagged = [Z[:, d - k:d - k + h] for k in range(1, d + 1)]
    if not diagonal_constraint:
        A = _lstsq_rows(target, np.vstack(lagged))
    else:
        A = np.zeros((R, d * R))
        for r in range(R):
            reg = np.vstack([lag[r] for lag in lagged])
            a = _lstsq_rows(target[r:r + 1], reg)[0]
            A[r, r::R] = a
    return VarCoefficients(A, d, diagonal_constraint)
