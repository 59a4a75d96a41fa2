import hypothesis
import numpy as np
import pytest

from notmf import MaskedMatrix, VarCoefficients, build

hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.load_profile("default")


def literal_psi(d, m, T, k, first_order=False):
    """Psi_k written out block by block; m == 0 is plain lag selection."""
    h = T - d - m
    if m == 0:
        P = np.hstack([np.zeros((h, d - k)), np.eye(h), np.zeros((h, k))])
    else:
        P = (np.hstack([np.zeros((h, d - k)), -np.eye(h), np.zeros((h, k + m))])
             + np.hstack([np.zeros((h, d + m - k)), np.eye(h), np.zeros((h, k))]))
    if first_order:
        g = h - 1
        Phi = np.hstack([np.zeros((g, 1)), np.eye(g)]) - np.hstack([np.eye(g), np.zeros((g, 1))])
        P = Phi @ P
    return P


def random_instance(rng, N=6, T=12, R=2, d=1, m=3, density=0.5, first_order=False, scale=0.4):
    Y = MaskedMatrix(rng.standard_normal((N, T)), rng.uniform(size=(N, T)) < density)
    W = rng.standard_normal((R, N))
    X = rng.standard_normal((R, T))
    coeffs = VarCoefficients(scale * rng.standard_normal((R, d * R)), d)
    fam = build(d, m, T, first_order)
    return Y, W, X, coeffs, fam


def generate_var_latents(rng, R, d, lags, length, diagonal=False):
    """Latents whose innermost difference follows a VAR(d) exactly."""
    A = rng.standard_normal((R, d * R))
    if diagonal:
        A *= np.tile(np.eye(R), (1, d))
    A *= 0.5 / max(1.0, np.abs(A).sum(axis=1).max())
    inner = [rng.standard_normal(R) for _ in range(d)]
    total = sum(lags)
    while len(inner) < length - total:
        inner.append(sum(A[:, (k - 1) * R:k * R] @ inner[-k] for k in range(1, d + 1)))
    series = np.array(inner).T
    for lag in reversed(lags):
        out = np.zeros((R, series.shape[1] + lag))
        out[:, :lag] = rng.standard_normal((R, lag))
        for t in range(lag, out.shape[1]):
            out[:, t] = out[:, t - lag] + series[:, t - lag]
        series = out
    return series, VarCoefficients(A, d, diagonal)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
