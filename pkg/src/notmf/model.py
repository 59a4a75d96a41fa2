"""Alternating-minimization training, the objective, and model archives."""
from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .data import MaskedMatrix
from .errors import ConfigError, DimensionError, NumericalError
from .operators import OperatorFamily, apply_psi, build
from .solvers import (
    VarCoefficients,
    cgtf,
    oracle_x,
    update_coefficients,
    update_spatial,
)

logger = logging.getLogger(__name__)

VARIANTS = ("notmf", "notmf_first", "tmf", "trmf")


@dataclass
class ModelConfig:
    rank: int = 10
    order: int = 1
    season: int = 168
    lam: float = 1.0
    rho: float = 5.0
    outer_iters: int = 50
    cg_iters: int = 5
    cg_tol: float = 1e-8
    variant: str = "notmf"
    seed: int = 0
    # "cg" (default) or "exact" (dense oracle solve; small problems only)
    x_solver: str = "cg"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.variant == "tmf":
            self.season = 0
        if self.variant == "notmf_first" and self.season < 1:
            raise ConfigError("variant notmf_first needs season >= 1")
        if self.rank < 1 or self.order < 1 or self.season < 0:
            raise ConfigError(
                f"need rank >= 1, order >= 1, season >= 0 (got {self.rank}, {self.order}, {self.season})"
            )
        if self.lam < 0 or self.rho <= 0:
            raise ConfigError(f"need lambda >= 0 and rho > 0 (got {self.lam}, {self.rho})")
        if self.outer_iters < 0 or self.cg_iters < 1 or self.cg_tol < 0:
            raise ConfigError("need outer_iters >= 0, cg_iters >= 1, cg_tol >= 0")
        if self.x_solver not in ("cg", "exact"):
            raise ConfigError(f"x_solver must be 'cg' or 'exact', got {self.x_solver!r}")

    @property
    def first_order(self) -> bool:
        return self.variant == "notmf_first"

    @property
    def diagonal(self) -> bool:
        return self.variant == "trmf"

    def family(self, T: int) -> OperatorFamily:
        return build(self.order, self.season, T, self.first_order)

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(eq=False)
class FactorModel:
    W: np.ndarray
    X: np.ndarray
    coeffs: VarCoefficients
    config: ModelConfig
    fam: OperatorFamily
    objective_trace: list = field(default_factory=list)

    def save(self, path) -> None:
        """Write an ``.npz`` archive; arrays round-trip bit-exactly."""
        meta = {
            "config": self.config.to_dict(),
            "family": dataclasses.asdict(self.fam),
        }
        with open(path, "wb") as fh:
            np.savez(
                fh,
                meta=np.array(json.dumps(meta, sort_keys=True)),
                W=self.W,
                X=self.X,
                A=self.coeffs.A,
                objective_trace=np.asarray(self.objective_trace, dtype=float),
            )

    @classmethod
    def load(cls, path) -> "FactorModel":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            config = ModelConfig(**meta["config"])
            fam = OperatorFamily(**meta["family"])
            coeffs = VarCoefficients(z["A"], fam.d, config.diagonal)
            return cls(z["W"].copy(), z["X"].copy(), coeffs, config, fam,
                       z["objective_trace"].tolist())


def objective(Y: MaskedMatrix, W, X, coeffs: VarCoefficients, fam: OperatorFamily,
              lam: float, rho: float) -> float:
    """Data misfit + ridge penalty + VAR loss on the differenced factors."""
    W = np.asarray(W, dtype=float)
    X = np.asarray(X, dtype=float)
    if W.shape[0] != X.shape[0] or (W.shape[1], X.shape[1]) != Y.shape or fam.T != Y.n_cols:
        raise DimensionError(f"W {W.shape}, X {X.shape} inconsistent with Y {Y.shape}")
    resid = np.where(Y.mask, Y.values - W.T @ X, 0.0)
    E = apply_psi(fam, X, 0).copy()
    for k in range(1, fam.d + 1):
        E -= coeffs.block(k) @ apply_psi(fam, X, k)
    return float(
        0.5 * np.sum(resid**2)
        + 0.5 * rho * (np.sum(W**2) + np.sum(X**2))
        + 0.5 * lam * np.sum(E**2)
    )


def init_factors(N: int, T: int, config: ModelConfig):
    rng = np.random.default_rng(config.seed)
    R = config.rank
    W = rng.standard_normal((R, N)) / np.sqrt(R)
    X = rng.standard_normal((R, T)) / np.sqrt(R)
    coeffs = VarCoefficients.zeros(R, config.order, config.diagonal)
    return W, X, coeffs


def solve_x(Y, W, X, coeffs, fam, config: ModelConfig):
    if config.x_solver == "exact":
        return oracle_x(Y, W, coeffs, fam, config.lam, config.rho)
    return cgtf(Y, W, X, coeffs, fam, config.lam, config.rho,
                n_x=config.cg_iters, tol=config.cg_tol)


def fit(Y: MaskedMatrix, config: ModelConfig) -> FactorModel:
    """Run ``outer_iters`` rounds of W -> X -> A updates and record the objective."""
    N, T = Y.shape
    fam = config.family(T)
    if config.rank >= min(N, T):
        raise ConfigError(f"rank {config.rank} must be < min(N, T) = {min(N, T)}")
    W, X, coeffs = init_factors(N, T, config)
    trace = []
    for it in range(config.outer_iters):
        W = update_spatial(Y, X, config.rho)
        X = solve_x(Y, W, X, coeffs, fam, config)
        coeffs = update_coefficients(X, fam, config.lam, config.diagonal)
        f = objective(Y, W, X, coeffs, fam, config.lam, config.rho)
        if not np.isfinite(f):
            raise NumericalError(f"objective became non-finite at outer iteration {it}")
        trace.append(f)
        logger.debug("iter %d objective %.6g", it, f)
    return FactorModel(W, X, coeffs, config, fam, trace)
