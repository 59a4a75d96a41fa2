"""Nonstationary temporal matrix factorization for incomplete multivariate series."""
from .data import MaskedMatrix, project
from .errors import (
    ConfigError,
    DimensionError,
    NotmfError,
    NumericalError,
    ParseError,
    SeriesTooShortError,
    SingularityError,
    SizeCapError,
)
from .evaluation import MetricReport, grid_search, make_synthetic, mape, rmse
from .forecast import ForecastResult, forecast_latent, forecast_observations, rolling_forecast
from .model import FactorModel, ModelConfig, fit, objective
from .operators import OperatorFamily, apply_psi, apply_psi_adjoint, build, dense_psi
from .solvers import VarCoefficients, apply_Lx, cgtf, oracle_x, update_coefficients, update_spatial

__version__ = "0.1.0"
