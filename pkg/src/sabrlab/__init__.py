"""Short-maturity expansions and exact quadrature for SABR-type ATM option values."""

from __future__ import annotations

__version__ = "0.1.0"

from .kernels import BACKEND
from .payoff_kernel import (
    BranchError,
    ConvergenceError,
    DomainError,
    ModelParams,
    QuadSpec,
    eval_G_complex,
    eval_g,
    eval_g0,
    eval_g_inf,
    mckean_tail,
)
from .pricer import (
    PriceResult,
    covered_call,
    delta_v,
    double_integral_price,
    implied_vol,
    price_atm,
    price_strike,
    series_price,
)
from .scaling_limit import convergence_radius, sigma_hat_series, sigma_hat_sq, solve_lambda
from .series_engine import derive_payoff_series, implied_variance_series, optimal_truncation

__all__ = [
    "BACKEND",
    "BranchError",
    "ConvergenceError",
    "DomainError",
    "ModelParams",
    "PriceResult",
    "QuadSpec",
    "convergence_radius",
    "covered_call",
    "delta_v",
    "derive_payoff_series",
    "double_integral_price",
    "eval_G_complex",
    "eval_g",
    "eval_g0",
    "eval_g_inf",
    "implied_variance_series",
    "implied_vol",
    "mckean_tail",
    "optimal_truncation",
    "price_atm",
    "price_strike",
    "series_price",
    "sigma_hat_series",
    "sigma_hat_sq",
    "solve_lambda",
]
