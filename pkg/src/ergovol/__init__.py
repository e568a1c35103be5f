"""Corrected Black-Scholes pricing under ergodic stochastic volatility."""

from .model import (
    DiffusionSpec,
    MarketSpec,
    build_ergodic_measure,
    expectation,
    preset,
)
from .pricer import Payoff, alpha_coefficient, price_corrected
from .mc import McConfig, extract_cycles, price_mc

__all__ = [
    "DiffusionSpec",
    "MarketSpec",
    "McConfig",
    "Payoff",
    "alpha_coefficient",
    "build_ergodic_measure",
    "expectation",
    "extract_cycles",
    "preset",
    "price_corrected",
    "price_mc",
]

__version__ = "0.1.0"
