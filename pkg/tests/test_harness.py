"""Validation-harness pieces that do not need long Monte Carlo runs."""

import math

import numpy as np
import pytest
from scipy import stats as sps

from ergovol.errors import ParameterError
from ergovol.harness import (
    FitReport,
    heston_analytic_check,
    ks_distance,
)
from ergovol.model import MarketSpec
from ergovol.pricer import Payoff


def test_ks_distance_matches_scipy(rng):
    x = rng.normal(size=1000)
    ours = ks_distance(x, sps.norm.cdf)
    ref = sps.kstest(x, sps.norm.cdf).statistic
    assert abs(ours - ref) < 1e-12


def test_ks_distance_uniform(rng):
    x = rng.uniform(size=5000)
    ours = ks_distance(x, lambda z: np.clip(z, 0.0, 1.0))
    ref = sps.kstest(x, "uniform").statistic
    assert abs(ours - ref) < 1e-12


def test_heston_analytic_check_defaults():
    rep = heston_analytic_check()
    assert rep.passed
    assert rep.rel_err_alpha < 1e-5
    assert rep.rel_err_sigma2 < 1e-5


def test_heston_analytic_check_zero_rho():
    rep = heston_analytic_check(rho=0.0)
    assert rep.alpha_analytic == 0.0
    assert rep.passed


def test_heston_analytic_check_rejects_bad_params():
    with pytest.raises(ParameterError):
        heston_analytic_check(xi=-1.0)


def test_fit_report_pass_rule():
    assert FitReport(0.01, 0.02, 100).passed
    assert not FitReport(0.03, 0.02, 100).passed


def test_convergence_study_input_validation(heston_spec, market):
    from ergovol.harness import convergence_study
    payoff = Payoff.put(1.0)
    with pytest.raises(ParameterError):
        convergence_study(heston_spec, market, payoff, [0.4, 0.2])
    with pytest.raises(ParameterError):
        convergence_study(heston_spec, market, payoff, [0.2, 0.4, 0.1])
