"""Corrected-price quadrature against closed forms and identities."""

import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from ergovol.errors import ParameterError
from ergovol.model import MarketSpec, build_ergodic_measure, expectation, preset
from ergovol.pricer import (
    Payoff,
    alpha_coefficient,
    bs_put,
    calibrate_skew,
    d2,
    implied_vol_put,
    price_corrected,
    psi_function,
    put_closed_form,
    sigma_total,
    skew_line,
)


def _quote(payoff, market, alpha, sigma2, ou_measure, ou_spec):
    return price_corrected(payoff, ou_measure, ou_spec, market,
                           alpha=alpha, sigma2=sigma2)


# ---------------------------------------------------------------------------
# closed-form consistency


def test_put_quadrature_matches_closed_form(ou_spec, ou_measure, rng):
    market = MarketSpec(spot_log=0.0, rate=0.01, maturity=1.0)
    for _ in range(20):
        strike = rng.uniform(0.7, 1.3)
        sigma2 = rng.uniform(0.01, 0.25)
        alpha = rng.uniform(-0.05, 0.05)
        quote = _quote(Payoff.put(strike), market, alpha, sigma2,
                       ou_measure, ou_spec)
        ref = put_closed_form(strike, ou_measure, ou_spec, market,
                              alpha=alpha, sigma2=sigma2)
        assert abs(quote.price_corrected - ref) < 1e-8


def test_digital_against_brute_force(ou_spec, ou_measure):
    market = MarketSpec(spot_log=0.0, rate=0.03, maturity=0.75)
    strike, sigma2, alpha = 1.1, 0.09, -0.02
    quote = _quote(Payoff.digital(strike), market, alpha, sigma2,
                   ou_measure, ou_spec)
    # fine-grid trapezoid of D * (1 + p(z)) 1{Z <= log K} against the
    # Gaussian kernel of the terminal log-price
    disc = market.discount()
    mean = market.spot_log - math.log(disc) - 0.5 * sigma2
    root = math.sqrt(sigma2)
    z_jump = (math.log(strike) - mean) / root
    z = np.linspace(-12.0, z_jump, 2_000_001)  # grid ends exactly at the jump
    p = alpha * (1.0 - z**2 + (z**3 - 3.0 * z) / root)
    ref = disc * np.trapezoid((1.0 + p) * norm.pdf(z), z)
    assert abs(quote.price_corrected - ref) < 1e-7


@given(alpha=st.floats(-0.05, 0.05), strike=st.floats(0.7, 1.3),
       sigma2=st.floats(0.01, 0.25))
@settings(max_examples=25, deadline=None)
def test_put_call_parity(alpha, strike, sigma2):
    spec = preset("fouque_ou")
    measure = build_ergodic_measure(spec)
    market = MarketSpec(spot_log=0.0, rate=0.02, maturity=1.0)
    call = price_corrected(Payoff.call(strike), measure, spec, market,
                           alpha=alpha, sigma2=sigma2)
    put = price_corrected(Payoff.put(strike), measure, spec, market,
                          alpha=alpha, sigma2=sigma2)
    forward = math.exp(market.spot_log) - market.discount() * strike
    assert abs(call.price_corrected - put.price_corrected - forward) < 1e-10


def test_price_linear_in_payoff(ou_spec, ou_measure, rng):
    market = MarketSpec(spot_log=0.0, rate=0.02, maturity=1.0)
    f = Payoff.put(1.0)
    g = Payoff.digital(1.1)
    both = Payoff.custom(lambda z: 2.0 * f.fn(z) - 3.0 * g.fn(z),
                         bound=2.0 * f.bound + 3.0 * g.bound,
                         breakpoints=f.breakpoints + g.breakpoints)
    args = dict(alpha=0.03, sigma2=0.04)
    pf = _quote(f, market, ou_measure=ou_measure, ou_spec=ou_spec, **args)
    pg = _quote(g, market, ou_measure=ou_measure, ou_spec=ou_spec, **args)
    pb = _quote(both, market, ou_measure=ou_measure, ou_spec=ou_spec, **args)
    assert abs(pb.price_corrected
               - (2.0 * pf.price_corrected - 3.0 * pg.price_corrected)) < 1e-10


def test_quadrature_error_bound_is_small(ou_spec, ou_measure):
    market = MarketSpec(spot_log=0.0, rate=0.02, maturity=1.0)
    quote = _quote(Payoff.put(1.0), market, 0.02, 0.09, ou_measure, ou_spec)
    assert quote.error < 1e-10


# ---------------------------------------------------------------------------
# alpha


def test_alpha_identity_via_psi(ou_spec, ou_measure,
                                heston_spec, heston_measure):
    # alpha from the direct double quadrature must match
    # -eps Pi[phi rho psi] / (2 Sigma) with Sigma = Pi[phi^2] (T = 1)
    for spec, measure in ((ou_spec, ou_measure),
                          (heston_spec, heston_measure)):
        alpha = alpha_coefficient(measure, spec)
        var_rate = expectation(measure, lambda x: np.asarray(spec.phi(x))**2)

        def integrand(x):
            return (np.asarray(spec.phi(x)) * np.asarray(spec.rho(x))
                    * psi_function(measure, spec, x))

        other = -measure.epsilon * expectation(measure, integrand) \
            / (2.0 * var_rate)
        assert abs(alpha - other) / abs(alpha) < 1e-6


def test_alpha_scales_with_eta(heston_spec, heston_measure):
    # the skew coefficient picks up a factor eta under the time change
    # (b, c) -> (b/eta^2, c/eta): c sits in alpha's denominator
    alpha = alpha_coefficient(heston_measure, heston_spec)
    scaled = heston_spec.rescaled(0.5)
    alpha_scaled = alpha_coefficient(build_ergodic_measure(scaled), scaled)
    assert abs(alpha_scaled - 0.5 * alpha) / abs(alpha) < 1e-8


def test_alpha_error_estimate(ou_spec, ou_measure):
    alpha, err = alpha_coefficient(ou_measure, ou_spec, full=True)
    assert err < 1e-8 * max(1.0, abs(alpha))


# ---------------------------------------------------------------------------
# implied vol and skew


def test_implied_vol_round_trip():
    for vol in (0.05, 0.2, 0.8):
        price = bs_put(1.1, 0.0, 0.98, vol * vol * 2.0)
        out = implied_vol_put(price, 1.1, 0.0, 0.98, 2.0)
        assert abs(out - vol) < 1e-9


def test_implied_vol_rejects_arbitrage():
    with pytest.raises(ParameterError):
        implied_vol_put(1e-12, 2.0, 0.0, 1.0, 1.0)


def test_skew_slope_is_alpha_over_sigma_bar(ou_spec, ou_measure, market):
    alpha = alpha_coefficient(ou_measure, ou_spec)
    sig_bar = math.sqrt(sigma_total(ou_measure, ou_spec, market)
                        / market.maturity)
    a, _ = skew_line(alpha, ou_measure, ou_spec, market)
    assert abs(a - alpha / sig_bar) < 1e-12 * max(1.0, abs(a))


def test_skew_line_prices_consistently(heston_spec, heston_measure, market):
    # the line a log(K/S)/T + b should track the implied vol of the
    # corrected put price to first order near the money
    alpha = alpha_coefficient(heston_measure, heston_spec)
    sigma2 = sigma_total(heston_measure, heston_spec, market)
    a, b = skew_line(alpha, heston_measure, heston_spec, market)
    for strike in (0.95, 1.0, 1.05):
        price = put_closed_form(strike, heston_measure, heston_spec,
                                market, alpha=alpha, sigma2=sigma2)
        iv = implied_vol_put(price, strike, market.spot_log,
                             market.discount(), market.maturity)
        line = a * math.log(strike) / market.maturity + b
        assert abs(iv - line) < 5e-3 * iv


def test_calibrate_skew_exact_line():
    a_true, b_true = -0.08, 0.21
    rows = []
    for strike in (0.8, 0.9, 1.0, 1.1, 1.25):
        for mat in (0.5, 1.0, 2.0):
            iv = a_true * math.log(strike) / mat + b_true
            rows.append((strike, mat, iv))
    fit = calibrate_skew(rows, spot=1.0, rate=0.0)
    assert abs(fit.a - a_true) < 1e-12
    assert abs(fit.b - b_true) < 1e-12
    assert fit.residual < 1e-12


def test_calibrate_skew_recovers_model(heston_spec, heston_measure, market):
    # synthesize a surface from corrected put prices, fit the line, and
    # compare the slope with alpha / sigma_bar
    alpha = alpha_coefficient(heston_measure, heston_spec)
    var_rate = sigma_total(heston_measure, heston_spec, market) \
        / market.maturity
    rows = []
    for strike in (0.9, 0.95, 1.0, 1.05, 1.1):
        for mat in (0.5, 1.0):
            mkt = MarketSpec(spot_log=0.0, rate=market.rate, maturity=mat)
            price = put_closed_form(strike, heston_measure, heston_spec, mkt,
                                    alpha=alpha, sigma2=var_rate * mat)
            iv = implied_vol_put(price, strike, 0.0, mkt.discount(), mat)
            rows.append((strike, mat, iv))
    fit = calibrate_skew(rows, spot=1.0, rate=market.rate)
    target = alpha / math.sqrt(var_rate)
    assert abs(fit.a - target) < 0.15 * abs(target)


# ---------------------------------------------------------------------------
# guards


def test_payoff_guards():
    with pytest.raises(ParameterError):
        Payoff.put(-1.0)
    with pytest.raises(ParameterError):
        Payoff.custom(lambda z: z, bound=math.inf)


def test_bs_put_guards():
    with pytest.raises(ParameterError):
        bs_put(1.0, 0.0, 1.0, 0.0)
