"""Corrected Black-Scholes pricing under a fast-mixing volatility driver.

Given the ergodic characteristics of the driver X (see :mod:`ergovol.model`),
the terminal log-price is approximately Gaussian with total variance
Sigma = Pi[phi^2] * T, and the first correction enters through a cubic
polynomial reweighting of the Gaussian density,

    price ~= D * E[(1 + p(N)) f(Z0 - log D - Sigma/2 + sqrt(Sigma) N)],

    p(z) = alpha * {1 - z^2 + (z^3 - 3z)/sqrt(Sigma)},

with N standard normal.  The scalar ``alpha`` carries the whole
leverage/skew effect; for put payoffs the corrected price collapses to a
closed form, and the implied-volatility surface flattens onto the line
iv ~= a * log(K/S)/(T - t) + b with (a, b) determined by alpha.
"""

import math
import weakref
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.stats import norm

from .errors import (
    DegenerateError,
    ExtrapolationError,
    ParameterError,
    PrecisionError,
    UnidentifiableError,
)
from .model import expectation

_Z_CUT = 10.0  # quadrature window in standard-normal units


# ---------------------------------------------------------------------------
# scalar characteristics


def sigma_total(measure, spec, market):
    """Total variance Sigma = Pi[phi^2] * T of the terminal log-price."""
    var_rate = expectation(measure, lambda x: np.asarray(spec.phi(x)) ** 2)
    if not var_rate > 0.0:
        raise DegenerateError("Pi[phi^2] vanishes: volatility is degenerate")
    return var_rate * market.maturity


def alpha_coefficient(measure, spec, full=False):
    """Skew coefficient alpha of the correction polynomial.

    alpha = -int F(x) phi(x) rho(x) / c(x) dx with the centered cumulative
    F(x) = int_{-inf}^x (phi^2/Pi[phi^2] - 1) dPi.  Both the inner cumulative
    and the outer integral are driven by one stiff-safe ODE sweep across the
    window; the error estimate is the difference between a loose and a tight
    tolerance run.  With ``full=True`` returns (alpha, error_estimate).
    """
    var_rate = expectation(measure, lambda x: np.asarray(spec.phi(x)) ** 2)
    if not var_rate > 0.0:
        raise DegenerateError("Pi[phi^2] vanishes: volatility is degenerate")
    lo, hi = measure.window

    def rhs(x, state):
        xa = np.array([x])
        pi_x = float(measure.pi(xa)[0])
        phi_x = float(np.asarray(spec.phi(xa), dtype=float)[0])
        rho_x = float(np.asarray(spec.rho(xa), dtype=float)[0])
        c_x = float(spec.c_checked(xa)[0])
        f_prime = (phi_x ** 2 / var_rate - 1.0) * pi_x
        a_prime = state[0] * phi_x * rho_x / c_x
        return (f_prime, a_prime)

    vals = []
    for rtol in (1e-7, 1e-11):
        sol = integrate.solve_ivp(rhs, (lo, hi), (0.0, 0.0), method="DOP853",
                                  rtol=rtol, atol=1e-14)
        if not sol.success:
            raise PrecisionError(
                "outer integral for alpha did not converge: " + sol.message,
                achieved=None)
        vals.append(-sol.y[1, -1])
    err = abs(vals[1] - vals[0])
    return (vals[1], err) if full else vals[1]


_psi_cache = weakref.WeakKeyDictionary()


def psi_profile(measure, spec, t_total=1.0):
    """Tabulate psi on the measure grid and return an interpolating callable.

    psi(x) = 2 eps c(x) s'(x) H(x) with H(x) = int_{-inf}^x h dPi and
    h = t_total * (phi^2 - Pi[phi^2]).  Left of the extremum of H the
    cumulative from the left is used directly.  To the right, H is rewritten
    as minus the complementary integral and the product s'(x) * H(x) is
    accumulated in shifted log-scale coordinates: the left cumulative there
    is a cancellation of two near-equal masses, and multiplying the residue
    by the huge s'(x) would amplify pure rounding noise.  The mass beyond
    the window is estimated by the endpoint (Watson-type) approximation
    int_x^inf g dPi ~= -g(x) / (2 (b/c^2)(x) eps^2 s'(x)).
    """
    var_rate = expectation(measure, lambda v: np.asarray(spec.phi(v)) ** 2)
    grid = measure.grid
    eps2 = measure.epsilon ** 2
    phi_g = np.asarray(spec.phi(grid), dtype=float)
    c_g = spec.c_checked(grid)
    w_tilde = t_total * (phi_g ** 2 - var_rate)
    log_sp = measure.log_s_prime(grid)

    if np.max(np.abs(w_tilde)) <= 1e-10 * abs(t_total) * var_rate:
        # phi^2 is constant up to quadrature noise; h vanishes identically
        # and amplifying the noise by s' at the window edges would be absurd
        lo, hi = measure.window

        def psi_zero(x):
            xa = np.atleast_1d(np.asarray(x, dtype=float))
            if np.any(xa < lo) or np.any(xa > hi):
                raise ExtrapolationError(
                    "psi evaluated outside the window [%g, %g]" % (lo, hi))
            return 0.0 if np.ndim(x) == 0 else np.zeros_like(xa)

        return psi_zero

    # left branch: H from the plain cumulative, times s'
    h_left = integrate.cumulative_simpson(w_tilde * measure.pi_vals, x=grid,
                                          initial=0.0)
    i_star = int(np.argmax(np.abs(h_left)))

    psi_vals = np.empty_like(grid)
    damp = 2.0 * measure.epsilon * c_g
    psi_vals[: i_star + 1] = (damp[: i_star + 1] * np.exp(log_sp[: i_star + 1])
                              * h_left[: i_star + 1])

    # right branch: s'(x) H(x) = -e^{L(x)} int_x^hi w e^{-L}/(eps^2 c^2) dv
    # minus the beyond-window tail.  The integrand varies by many e-folds
    # per mesh interval out there, so each segment is integrated exactly
    # under a log-linear model and the partial sums are kept in log scale.
    right = slice(i_star, None)
    l_right = log_sp[right]

    # subdivide mesh intervals so no sub-segment spans more than a quarter
    # of an e-fold of s'; the log-linear segment model is then essentially
    # exact even where the builder's mesh is coarse
    n_sub = np.clip(np.ceil(np.abs(np.diff(l_right)) / 0.25).astype(int),
                    1, 64)
    if np.any(n_sub > 1):
        pieces = [np.linspace(a, b, k + 1)[:-1] for a, b, k
                  in zip(grid[right][:-1], grid[right][1:], n_sub)]
        x_r = np.append(np.concatenate(pieces), grid[-1])
        node_idx = np.concatenate([[0], np.cumsum(n_sub)])
        l_r = measure.log_s_prime(x_r)
        w_r = t_total * (np.asarray(spec.phi(x_r), dtype=float) ** 2
                         - var_rate)
        c_r = spec.c_checked(x_r)
    else:
        x_r, l_r, w_r, c_r = grid[right], l_right, w_tilde[right], c_g[right]
        node_idx = np.arange(len(x_r))

    with np.errstate(divide="ignore"):
        lf = np.where(w_r > 0.0, np.log(np.where(w_r > 0.0, w_r, 1.0)),
                      -np.inf) - l_r - math.log(eps2) - 2.0 * np.log(c_r)
    dx = np.diff(x_r)
    top = np.maximum(lf[:-1], lf[1:])
    spread = top - np.minimum(lf[:-1], lf[1:])
    exact = np.isfinite(top) & np.isfinite(spread) & (spread > 1e-12)
    with np.errstate(invalid="ignore", divide="ignore"):
        log_seg = np.where(
            exact,
            top + np.log1p(-np.exp(-np.where(exact, spread, 1.0)))
            + np.log(dx) - np.log(np.where(exact, spread, 1.0)),
            np.log(0.5 * dx) + np.logaddexp(lf[:-1], lf[1:]))
    log_comp = np.full(len(x_r), -np.inf)
    log_comp[:-1] = np.logaddexp.accumulate(log_seg[::-1])[::-1]
    log_comp = log_comp[node_idx]
    l_n = l_right
    sp_h = -np.exp(l_n + log_comp)
    b_edge = float(np.asarray(spec.drift_over_c2(grid[-1:]), dtype=float)[0])
    if b_edge < 0.0 and w_r[-1] > 0.0:
        # endpoint estimate of the mass beyond the window; when the drift
        # is not inward at the edge the builder already vouched that mass
        # is below tail_tol and we drop it
        sp_h += w_r[-1] / (2.0 * b_edge * eps2) * np.exp(l_n - log_sp[-1])
    psi_vals[right] = damp[right] * sp_h

    psi_spline = CubicSpline(grid, psi_vals)
    lo, hi = measure.window

    def psi(x):
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(xa < lo) or np.any(xa > hi):
            raise ExtrapolationError(
                "psi evaluated outside the window [%g, %g]" % (lo, hi))
        out = psi_spline(xa)
        return float(out[0]) if np.ndim(x) == 0 else out

    return psi


def psi_function(measure, spec, x, t_total=1.0):
    """Cycle-compensator psi at ``x`` (scalar or array inside the window).

    Profiles are cached per measure; see :func:`psi_profile`.
    """
    key = (id(spec), float(t_total))
    cached = _psi_cache.setdefault(measure, {})
    if key not in cached:
        cached[key] = psi_profile(measure, spec, t_total)
    return cached[key](x)


def correction_polynomial(alpha, sigma2):
    """Ascending coefficients (c0, c1, c2, c3) of p(z) = alpha{1 - z^2 + (z^3-3z)/sqrt(Sigma)}."""
    if not sigma2 > 0.0:
        raise ParameterError("sigma2 must be positive")
    root = math.sqrt(sigma2)
    return (alpha, -3.0 * alpha / root, -alpha, alpha / root)


def _poly_eval(coeffs, z):
    return coeffs[0] + z * (coeffs[1] + z * (coeffs[2] + z * coeffs[3]))


# ---------------------------------------------------------------------------
# payoffs


@dataclass(frozen=True)
class Payoff:
    """Bounded Borel payoff of the terminal log-price.

    ``fn`` maps terminal log-price arrays to payoff values; ``breakpoints``
    lists known kinks/jumps in log-price coordinates so the quadrature can
    split there; ``bound`` is a sup-norm bound used in tail estimates.
    """

    fn: object
    breakpoints: tuple
    bound: float
    kind: str = "custom"
    strike: float = None

    @staticmethod
    def put(strike):
        if not strike > 0.0:
            raise ParameterError("strike must be positive")
        k = math.log(strike)
        return Payoff(lambda z: np.maximum(strike - np.exp(z), 0.0),
                      (k,), strike, kind="put", strike=strike)

    @staticmethod
    def call(strike):
        # unbounded; priced via put-call parity in price_corrected
        if not strike > 0.0:
            raise ParameterError("strike must be positive")
        k = math.log(strike)
        return Payoff(lambda z: np.maximum(np.exp(z) - strike, 0.0),
                      (k,), math.inf, kind="call", strike=strike)

    @staticmethod
    def digital(strike):
        """Cash-or-nothing 1{Z_T <= log K}."""
        if not strike > 0.0:
            raise ParameterError("strike must be positive")
        k = math.log(strike)
        return Payoff(lambda z: (np.asarray(z) <= k).astype(float),
                      (k,), 1.0, kind="digital", strike=strike)

    @staticmethod
    def custom(fn, bound, breakpoints=()):
        if not (np.isfinite(bound) and bound >= 0.0):
            raise ParameterError("custom payoffs must declare a finite bound")
        return Payoff(fn, tuple(breakpoints), float(bound))


# ---------------------------------------------------------------------------
# pricing


@dataclass(frozen=True)
class ExpansionQuote:
    """Corrected price plus every scalar the expansion produces on the way."""

    sigma2: float
    alpha: float
    discount: float
    price_corrected: float
    price_bs: float
    correction: float
    skew_a: float
    skew_b: float
    v2: float
    v3: float
    error: float = 0.0


def _expect_weighted(payoff, coeffs, mean_log, root_sigma, with_p=True):
    """E[(1 + p(z)) f(mean + root*z)] over z in [-Z_CUT, Z_CUT] plus tail bound."""

    def integrand(z):
        weight = 1.0 + _poly_eval(coeffs, z) if with_p else 1.0
        return weight * float(payoff.fn(mean_log + root_sigma * z)) \
            * math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)

    points = sorted((k - mean_log) / root_sigma for k in payoff.breakpoints)
    points = [p for p in points if -_Z_CUT < p < _Z_CUT]
    val, err = integrate.quad(integrand, -_Z_CUT, _Z_CUT,
                              points=points or None, limit=400,
                              epsabs=1e-13, epsrel=1e-11)

    # mass of |1 + p| outside the window bounds the truncation error
    def tail(z):
        w = abs(1.0 + _poly_eval(coeffs, z)) if with_p else 1.0
        return w * math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)

    t_hi, _ = integrate.quad(tail, _Z_CUT, _Z_CUT + 30.0)
    t_lo, _ = integrate.quad(tail, -_Z_CUT - 30.0, -_Z_CUT)
    return val, err + payoff.bound * (t_hi + t_lo)


def price_corrected(payoff, measure, spec, market, alpha=None, sigma2=None):
    """Price a bounded payoff by the corrected-Gaussian quadrature.

    Calls are handled through put-call parity (the payoff itself is
    unbounded, so the direct quadrature bound would be vacuous).  Returns an
    :class:`ExpansionQuote`; ``error`` aggregates quadrature and tail bounds.
    """
    if sigma2 is None:
        sigma2 = sigma_total(measure, spec, market)
    if alpha is None:
        alpha = alpha_coefficient(measure, spec)
    discount = market.discount()

    if payoff.kind == "call":
        put = Payoff.put(payoff.strike)
        quote = price_corrected(put, measure, spec, market,
                                alpha=alpha, sigma2=sigma2)
        forward_gap = math.exp(market.spot_log) - discount * payoff.strike
        return ExpansionQuote(
            sigma2=sigma2, alpha=alpha, discount=discount,
            price_corrected=quote.price_corrected + forward_gap,
            price_bs=quote.price_bs + forward_gap,
            correction=quote.correction, skew_a=quote.skew_a,
            skew_b=quote.skew_b, v2=quote.v2, v3=quote.v3,
            error=quote.error)

    coeffs = correction_polynomial(alpha, sigma2)
    root = math.sqrt(sigma2)
    mean_log = market.spot_log - math.log(discount) - 0.5 * sigma2

    val, err = _expect_weighted(payoff, coeffs, mean_log, root, with_p=True)
    val_bs, err_bs = _expect_weighted(payoff, coeffs, mean_log, root,
                                      with_p=False)
    a, b, v2, v3 = _skew_scalars(alpha, sigma2 / market.maturity,
                                 market.average_rate())
    return ExpansionQuote(
        sigma2=sigma2, alpha=alpha, discount=discount,
        price_corrected=discount * val, price_bs=discount * val_bs,
        correction=discount * (val - val_bs),
        skew_a=a, skew_b=b, v2=v2, v3=v3,
        error=discount * (err + err_bs))


def d2(strike, spot_log, discount, sigma2):
    root = math.sqrt(sigma2)
    return -(math.log(strike) - spot_log + math.log(discount)) / root \
        - 0.5 * root


def bs_put(strike, spot_log, discount, sigma2):
    """Black-Scholes put with total variance sigma2 (= vol^2 * T)."""
    if not strike > 0.0:
        raise ParameterError("strike must be positive")
    if not sigma2 > 0.0:
        raise ParameterError("total variance must be positive")
    dd = d2(strike, spot_log, discount, sigma2)
    return discount * strike * norm.cdf(-dd) \
        - math.exp(spot_log) * norm.cdf(-dd - math.sqrt(sigma2))


def put_closed_form(strike, measure, spec, market, alpha=None, sigma2=None):
    """Corrected put price P_BS(K, Sigma) - alpha d2 D K phi(d2)."""
    if not strike > 0.0:
        raise ParameterError("strike must be positive")
    if sigma2 is None:
        sigma2 = sigma_total(measure, spec, market)
    if alpha is None:
        alpha = alpha_coefficient(measure, spec)
    discount = market.discount()
    dd = d2(strike, market.spot_log, discount, sigma2)
    return bs_put(strike, market.spot_log, discount, sigma2) \
        - alpha * dd * discount * strike * norm.pdf(dd)


def implied_vol_put(price, strike, spot_log, discount, maturity,
                    tol=1e-10, max_iter=100):
    """Black-Scholes put implied volatility by safeguarded Newton.

    Bisection brackets guard every Newton step; converges to ``tol`` in vol.
    """
    if not maturity > 0.0:
        raise ParameterError("maturity must be positive")
    intrinsic = max(discount * strike - math.exp(spot_log), 0.0)
    upper_price = discount * strike
    if not intrinsic < price < upper_price:
        raise ParameterError(
            "price %.6g outside the no-arbitrage band (%.6g, %.6g)"
            % (price, intrinsic, upper_price))

    lo_v, hi_v = 1e-8, 10.0
    vol = 0.3
    for _ in range(max_iter):
        sig2 = vol * vol * maturity
        diff = bs_put(strike, spot_log, discount, sig2) - price
        if diff > 0.0:
            hi_v = vol
        else:
            lo_v = vol
        dd = d2(strike, spot_log, discount, sig2)
        vega = math.exp(spot_log) * norm.pdf(dd + math.sqrt(sig2)) \
            * math.sqrt(maturity)
        step = diff / vega if vega > 1e-300 else 0.0
        cand = vol - step
        if not lo_v < cand < hi_v:
            cand = 0.5 * (lo_v + hi_v)
        if abs(cand - vol) < tol:
            return cand
        vol = cand
    raise PrecisionError("implied volatility iteration did not converge",
                         achieved=vol)


# ---------------------------------------------------------------------------
# skew


def _skew_scalars(alpha, var_rate, rate):
    sig_bar = math.sqrt(var_rate)
    v3 = -alpha * var_rate
    v2 = 2.0 * v3
    a = -v3 / sig_bar ** 3
    b = sig_bar - v2 / sig_bar - a * (rate + 1.5 * var_rate)
    return a, b, v2, v3


def skew_line(alpha, measure, spec, market):
    """Slope/intercept (a, b) of the implied-vol line iv = a log(K/S)/(T-t) + b."""
    var_rate = expectation(measure, lambda x: np.asarray(spec.phi(x)) ** 2)
    if not var_rate > 0.0:
        raise DegenerateError("Pi[phi^2] vanishes: volatility is degenerate")
    a, b, _, _ = _skew_scalars(alpha, var_rate, market.average_rate())
    return a, b


@dataclass(frozen=True)
class SkewFit:
    a: float
    b: float
    v2: float
    v3: float
    sigma_bar: float
    residual: float


def calibrate_skew(iv_points, spot, rate, sigma_bar=None):
    """Least-squares fit of iv ~= a log(K/S)/(T-t) + b over quoted points.

    ``iv_points`` is an array-like of (strike, maturity, iv) rows.  When no
    historical ``sigma_bar`` is supplied the fitted intercept b plays the
    role of the zeroth-order vol, which is exact to the order of the
    expansion.  Raises when the design matrix cannot identify the slope.
    """
    pts = np.asarray(iv_points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 2:
        raise ParameterError("need >= 2 rows of (strike, maturity, iv)")
    strikes, mats, ivs = pts.T
    if np.any(mats <= 0.0):
        raise ParameterError("maturities must be positive")
    if np.any(strikes <= 0.0):
        raise ParameterError("strikes must be positive")
    design = np.column_stack([np.log(strikes / spot) / mats,
                              np.ones(len(pts))])
    coef, _, rank, sv = np.linalg.lstsq(design, ivs, rcond=None)
    if rank < 2 or sv[-1] < 1e-12 * sv[0]:
        raise UnidentifiableError(
            "all quotes share one moneyness ratio; slope is unidentifiable")
    a, b = float(coef[0]), float(coef[1])
    residual = float(np.linalg.norm(design @ coef - ivs))
    sig_bar = b if sigma_bar is None else float(sigma_bar)
    if not sig_bar > 0.0:
        raise DegenerateError("zeroth-order volatility must be positive")
    v3 = -a * sig_bar ** 3
    v2 = sig_bar * ((sig_bar - b) - a * (rate + 1.5 * sig_bar ** 2))
    return SkewFit(a=a, b=b, v2=v2, v3=v3, sigma_bar=sig_bar,
                   residual=residual)
