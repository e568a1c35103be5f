"""Ergodic-measure construction against closed-form stationary laws."""

import math
import warnings

import numpy as np
import pytest
from scipy import stats as sps

from ergovol.errors import ParameterError
from ergovol.model import (
    CheckStatus,
    NotRecurrentWarning,
    build_ergodic_measure,
    check_assgam,
    check_assint,
    check_assk,
    expectation,
    preset,
)


# ---------------------------------------------------------------------------
# stationary-density oracles


def test_ou_stationary_density_is_gaussian(ou_spec, ou_measure):
    # dX = (m - x) dt + sqrt(2) nu dW has stationary law N(m, nu^2)
    nu = ou_spec.params["nu"]
    m = ou_spec.params["m"]
    xs = np.linspace(-2.5, 2.5, 41)
    target = sps.norm.pdf(xs, loc=m, scale=nu)
    assert np.max(np.abs(ou_measure.pi(xs) - target)) < 1e-9


def test_ou_normalization(ou_measure):
    assert abs(expectation(ou_measure, lambda x: np.ones_like(x)) - 1.0) < 1e-10


def test_ou_lognormal_moment():
    # phi(x) = e^x, m = 0, nu = 1: Pi[e^{2x}] is the Gaussian MGF at 2
    spec = preset("fouque_ou", m=0.0, nu=1.0, phi=lambda x: np.exp(x))
    meas = build_ergodic_measure(spec)
    val = expectation(meas, lambda x: np.exp(2.0 * x))
    assert abs(val - math.exp(2.0)) / math.exp(2.0) < 1e-8


def test_heston_stationary_variance_mean(heston_spec, heston_measure):
    # the variance V = e^X is a square-root process with stationary mean mu
    mu = heston_spec.params["mu"]
    val = expectation(heston_measure, lambda x: np.exp(x))
    assert abs(val - mu) / mu < 1e-8


def test_heston_stationary_is_gamma(heston_spec, heston_measure):
    # V stationary ~ Gamma(2 xi mu, rate 2 xi); in x = log V coordinates the
    # density picks up the Jacobian e^x
    xi, mu = heston_spec.params["xi"], heston_spec.params["mu"]
    xs = np.linspace(-3.5, 0.5, 31)
    v = np.exp(xs)
    target = sps.gamma.pdf(v, a=2.0 * xi * mu, scale=0.5 / xi) * v
    assert np.max(np.abs(heston_measure.pi(xs) - target)) < 1e-8


def test_scale_function_monotone(ou_measure):
    # bulk of the window only: in the far tail s' spans many decades and
    # spline interpolation is not guaranteed monotone between nodes
    lo, hi = ou_measure.window
    xs = np.linspace(0.6 * lo, 0.6 * hi, 201)
    assert np.all(np.diff(ou_measure.s(xs)) > 0.0)


# ---------------------------------------------------------------------------
# eta-rescaling (time-change) behaviour


@pytest.mark.parametrize("eta", [0.5, 2.0])
def test_rescaling_pi_s_invariant_epsilon_scales(ou_spec, ou_measure, eta):
    scaled = build_ergodic_measure(ou_spec.rescaled(eta))
    xs = np.linspace(-2.0, 2.0, 17)
    assert np.max(np.abs(scaled.pi(xs) - ou_measure.pi(xs))) < 1e-10
    assert np.max(np.abs(scaled.s(xs) - ou_measure.s(xs))) < 1e-10
    assert abs(scaled.epsilon - eta * ou_measure.epsilon) \
        < 1e-10 * eta * ou_measure.epsilon


def test_rescaling_heston(heston_spec, heston_measure):
    scaled = build_ergodic_measure(heston_spec.rescaled(0.25))
    xs = np.linspace(-2.5, 0.0, 17)
    assert np.max(np.abs(scaled.pi(xs) - heston_measure.pi(xs))) < 1e-10
    assert abs(scaled.epsilon - 0.25 * heston_measure.epsilon) \
        < 1e-10 * heston_measure.epsilon


# ---------------------------------------------------------------------------
# presets and guards


def test_heston_attainable_origin_guard():
    with pytest.raises(ParameterError):
        preset("heston_log", xi=1.0, mu=0.04)
    spec = preset("heston_log", xi=1.0, mu=0.04, allow_attainable_origin=True)
    with pytest.warns(NotRecurrentWarning):
        build_ergodic_measure(spec)


def test_unknown_preset_rejected():
    with pytest.raises(ParameterError):
        preset("no_such_model")


def test_sinh_requires_large_xi():
    with pytest.raises(ParameterError):
        preset("sinh_mix", xi=0.4)


# ---------------------------------------------------------------------------
# condition checkers


def test_assgam_sinh_pass_and_fail():
    gamma, delta = (2.0, 2.0), 0.01
    spec5 = preset("sinh_mix", xi=5.0)
    ok5, _ = check_assgam(spec5, build_ergodic_measure(spec5), gamma, delta)
    assert ok5
    spec3 = preset("sinh_mix", xi=3.0)
    ok3, witness = check_assgam(spec3, build_ergodic_measure(spec3),
                                gamma, delta)
    assert not ok3
    assert witness is not None


def test_assint_ou(ou_spec, ou_measure):
    ok, _ = check_assint(ou_spec, ou_measure, delta=0.01)
    assert ok


def test_assk_heston_kappa(heston_spec):
    # b/c^2 = xi mu - 1/2 - xi e^x, so kappa_- = xi mu - 1/2; the overall
    # status still fails because phi = e^{x/2} outgrows e^{gamma|x|} c^2
    xi, mu = heston_spec.params["xi"], heston_spec.params["mu"]
    rep = check_assk(heston_spec, gamma=(0.0, 0.0))
    k_minus = rep.kappa[1]
    assert abs(k_minus - (xi * mu - 0.5)) / (xi * mu - 0.5) < 0.05


def test_assk_ou(ou_spec):
    # kappa = +inf-ish linear drift dominates 2*gamma and phi = e^{x/2}
    # satisfies the growth bound at gamma = 2 with constant c
    rep = check_assk(ou_spec, gamma=(2.0, 2.0))
    assert rep.assk_ok is CheckStatus.PASS
    assert min(rep.kappa) > 4.0


def test_assgam_rejects_bad_inputs(ou_spec, ou_measure):
    with pytest.raises(ParameterError):
        check_assgam(ou_spec, ou_measure, (-1.0, 0.0), 0.01)
    with pytest.raises(ParameterError):
        check_assgam(ou_spec, ou_measure, (1.0, 1.0), 1.5)
