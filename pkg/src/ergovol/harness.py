"""End-to-end validation experiments.

Three studies, each pitting one piece of the expansion against an
independent estimate:

* :func:`convergence_study` -- reprice the same market under the
  time-scale family (b/eta^2, c/eta) and fit the order of the gap between
  the corrected quadrature price and brute-force Monte Carlo.  The
  stationary objects (pi, s) are invariant along the family while the
  speed normalizer epsilon scales linearly in eta, so the gap should
  shrink like eta^2.
* :func:`heston_analytic_check` -- on the log-variance square-root model
  both the skew coefficient and the total variance have closed forms
  (alpha = eta rho / (2 xi), Sigma = mu T); the quadrature pipeline must
  reproduce them.
* :func:`edgeworth_fit_study` -- simulate the normalized additive
  functional of the driver directly, estimate the cycle moments on
  independent regeneration cycles, and compare the sup-CDF (Kolmogorov)
  distance of the two-term Edgeworth density against the plain Gaussian
  with the same variance.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import EvaluationError, ParameterError
from .edgeworth import edgeworth_coefficients
from .mc import (
    McConfig,
    cycle_stats,
    extract_cycles,
    price_mc,
    simulate_functional,
)
from .model import MarketSpec, build_ergodic_measure, expectation, preset
from .pricer import price_corrected

_PATH_CAP = 2_000_000
_INVARIANCE_TOL = 1e-10


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-eta pricing errors and the fitted order of decay."""

    etas: np.ndarray
    errors: np.ndarray
    mc_errors: np.ndarray
    fitted_order: float
    runtime_s: np.ndarray
    n_paths: np.ndarray = field(default=None)
    flag: str = ""

    def rows(self):
        return zip(self.etas, self.errors, self.mc_errors, self.runtime_s)


@dataclass(frozen=True)
class FitReport:
    """Kolmogorov distances of the Edgeworth and Gaussian references."""

    statistic: float
    baseline_statistic: float
    n_samples: int

    @property
    def passed(self):
        return self.statistic < self.baseline_statistic


@dataclass(frozen=True)
class HestonAnalyticReport:
    alpha_quadrature: float
    alpha_analytic: float
    sigma2_quadrature: float
    sigma2_analytic: float
    rel_err_alpha: float
    rel_err_sigma2: float
    passed: bool


def _check_rescaling_invariance(base, scaled, eta):
    """pi and s node values must not move; epsilon must scale by eta."""
    probes = np.linspace(0.6 * base.window[0], 0.6 * base.window[1], 17)
    d_pi = np.max(np.abs(scaled.pi(probes) - base.pi(probes)))
    d_s = np.max(np.abs(scaled.s(probes) - base.s(probes)))
    scale = max(1.0, float(np.max(np.abs(base.s(probes)))))
    d_eps = abs(scaled.epsilon - eta * base.epsilon) / (eta * base.epsilon)
    if d_pi > _INVARIANCE_TOL or d_s > _INVARIANCE_TOL * scale \
            or d_eps > _INVARIANCE_TOL:
        raise EvaluationError(
            "time-scale invariance broken at eta=%g: "
            "|dpi|=%.2e |ds|=%.2e |deps|=%.2e" % (eta, d_pi, d_s, d_eps))


def ks_distance(samples, cdf):
    """sup_z |empirical CDF - cdf(z)|, evaluated at the jump points."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    c = cdf(x)
    grid = np.arange(1, n + 1) / n
    return float(max(np.max(np.abs(c - grid)),
                     np.max(np.abs(c - (grid - 1.0 / n)))))


def convergence_study(spec, market, payoff, etas, config=None,
                      path_cap=_PATH_CAP):
    """Fit the decay order of |price_mc - price_corrected| along the
    time-scale family.

    For each eta the model is rescaled to (b/eta^2, c/eta), priced by the
    corrected quadrature, and repriced by Monte Carlo with dt = 1e-4 eta^2
    (the step must resolve the fast scale).  Paths are doubled, up to
    ``path_cap``, until each standard error is below half the measured
    error; etas whose noise floor cannot be beaten are flagged as
    unidentifiable and excluded from the log-log fit.
    """
    etas = np.asarray(etas, dtype=float)
    if len(etas) < 3:
        raise ParameterError("need at least 3 eta values")
    if not np.all(np.diff(etas) < 0):
        raise ParameterError("etas must be strictly decreasing")
    if config is None:
        scheme = ("euler_ft_variance"
                  if spec.name == "heston_log"
                  and spec.params.get("nu_tilde") == 0.5 else "euler")
        config = McConfig(n_paths=200_000, dt=1e-4, seed=0, scheme=scheme)

    base = build_ergodic_measure(spec)
    errors = np.empty(len(etas))
    ses = np.empty(len(etas))
    runtimes = np.empty(len(etas))
    paths_used = np.empty(len(etas), dtype=np.int64)
    usable = np.zeros(len(etas), dtype=bool)
    for i, eta in enumerate(etas):
        t0 = time.perf_counter()
        scaled = spec.rescaled(eta)
        measure = build_ergodic_measure(scaled)
        _check_rescaling_invariance(base, measure, eta)
        quote = price_corrected(payoff, measure, scaled, market)
        n_paths = config.n_paths
        while True:
            run_cfg = McConfig(n_paths=n_paths, dt=1e-4 * eta * eta,
                               seed=config.seed, scheme=config.scheme,
                               antithetic=config.antithetic)
            est = price_mc(payoff, scaled, market, run_cfg)
            err = abs(est.mean - quote.price_corrected)
            if est.std_error < 0.5 * err:
                usable[i] = True
                break
            if n_paths >= path_cap:
                break
            n_paths = min(2 * n_paths, path_cap)
        errors[i] = err
        ses[i] = est.std_error
        paths_used[i] = n_paths
        runtimes[i] = time.perf_counter() - t0

    flag = ""
    if not usable.all():
        flag = ("order unidentifiable below eta = %g (MC noise floor)"
                % etas[~usable].max())
    if usable.sum() >= 2:
        x = np.log(etas[usable])
        y = np.log(errors[usable])
        w = (errors[usable] / ses[usable]) ** 2
        design = np.column_stack([x, np.ones_like(x)])
        wd = design * w[:, None]
        coef = np.linalg.solve(design.T @ wd, wd.T @ y)
        order = float(coef[0])
    else:
        order = float("nan")
    return ConvergenceReport(etas=etas, errors=errors, mc_errors=ses,
                             fitted_order=order, runtime_s=runtimes,
                             n_paths=paths_used, flag=flag)


def heston_analytic_check(xi=1.0, mu=0.04, rho=-0.5, eta=0.1,
                          maturity=1.0, rel_tol=1e-5):
    """Quadrature alpha and Sigma against their square-root-model closed
    forms alpha = eta rho / (2 xi) and Sigma = mu T.

    The closed forms hold for any xi mu > 0, including parameter sets whose
    variance process can touch the origin, so the preset is built with the
    attainable-origin guard relaxed.
    """
    if xi <= 0.0 or mu <= 0.0:
        raise ParameterError("xi and mu must be positive")
    from .pricer import alpha_coefficient, sigma_total

    spec = preset("heston_log", allow_attainable_origin=True,
                  xi=xi, mu=mu, rho=rho, eta=eta)
    measure = build_ergodic_measure(spec)
    market = MarketSpec(maturity=maturity)
    alpha_q = alpha_coefficient(measure, spec)
    sigma2_q = sigma_total(measure, spec, market)
    alpha_a = eta * rho / (2.0 * xi)
    sigma2_a = mu * maturity
    err_a = abs(alpha_q - alpha_a) / max(abs(alpha_a), 1e-300) \
        if alpha_a != 0.0 else abs(alpha_q)
    err_s = abs(sigma2_q - sigma2_a) / sigma2_a
    return HestonAnalyticReport(
        alpha_quadrature=alpha_q, alpha_analytic=alpha_a,
        sigma2_quadrature=sigma2_q, sigma2_analytic=sigma2_a,
        rel_err_alpha=err_a, rel_err_sigma2=err_s,
        passed=bool(err_a < rel_tol and err_s < rel_tol))


def edgeworth_fit_study(spec, t_scale, n_samples, config=None,
                        cycle_config=None, cycle_horizon=20.0,
                        measure=None):
    """Goodness of fit of the two-term Edgeworth density for the
    normalized integrated-variance functional.

    Draws ``n_samples`` independent values of the statistic
    sqrt(T_n) A(K_{T_n}/T_n) with A the linear map sending the additive
    pair K = (int h dt, int phi dW) to the normalized log-price
    fluctuation, estimates the cycle moments on a separate regenerative
    run, and reports Kolmogorov distances against the Edgeworth CDF and
    against the Gaussian with the Edgeworth variance.
    """
    if t_scale <= 0.0:
        raise ParameterError("t_scale must be positive")
    if measure is None:
        measure = build_ergodic_measure(spec)
    eps = measure.epsilon
    t_phys = t_scale * eps * eps
    var_rate = expectation(measure, lambda x: np.asarray(spec.phi(x)) ** 2)
    sigma2 = var_rate * t_phys
    root_sigma = math.sqrt(sigma2)
    a_grad = np.array([-1.0 / (2.0 * root_sigma * math.sqrt(t_scale)),
                       math.sqrt(t_phys) / root_sigma])

    scheme = ("euler_ft_variance"
              if spec.name == "heston_log"
              and spec.params.get("nu_tilde") == 0.5 else "euler")
    if config is None:
        config = McConfig(n_paths=n_samples, dt=0.002, seed=0,
                          scheme=scheme)
    else:
        config = McConfig(n_paths=n_samples, dt=config.dt,
                          seed=config.seed, scheme=scheme,
                          antithetic=False)
    k_pairs = simulate_functional(spec, config, horizon=t_scale,
                                  measure=measure, t_total=t_phys)
    samples = k_pairs @ a_grad / math.sqrt(t_scale)

    if cycle_config is None:
        # the A1 coefficient averages one first-cycle K sample per path,
        # so the path count (not the cycle count) sets its standard error
        cycle_config = McConfig(n_paths=16384, dt=min(config.dt, 5e-4),
                                seed=config.seed + 1, scheme=scheme)
    # anchor the regeneration cycles around the stationary bulk; the paths
    # themselves still start at spec.x0, which is what the first-cycle
    # K_{tau_1} term of A1 needs
    mean_x = expectation(measure, lambda x: x)
    std_x = math.sqrt(max(expectation(measure, lambda x: x * x)
                          - mean_x ** 2, 0.0))
    x0a = mean_x - 0.375 * std_x
    x1a = mean_x + 0.375 * std_x
    cycles = extract_cycles(spec, cycle_config, x0a, x1a,
                            horizon=cycle_horizon, measure=measure,
                            t_total=t_phys)
    stats = cycle_stats(cycles)
    density = edgeworth_coefficients(stats, a_grad, np.zeros((2, 2)),
                                     t_scale)
    root_v = math.sqrt(density.v)
    d_edge = ks_distance(samples, density.cdf)
    d_gauss = ks_distance(samples, lambda z: ndtr(z / root_v))
    return FitReport(statistic=d_edge, baseline_statistic=d_gauss,
                     n_samples=len(samples))
