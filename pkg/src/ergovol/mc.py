"""Monte Carlo for the full model and its regenerative-cycle decomposition.

Path generation is driven by the counter RNG in :mod:`ergovol.rng`: every
Gaussian increment is a pure function of (seed, path, step, channel), so
estimates are bit-identical however the paths are chunked or scheduled.

Two lanes produce terminal log-prices: a generic vectorized Euler lane that
accepts any coefficient callables, and a jitted Heston lane that steps the
variance V = e^X with the full-truncation scheme and assembles Z_T from the
conditionally Gaussian representation

    Z_T = Z_0 + int r - 1/2 int V dt + rho int sqrt(V) dW^1
          + sqrt((1 - rho^2) int V dt) * xi,

which is exact given the variance path and costs one normal per step.

Cycle extraction runs the driver in its unit normalization (drift eps^2 b,
diffusion eps c, whose speed measure is exactly the stationary law pi) and
cuts the path at the regeneration times: hit x1, then come back to x0.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import integrate

from .errors import (
    DegenerateError,
    InsufficientCyclesError,
    ParameterError,
    SimulationError,
)
from .edgeworth import CycleStats
from .model import build_ergodic_measure, expectation
from .rng import normal, normal_vec, path_key, path_keys

_FLAG_CAP = 1e-3  # tolerated fraction of excluded paths
_CHUNK = 1 << 14


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    dt: float
    seed: int = 0
    scheme: str = "euler"  # or "euler_ft_variance"
    antithetic: bool = False

    def __post_init__(self):
        if self.n_paths < 1:
            raise ParameterError("n_paths must be at least 1")
        if not self.dt > 0.0:
            raise ParameterError("dt must be positive")
        if self.scheme not in ("euler", "euler_ft_variance"):
            raise ParameterError("unknown scheme %r" % (self.scheme,))


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int
    seed: int
    n_flagged: int = 0


@dataclass(frozen=True)
class CyclePath:
    tau_start: float
    tau_end: float
    l: float
    g_h: float
    g_vol: float
    int_k: np.ndarray

    def __post_init__(self):
        if not self.tau_end > self.tau_start:
            raise ParameterError("cycle must have positive duration")


def _step_rate_integrals(market, n_steps, dt):
    """Exact per-step integrals of the deterministic rate."""
    if callable(market.rate):
        edges = dt * np.arange(n_steps + 1)
        vals = np.array([integrate.quad(market.rate, a, b)[0]
                         for a, b in zip(edges[:-1], edges[1:])])
        return vals
    return np.full(n_steps, float(market.rate) * dt)


@njit(cache=True)
def _heston_ft_terminal(seed, n_paths, antithetic, n_steps, dt, v0,
                        xi, mu, eta, rho, out_ivar, out_ivol, out_xi):
    """Full-truncation Euler on V; returns the conditional-Z ingredients.

    out_ivar[j] = int V+ dt, out_ivol[j] = int sqrt(V+) dW^1, out_xi[j] the
    extra standard normal for the orthogonal Brownian component.
    """
    sq = math.sqrt(dt)
    kap = xi / (eta * eta)
    inv_eta = 1.0 / eta
    for j in range(n_paths):
        base = j >> 1 if antithetic else j
        sign = -1.0 if (antithetic and (j & 1) == 1) else 1.0
        key = path_key(np.uint64(seed), np.uint64(base))
        v = v0
        ivar = 0.0
        ivol = 0.0
        for i in range(n_steps):
            n1 = sign * normal(key, np.uint64(i))
            vp = v if v > 0.0 else 0.0
            sv = math.sqrt(vp)
            ivar += vp * dt
            ivol += sv * sq * n1
            v += kap * (mu - vp) * dt + inv_eta * sv * sq * n1
        out_ivar[j] = ivar
        out_ivol[j] = ivol
        out_xi[j] = sign * normal(key, np.uint64(n_steps))


def _heston_fast_lane(spec, market, config):
    p = spec.params
    n_steps = max(1, int(round(market.maturity / config.dt)))
    dt = market.maturity / n_steps
    ivar = np.empty(config.n_paths)
    ivol = np.empty(config.n_paths)
    orth = np.empty(config.n_paths)
    _heston_ft_terminal(np.uint64(config.seed), config.n_paths,
                        config.antithetic, n_steps, dt,
                        math.exp(spec.x0), p["xi"], p["mu"], p["eta"],
                        p["rho"], ivar, ivol, orth)
    rho = p["rho"]
    z_t = (market.spot_log + market.integrated_rate() - 0.5 * ivar
           + rho * ivol + np.sqrt((1.0 - rho * rho) * ivar) * orth)
    return z_t, 0


def _generic_lane(spec, market, config):
    n_steps = max(1, int(round(market.maturity / config.dt)))
    dt = market.maturity / n_steps
    sq = math.sqrt(dt)
    rates = _step_rate_integrals(market, n_steps, dt)
    z_parts = []
    n_flagged = 0
    n_base = (config.n_paths + 1) // 2 if config.antithetic \
        else config.n_paths
    for start in range(0, n_base, _CHUNK):
        count = min(_CHUNK, n_base - start)
        keys = path_keys(np.uint64(config.seed),
                         np.arange(start, start + count, dtype=np.uint64))
        if config.antithetic:
            x = np.full(2 * count, spec.x0)
            z = np.full(2 * count, market.spot_log)
        else:
            x = np.full(count, spec.x0)
            z = np.full(count, market.spot_log)
        ok = np.ones(len(x), dtype=bool)
        for i in range(n_steps):
            n1 = normal_vec(keys, np.uint64(2 * i))
            n2 = normal_vec(keys, np.uint64(2 * i + 1))
            if config.antithetic:
                # interleave so each pair sits adjacently, matching the
                # jitted lane's layout (price_mc averages pairs for the SE)
                n1 = np.repeat(n1, 2)
                n1[1::2] = -n1[1::2]
                n2 = np.repeat(n2, 2)
                n2[1::2] = -n2[1::2]
            bx = np.asarray(spec.b(x), dtype=float)
            cx = np.asarray(spec.c(x), dtype=float)
            px = np.asarray(spec.phi(x), dtype=float)
            rx = np.asarray(spec.rho(x), dtype=float)
            dw1 = sq * n1
            dwt = rx * dw1 + np.sqrt(1.0 - rx * rx) * sq * n2
            z = z + rates[i] - 0.5 * px * px * dt + px * dwt
            x = x + bx * dt + cx * dw1
            bad = ~np.isfinite(x) | ~np.isfinite(z)
            if bad.any():
                ok &= ~bad
                x = np.where(ok, x, spec.x0)  # park flagged paths
                z = np.where(ok, z, market.spot_log)
        if config.antithetic:
            # drop whole pairs so the adjacency pairing survives exclusion
            pair_ok = ok[0::2] & ok[1::2]
            ok = np.repeat(pair_ok, 2)
        n_flagged += int((~ok).sum())
        z_parts.append(z[ok])
    z_t = np.concatenate(z_parts)
    if len(z_t) > config.n_paths:  # antithetic pairing may overshoot by one
        z_t = z_t[: config.n_paths]
    return z_t, n_flagged


def simulate_terminal(spec, market, config):
    """Terminal log-prices Z_T under the risk-neutral Euler dynamics.

    Uses the jitted full-truncation variance lane for the Heston log-preset
    when requested by ``config.scheme``; every other case runs the generic
    chunked Euler lane.  Paths whose state blows up are excluded; more than
    0.1% of them is an error.
    """
    if (config.scheme == "euler_ft_variance"
            and spec.name != "heston_log"):
        raise ParameterError(
            "the full-truncation variance scheme is specific to the "
            "heston_log preset")
    if config.scheme == "euler_ft_variance" \
            and spec.params.get("nu_tilde", 0.5) == 0.5:
        z_t, n_flagged = _heston_fast_lane(spec, market, config)
    else:
        z_t, n_flagged = _generic_lane(spec, market, config)
    if n_flagged > _FLAG_CAP * config.n_paths:
        raise SimulationError(
            "%d of %d paths were flagged (cap %.2f%%); reduce dt"
            % (n_flagged, config.n_paths, 100.0 * _FLAG_CAP))
    if n_flagged:
        warnings.warn("%d paths excluded after coefficient blow-up"
                      % n_flagged)
    return z_t


def price_mc(payoff, spec, market, config):
    """Discounted Monte Carlo price with standard error.

    Antithetic pairs are averaged before the variance estimate; treating
    the two legs as independent would overstate the standard error.
    """
    z_t = simulate_terminal(spec, market, config)
    vals = np.asarray(payoff.fn(z_t), dtype=float)
    n = len(vals)
    if config.antithetic and n >= 4:
        units = 0.5 * (vals[0 : 2 * (n // 2) : 2]
                       + vals[1 : 2 * (n // 2) : 2])
    else:
        units = vals
    m = len(units)
    mean = math.fsum(units) / m
    var = math.fsum((units - mean) ** 2) / (m - 1) if m > 1 else 0.0
    d = market.discount()
    return McEstimate(mean=d * mean, std_error=d * math.sqrt(var / m),
                      n_paths=n, seed=config.seed,
                      n_flagged=config.n_paths - n)


# ---------------------------------------------------------------------------
# regenerative cycles


class CycleSample:
    """Pooled per-cycle functionals plus the initial-cycle K samples.

    Behaves as a sequence of :class:`CyclePath`.  ``k_tau1`` holds one
    (K^1, K^2) sample per path, taken at the end of the warm-up cycle that
    the pooled statistics exclude.
    """

    def __init__(self, l, g_h, g_vol, int_k, tau_start, k_tau1, n_paths):
        self.l = l
        self.g_h = g_h
        self.g_vol = g_vol
        self.int_k = int_k
        self.tau_start = tau_start
        self.k_tau1 = k_tau1
        self.n_paths = n_paths

    def __len__(self):
        return len(self.l)

    def __getitem__(self, j):
        if isinstance(j, slice):
            return [self[i] for i in range(*j.indices(len(self)))]
        return CyclePath(tau_start=float(self.tau_start[j]),
                         tau_end=float(self.tau_start[j] + self.l[j]),
                         l=float(self.l[j]), g_h=float(self.g_h[j]),
                         g_vol=float(self.g_vol[j]),
                         int_k=self.int_k[j].copy())


@njit(cache=True)
def _cycle_kernel(seed, n_paths, n_steps, max_cycles, dt, x_init, x0, x1,
                  tab_lo, inv_h, n_tab, b_tab, c_tab, phi_tab, rho_tab,
                  h_tab, out, out_ktau1, got_ktau1):
    """Scalar cycle loop over tabulated coefficients.

    ``out`` rows are (l, g_h, g_vol, int_k1, int_k2, tau_start, path);
    returns the number of recorded (stationary) cycles.  The first cycle of
    each path only feeds ``out_ktau1``.
    """
    sq = math.sqrt(dt)
    slot = 0
    cap = out.shape[0]
    for p in range(n_paths):
        key = path_key(np.uint64(seed), np.uint64(p))
        x = x_init
        phase = 0 if x_init < x1 else 1
        closed = 0
        acc_l = 0.0
        k1 = 0.0
        k2 = 0.0
        ik1 = 0.0
        ik2 = 0.0
        t0 = 0.0
        for i in range(n_steps):
            n1 = normal(key, np.uint64(2 * i))
            n2 = normal(key, np.uint64(2 * i + 1))
            u = (x - tab_lo) * inv_h
            if u < 0.0:
                u = 0.0
            elif u > n_tab - 1.000001:
                u = n_tab - 1.000001
            j = int(u)
            w = u - j
            bx = b_tab[j] + w * (b_tab[j + 1] - b_tab[j])
            cx = c_tab[j] + w * (c_tab[j + 1] - c_tab[j])
            px = phi_tab[j] + w * (phi_tab[j + 1] - phi_tab[j])
            rx = rho_tab[j] + w * (rho_tab[j + 1] - rho_tab[j])
            hx = h_tab[j] + w * (h_tab[j + 1] - h_tab[j])
            dw1 = sq * n1
            dk1 = hx * dt
            dk2 = px * (rx * dw1
                        + math.sqrt(max(1.0 - rx * rx, 0.0)) * sq * n2)
            x_new = x + bx * dt + cx * dw1

            if phase == 0 and x_new >= x1:
                phase = 1
            if phase == 1 and ((x > x0 and x_new <= x0)
                               or (x < x0 and x_new >= x0)):
                theta = (x0 - x) / (x_new - x)
                l_fin = acc_l + theta * dt
                k1_fin = k1 + theta * dk1
                k2_fin = k2 + theta * dk2
                ik1_fin = ik1 + (k1 + 0.5 * theta * dk1) * theta * dt
                ik2_fin = ik2 + (k2 + 0.5 * theta * dk2) * theta * dt
                if closed == 0:
                    out_ktau1[p, 0] = k1_fin
                    out_ktau1[p, 1] = k2_fin
                    got_ktau1[p] = 1
                elif slot < cap:
                    out[slot, 0] = l_fin
                    out[slot, 1] = k1_fin
                    out[slot, 2] = k2_fin
                    out[slot, 3] = ik1_fin
                    out[slot, 4] = ik2_fin
                    out[slot, 5] = t0
                    out[slot, 6] = p
                    slot += 1
                else:
                    return -1  # caller enlarges the buffer and reruns
                closed += 1
                rem = 1.0 - theta
                acc_l = rem * dt
                k1 = rem * dk1
                k2 = rem * dk2
                ik1 = 0.5 * rem * dk1 * rem * dt
                ik2 = 0.5 * rem * dk2 * rem * dt
                t0 = i * dt + theta * dt
                phase = 0
                if closed > max_cycles:
                    break
            else:
                ik1 += (k1 + 0.5 * dk1) * dt
                ik2 += (k2 + 0.5 * dk2) * dt
                k1 += dk1
                k2 += dk2
                acc_l += dt
            x = x_new
    return slot


@njit(cache=True)
def _heston_cycle_kernel(seed, n_paths, n_steps, max_cycles, dt,
                         v_init, v0, v1, kap, theta_lvl, diff, rho,
                         var_rate, t_total, out, out_ktau1, got_ktau1):
    """Cycle loop for the unit-normalized square-root variance driver.

    Steps V directly with full truncation -- the log-coordinate Euler step
    is numerically stiff in the tails -- and detects the x-level crossings
    at the equivalent V levels.  Output layout matches
    :func:`_cycle_kernel`.
    """
    sq = math.sqrt(dt)
    rho_c = math.sqrt(max(1.0 - rho * rho, 0.0))
    slot = 0
    cap = out.shape[0]
    for p in range(n_paths):
        key = path_key(np.uint64(seed), np.uint64(p))
        v = v_init
        phase = 0 if v_init < v1 else 1
        closed = 0
        acc_l = 0.0
        k1 = 0.0
        k2 = 0.0
        ik1 = 0.0
        ik2 = 0.0
        t0 = 0.0
        for i in range(n_steps):
            n1 = normal(key, np.uint64(2 * i))
            n2 = normal(key, np.uint64(2 * i + 1))
            vp = v if v > 0.0 else 0.0
            sv = math.sqrt(vp)
            dw1 = sq * n1
            dk1 = t_total * (vp - var_rate) * dt
            dk2 = sv * (rho * dw1 + rho_c * sq * n2)
            v_new = v + kap * (theta_lvl - vp) * dt + diff * sv * dw1

            if phase == 0 and v_new >= v1:
                phase = 1
            if phase == 1 and ((v > v0 and v_new <= v0)
                               or (v < v0 and v_new >= v0)):
                theta = (v0 - v) / (v_new - v)
                l_fin = acc_l + theta * dt
                k1_fin = k1 + theta * dk1
                k2_fin = k2 + theta * dk2
                ik1_fin = ik1 + (k1 + 0.5 * theta * dk1) * theta * dt
                ik2_fin = ik2 + (k2 + 0.5 * theta * dk2) * theta * dt
                if closed == 0:
                    out_ktau1[p, 0] = k1_fin
                    out_ktau1[p, 1] = k2_fin
                    got_ktau1[p] = 1
                elif slot < cap:
                    out[slot, 0] = l_fin
                    out[slot, 1] = k1_fin
                    out[slot, 2] = k2_fin
                    out[slot, 3] = ik1_fin
                    out[slot, 4] = ik2_fin
                    out[slot, 5] = t0
                    out[slot, 6] = p
                    slot += 1
                else:
                    return -1
                closed += 1
                rem = 1.0 - theta
                acc_l = rem * dt
                k1 = rem * dk1
                k2 = rem * dk2
                ik1 = 0.5 * rem * dk1 * rem * dt
                ik2 = 0.5 * rem * dk2 * rem * dt
                t0 = i * dt + theta * dt
                phase = 0
                if closed > max_cycles:
                    break
            else:
                ik1 += (k1 + 0.5 * dk1) * dt
                ik2 += (k2 + 0.5 * dk2) * dt
                k1 += dk1
                k2 += dk2
                acc_l += dt
            v = v_new
    return slot


@njit(cache=True)
def _heston_functional_kernel(seed, n_paths, n_steps, dt, v_init,
                              kap, theta_lvl, diff, rho, var_rate, t_total,
                              out_k1, out_k2):
    """Fixed-horizon K for the square-root variance driver."""
    sq = math.sqrt(dt)
    rho_c = math.sqrt(max(1.0 - rho * rho, 0.0))
    for p in range(n_paths):
        key = path_key(np.uint64(seed), np.uint64(p))
        v = v_init
        k1 = 0.0
        k2 = 0.0
        for i in range(n_steps):
            n1 = normal(key, np.uint64(2 * i))
            n2 = normal(key, np.uint64(2 * i + 1))
            vp = v if v > 0.0 else 0.0
            sv = math.sqrt(vp)
            dw1 = sq * n1
            k1 += t_total * (vp - var_rate) * dt
            k2 += sv * (rho * dw1 + rho_c * sq * n2)
            v = v + kap * (theta_lvl - vp) * dt + diff * sv * dw1
        out_k1[p] = k1
        out_k2[p] = k2


def _heston_driver_params(spec, measure, config):
    """(kappa-hat, theta, diffusion-hat, rho, var_rate) of the
    unit-normalized variance process eps^2 xi (mu - V) dt + eps sqrt(V) dW.
    """
    if spec.name != "heston_log" or spec.params.get("nu_tilde") != 0.5:
        raise ParameterError(
            "the full-truncation variance scheme is specific to the "
            "heston_log preset")
    p = spec.params
    eps = measure.epsilon
    kap = eps * eps * p["xi"] / p["eta"] ** 2
    diff = eps / p["eta"]
    var_rate = expectation(measure, lambda x: np.asarray(spec.phi(x)) ** 2)
    return kap, p["mu"], diff, p["rho"], var_rate


def _coefficient_tables(spec, measure, t_total, n_tab=2_000_001):
    """Uniform-grid tables of the unit-normalized coefficients."""
    lo, hi = measure.window
    xs = np.linspace(lo, hi, n_tab)
    eps2 = measure.epsilon ** 2
    var_rate = expectation(measure, lambda v: np.asarray(spec.phi(v)) ** 2)
    b_tab = eps2 * np.asarray(spec.b(xs), dtype=float)
    c_tab = measure.epsilon * spec.c_checked(xs)
    phi_tab = np.asarray(spec.phi(xs), dtype=float)
    rho_tab = np.asarray(spec.rho(xs), dtype=float)
    h_tab = t_total * (phi_tab ** 2 - var_rate)
    inv_h = (n_tab - 1) / (hi - lo)
    return lo, inv_h, b_tab, c_tab, phi_tab, rho_tab, h_tab


def extract_cycles(spec, config, x0, x1, horizon, measure=None,
                   t_total=1.0, min_cycles=30, cycles_per_path=None):
    """Simulate the unit-normalized driver and cut it into regeneration
    cycles.

    The driver runs with coefficients (eps^2 b, eps c), whose speed measure
    is exactly the stationary density pi.  A cycle ends when the path has
    visited x1 and then returns to x0; crossing times are linearly
    interpolated, so all cycle functionals carry an O(sqrt(dt)) boundary
    bias.  Each path's first cycle is excluded from the pooled statistics
    -- the start point is the model's x0, not the cycle anchor -- but
    contributes its terminal K value to ``k_tau1``.

    Each path stops after ``cycles_per_path`` recorded cycles (by default
    about half of what fits in the horizon).  Harvesting a fixed count of
    iid cycles avoids the renewal inspection bias that a fixed time budget
    would introduce: cycles that happen to finish before a deadline are a
    length-biased sample.  ``horizon`` remains a hard step cap.

    Coefficients are evaluated by linear interpolation on a dense uniform
    table so the inner loop can be jitted for arbitrary model callables.
    """
    if not x0 < x1:
        raise ParameterError("need x0 < x1")
    if measure is None:
        measure = build_ergodic_measure(spec)
    lo, hi = measure.window
    if not (lo < x0 and x1 < hi):
        raise ParameterError("cycle anchors must lie inside the window")
    dt = config.dt
    n_steps = int(math.ceil(horizon / dt))
    use_ft = config.scheme == "euler_ft_variance"
    if not use_ft:
        tab_lo, inv_h, b_tab, c_tab, phi_tab, rho_tab, h_tab = \
            _coefficient_tables(spec, measure, t_total)
    else:
        kap, theta_lvl, diff, rho_const, var_rate = \
            _heston_driver_params(spec, measure, config)

    m_l_guess = 2.0 * float(measure.s(np.array([x1]))[0]
                            - measure.s(np.array([x0]))[0])
    if cycles_per_path is None:
        cycles_per_path = max(1, int(0.5 * horizon / max(m_l_guess, 1e-6)))
    cap = config.n_paths * cycles_per_path
    while True:
        out = np.empty((cap, 7))
        k_tau1 = np.zeros((config.n_paths, 2))
        got = np.zeros(config.n_paths, dtype=np.uint8)
        if use_ft:
            n_rec = _heston_cycle_kernel(
                np.uint64(config.seed), config.n_paths, n_steps,
                cycles_per_path, dt,
                math.exp(spec.x0), math.exp(x0), math.exp(x1),
                kap, theta_lvl, diff, rho_const, var_rate, t_total,
                out, k_tau1, got)
        else:
            n_rec = _cycle_kernel(np.uint64(config.seed), config.n_paths,
                                  n_steps, cycles_per_path, dt,
                                  spec.x0, x0, x1,
                                  tab_lo, inv_h, len(b_tab), b_tab, c_tab,
                                  phi_tab, rho_tab, h_tab, out, k_tau1, got)
        if n_rec >= 0:
            break
        cap *= 4

    if n_rec < min_cycles:
        raise InsufficientCyclesError(
            "only %d stationary cycles completed (< %d); extend the horizon"
            % (n_rec, min_cycles))
    rec = out[:n_rec]
    return CycleSample(l=rec[:, 0].copy(), g_h=rec[:, 1].copy(),
                       g_vol=rec[:, 2].copy(), int_k=rec[:, 3:5].copy(),
                       tau_start=rec[:, 5].copy(),
                       k_tau1=k_tau1[got == 1],
                       n_paths=config.n_paths)


@njit(cache=True)
def _functional_kernel(seed, n_paths, n_steps, dt, x_init,
                       tab_lo, inv_h, n_tab, b_tab, c_tab, phi_tab,
                       rho_tab, h_tab, out_k1, out_k2):
    """Fixed-horizon additive functionals of the tabulated driver.

    Per path, K^1 = int h(X) dt and K^2 = int phi(X) dW with the
    rho-correlated Brownian combination.
    """
    sq = math.sqrt(dt)
    for p in range(n_paths):
        key = path_key(np.uint64(seed), np.uint64(p))
        x = x_init
        k1 = 0.0
        k2 = 0.0
        for i in range(n_steps):
            n1 = normal(key, np.uint64(2 * i))
            n2 = normal(key, np.uint64(2 * i + 1))
            u = (x - tab_lo) * inv_h
            if u < 0.0:
                u = 0.0
            elif u > n_tab - 1.000001:
                u = n_tab - 1.000001
            j = int(u)
            w = u - j
            bx = b_tab[j] + w * (b_tab[j + 1] - b_tab[j])
            cx = c_tab[j] + w * (c_tab[j + 1] - c_tab[j])
            px = phi_tab[j] + w * (phi_tab[j + 1] - phi_tab[j])
            rx = rho_tab[j] + w * (rho_tab[j + 1] - rho_tab[j])
            hx = h_tab[j] + w * (h_tab[j + 1] - h_tab[j])
            dw1 = sq * n1
            k1 += hx * dt
            k2 += px * (rx * dw1
                        + math.sqrt(max(1.0 - rx * rx, 0.0)) * sq * n2)
            x = x + bx * dt + cx * dw1
        out_k1[p] = k1
        out_k2[p] = k2


def simulate_functional(spec, config, horizon, measure=None, t_total=1.0):
    """Samples of K_{horizon} = (int h dt, int phi dW) for the
    unit-normalized driver, one per path.

    Same tabulated-coefficient kernel as :func:`extract_cycles`, without
    the cycle bookkeeping.  Returns an (n_paths, 2) array.
    """
    if measure is None:
        measure = build_ergodic_measure(spec)
    dt = config.dt
    n_steps = int(math.ceil(horizon / dt))
    k1 = np.empty(config.n_paths)
    k2 = np.empty(config.n_paths)
    if config.scheme == "euler_ft_variance":
        kap, theta_lvl, diff, rho_const, var_rate = \
            _heston_driver_params(spec, measure, config)
        _heston_functional_kernel(np.uint64(config.seed), config.n_paths,
                                  n_steps, dt, math.exp(spec.x0),
                                  kap, theta_lvl, diff, rho_const,
                                  var_rate, t_total, k1, k2)
    else:
        tab_lo, inv_h, b_tab, c_tab, phi_tab, rho_tab, h_tab = \
            _coefficient_tables(spec, measure, t_total)
        _functional_kernel(np.uint64(config.seed), config.n_paths, n_steps,
                           dt, spec.x0, tab_lo, inv_h, len(b_tab), b_tab,
                           c_tab, phi_tab, rho_tab, h_tab, k1, k2)
    return np.column_stack([k1, k2])


def _moment_pipeline(l, g, int_k, k_tau1):
    m_l = float(np.mean(l))
    m_g = g.mean(axis=0)
    gg = g - np.outer(l, m_g / m_l)
    joint = np.column_stack([gg, l])
    var_gl = np.cov(joint, rowvar=False, ddof=1)
    kappa3 = np.einsum("nk,nl,nm->klm", gg, gg, gg) / len(l)
    if k_tau1 is not None and len(k_tau1):
        e_k_tau1 = k_tau1.mean(axis=0)
    else:
        e_k_tau1 = np.zeros(g.shape[1])
    # integral of the cycle-local increment K_t - K_{tau1}; using the global
    # K here would make the A1 drift depend on the anchor pair (x0, x1)
    e_int_k = int_k.mean(axis=0)
    return CycleStats.from_moments(m_l=m_l, mean_g=m_g, var_gl=var_gl,
                                   kappa3=kappa3, e_k_tau1=e_k_tau1,
                                   e_int_k=e_int_k, n_cycles=len(l))


def cycle_stats(cycles, with_errors=False, n_groups=50):
    """Plug-in moment estimators of the cycle law.

    Accepts a :class:`CycleSample` or any iterable of :class:`CyclePath`.
    With ``with_errors=True`` also returns grouped-jackknife standard
    errors for the scalar summaries.
    """
    if isinstance(cycles, CycleSample):
        l, g = cycles.l, np.column_stack([cycles.g_h, cycles.g_vol])
        int_k, k_tau1 = cycles.int_k, cycles.k_tau1
    else:
        cl = list(cycles)
        l = np.array([c.l for c in cl])
        g = np.array([[c.g_h, c.g_vol] for c in cl])
        int_k = np.array([c.int_k for c in cl])
        k_tau1 = None
    if len(l) < 2:
        raise InsufficientCyclesError("need at least 2 cycles")
    try:
        stats = _moment_pipeline(l, g, int_k, k_tau1)
    except DegenerateError:
        raise DegenerateError(
            "cycle covariance is singular; x0 = x1 or phi degenerate?")
    if not with_errors:
        return stats

    n = len(l)
    n_groups = min(n_groups, n)
    bounds = np.linspace(0, n, n_groups + 1).astype(int)
    reps = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        keep = np.ones(n, dtype=bool)
        keep[a:b] = False
        rep = _moment_pipeline(l[keep], g[keep], int_k[keep], k_tau1)
        reps.append((rep.m_l, rep.mu_kl, rep.rho_cov, rep.mu_klm))
    def jack_se(vals):
        return math.sqrt(n_groups - 1) * np.std(np.array(vals), axis=0,
                                                ddof=0)

    errors = {
        "m_l": jack_se([r[0] for r in reps]),
        "mu_kl": jack_se([r[1] for r in reps]),
        "rho_cov": jack_se([r[2] for r in reps]),
        "mu_klm": jack_se([r[3] for r in reps]),
    }
    return stats, errors


def kac_first_moment(measure, g, y, z):
    """Mean time-integral of g up to the hitting time of z, started at y.

    G^1_g(y; z) = 2 int_y^z (s(z)-s(x)) g dPi + 2 (s(z)-s(y)) Pi[g; x <= y]
    for y <= z, mirrored for y > z.
    """
    lo, hi = measure.window
    s = measure.s
    pi = measure.pi

    def top(x):
        xa = np.atleast_1d(x)
        return float(np.asarray(g(xa), dtype=float)[0] * pi(xa)[0])

    if y == z:
        return 0.0
    if y < z:
        inner, _ = integrate.quad(
            lambda x: (s(np.atleast_1d(z))[0] - s(np.atleast_1d(x))[0])
            * top(x), y, z, limit=200)
        tail, _ = integrate.quad(top, lo, y, limit=200)
        gap = float(s(np.atleast_1d(z))[0] - s(np.atleast_1d(y))[0])
        return 2.0 * inner + 2.0 * gap * tail
    inner, _ = integrate.quad(
        lambda x: (s(np.atleast_1d(x))[0] - s(np.atleast_1d(z))[0])
        * top(x), z, y, limit=200)
    tail, _ = integrate.quad(top, y, hi, limit=200)
    gap = float(s(np.atleast_1d(y))[0] - s(np.atleast_1d(z))[0])
    return 2.0 * inner + 2.0 * gap * tail
