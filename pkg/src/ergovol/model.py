"""One-factor volatility-driver models and their ergodic characteristics.

The driver X solves dX = b(X)dt + c(X)dW on the whole real line.  Everything
downstream (the corrected price, the skew, the cycle machinery) only needs
three objects derived from (b, c):

* the scale function ``s`` with s'(x) = exp(-2 * int_0^x b/c^2),
* the normalized speed density ``pi`` = 1 / (eps^2 * s' * c^2), which is the
  stationary density of X,
* the normalizer ``eps^2`` = int dx / (s' * c^2), the small parameter of the
  price expansion.

All three are tabulated on an adaptively chosen window and backed by smooth
interpolants of the log-scale integral, so tail behaviour is handled in log
space and never overflows silently.
"""

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .errors import (
    EvaluationError,
    ExtrapolationError,
    NotErgodicError,
    ParameterError,
    SingularCoefficientError,
    WindowTooWideError,
)

_LOG_HUGE = 700.0  # log of the float64 overflow threshold, with headroom


class NotRecurrentWarning(UserWarning):
    """The scale function saturates: s(R) != R, the driver is not recurrent."""


@dataclass(frozen=True)
class DiffusionSpec:
    """Coefficient quadruple of the volatility driver plus smoothness interval.

    ``b``, ``c``, ``phi``, ``rho`` must be vectorized callables on floats /
    ndarrays.  ``u_interval`` is the open interval where ``phi`` and ``rho``
    are declared continuously differentiable.
    """

    b: object
    c: object
    phi: object
    rho: object
    u_interval: tuple = (-1.0, 1.0)
    x0: float = 0.0
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = self.u_interval
        if not lo < hi:
            raise ParameterError("u_interval must be a non-empty open interval")

    def c_checked(self, x):
        val = np.asarray(self.c(x), dtype=float)
        if np.any(~np.isfinite(val)) or np.any(val <= 0.0):
            raise SingularCoefficientError(f"c(x) <= 0 or non-finite at x={x!r}")
        return val

    def drift_over_c2(self, x):
        c2 = self.c_checked(x) ** 2
        val = np.asarray(self.b(x), dtype=float) / c2
        if np.any(~np.isfinite(val)):
            raise SingularCoefficientError(f"b/c^2 non-finite at x={x!r}")
        return val

    def rescaled(self, eta):
        """Coefficients (b/eta^2, c/eta).  Leaves pi and s unchanged."""
        if eta <= 0:
            raise ParameterError("eta must be positive")
        b, c = self.b, self.c
        return DiffusionSpec(
            b=lambda x: np.asarray(b(x), dtype=float) / eta**2,
            c=lambda x: np.asarray(c(x), dtype=float) / eta,
            phi=self.phi,
            rho=self.rho,
            u_interval=self.u_interval,
            x0=self.x0,
            name=self.name,
            params={**self.params, "eta": self.params.get("eta", 1.0) * eta},
        )


@dataclass(frozen=True)
class MarketSpec:
    """Spot, deterministic short rate and maturity."""

    spot_log: float = 0.0
    rate: object = 0.0  # constant or callable of time
    maturity: float = 1.0

    def __post_init__(self):
        if self.maturity <= 0:
            raise ParameterError("maturity must be positive")

    def integrated_rate(self):
        if callable(self.rate):
            val, _ = integrate.quad(self.rate, 0.0, self.maturity, limit=200)
            return val
        return float(self.rate) * self.maturity

    def discount(self):
        return math.exp(-self.integrated_rate())

    def average_rate(self):
        return self.integrated_rate() / self.maturity


@dataclass
class ScaleTable:
    """Tabulated scale function on a fixed window."""

    grid: np.ndarray
    s_vals: np.ndarray
    log_s_prime: np.ndarray

    @property
    def s_prime(self):
        return np.exp(self.log_s_prime)


@dataclass(eq=False)
class ErgodicMeasure:
    """Scale function, stationary density and normalizer on a finite window."""

    grid: np.ndarray
    s_vals: np.ndarray
    s_prime: np.ndarray
    pi_vals: np.ndarray
    epsilon: float
    window: tuple
    tail_mass_bound: float
    # interpolant of I(x) = int_0^x b/c^2 and bookkeeping, set by the builder
    _i_spline: object = None
    _spec: object = None
    _edges: tuple = ()
    _log_eps2: float = 0.0

    def log_s_prime(self, x):
        return -2.0 * self._i_spline(x)

    def log_pi(self, x):
        x = np.asarray(x, dtype=float)
        logc = np.log(self._spec.c_checked(x))
        return 2.0 * self._i_spline(x) - 2.0 * logc - self._log_eps2

    def pi(self, x):
        return np.exp(self.log_pi(x))

    def s(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.window
        if np.any(x < lo) or np.any(x > hi):
            raise ExtrapolationError(f"x={x!r} outside window {self.window}")
        return self._s_spline(x)

    @property
    def _s_spline(self):
        sp = getattr(self, "_s_spline_cached", None)
        if sp is None:
            sp = CubicSpline(self.grid, self.s_vals)
            object.__setattr__(self, "_s_spline_cached", sp)
        return sp


def _require_window(window):
    lo, hi = float(window[0]), float(window[1])
    if not (lo < 0.0 < hi):
        raise ParameterError("window must contain 0")
    return lo, hi


def _integrate_log_scale(spec, x_from, x_to, targets):
    """Cumulative I(x) = int_0^x b/c^2 on ``targets`` (solve_ivp, tight tol)."""
    if len(targets) == 0:
        return np.empty(0)
    sol = integrate.solve_ivp(
        lambda x, y: [spec.drift_over_c2(x)],
        (x_from, x_to),
        [0.0],
        method="DOP853",
        t_eval=targets,
        rtol=1e-12,
        atol=1e-14,
    )
    if not sol.success:
        raise SingularCoefficientError(f"scale integration failed: {sol.message}")
    return sol.y[0]


def _side_grid(width):
    """Node count for a tail segment: dense near 0, coarser far out."""
    return int(min(4001, max(201, round(width * 800)))) | 1


def build_scale(spec, window, n_nodes=1025):
    """Tabulate s and s' on ``window``.

    s(0) = 0 and s'(x) = exp(-2 int_0^x b/c^2).  Raises WindowTooWideError if
    s' overflows anywhere on the window, with a suggested shrunk window.
    """
    lo, hi = _require_window(window)
    if n_nodes < 64:
        raise ParameterError("n_nodes must be at least 64")
    grid = np.linspace(lo, hi, int(n_nodes))
    neg = grid[grid < 0.0]
    pos = grid[grid > 0.0]
    i_vals = np.zeros_like(grid)
    if len(neg):
        i_vals[: len(neg)] = _integrate_log_scale(spec, 0.0, lo, neg[::-1])[::-1]
    if len(pos):
        i_vals[-len(pos):] = _integrate_log_scale(spec, 0.0, hi, pos)
    log_sp = -2.0 * i_vals
    if np.any(log_sp > _LOG_HUGE):
        ok = log_sp <= _LOG_HUGE - 10.0
        sub = grid[ok]
        suggestion = (float(sub.min()), float(sub.max())) if len(sub) else None
        raise WindowTooWideError(
            "scale derivative overflows on the window; shrink it",
            suggested_window=suggestion,
        )
    # s by cumulative integration of exp(-2I); spline of I keeps this smooth
    i_spline = CubicSpline(grid, i_vals)
    s_vals = np.zeros_like(grid)
    k0 = int(np.searchsorted(grid, 0.0))
    for k in range(k0, len(grid) - 1):
        seg, _ = integrate.quad(lambda x: math.exp(-2.0 * i_spline(x)),
                                grid[k], grid[k + 1], limit=100)
        s_vals[k + 1] = s_vals[k] + seg
    for k in range(k0, 0, -1):
        seg, _ = integrate.quad(lambda x: math.exp(-2.0 * i_spline(x)),
                                grid[k - 1], grid[k], limit=100)
        s_vals[k - 1] = s_vals[k] - seg
    # anchor s(0) = 0 exactly (grid may not contain 0)
    s_vals -= CubicSpline(grid, s_vals)(0.0)
    return ScaleTable(grid=grid, s_vals=s_vals, log_s_prime=log_sp)


def _segment_mass(spec, i_spline, a, b):
    """int_a^b exp(2I - 2 log c) dx, computed in scaled log space."""
    def log_m(x):
        return 2.0 * i_spline(x) - 2.0 * np.log(spec.c_checked(x))

    probe = np.linspace(a, b, 33)
    lm = log_m(probe)
    peak = float(np.max(lm))
    if peak > _LOG_HUGE:
        raise NotErgodicError("speed density overflows; eps^2 diverges")
    val, err = integrate.quad(lambda x: math.exp(log_m(x) - peak), a, b,
                              limit=300)
    return val * math.exp(peak), err * math.exp(peak), log_m


def build_ergodic_measure(spec, tail_tol=1e-8, initial_half_width=1.0,
                          max_half_width=2.0e4):
    """Choose a window adaptively and tabulate (s, pi, eps).

    Each side is extended by doubling until the estimated speed-measure tail
    mass outside it falls below ``tail_tol * eps^2``; failure to converge
    before ``max_half_width`` raises NotErgodicError.
    """
    if not (0.0 < tail_tol <= 1e-3):
        raise ParameterError("tail_tol must lie in (0, 1e-3]")

    edges = [0.0]
    masses = {}
    i_points = {0.0: 0.0}

    def extend_side(direction):
        """Returns (edge, tail_estimate) for one side."""
        edge = 0.0
        nxt = direction * initial_half_width
        while True:
            a, b = (edge, nxt) if direction > 0 else (nxt, edge)
            # cumulative I out to the new edge
            n = _side_grid(abs(nxt - edge))
            targets = np.linspace(edge, nxt, n)
            i_seg = i_points[edge] + _integrate_log_scale(spec, edge, nxt, targets)
            for t, v in zip(targets, i_seg):
                i_points[t] = v
            xs = np.array(sorted(i_points))
            spl = CubicSpline(xs, np.array([i_points[t] for t in xs]))
            mass, _, log_m = _segment_mass(spec, spl, a, b)
            masses[(a, b)] = mass
            edges.append(nxt)
            total = sum(masses.values())
            # local decay rate of the speed density at the outer edge
            h = abs(nxt - edge) * 1e-3
            lm_edge = float(log_m(nxt))
            lm_in = float(log_m(nxt - direction * h))
            lam = (lm_in - lm_edge) / h  # > 0 means decay outward
            if lam > 0.0:
                tail = math.exp(lm_edge) / lam
                if tail < 0.125 * tail_tol * total:
                    return nxt, tail
            if abs(nxt) >= max_half_width:
                raise NotErgodicError(
                    "speed measure tail does not converge: eps^2 diverges "
                    f"(reached |x| = {abs(nxt):g})")
            edge, nxt = nxt, nxt * 2.0

    hi, tail_hi = extend_side(+1.0)
    lo, tail_lo = extend_side(-1.0)
    eps2_window = sum(masses.values())
    tail = tail_hi + tail_lo
    eps2 = eps2_window + tail
    log_eps2 = math.log(eps2)

    xs = np.array(sorted(i_points))
    i_vals = np.array([i_points[t] for t in xs])
    i_spline = CubicSpline(xs, i_vals)

    grid, log_sp = _measure_grid(spec, i_spline, lo, hi, tail_tol, log_eps2)
    if np.any(log_sp > _LOG_HUGE):
        raise WindowTooWideError(
            "scale derivative overflows on the adaptive window; "
            "increase tail_tol or rescale the model")
    s_prime = np.exp(log_sp)
    # s by composite Simpson per mesh interval (midpoints from the I spline)
    mids = 0.5 * (grid[1:] + grid[:-1])
    sp_mid = np.exp(-2.0 * i_spline(mids))
    increments = np.diff(grid) / 6.0 * (s_prime[:-1] + 4.0 * sp_mid + s_prime[1:])
    # accumulate outward from the origin: the scale derivative can span
    # hundreds of orders of magnitude, and summing from the window edge
    # would wipe out all resolution near the center
    i0 = int(np.argmin(np.abs(grid)))
    s_vals = np.empty_like(grid)
    s_vals[i0] = 0.0
    s_vals[i0 + 1:] = np.cumsum(increments[i0:])
    s_vals[:i0] = -np.cumsum(increments[:i0][::-1])[::-1]
    s_vals -= CubicSpline(grid, s_vals)(0.0)
    pi_vals = np.exp(2.0 * i_spline(grid)
                     - 2.0 * np.log(spec.c_checked(grid)) - log_eps2)

    # recurrence check: s must be unbounded on both sides
    for side, idx in ((-1, 0), (+1, -1)):
        if log_sp[idx] < math.log(max(abs(s_vals[idx]), 1e-300)) - 40.0:
            warnings.warn(
                "scale function saturates towards "
                f"{'-' if side < 0 else '+'}inf; the driver may not be "
                "recurrent on R", NotRecurrentWarning, stacklevel=2)

    measure = ErgodicMeasure(
        grid=grid, s_vals=s_vals, s_prime=s_prime, pi_vals=pi_vals,
        epsilon=math.sqrt(eps2), window=(lo, hi),
        tail_mass_bound=tail / eps2,
        _i_spline=i_spline, _spec=spec,
        _edges=tuple(sorted(set(edges))), _log_eps2=log_eps2,
    )
    return measure


def _measure_grid(spec, i_spline, lo, hi, tail_tol, log_eps2):
    """Node layout equidistributing the trapezoid error of the density.

    Node density follows |pi''|^(1/3) (the optimal trapezoid mesh), refined
    by doubling until a trapezoid/Simpson comparison meets the tolerance.
    """
    def log_pi(x):
        return (2.0 * i_spline(x) - 2.0 * np.log(spec.c_checked(x))
                - log_eps2)

    probe = np.linspace(lo, hi, 32769)
    lp = log_pi(probe)
    pi_p = np.exp(lp)
    d1 = np.gradient(lp, probe)
    d2 = np.gradient(d1, probe)
    curv = np.abs(pi_p * (d1 * d1 + d2))
    w = np.cbrt(curv)
    w += max(1e-12, 1e-4 * float(np.max(w)))  # floor keeps spacing bounded
    cum = integrate.cumulative_trapezoid(w, probe, initial=0.0)

    tol = 0.02 * tail_tol
    n = int(2.0 * cum[-1] ** 1.5 / math.sqrt(12.0 * tol)) + 1
    n = int(np.clip(n, 4001, 4_000_000))
    for _ in range(6):
        levels = np.linspace(0.0, cum[-1], n)
        grid = np.interp(levels, cum, probe)
        grid[0], grid[-1] = lo, hi
        grid = np.unique(grid)
        pi_vals = np.exp(log_pi(grid))
        trap = float(np.trapezoid(pi_vals, grid))
        simp = float(integrate.simpson(pi_vals, x=grid))
        if abs(trap - simp) < tol or n >= 4_000_000:
            break
        n = 2 * n
    return grid, -2.0 * i_spline(grid)


def expectation(measure, g, full=False):
    """Pi[g] = int g dPi by adaptive quadrature over the tabulated window."""
    spec = measure._spec

    def integrand(x):
        val = g(x) * math.exp(float(measure.log_pi(x)))
        return val

    edges = list(measure._edges)
    total, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        probe = np.linspace(a, b, 9)
        gp = np.asarray(g(probe), dtype=float)
        if np.any(~np.isfinite(gp)):
            bad = probe[~np.isfinite(np.atleast_1d(gp))][0]
            raise EvaluationError(f"g non-finite at node x={bad:g}")
        v, e = integrate.quad(integrand, a, b, limit=400)
        total += v
        err += e
    if full:
        return total, err + abs(total) * measure.tail_mass_bound
    return total


class CheckStatus(Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


@dataclass
class ConditionReport:
    gamma: tuple = (0.0, 0.0)
    delta: float = 0.1
    assgam_ok: bool = None
    assgam_witness: tuple = None
    assint_ok: bool = None
    assint_witness: tuple = None
    kappa: tuple = (None, None)
    assk_ok: CheckStatus = None


def check_assgam(spec, measure, gamma, delta, n_grid=401):
    """Finite-grid certificate of the exponential domination condition.

    Checks, in log space, that (1 + phi(x)^2) pi(x) s'(y) stays below
    exp(-log(delta) + gamma*x - (4*gamma + delta)*(x - y)) on a product grid
    of x >= y >= 0 (and the mirrored inequality for x <= y <= 0).  A grid
    certificate, not a proof.
    """
    g_plus, g_minus = gamma
    if g_plus < 0 or g_minus < 0:
        raise ParameterError("gamma components must be nonnegative")
    if not (0.0 < delta < 1.0):
        raise ParameterError("delta must lie in (0, 1)")
    lo, hi = measure.window
    tol = 1e-9

    worst = None
    ok = True
    for sign, g in ((+1.0, g_plus), (-1.0, g_minus)):
        stop = hi if sign > 0 else -lo
        if stop <= 0:
            continue
        xs = np.linspace(0.0, stop, n_grid) * sign
        log_lhs_x = (np.log1p(np.asarray(spec.phi(xs), dtype=float) ** 2)
                     + measure.log_pi(xs))
        log_sp_y = measure.log_s_prime(xs)
        for i, x in enumerate(xs):
            # y runs over grid points between 0 and x
            ys = xs[: i + 1]
            log_lhs = log_lhs_x[i] + log_sp_y[: i + 1]
            log_rhs = (-math.log(delta) + g * sign * x
                       - (4.0 * g + delta) * sign * (x - ys))
            gap = log_lhs - log_rhs
            j = int(np.argmax(gap))
            if gap[j] > tol:
                ok = False
                if worst is None or gap[j] > worst[2]:
                    worst = (float(x), float(ys[j]), float(gap[j]))
    witness = None if ok else (worst[0], worst[1])
    return ok, witness


def check_assint(spec, measure, delta, n_centers=201, n_widths=40):
    """Search for (x, a) certifying the local-regularity condition.

    All five bounded quantities (the derivative of sqrt(pi/s')*phi*rho, s',
    pi, 1/s', 1/pi) must be <= 1/delta on [x-a, x+a].  Returns
    (ok, (x, a) or None).
    """
    if not (0.0 < delta < 1.0):
        raise ParameterError("delta must lie in (0, 1)")
    u_lo, u_hi = spec.u_interval
    w_lo, w_hi = measure.window
    lo = max(u_lo, w_lo, -1.0 / delta)
    hi = min(u_hi, w_hi, 1.0 / delta)
    if not lo < hi:
        raise ParameterError("u_interval does not intersect the window")
    bound = 1.0 / delta

    def root_ratio_rho_phi(y):
        y = np.asarray(y, dtype=float)
        log_ratio = measure.log_pi(y) - measure.log_s_prime(y)
        return (np.exp(0.5 * log_ratio) * np.asarray(spec.phi(y), dtype=float)
                * np.asarray(spec.rho(y), dtype=float))

    centers = np.linspace(lo, hi, n_centers)
    widths = np.geomspace(delta, min(1.0 / delta, 0.5 * (hi - lo)), n_widths)
    for x in centers:
        for a in widths:
            if x - a < max(u_lo, w_lo) or x + a > min(u_hi, w_hi):
                continue
            ys = np.linspace(x - a, x + a, 101)
            log_sp = measure.log_s_prime(ys)
            log_pi = measure.log_pi(ys)
            if (np.max(np.abs(log_sp)) > math.log(bound)
                    or np.max(np.abs(log_pi)) > math.log(bound)):
                continue
            h = 1e-5 * a
            deriv = (root_ratio_rho_phi(ys + h) - root_ratio_rho_phi(ys - h)) / (2 * h)
            if np.max(np.abs(deriv)) <= bound:
                return True, (float(x), float(a))
    return False, None


def check_assk(spec, gamma, v_probe=50.0, tol=1e-8, n_probe=64):
    """Estimate kappa_+/- = -limsup / liminf of b/c^2 and test kappa > 2*gamma.

    The limits are read off a probe grid [v/2, v] (mirrored for the negative
    side) with monotone-trend detection; an oscillating ratio yields an
    INCONCLUSIVE status rather than a guess.  Also checks the phi-growth
    bound (1 + phi^2) / (e^{gamma|v|} c^2) on the same grid.
    """
    g_plus, g_minus = gamma
    kappas = []
    statuses = []
    growth_ok = True
    for sign, g in ((+1.0, g_plus), (-1.0, g_minus)):
        vs = sign * np.linspace(v_probe / 2.0, v_probe, n_probe)
        ratio = spec.drift_over_c2(vs)
        # kappa_+ = -limsup_{v->+inf} b/c^2 ; kappa_- = liminf_{v->-inf} b/c^2
        vals = -ratio if sign > 0 else ratio
        diffs = np.diff(vals)
        if np.all(vals > 1.0 / tol) and np.all(diffs > -tol * np.abs(vals[:-1])):
            kappas.append(math.inf)
            statuses.append(CheckStatus.PASS)
        else:
            rel_spread = (np.max(vals) - np.min(vals)) / max(1.0, abs(vals[-1]))
            trend_up = np.all(diffs >= -1e-12 - 1e-9 * np.abs(vals[:-1]))
            trend_down = np.all(diffs <= 1e-12 + 1e-9 * np.abs(vals[:-1]))
            if rel_spread < 1e-3 or trend_up or trend_down:
                if np.all(vals > 1.0 / tol):
                    kappas.append(math.inf)
                else:
                    kappas.append(float(vals[-1]))
                statuses.append(CheckStatus.PASS)
            else:
                kappas.append(float("nan"))
                statuses.append(CheckStatus.INCONCLUSIVE)
        phi2 = np.asarray(spec.phi(vs), dtype=float) ** 2
        c2 = spec.c_checked(vs) ** 2
        growth = (1.0 + phi2) / (np.exp(g * np.abs(vs)) * c2)
        gdiffs = np.diff(growth)
        if not (np.all(growth <= growth[0] * 4.0) or np.all(gdiffs <= 0.0)):
            growth_ok = False

    if any(s is CheckStatus.INCONCLUSIVE for s in statuses):
        status = CheckStatus.INCONCLUSIVE
    else:
        passed = (kappas[0] > 2.0 * g_plus and kappas[1] > 2.0 * g_minus
                  and growth_ok)
        status = CheckStatus.PASS if passed else CheckStatus.FAIL
    return ConditionReport(gamma=gamma, kappa=(kappas[0], kappas[1]),
                           assk_ok=status)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def preset(name, allow_attainable_origin=False, **params):
    """Named model families.

    * ``fouque_ou``:   b = (m - x)/eta^2 - nu*sqrt(2)*Lambda(x)/eta,
                       c = nu*sqrt(2)/eta; OU driver with market-price term.
    * ``heston_log``:  log-variance coordinates of the square-root variance
                       model; phi(x) = exp(x/2).
    * ``sinh_mix``:    slowly mixing driver with bounded coefficients.

    The square-root variance model requires xi*mu > 1/2 so the origin of the
    variance process is unattainable; pass ``allow_attainable_origin=True``
    to build the spec anyway (the ergodic law is still the gamma law, but the
    driver is not recurrent in log coordinates).
    """
    if name == "fouque_ou":
        return _preset_fouque_ou(**params)
    if name == "heston_log":
        return _preset_heston_log(allow_attainable_origin=allow_attainable_origin,
                                  **params)
    if name == "sinh_mix":
        return _preset_sinh_mix(**params)
    raise ParameterError(f"unknown preset {name!r}")


def _const_fn(value):
    v = float(value)
    return lambda x: np.full_like(np.asarray(x, dtype=float), v)


def _as_fn(f, default):
    if f is None:
        return default
    if callable(f):
        return f
    return _const_fn(f)


def _preset_fouque_ou(m=0.0, nu=0.7071067811865476, eta=1.0, Lambda=None,
                      phi=None, rho=-0.5, u_interval=(-2.0, 2.0)):
    if nu <= 0 or eta <= 0:
        raise ParameterError("nu and eta must be positive")
    lam = _as_fn(Lambda, _const_fn(0.0))
    phi_fn = _as_fn(phi, lambda x: np.exp(np.asarray(x, dtype=float) / 2.0))
    rho_fn = _as_fn(rho, None)
    root2nu = math.sqrt(2.0) * nu

    def b(x):
        x = np.asarray(x, dtype=float)
        return (m - x) / eta**2 - root2nu * np.asarray(lam(x), dtype=float) / eta

    return DiffusionSpec(
        b=b, c=_const_fn(root2nu / eta), phi=phi_fn, rho=rho_fn,
        u_interval=u_interval, name="fouque_ou",
        params=dict(m=m, nu=nu, eta=eta, rho=rho),
    )


def _preset_heston_log(xi=1.0, mu=0.04, nu_tilde=0.5, eta=1.0, rho=-0.5,
                       u_interval=(-8.0, 4.0), allow_attainable_origin=False):
    if xi <= 0 or mu <= 0 or eta <= 0:
        raise ParameterError("xi, mu, eta must be positive")
    if nu_tilde == 0.5 and xi * mu <= 0.5 and not allow_attainable_origin:
        raise ParameterError(
            "square-root variance model needs xi*mu > 1/2; "
            "pass allow_attainable_origin=True to override")
    k = 1.0 - nu_tilde

    def b(x):
        x = np.asarray(x, dtype=float)
        return (xi * mu * np.exp(-x) - xi - 0.5 * np.exp(-2.0 * k * x)) / eta**2

    def c(x):
        x = np.asarray(x, dtype=float)
        return np.exp(-k * x) / eta

    return DiffusionSpec(
        b=b, c=c, phi=lambda x: np.exp(np.asarray(x, dtype=float) / 2.0),
        rho=_as_fn(rho, None), u_interval=u_interval, name="heston_log",
        params=dict(xi=xi, mu=mu, nu_tilde=nu_tilde, eta=eta, rho=rho),
    )


def _preset_sinh_mix(xi=5.0, eta=1.0, phi=None, rho=-0.5,
                     u_interval=(-2.0, 2.0)):
    if xi <= 0.5 or eta <= 0:
        raise ParameterError("need xi > 1/2 and eta > 0")

    def b(x):
        x = np.asarray(x, dtype=float)
        return -(0.5 + xi) * np.tanh(x) / np.cosh(x) ** 2 / eta**2

    def c(x):
        x = np.asarray(x, dtype=float)
        return 1.0 / (eta * np.cosh(x))

    phi_fn = _as_fn(phi, lambda x: 2.0 + np.tanh(np.asarray(x, dtype=float)))
    return DiffusionSpec(
        b=b, c=c, phi=phi_fn, rho=_as_fn(rho, None),
        u_interval=u_interval, name="sinh_mix",
        params=dict(xi=xi, eta=eta, rho=rho),
    )
