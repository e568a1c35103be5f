"""Hermite calculus and two-term Edgeworth densities.

Contains the probabilists' Hermite polynomials, the Gram-Charlier series,
the combinatorial cumulant-to-Hermite-moment conversion, the classical
two-term Edgeworth density for standardized iid sums (dimension <= 2), and
the regenerative-cycle version whose coefficients A1 (location/bias) and
A3 (skewness) are assembled from cycle statistics.  The latter is what
connects the Monte Carlo cycle decomposition to the corrected price: the
A3/6 term of the cycle density reproduces the alpha-skew of the pricing
polynomial.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .errors import DegenerateError, ParameterError

_MAX_ORDER = 8  # the composition sum grows combinatorially; the price
                # expansion itself only ever needs j <= 3


def hermite(j, x):
    """Probabilists' Hermite polynomial H_j evaluated at x (vectorized)."""
    if j < 0:
        raise ParameterError("Hermite index must be nonnegative")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if j == 0:
        return h_prev
    h = x.copy()
    for k in range(1, j):
        h, h_prev = x * h - k * h_prev, h
    return h


def _compositions(total, parts, smallest):
    """Ordered tuples (r_1, ..., r_parts) with r_i >= smallest, sum = total."""
    if parts == 1:
        if total >= smallest:
            yield (total,)
        return
    for r in range(smallest, total - smallest * (parts - 1) + 1):
        for rest in _compositions(total - r, parts - 1, smallest):
            yield (r,) + rest


def hermite_moments_from_cumulants(cumulants):
    """Hermite moments E[H_j(Y)], j = 0..J, of a standardized Y.

    ``cumulants`` lists the higher cumulants (kappa_3, ..., kappa_J) of Y;
    the first two are fixed at (0, 1) by standardization.  For j >= 3,

        E[H_j(Y)] = sum_{k <= j/3} sum_{r_1+...+r_k = j, r_i >= 3}
                    (kappa_{r_1} ... kappa_{r_k}) / (r_1! ... r_k!) * j!/k!

    which is the coefficient extraction from the cumulant generating
    function against the Hermite generating function.
    """
    cumulants = [float(c) for c in np.atleast_1d(cumulants)]
    j_max = len(cumulants) + 2
    if j_max > _MAX_ORDER:
        raise ParameterError("cumulant order %d exceeds the supported %d"
                             % (j_max, _MAX_ORDER))
    kappa = {r + 3: c for r, c in enumerate(cumulants)}
    moments = np.zeros(j_max + 1)
    moments[0] = 1.0
    for j in range(3, j_max + 1):
        total = 0.0
        for k in range(1, j // 3 + 1):
            for comp in _compositions(j, k, 3):
                term = 1.0
                for r in comp:
                    term *= kappa[r] / math.factorial(r)
                total += term * math.factorial(j) / math.factorial(k)
        moments[j] = total
    return moments


def gram_charlier_expectation(f, hermite_moments, j_max=None,
                              breakpoints=()):
    """Truncated Gram-Charlier series sum_j E[H_j(Y)]/j! int f H_j phi dz."""
    moments = np.atleast_1d(np.asarray(hermite_moments, dtype=float))
    if j_max is None:
        j_max = len(moments) - 1
    if j_max >= len(moments):
        raise ParameterError("series order %d exceeds the %d supplied moments"
                             % (j_max, len(moments) - 1))
    points = sorted(b for b in breakpoints if -_Z_SPAN < b < _Z_SPAN)
    total = 0.0
    for j in range(j_max + 1):
        if moments[j] == 0.0:
            continue

        def integrand(z, _j=j):
            return float(f(z)) * float(hermite(_j, z)) \
                * math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)

        val, _ = integrate.quad(integrand, -_Z_SPAN, _Z_SPAN,
                                points=points or None, limit=400)
        total += moments[j] / math.factorial(j) * val
    return total


_Z_SPAN = 12.0


def edgeworth_iid_density(v, kappa3, m, x):
    """Two-term Edgeworth density of a standardized iid sum, d <= 2.

    q(x) = phi(x; 0, v) - (6 sqrt(m))^{-1} sum kappa_{ijk} d_i d_j d_k phi.
    Third derivatives of the Gaussian density are evaluated through the
    tensor identity d_i d_j d_k phi = (A_ij xi_k + A_jk xi_i + A_ik xi_j
    - xi_i xi_j xi_k) phi with A = v^{-1}, xi = A x.
    """
    if not m > 0:
        raise ParameterError("sample count m must be positive")
    v = np.atleast_2d(np.asarray(v, dtype=float))
    d = v.shape[0]
    if v.shape != (d, d) or d > 2:
        raise ParameterError("variance must be a d x d matrix with d <= 2")
    try:
        chol = np.linalg.cholesky(v)
    except np.linalg.LinAlgError:
        raise ParameterError("variance matrix is not positive definite")
    kappa = np.asarray(kappa3, dtype=float).reshape(d, d, d)
    x = np.asarray(x, dtype=float).reshape(-1, d)

    a_inv = np.linalg.inv(v)
    xi = x @ a_inv.T
    quad_form = np.einsum("ni,ni->n", x, xi)
    det = float(np.prod(np.diag(chol))) ** 2
    gauss = np.exp(-0.5 * quad_form) / ((2.0 * math.pi) ** (d / 2.0)
                                        * math.sqrt(det))
    third = (np.einsum("ij,nk,ijk->n", a_inv, xi, kappa)
             + np.einsum("jk,ni,ijk->n", a_inv, xi, kappa)
             + np.einsum("ik,nj,ijk->n", a_inv, xi, kappa)
             - np.einsum("ni,nj,nk,ijk->n", xi, xi, xi, kappa))
    out = gauss - third * gauss / (6.0 * math.sqrt(m))
    return float(out[0]) if np.asarray(x).size == d else out


@dataclass(frozen=True)
class CycleStats:
    """Empirical law of one regenerative cycle of the functional K.

    Coordinates follow the decomposition K-increment = (G, l): ``mu_kl`` is
    Var[GG]/m_L for the centered GG = G - l m_G/m_L, ``rho_cov`` is
    Cov[GG, l], ``kappa3`` holds the raw third moments of GG, and
    ``mu_klm`` the centered third cumulants.  ``e_k_tau1`` is the mean of K
    at the end of the initial (non-stationary) cycle and ``e_int_k`` the
    mean of the time integral of K over one stationary cycle.
    """

    m_l: float
    mean_g: np.ndarray
    var_gl: np.ndarray
    mu_kl: np.ndarray
    rho_cov: np.ndarray
    kappa3: np.ndarray
    mu_klm: np.ndarray
    e_k_tau1: np.ndarray
    e_int_k: np.ndarray
    n_cycles: int

    def __post_init__(self):
        if not self.m_l > 0.0:
            raise ParameterError("mean cycle length must be positive")
        if not np.allclose(self.var_gl, np.asarray(self.var_gl).T):
            raise ParameterError("var_gl must be symmetric")
        if np.any(np.linalg.eigvalsh(np.asarray(self.var_gl)) <= 0.0):
            raise DegenerateError("var_gl must be positive definite")

    @staticmethod
    def from_moments(m_l, mean_g, var_gl, kappa3, e_k_tau1, e_int_k,
                     n_cycles):
        """Fill the derived fields (mu_kl, rho_cov, mu_klm) consistently."""
        var_gl = np.asarray(var_gl, dtype=float)
        kappa3 = np.asarray(kappa3, dtype=float)
        d_prime = var_gl.shape[0] - 1
        mu_kl = var_gl[:d_prime, :d_prime] / m_l
        rho_cov = var_gl[:d_prime, d_prime]
        mu_klm = (kappa3
                  - np.einsum("k,lm->klm", rho_cov, mu_kl)
                  - np.einsum("l,mk->klm", rho_cov, mu_kl)
                  - np.einsum("m,kl->klm", rho_cov, mu_kl)) / m_l
        return CycleStats(m_l=float(m_l),
                          mean_g=np.asarray(mean_g, dtype=float),
                          var_gl=var_gl, mu_kl=mu_kl, rho_cov=rho_cov,
                          kappa3=kappa3, mu_klm=mu_klm,
                          e_k_tau1=np.asarray(e_k_tau1, dtype=float),
                          e_int_k=np.asarray(e_int_k, dtype=float),
                          n_cycles=int(n_cycles))


@dataclass(frozen=True)
class EdgeworthDensity:
    """Two-term density q(z) = phi(z;v) + T^{-1/2}{A1 q1 + (A3/6) q3}."""

    v: float
    a1: float
    a3: float
    t_scale: float

    def __call__(self, z):
        return edgeworth_density_eval(self, z)

    def cdf(self, z):
        """int_{-inf}^z q; the correction terms integrate in closed form
        because -d^k phi antidifferentiates to -d^{k-1} phi."""
        v = self.v
        z = np.asarray(z, dtype=float)
        root_v = math.sqrt(v)
        u = z / root_v
        gauss = np.exp(-0.5 * u * u) / (root_v * math.sqrt(2.0 * math.pi))
        corr = (self.a1 + self.a3 / 6.0 * hermite(2, u) / v) * gauss
        out = ndtr(u) - corr / math.sqrt(self.t_scale)
        return float(out) if np.ndim(z) == 0 else out


def edgeworth_coefficients(stats, a_grad, a_hess, t_scale):
    """Assemble (v, A1, A3) of the cycle Edgeworth density.

    ``a_grad``/``a_hess`` are the gradient and Hessian of the smooth
    statistic A at the cycle mean; the sums over cycle moments run over the
    d' coordinates of GG, while the drift correction in A1 pairs the full
    gradient with the zero-padded covariance iota(rho).
    """
    a_grad = np.asarray(a_grad, dtype=float)
    a_hess = np.atleast_2d(np.asarray(a_hess, dtype=float))
    d = a_grad.shape[0]
    d_prime = stats.mu_kl.shape[0]
    if d_prime > d:
        raise ParameterError("gradient dimension below d'")

    g = a_grad[:d_prime]
    v = float(np.einsum("kl,k,l->", stats.mu_kl, g, g))
    if not v > 0.0:
        raise DegenerateError("Edgeworth variance v must be positive")

    iota_rho = np.zeros(d)
    iota_rho[:d_prime] = stats.rho_cov
    drift = np.asarray(stats.e_k_tau1, dtype=float) \
        + np.asarray(stats.e_int_k, dtype=float) / stats.m_l \
        - iota_rho / stats.m_l
    a1 = 0.5 * float(np.einsum("kl,kl->",
                               a_hess[:d_prime, :d_prime], stats.mu_kl)) \
        + float(a_grad @ drift)
    a3 = float(np.einsum("klm,k,l,m->", stats.mu_klm, g, g, g)) \
        + 3.0 * float(np.einsum("j,k,lm,jl,km->", g, g,
                                a_hess[:d_prime, :d_prime],
                                stats.mu_kl, stats.mu_kl))
    return EdgeworthDensity(v=v, a1=a1, a3=a3, t_scale=float(t_scale))


def edgeworth_density_eval(density, z):
    """Evaluate q(z); -d phi and -d^3 phi come from Hermite identities."""
    v = density.v
    z = np.asarray(z, dtype=float)
    root_v = math.sqrt(v)
    u = z / root_v
    gauss = np.exp(-0.5 * u * u) / (root_v * math.sqrt(2.0 * math.pi))
    q1 = gauss * hermite(1, u) / root_v
    q3 = gauss * hermite(3, u) / root_v ** 3
    out = gauss + (density.a1 * q1 + density.a3 / 6.0 * q3) \
        / math.sqrt(density.t_scale)
    return float(out) if np.ndim(z) == 0 else out
