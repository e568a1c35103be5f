"""Counter-based random numbers for reproducible parallel Monte Carlo.

Every draw is a pure function of ``(seed, path, step, channel)``, so the
result of a simulation cannot depend on how paths are scheduled across
worker threads or chunks.  The generator is the splitmix64 output function
applied to a Weyl sequence whose base is a per-path key; this is the same
construction splitmix64 itself uses and passes the usual statistical
batteries.

Two implementations are provided with identical output: scalar ones
(numba-friendly, used inside jitted path kernels) and vectorized numpy
ones (used by the generic Euler lane).
"""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def path_key(seed, path):
    # two mixing rounds decorrelate adjacent (seed, path) pairs
    return mix64(mix64(np.uint64(seed) + _GOLDEN) + np.uint64(path) * _MIX2)


@njit(cache=True, inline="always")
def uniform(key, counter):
    u = mix64(key + np.uint64(counter) * _GOLDEN)
    # (0, 1), never exactly 0 or 1
    return (float(u >> np.uint64(11)) + 0.5) * _U53


# AS241 (PPND16): inverse of the standard normal CDF, |error| ~ 1e-16.
_A = (3.3871328727963666080e0, 1.3314166789178437745e2,
      1.9715909503065514427e3, 1.3731693765509461125e4,
      4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2,
      5.3941960214247511077e3, 2.1213794301586595867e4,
      3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0,
      5.76949722146069140550e0, 3.64784832476320460504e0,
      1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
      6.89767334985100004550e-1, 1.48103976427480074590e-1,
      1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0,
      1.78482653991729133580e0, 2.96560571828504891230e-1,
      2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
      1.48753612908506148525e-2, 7.86869131145613259100e-4,
      1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)


@njit(cache=True, inline="always")
def _horner8(c0, c1, c2, c3, c4, c5, c6, c7, x):
    return ((((((c7 * x + c6) * x + c5) * x + c4) * x + c3) * x + c2) * x + c1) * x + c0


@njit(cache=True, inline="always")
def norm_ppf(p):
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = _horner8(_A[0], _A[1], _A[2], _A[3], _A[4], _A[5], _A[6], _A[7], r)
        den = _horner8(_B[0], _B[1], _B[2], _B[3], _B[4], _B[5], _B[6], _B[7], r)
        return q * num / den
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    r = np.sqrt(-np.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = _horner8(_C[0], _C[1], _C[2], _C[3], _C[4], _C[5], _C[6], _C[7], r)
        den = _horner8(_D[0], _D[1], _D[2], _D[3], _D[4], _D[5], _D[6], _D[7], r)
    else:
        r = r - 5.0
        num = _horner8(_E[0], _E[1], _E[2], _E[3], _E[4], _E[5], _E[6], _E[7], r)
        den = _horner8(_F[0], _F[1], _F[2], _F[3], _F[4], _F[5], _F[6], _F[7], r)
    val = num / den
    return -val if q < 0.0 else val


@njit(cache=True, inline="always")
def normal(key, counter):
    return norm_ppf(uniform(key, counter))


# ---------------------------------------------------------------------------
# vectorized numpy versions (bit-identical to the scalar ones)
# ---------------------------------------------------------------------------

def mix64_vec(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def path_keys(seed, paths):
    paths = np.asarray(paths, dtype=np.uint64)
    with np.errstate(over="ignore"):
        base = mix64_vec(np.uint64(seed) + _GOLDEN)
        return mix64_vec(base + paths * _MIX2)


def uniform_vec(keys, counter):
    with np.errstate(over="ignore"):
        u = mix64_vec(keys + np.uint64(counter) * _GOLDEN)
    return ((u >> np.uint64(11)).astype(np.float64) + 0.5) * _U53


def norm_ppf_vec(p):
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    out = np.empty_like(p)

    central = np.abs(q) <= 0.425
    if np.any(central):
        r = 0.180625 - q[central] * q[central]
        num = np.polynomial.polynomial.polyval(r, _A)
        den = np.polynomial.polynomial.polyval(r, _B)
        out[central] = q[central] * num / den

    tail = ~central
    if np.any(tail):
        qt = q[tail]
        r = np.where(qt < 0.0, p[tail], 1.0 - p[tail])
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        val = np.empty_like(r)
        if np.any(near):
            rn = r[near] - 1.6
            val[near] = (np.polynomial.polynomial.polyval(rn, _C)
                         / np.polynomial.polynomial.polyval(rn, _D))
        far = ~near
        if np.any(far):
            rf = r[far] - 5.0
            val[far] = (np.polynomial.polynomial.polyval(rf, _E)
                        / np.polynomial.polynomial.polyval(rf, _F))
        out[tail] = np.where(qt < 0.0, -val, val)
    return out


def normal_vec(keys, counter):
    return norm_ppf_vec(uniform_vec(keys, counter))
