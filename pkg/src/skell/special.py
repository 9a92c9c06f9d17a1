"""Scalar special functions: Bessel J and K, 0F1, the sphere CF and tau.

The sphere characteristic function ``omega_n(n, s2)`` is E exp(i t'U) for U
uniform on the unit sphere of R^n, written as a function of s2 = |t|^2. Five
equivalent evaluation routes are provided so they can be checked against
each other.
"""

import math

import numpy as np
from scipy import integrate, special

from .exceptions import QuadratureError, RangeError, ValidationError

__all__ = [
    "HYP0F1_SERIES_BOUND",
    "OMEGA_METHODS",
    "TAU_MAX_ARG",
    "bessel_j",
    "bessel_k",
    "hyp0f1",
    "log_beta",
    "omega_n",
    "omega_n_vec",
    "omega_series",
    "tau",
]

OMEGA_METHODS = ("bessel", "interval_integral", "angular_integral", "series", "hyp0f1")

# For z < -HYP0F1_SERIES_BOUND the alternating series loses too many digits
# even in extended precision; the Bessel relation is used instead.
HYP0F1_SERIES_BOUND = 121.0
SERIES_MAX_TERMS = 500
TAU_MAX_ARG = 37.0
_QUAD_EPSABS = 1e-13


def log_beta(a, b):
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def bessel_j(nu, x):
    """Bessel function of the first kind J_nu(x) for x >= 0."""
    if x < 0:
        raise ValidationError(f"bessel_j requires x >= 0, got {x}")
    if x == 0:
        return 1.0 if nu == 0 else 0.0
    return float(special.jv(nu, x))


def bessel_k(nu, x):
    """Modified Bessel function of the second kind K_nu(x) for x > 0."""
    if not x > 0:
        raise ValidationError(f"bessel_k requires x > 0, got {x}")
    return float(special.kv(nu, x))


def hyp0f1(gamma, z):
    """Generalized hypergeometric series 0F1(;gamma;z).

    Summed term by term in extended precision until the next term falls
    below 1e-18 of the running sum. For ``z < -HYP0F1_SERIES_BOUND`` (heavy
    cancellation) or when the series has not settled after 500 terms the
    Bessel relations are used instead.
    """
    gamma = float(gamma)
    z = float(z)
    if gamma <= 0 and gamma == math.floor(gamma):
        raise ValidationError(f"0F1 undefined for gamma = {gamma}")
    if z == 0:
        return 1.0
    if z < -HYP0F1_SERIES_BOUND:
        return _hyp0f1_bessel(gamma, z)
    zz = np.longdouble(z)
    g = np.longdouble(gamma)
    term = np.longdouble(1)
    total = np.longdouble(1)
    for k in range(1, SERIES_MAX_TERMS + 1):
        term = term * zz / (k * (g + (k - 1)))
        total += term
        # terms shrink monotonically once k exceeds sqrt(|z|)
        if k * k > abs(z) and abs(term) <= 1e-18 * max(abs(total), np.longdouble(1e-300)):
            return float(total)
    return _hyp0f1_bessel(gamma, z)


def _hyp0f1_bessel(gamma, z):
    nu = gamma - 1.0
    if z < 0:
        x = 2.0 * math.sqrt(-z)
        return float(special.gamma(gamma) * (x / 2.0) ** (-nu) * special.jv(nu, x))
    x = 2.0 * math.sqrt(z)
    return float(special.gamma(gamma) * (x / 2.0) ** (-nu) * special.iv(nu, x))


def omega_series(n, s2):
    """Sphere CF from its explicit power series in |t|^2 (Gamma-ratio terms)."""
    s2 = np.longdouble(s2)
    half_n = np.longdouble(n) / 2
    # power / factorial part s^(2k)/(2k)!, Gamma-ratio part G(k+1/2)/G(n/2+k)
    power = np.longdouble(1)
    ratio = np.longdouble(1)  # normalised so that the k = 0 term is 1
    total = np.longdouble(1)
    for k in range(1, SERIES_MAX_TERMS + 1):
        power = -power * s2 / ((2 * k - 1) * (2 * k))
        ratio = ratio * (k - np.longdouble(0.5)) / (half_n + k - 1)
        term = power * ratio
        total += term
        if k * k > s2 and abs(term) <= 1e-18 * max(abs(total), np.longdouble(1e-300)):
            return float(total)
    return None


def _omega_bessel(n, s):
    nu = (n - 2) / 2.0
    return math.exp(math.lgamma(n / 2.0) + nu * math.log(2.0 / s)) * special.jv(nu, s)


def _omega_interval(n, s):
    # u = sin(theta) removes the (1 - u^2)^((n-3)/2) endpoint singularity
    logc = math.lgamma(n / 2.0) - math.lgamma((n - 1) / 2.0) - 0.5 * math.log(math.pi)

    def f(th):
        return math.cos(s * math.sin(th)) * math.cos(th) ** (n - 2)

    val, err = integrate.quad(f, 0.0, math.pi / 2, epsabs=_QUAD_EPSABS, epsrel=1e-13, limit=400)
    if err > 1e-10:
        raise QuadratureError("interval_integral route did not converge", err)
    return 2.0 * math.exp(logc) * val


def _omega_angular(n, s):
    # the imaginary part integrates to zero by the theta -> pi - theta symmetry
    def f(th):
        return math.cos(s * math.cos(th)) * math.sin(th) ** (n - 2)

    val, err = integrate.quad(f, 0.0, math.pi, epsabs=_QUAD_EPSABS, epsrel=1e-13, limit=400)
    if err > 1e-10:
        raise QuadratureError("angular_integral route did not converge", err)
    return val * math.exp(-log_beta((n - 1) / 2.0, 0.5))


def omega_n(n, t_norm_sq, method="bessel"):
    """Characteristic function of the uniform law on the unit sphere in R^n.

    Parameters
    ----------
    n : int
        Ambient dimension (n >= 1).
    t_norm_sq : float
        Squared norm |t|^2 of the argument.
    method : str
        One of ``OMEGA_METHODS``.
    """
    n = int(n)
    if n < 1:
        raise ValidationError(f"omega_n needs n >= 1, got {n}")
    if t_norm_sq < 0:
        raise ValidationError("omega_n needs |t|^2 >= 0")
    if method not in OMEGA_METHODS:
        raise ValidationError(f"unknown omega method {method!r}")
    if t_norm_sq == 0:
        return 1.0
    s = math.sqrt(t_norm_sq)
    if n == 1:
        # two-point sphere {-1, +1}
        return math.cos(s)
    if method == "bessel":
        return float(_omega_bessel(n, s))
    if method == "interval_integral":
        return _omega_interval(n, s)
    if method == "angular_integral":
        return _omega_angular(n, s)
    if method == "series":
        val = omega_series(n, t_norm_sq) if t_norm_sq <= HYP0F1_SERIES_BOUND * 4 else None
        return float(_omega_bessel(n, s)) if val is None else val
    return hyp0f1(n / 2.0, -t_norm_sq / 4.0)


def omega_n_vec(n, t_norm_sq):
    """Vectorised Bessel-route sphere CF for arrays of |t|^2."""
    s2 = np.asarray(t_norm_sq, dtype=float)
    s = np.sqrt(s2)
    if n == 1:
        return np.cos(s)
    nu = (n - 2) / 2.0
    out = np.ones_like(s)
    small = s < 1e-4
    big = ~small
    sb = s[big]
    out[big] = np.exp(math.lgamma(n / 2.0) + nu * np.log(2.0 / sb)) * special.jv(nu, sb)
    # two-term expansion of 0F1(n/2; -s^2/4)
    ss = s2[small]
    out[small] = 1.0 - ss / (2.0 * n) + ss * ss / (8.0 * n * (n + 2))
    return out


def tau(x):
    """tau(x) = sqrt(2/pi) * integral_0^x exp(u^2/2) du, an odd function.

    Evaluated by adaptive quadrature. Raises :class:`RangeError` for
    ``|x| > 37`` where the integrand leaves double range.
    """
    x = float(x)
    if abs(x) > TAU_MAX_ARG:
        raise RangeError(f"tau argument {x} beyond +/-{TAU_MAX_ARG}")
    if x == 0:
        return 0.0
    a = abs(x)
    # factor exp(a^2/2) out so the integrand is bounded by 1
    val, err = integrate.quad(
        lambda u: math.exp((u * u - a * a) / 2.0), 0.0, a, epsabs=0.0, epsrel=2e-14, limit=200
    )
    if err > 1e-12 * max(val, 1e-300):
        raise QuadratureError("tau quadrature did not converge", err)
    return math.copysign(math.sqrt(2.0 / math.pi) * val * math.exp(a * a / 2.0), x)
