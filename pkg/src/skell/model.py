"""Skew-elliptical parameter sets and density generators.

A skew-elliptical law SE_n(mu, Omega, alpha, g) is described by a
:class:`SkewEllipticalParams` record (location, dispersion, shape and every
derived re-parameterisation) together with a :class:`DensityGenerator`.

Generators follow the convention that the named families are already
normalised, i.e. ``c_k * g^(k)`` with ``c_k = 1`` is a proper density in R^k.
Custom generators are normalised on the fly through
:func:`normalizing_constant`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np
from scipy import integrate, special

from .exceptions import MomentNotFoundError, NumericalError, QuadratureError, ValidationError

__all__ = [
    "DensityGenerator",
    "MixingLaw",
    "RadialLaw",
    "SkewEllipticalParams",
    "chi_moment",
    "conditional_generator",
    "custom",
    "derive_params",
    "dump_model",
    "forward_map",
    "load_model",
    "normal",
    "normalizing_constant",
    "radial_density",
    "radial_moment",
    "reduce_generator",
    "smsn",
    "student_t",
]

_LOG_2PI = math.log(2.0 * math.pi)
UNDERFLOW_FLOOR = 1e-300
FAMILIES = ("normal", "student_t", "smsn", "custom")


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


def _sym_sqrt(S):
    w, V = np.linalg.eigh(S)
    return (V * np.sqrt(w)) @ V.T


def _require_pd(S, what):
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise ValidationError(f"{what} is not positive definite") from None


@dataclass(frozen=True, eq=False)
class SkewEllipticalParams:
    """Location ``mu``, dispersion ``Omega`` and shape ``alpha`` plus derivations.

    Use :func:`derive_params` to construct; the derived fields are filled in
    there and never recomputed.
    """

    mu: np.ndarray
    Omega: np.ndarray
    alpha: np.ndarray
    omega: np.ndarray
    Omega_bar: np.ndarray
    delta: np.ndarray
    Delta: np.ndarray
    Psi: np.ndarray
    lam: np.ndarray
    delta_w: np.ndarray
    chol_Omega: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.mu.size

    @cached_property
    def Psi_sqrt(self):
        """Unique symmetric positive definite square root of Psi."""
        return _sym_sqrt(self.Psi)

    @cached_property
    def Omega_sqrt(self):
        return _sym_sqrt(self.Omega)

    @cached_property
    def Xi(self):
        """omega Delta Psi Delta omega, which equals Omega - delta_w delta_w'."""
        wD = self.omega @ self.Delta
        return wD @ self.Psi @ wD.T

    @cached_property
    def log_det_Omega(self):
        return 2.0 * float(np.log(np.diag(self.chol_Omega)).sum())

    def mahalanobis(self, x):
        """q(x) = (x - mu)' Omega^{-1} (x - mu) for rows of ``x`` via a Cholesky solve."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = np.linalg.solve(self.chol_Omega, (x - self.mu).T)
        return (z * z).sum(axis=0)

    def to_dict(self):
        return {
            "n": self.n,
            "mu": self.mu.tolist(),
            "Omega": self.Omega.tolist(),
            "alpha": self.alpha.tolist(),
        }

    def derived_dict(self):
        out = self.to_dict()
        for name in ("Omega_bar", "delta", "Psi", "lam", "delta_w"):
            out[name] = getattr(self, name).tolist()
        out["omega"] = np.diag(self.omega).tolist()
        out["Delta"] = np.diag(self.Delta).tolist()
        return out


def derive_params(mu, Omega, alpha):
    """Build a :class:`SkewEllipticalParams` from ``(mu, Omega, alpha)``.

    ``delta = Omega_bar alpha / sqrt(1 + alpha' Omega_bar alpha)`` and
    ``Psi = Delta^{-1} (Omega_bar - delta delta') Delta^{-1}``.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float)).ravel()
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float)).ravel()
    Omega = np.atleast_2d(np.asarray(Omega, dtype=float))
    n = mu.size
    if n < 1 or alpha.size != n or Omega.shape != (n, n):
        raise ValidationError(
            f"shape mismatch: mu {mu.shape}, Omega {Omega.shape}, alpha {alpha.shape}"
        )
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(Omega)) and np.all(np.isfinite(alpha))):
        raise ValidationError("parameters must be finite")
    if not np.allclose(Omega, Omega.T, rtol=1e-12, atol=1e-14):
        raise ValidationError("Omega is not symmetric")
    Omega = 0.5 * (Omega + Omega.T)
    chol = _require_pd(Omega, "Omega")

    w = np.sqrt(np.diag(Omega))
    omega = np.diag(w)
    Omega_bar = Omega / np.outer(w, w)
    Ob_a = Omega_bar @ alpha
    delta = Ob_a / math.sqrt(1.0 + float(alpha @ Ob_a))
    if np.any(np.abs(delta) >= 1.0):
        raise ValidationError("derived delta leaves (-1, 1); (Omega, alpha) inadmissible")
    dd = np.sqrt(1.0 - delta**2)
    Delta = np.diag(dd)
    Psi = (Omega_bar - np.outer(delta, delta)) / np.outer(dd, dd)
    Psi = 0.5 * (Psi + Psi.T)
    _require_pd(Psi, "Psi (derived from Omega and alpha)")
    return SkewEllipticalParams(
        mu=mu,
        Omega=Omega,
        alpha=alpha,
        omega=omega,
        Omega_bar=Omega_bar,
        delta=delta,
        Delta=Delta,
        Psi=Psi,
        lam=delta / dd,
        delta_w=w * delta,
        chol_Omega=chol,
    )


def forward_map(Psi, delta):
    """Map ``(Psi, delta)`` to ``(Omega_bar, alpha)``."""
    Psi = np.atleast_2d(np.asarray(Psi, dtype=float))
    delta = np.atleast_1d(np.asarray(delta, dtype=float)).ravel()
    n = delta.size
    if Psi.shape != (n, n):
        raise ValidationError(f"shape mismatch: Psi {Psi.shape}, delta {delta.shape}")
    if np.any(np.abs(delta) >= 1.0):
        raise ValidationError("delta entries must lie in (-1, 1)")
    if not np.allclose(np.diag(Psi), 1.0, atol=1e-12) or not np.allclose(Psi, Psi.T, atol=1e-14):
        raise ValidationError("Psi must be a symmetric correlation matrix")
    _require_pd(Psi, "Psi")
    dd = np.sqrt(1.0 - delta**2)
    Delta = np.diag(dd)
    Omega_bar = Delta @ Psi @ Delta + np.outer(delta, delta)
    lam = delta / dd
    Pl = np.linalg.solve(Psi, lam)
    alpha = Pl / dd / math.sqrt(1.0 + float(lam @ Pl))
    return Omega_bar, alpha


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def chi_moment(dof, k):
    """E chi_dof^k = 2^{k/2} Gamma((dof + k)/2) / Gamma(dof/2)."""
    return math.exp(0.5 * k * math.log(2.0) + math.lgamma((dof + k) / 2.0) - math.lgamma(dof / 2.0))


@dataclass(frozen=True)
class MixingLaw:
    """Law of the positive scale variable eta in X = mu + sqrt(eta) Z.

    ``tag`` is ``inverse_gamma_from_t`` (eta = nu / chi^2_nu), ``discrete``
    (finite support) or ``custom`` (user sampler plus declared half-moments
    ``{k: E eta^{k/2}}``).
    """

    tag: str
    nu: float | None = None
    points: tuple = ()
    weights: tuple = ()
    sampler: Callable | None = field(default=None, compare=False)
    half_moments: Mapping[int, float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.tag == "inverse_gamma_from_t":
            if self.nu is None or not self.nu > 0:
                raise ValidationError("inverse_gamma_from_t mixing needs nu > 0")
        elif self.tag == "discrete":
            pts = np.asarray(self.points, dtype=float)
            wts = np.asarray(self.weights, dtype=float)
            if pts.size == 0 or pts.shape != wts.shape:
                raise ValidationError("discrete mixing needs matching points and weights")
            if np.any(pts <= 0) or np.any(wts < 0) or not math.isclose(wts.sum(), 1.0, abs_tol=1e-12):
                raise ValidationError("discrete mixing needs eta > 0 and weights summing to 1")
            object.__setattr__(self, "points", tuple(pts.tolist()))
            object.__setattr__(self, "weights", tuple(wts.tolist()))
        elif self.tag == "custom":
            if self.sampler is None:
                raise ValidationError("custom mixing needs a sampler")
        else:
            raise ValidationError(f"unknown mixing tag {self.tag!r}")

    def sample(self, rng, size):
        if self.tag == "inverse_gamma_from_t":
            return self.nu / (2.0 * rng.standard_gamma(self.nu / 2.0, size))
        if self.tag == "discrete":
            idx = rng.choice(len(self.points), size=size, p=np.asarray(self.weights))
            return np.asarray(self.points)[idx]
        eta = np.asarray(self.sampler(rng, size), dtype=float)
        if np.any(eta <= 0):
            raise ValidationError("custom mixing sampler produced eta <= 0")
        return eta

    def half_moment(self, k):
        """E eta^{k/2}, raising :class:`MomentNotFoundError` when it does not exist."""
        if k == 0:
            return 1.0
        if self.tag == "inverse_gamma_from_t":
            if self.nu <= k:
                raise MomentNotFoundError(f"moment of order {k} needs nu > k, but nu <= k (nu = {self.nu})")
            return math.exp(
                0.5 * k * math.log(self.nu / 2.0)
                + math.lgamma((self.nu - k) / 2.0)
                - math.lgamma(self.nu / 2.0)
            )
        if self.tag == "discrete":
            return float(np.dot(self.weights, np.asarray(self.points) ** (k / 2.0)))
        if not self.half_moments or k not in self.half_moments:
            raise MomentNotFoundError(f"custom mixing law declares no E eta^({k}/2)")
        return float(self.half_moments[k])

    def to_dict(self):
        if self.tag == "inverse_gamma_from_t":
            return {"tag": self.tag, "nu": self.nu}
        if self.tag == "discrete":
            return {"tag": self.tag, "points": list(self.points), "weights": list(self.weights)}
        raise ValidationError("custom mixing laws are not serialisable")


@dataclass(frozen=True)
class DensityGenerator:
    """A density-generator family g^(k) usable in every dimension k.

    Build with :func:`normal`, :func:`student_t`, :func:`smsn` or
    :func:`custom` rather than directly.
    """

    family: str
    nu: float | None = None
    mixing: MixingLaw | None = None
    func: Callable | None = None
    base_dim: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown generator family {self.family!r}")
        if self.family == "student_t" and (self.nu is None or not self.nu > 0):
            raise ValidationError("student_t generator needs nu > 0")
        if self.family == "smsn" and self.mixing is None:
            raise ValidationError("smsn generator needs a mixing law")
        if self.family == "custom" and (self.func is None or not self.base_dim or self.base_dim < 1):
            raise ValidationError("custom generator needs func and base_dim >= 1")

    @property
    def is_named(self):
        return self.family != "custom"

    @property
    def t_equivalent_nu(self):
        """nu if the family is a Student-t (directly or through its mixing law)."""
        if self.family == "student_t":
            return self.nu
        if self.family == "smsn" and self.mixing.tag == "inverse_gamma_from_t":
            return self.mixing.nu
        return None

    def log_g(self, k, u):
        """log g^(k)(u), vectorised over ``u``."""
        u = np.asarray(u, dtype=float)
        if self.family == "normal":
            return -0.5 * k * _LOG_2PI - 0.5 * u
        nu = self.t_equivalent_nu
        if nu is not None:
            return (
                math.lgamma((nu + k) / 2.0)
                - math.lgamma(nu / 2.0)
                - 0.5 * k * math.log(nu * math.pi)
                - 0.5 * (nu + k) * np.log1p(u / nu)
            )
        if self.family == "smsn":
            if self.mixing.tag != "discrete":
                raise NumericalError("generator of a custom mixing law is not evaluable")
            eta = np.asarray(self.mixing.points)
            logw = np.log(np.asarray(self.mixing.weights))
            terms = logw - 0.5 * k * (_LOG_2PI + np.log(eta)) - u[..., None] / (2.0 * eta)
            return special.logsumexp(terms, axis=-1)
        with np.errstate(divide="ignore"):
            return np.log(self.g(k, u))

    def g(self, k, u):
        """g^(k)(u); custom families are evaluated directly with a 1e-300 floor."""
        if self.family != "custom":
            return np.exp(self.log_g(k, u))
        u = np.asarray(u, dtype=float)
        if k == self.base_dim:
            val = np.vectorize(lambda x: float(self.func(x)), otypes=[float])(u)
        elif k < self.base_dim:
            val = np.vectorize(lambda x: reduce_generator(self, k, x), otypes=[float])(u)
        else:
            raise ValidationError(f"custom generator defined up to dimension {self.base_dim}, not {k}")
        if np.any(val < 0):
            raise ValidationError("density generator returned a negative value")
        return np.where(val < UNDERFLOW_FLOOR, 0.0, val)

    def to_dict(self):
        if self.family == "normal":
            return {"family": "normal"}
        if self.family == "student_t":
            return {"family": "student_t", "nu": self.nu}
        if self.family == "smsn":
            return {"family": "smsn", "mixing": self.mixing.to_dict()}
        raise ValidationError("custom generators are not serialisable")


def normal():
    return DensityGenerator("normal")


def student_t(nu):
    return DensityGenerator("student_t", nu=float(nu))


def smsn(mixing):
    return DensityGenerator("smsn", mixing=mixing)


def custom(func, base_dim):
    """Generator given by ``func(u) = g^(base_dim)(u)``; lower dimensions by reduction."""
    return DensityGenerator("custom", func=func, base_dim=int(base_dim))


# ---------------------------------------------------------------------------
# quadrature on the half line
# ---------------------------------------------------------------------------


def _halfline(f, power=0.0, epsabs=1e-12, epsrel=1e-12, what="integral"):
    """Integral over (0, inf) of r**power * f(r), power > -1.

    The algebraic factor on (0, 1) is handled by a weighted rule; the tail
    uses QUADPACK's infinite-range transform.
    """
    if power != 0.0:
        head, e1 = integrate.quad(
            f, 0.0, 1.0, weight="alg", wvar=(power, 0.0), epsabs=epsabs, epsrel=epsrel, limit=200
        )
    else:
        head, e1 = integrate.quad(f, 0.0, 1.0, epsabs=epsabs, epsrel=epsrel, limit=200)
    tail, e2 = integrate.quad(
        lambda r: r**power * f(r), 1.0, np.inf, epsabs=epsabs, epsrel=epsrel, limit=400
    )
    total = head + tail
    err = e1 + e2
    if not np.isfinite(total) or err > max(1e3 * epsabs, 1e-6 * abs(total)):
        raise QuadratureError(f"{what} did not converge", err)
    return total


def reduce_generator(gen, k, u, method="auto"):
    """g^(k)(u) obtained from a higher-dimensional generator by marginalisation.

    Named families have closed forms (the family is preserved). With
    ``method="quadrature"`` (always for custom families) the value is

        pi^{j/2}/Gamma(j/2) * int_0^inf r^{j/2-1} g^(k+j)(r + u) dr,

    with ``j = 1`` for named families and ``j = base_dim - k`` for custom ones.
    """
    k = int(k)
    if k < 1:
        raise ValidationError("dimension must be >= 1")
    if gen.family == "custom":
        if k >= gen.base_dim:
            raise ValidationError(f"reduction needs k < base_dim = {gen.base_dim}")
        j = gen.base_dim - k
        upper = lambda r: float(gen.func(r + u))  # noqa: E731
    else:
        if method == "auto":
            return float(gen.g(k, u))
        j = 1
        upper = lambda r: float(gen.g(k + 1, r + u))  # noqa: E731
    val = _halfline(upper, power=0.5 * j - 1.0, epsabs=1e-14, what="generator reduction")
    return math.exp(0.5 * j * math.log(math.pi) - math.lgamma(0.5 * j)) * val


def conditional_generator(gen, n, q):
    """The one-dimensional conditional generator u -> g^(n+1)(u + q) / g^(n)(q)."""
    if gen.is_named:
        log_den = float(gen.log_g(n, q))
        if not np.isfinite(log_den):
            raise NumericalError(f"g^({n})(q) underflows at q = {q}")
        return lambda u: np.exp(gen.log_g(n + 1, np.asarray(u, dtype=float) + q) - log_den)
    den = float(gen.g(n, q))
    if den <= 0.0:
        raise NumericalError(f"g^({n})(q) underflows at q = {q}")
    return lambda u: gen.g(n + 1, np.asarray(u, dtype=float) + q) / den


def normalizing_constant(gen, k, method="auto"):
    """c_k = Gamma(k/2) / (pi^{k/2} int_0^inf u^{k/2-1} g^(k)(u) du)."""
    k = int(k)
    if gen.is_named and method == "auto":
        return 1.0
    integral = _halfline(lambda u: float(gen.g(k, u)), power=0.5 * k - 1.0, what="normalizing integral")
    if not integral > 0:
        raise NumericalError("generator integrates to zero")
    return math.exp(math.lgamma(0.5 * k) - 0.5 * k * math.log(math.pi)) / integral


def _log_sphere_area(m):
    """log of 2 pi^{m/2} / Gamma(m/2), the surface area of S^{m-1}."""
    return math.log(2.0) + 0.5 * m * math.log(math.pi) - math.lgamma(0.5 * m)


def radial_density(gen, n, r):
    """Density of R0 in the (n+1)-dimensional construction, vectorised over ``r``."""
    r = np.asarray(r, dtype=float)
    c = normalizing_constant(gen, n + 1) if gen.family == "custom" else 1.0
    with np.errstate(divide="ignore"):
        logr = np.log(np.where(r > 0, r, 1.0))
    if gen.is_named:
        logh = _log_sphere_area(n + 1) + n * logr + gen.log_g(n + 1, r * r)
        out = np.exp(logh)
    else:
        out = c * np.exp(_log_sphere_area(n + 1) + n * logr) * gen.g(n + 1, r * r)
    return np.where(r > 0, out, 0.0)


def radial_moment(gen, n, k, method="auto"):
    """E R0^k for the (n+1)-dimensional radial variable.

    Raises :class:`MomentNotFoundError` when the moment is infinite (for
    Student-t: ``nu <= k``).
    """
    k = int(k)
    if k == 0:
        return 1.0
    nu = gen.t_equivalent_nu
    if nu is not None and nu <= k:
        raise MomentNotFoundError(f"E R0^{k} does not exist: nu <= k (nu = {nu}, k = {k})")
    if method == "auto" and gen.is_named:
        base = chi_moment(n + 1, k)
        if gen.family == "normal":
            return base
        if gen.family == "student_t":
            return base * math.exp(
                0.5 * k * math.log(nu / 2.0) + math.lgamma((nu - k) / 2.0) - math.lgamma(nu / 2.0)
            )
        return base * gen.mixing.half_moment(k)
    return _halfline(
        lambda r: float(radial_density(gen, n, r)), power=float(k), epsabs=1e-13, what="radial moment"
    )


@dataclass(frozen=True)
class RadialLaw:
    """Law of R0 for generator ``generator`` in the (dim+1)-dimensional construction."""

    generator: DensityGenerator
    dim: int

    def pdf(self, r):
        return radial_density(self.generator, self.dim, r)

    def moment(self, k):
        return radial_moment(self.generator, self.dim, k)


# ---------------------------------------------------------------------------
# JSON model documents
# ---------------------------------------------------------------------------


def load_model(doc):
    """Parse a model document into ``(params, generator)``.

    Schema: ``{"n", "mu", "Omega" (row-major nested list), "alpha",
    "family": "normal"|"student_t"|"smsn", "nu"?, "mixing"?}``.
    """
    try:
        n = int(doc["n"])
        mu = doc["mu"]
        Omega = doc["Omega"]
        alpha = doc["alpha"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"model document missing or malformed field: {exc}") from None
    params = derive_params(mu, Omega, alpha)
    if params.n != n:
        raise ValidationError(f"n = {n} does not match the length of mu ({params.n})")
    family = doc.get("family", "normal")
    if family == "normal":
        gen = normal()
    elif family == "student_t":
        if doc.get("nu") is None:
            raise ValidationError("student_t family needs nu")
        gen = student_t(doc["nu"])
    elif family == "smsn":
        mix = doc.get("mixing")
        if mix is None:
            if doc.get("nu") is None:
                raise ValidationError("smsn family needs nu or a mixing object")
            mixing = MixingLaw("inverse_gamma_from_t", nu=float(doc["nu"]))
        else:
            mixing = MixingLaw(
                mix.get("tag", ""),
                nu=mix.get("nu"),
                points=tuple(mix.get("points", ())),
                weights=tuple(mix.get("weights", ())),
            )
        gen = smsn(mixing)
    else:
        raise ValidationError(f"unknown family {family!r}")
    return params, gen


def dump_model(params, gen):
    doc = params.to_dict()
    doc.update(gen.to_dict())
    return doc
