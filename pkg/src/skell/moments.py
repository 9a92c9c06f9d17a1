"""Moments M1-M4 of skew-elliptical vectors and of quadratic forms in them.

Conventions: ``M3[i*n + k, j] = E Y_i Y_j Y_k`` (that is E vec(YY') Y') and
``M4[i*n + k, j*n + l] = E Y_i Y_j Y_k Y_l`` (E vec(YY') vec(YY')'). The
general law is written ``Y = R_y M + mu`` and every moment of order k carries
the radial ratio E R_y^k / E R_x^k, where R_x ~ chi_{n+1} is the normal-case
radial variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .exceptions import MomentNotFoundError, NumericalError, ValidationError
from .model import DensityGenerator, SkewEllipticalParams, chi_moment, normal, radial_moment
from .tensor import b3_terms, kron, kron_chain, moment_tensors

__all__ = [
    "MAX_TENSOR_DIM",
    "MomentSet",
    "available_order",
    "b3_ablation",
    "identity_suite",
    "qform_mean",
    "qform_second",
    "radial_ratios",
    "se_moments",
    "sn_moments",
]

MAX_TENSOR_DIM = 32
_C = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class MomentSet:
    """Raw moments up to order four; higher blocks are None when they do not exist."""

    M1: np.ndarray
    M2: np.ndarray | None
    M3: np.ndarray | None
    M4: np.ndarray | None
    ratios: np.ndarray

    @property
    def order(self):
        return sum(m is not None for m in (self.M1, self.M2, self.M3, self.M4))

    @property
    def mean(self):
        return self.M1

    @property
    def cov(self):
        if self.M2 is None:
            raise MomentNotFoundError("second moment does not exist")
        return self.M2 - np.outer(self.M1, self.M1)

    def blocks(self):
        """``{"M1": ..., ...}`` for the blocks that exist."""
        out = {}
        for name in ("M1", "M2", "M3", "M4"):
            v = getattr(self, name)
            if v is not None:
                out[name] = v
        return out

    def to_dict(self):
        d = {k: np.asarray(v).tolist() for k, v in self.blocks().items()}
        d["ratios"] = np.asarray(self.ratios).tolist()
        return d


def available_order(gen: DensityGenerator, n, kmax=4):
    """Largest k <= kmax for which E R_y^k is finite."""
    for k in range(1, kmax + 1):
        try:
            radial_moment(gen, n, k)
        except MomentNotFoundError:
            return k - 1
    return kmax


def radial_ratios(gen: DensityGenerator, n, kmax=4):
    """E R_y^k / E R_x^k for k = 1..kmax with R_x ~ chi_{n+1}.

    Raises :class:`MomentNotFoundError` naming the first k that does not exist.
    """
    if gen.family == "normal":
        return np.ones(kmax)
    return np.array([radial_moment(gen, n, k) / chi_moment(n + 1, k) for k in range(1, kmax + 1)])


def _check_dim(n):
    if n > MAX_TENSOR_DIM:
        raise ValidationError(f"moment tensors are limited to n <= {MAX_TENSOR_DIM}, got {n}")


def se_moments(params: SkewEllipticalParams, gen: DensityGenerator, order=4, partial=False):
    """Moments of SE_n(mu, Omega, alpha, g) up to ``order``.

    With ``partial=True`` the set is truncated at the largest existing order
    instead of raising :class:`MomentNotFoundError`.
    """
    n = params.n
    _check_dim(n)
    if not 1 <= order <= 4:
        raise ValidationError("order must be between 1 and 4")
    have = available_order(gen, n, order)
    if have < order:
        if not partial or have == 0:
            raise MomentNotFoundError(f"moment of order {have + 1} does not exist for this generator")
        order = have
    r = radial_ratios(gen, n, order)
    mu, dw, Om = params.mu, params.delta_w, params.Omega
    m, mr = mu[:, None], mu[None, :]
    M1 = mu + _C * r[0] * dw
    M2 = M3 = M4 = None
    if order >= 2:
        M2 = np.outer(mu, mu) + _C * r[0] * (np.outer(mu, dw) + np.outer(dw, mu)) + r[1] * Om
    if order >= 3:
        T = moment_tensors(mu, dw, Om)
        M3 = kron_chain(m, mr, m) + _C * r[0] * T.A1 + r[1] * T.A2 + _C * r[2] * T.A3
        if order >= 4:
            M4 = (
                kron_chain(m, mr, m, mr)
                + _C * r[0] * T.B1
                + r[1] * T.B2
                + _C * r[2] * T.B3
                + r[3] * T.B4
            )
    return MomentSet(M1, M2, M3, M4, r)


def sn_moments(params: SkewEllipticalParams):
    """Skew-normal moments for the centred case mu = 0."""
    if np.any(params.mu != 0):
        raise ValidationError("sn_moments is for mu = 0; use se_moments for a general location")
    return se_moments(params, normal())


def b3_ablation(params, gen, M4_mc, se_mc):
    """Max |z| of the analytic M4 against an MC estimate, with each B3 summand dropped.

    Returns ``{"full": z_full, label: z_without_label, ...}``; a typo in one
    summand shows up as the single label whose removal fixes the fit.
    """
    ms = se_moments(params, gen)
    terms = b3_terms(params.mu, params.delta_w, params.Omega)
    scale = _C * ms.ratios[2]
    se = np.where(np.asarray(se_mc) > 0, se_mc, np.inf)

    def zmax(M4):
        return float(np.max(np.abs(M4 - M4_mc) / se))

    out = {"full": zmax(ms.M4)}
    for label, term in terms.items():
        out[label] = zmax(ms.M4 - scale * term)
    return out


def _sym(A, what):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValidationError(f"{what} must be square")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, float(np.abs(A).max()))):
        raise ValidationError(f"{what} must be symmetric")
    return A


def qform_mean(params: SkewEllipticalParams, gen: DensityGenerator, A):
    """E(Y'AY), computed as tr(A M2) and by the expanded formula; both must agree."""
    A = _sym(A, "A")
    if A.shape[0] != params.n:
        raise ValidationError("A does not match the model dimension")
    ms = se_moments(params, gen, order=2)
    trace_form = float(np.trace(A @ ms.M2))
    r = ms.ratios
    mu, dw = params.mu, params.delta_w
    expanded = float(mu @ A @ mu + 2.0 * _C * r[0] * (mu @ A @ dw) + r[1] * np.trace(A @ params.Omega))
    scale = max(1.0, abs(trace_form), float(np.abs(A).sum() * np.abs(ms.M2).max()))
    if abs(trace_form - expanded) > 1e-12 * scale:
        raise NumericalError(f"trace and expanded forms disagree: {trace_form!r} vs {expanded!r}")
    return trace_form


def qform_second(params: SkewEllipticalParams, gen: DensityGenerator, A, B=None):
    """Second moment and variance of Y'AY and Cov(Y'AY, Y'BY) from M2 and M4."""
    A = _sym(A, "A")
    B = A if B is None else _sym(B, "B")
    if A.shape[0] != params.n or B.shape != A.shape:
        raise ValidationError("A and B must match the model dimension")
    ms = se_moments(params, gen, order=4)
    second = float(np.trace(kron(A, A) @ ms.M4))
    ta, tb = float(np.trace(A @ ms.M2)), float(np.trace(B @ ms.M2))
    return {
        "mean": ta,
        "second_moment": second,
        "var_A": second - ta * ta,
        "cov_AB": float(np.trace(kron(A, B) @ ms.M4)) - ta * tb,
    }


def identity_suite():
    """Normal-family identities linking U0 moments to the conditional generator.

    For the normal family phi(s) = exp(-s/2) does not depend on U0, so
    phi'(0) = -1/2 and phi''(0) = 1/4; the expectations over the
    half-normal |U0| are evaluated by quadrature. Each entry holds the
    numerical value, the closed-form target and the ratio-display value
    (ratios are all 1 here).
    """
    half = lambda u: 2.0 * math.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)  # noqa: E731

    def E(f):
        v, _ = integrate.quad(lambda u: f(u) * half(u), 0.0, np.inf, epsabs=1e-14, epsrel=1e-13)
        return v

    # derivatives of phi(s) = exp(-s/2) at 0, taken analytically
    d1 = lambda u: -0.5  # noqa: E731
    d2 = lambda u: 0.25  # noqa: E731
    r = radial_ratios(normal(), 1)
    abs1 = E(lambda u: u)
    abs3 = E(lambda u: u**3)
    e_d1 = E(d1)
    e_d1u = E(lambda u: d1(u) * u)
    e_d2 = E(d2)
    return {
        "E|U0|": (abs1, _C, _C * r[0]),
        "E phi'(0)": (e_d1, -0.5, -0.5 * r[1]),
        "E phi'(0)|U0|": (e_d1u, -math.sqrt(1.0 / (2.0 * math.pi)), -math.sqrt(1.0 / (2.0 * math.pi)) * r[2]),
        "E phi''(0)": (e_d2, 0.25, 0.25 * r[3]),
        "E|U0|^3 + 4 E phi'(0)|U0|": (abs3 + 4.0 * e_d1u, 0.0, 0.0),
    }
