"""Random variate generation for every stochastic representation.

Randomness comes from :class:`RngState` ``(seed, stream_id)`` pairs mapped to
independent PCG64 streams through ``numpy.random.SeedSequence``. Large
requests are split into fixed-size shards, shard ``i`` drawing from spawn key
``(stream_id, i)``, so the output never depends on the number of worker
threads.

Standard normals come from numpy's ziggurat sampler and gamma variates from
its Marsaglia-Tsang sampler; Beta variates are formed from two gammas.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .exceptions import NumericalError, ValidationError
from .model import DensityGenerator, MixingLaw, SkewEllipticalParams, radial_density

__all__ = [
    "RngState",
    "SHARD_SIZE",
    "VARIANTS",
    "resolve_threads",
    "sample_beta",
    "sample_conditioning",
    "sample_radial",
    "sample_representation",
    "sample_skew_uniform",
    "sample_smsn",
    "sample_unit_sphere",
]

VARIANTS = (
    "conditioning",
    "rep_a",
    "rep_b_paper",
    "rep_b_corrected",
    "rep_c_paper",
    "rep_c_corrected",
)
SHARD_SIZE = 1 << 16


@dataclass(frozen=True)
class RngState:
    """A reproducible random stream: identical pairs give identical draws."""

    seed: int
    stream_id: int = 0

    def generator(self, shard=None):
        key = (self.stream_id,) if shard is None else (self.stream_id, shard)
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=key)))


def resolve_threads(threads=None):
    if threads is None:
        env = os.environ.get("SKELL_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _as_state(rng):
    if isinstance(rng, RngState):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngState(int(rng))
    return rng  # a numpy Generator: used directly, no sharding


def _sharded(draw, count, rng, threads=None):
    """Run ``draw(generator, size)`` over deterministic shards and stack the rows."""
    count = int(count)
    if count < 0:
        raise ValidationError("number of draws must be >= 0")
    rng = _as_state(rng)
    if isinstance(rng, np.random.Generator):
        return draw(rng, count)
    sizes = [SHARD_SIZE] * (count // SHARD_SIZE)
    if count % SHARD_SIZE or not sizes:
        sizes.append(count % SHARD_SIZE)
    jobs = [(i, s) for i, s in enumerate(sizes)]

    def run(job):
        i, s = job
        return draw(rng.generator(shard=i), s)

    workers = min(resolve_threads(threads), len(jobs))
    if workers == 1:
        parts = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, jobs))
    return np.concatenate(parts, axis=0)


# ---------------------------------------------------------------------------
# primitive ingredients
# ---------------------------------------------------------------------------


def _sphere(gen, n, size):
    z = gen.standard_normal((size, n))
    norm = np.sqrt((z * z).sum(axis=1))
    bad = norm == 0.0
    while np.any(bad):
        z[bad] = gen.standard_normal((int(bad.sum()), n))
        norm[bad] = np.sqrt((z[bad] ** 2).sum(axis=1))
        bad = norm == 0.0
    return z / norm[:, None]


def sample_unit_sphere(n, rng, size=None):
    """Uniform draws on the unit sphere of R^n (rows of unit norm).

    Returns a single vector when ``size`` is None.
    """
    n = int(n)
    if n < 1:
        raise ValidationError("sphere dimension must be >= 1")
    gen = rng if isinstance(rng, np.random.Generator) else _as_state(rng).generator()
    if size is None:
        return _sphere(gen, n, 1)[0]
    return _sphere(gen, n, int(size))


def _beta(gen, a, b, size):
    if b == 0:
        return np.ones(size)
    x = gen.standard_gamma(a, size)
    y = gen.standard_gamma(b, size)
    return x / (x + y)


def sample_beta(a, b, rng, size):
    """Beta(a, b) variates as a gamma ratio; ``b = 0`` is the point mass at 1."""
    gen = rng if isinstance(rng, np.random.Generator) else _as_state(rng).generator()
    return _beta(gen, a, b, int(size))


def _chi(gen, dof, size):
    return np.sqrt(2.0 * gen.standard_gamma(dof / 2.0, size))


def _eta(gen, g, size):
    """Mixing scale eta for normal-mixture families (normal gives ones)."""
    if g.family == "normal":
        return None
    if g.family == "student_t":
        return g.nu / (2.0 * gen.standard_gamma(g.nu / 2.0, size))
    if g.family == "smsn":
        return g.mixing.sample(gen, size)
    raise ValidationError("not a normal-mixture family")


@lru_cache(maxsize=32)
def _inverse_cdf_table(g, n):
    """Monotone interpolant of the R0 quantile function for a custom generator."""
    h = lambda r: float(radial_density(g, n, r))  # noqa: E731
    # geometric grid out to where the tail mass is negligible
    edges = [0.0]
    r = 1e-6
    total = 0.0
    while True:
        m, err = integrate.quad(h, edges[-1], r, epsabs=1e-14, epsrel=1e-12, limit=200)
        edges.append(r)
        total += m
        if r > 1e6:
            raise NumericalError("radial law of the custom generator has too heavy a tail to tabulate")
        if len(edges) > 40 and m < 1e-12 * max(total, 1e-300) and total > 0.5:
            break
        r *= 1.25
    fine = []
    for a, b in zip(edges[:-1], edges[1:]):
        fine.extend(np.linspace(a, b, 9)[:-1].tolist())
    fine.append(edges[-1])
    fine = np.asarray(fine)
    cdf = np.zeros_like(fine)
    for i in range(1, fine.size):
        m, _ = integrate.quad(h, fine[i - 1], fine[i], epsabs=1e-15, epsrel=1e-12)
        cdf[i] = cdf[i - 1] + m
    if not cdf[-1] > 0:
        raise NumericalError("custom radial law has zero mass")
    if abs(cdf[-1] - 1.0) > 1e-6:
        raise NumericalError(f"custom radial law integrates to {cdf[-1]:.8g}, not 1")
    cdf /= cdf[-1]
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return PchipInterpolator(cdf[keep], fine[keep])


def _radial(gen, g, n, size):
    if g.family == "custom":
        return _inverse_cdf_table(g, n)(gen.random(size))
    chi = _chi(gen, n + 1, size)
    eta = _eta(gen, g, size)
    return chi if eta is None else np.sqrt(eta) * chi


def sample_radial(gen, n, rng, size=None):
    """Draw R0 for generator ``gen`` in the (n+1)-dimensional construction."""
    g_rng = rng if isinstance(rng, np.random.Generator) else _as_state(rng).generator()
    out = _radial(g_rng, gen, int(n), 1 if size is None else int(size))
    return float(out[0]) if size is None else out


# ---------------------------------------------------------------------------
# skew-elliptical samplers
# ---------------------------------------------------------------------------


def sample_conditioning(params: SkewEllipticalParams, gen: DensityGenerator, count, rng, threads=None):
    """Reference sampler: X = omega (delta |U0| + Delta U) + mu.

    ``(U0, U)`` is drawn from EC_{n+1}(0, diag(1, Psi), g) as R0 * L * S with S
    uniform on the unit sphere of R^{n+1} and L the Cholesky factor of
    diag(1, Psi).
    """
    n = params.n
    L = np.linalg.cholesky(params.Psi)
    wd = np.diag(params.omega) * params.delta
    wD = np.diag(params.omega) * np.diag(params.Delta)

    def draw(g_rng, size):
        r0 = _radial(g_rng, gen, n, size)
        s = _sphere(g_rng, n + 1, size)
        u0 = r0 * s[:, 0]
        u = r0[:, None] * (s[:, 1:] @ L.T)
        return params.mu + np.abs(u0)[:, None] * wd + u * wD

    return _sharded(draw, count, rng, threads)


def _rep_a(params, gen):
    n = params.n
    B = (params.omega @ params.Delta @ params.Psi_sqrt).T
    dw = params.delta_w

    def draw(g_rng, size):
        s = _sphere(g_rng, n + 1, size)
        r0 = _radial(g_rng, gen, n, size)
        m = np.abs(s[:, :1]) * dw + s[:, 1:] @ B
        return params.mu + r0[:, None] * m

    return draw


def _beta_b(n, reading):
    if reading == "paper":
        return 0.5 * (n - 1)
    return 0.5 * n


def _rep_b(params, gen, reading):
    n = params.n
    B = (params.omega @ params.Delta @ params.Psi_sqrt).T
    dw = params.delta_w
    b = _beta_b(n, reading)

    def draw(g_rng, size):
        r0 = _radial(g_rng, gen, n, size)
        d1 = np.sqrt(_beta(g_rng, 0.5, b, size))
        d2 = np.sqrt(1.0 - d1 * d1)
        abs_u1 = g_rng.random(size) if reading == "paper" else np.ones(size)
        un = _sphere(g_rng, n, size)
        m = (d1 * abs_u1)[:, None] * dw + d2[:, None] * (un @ B)
        return params.mu + r0[:, None] * m

    return draw


def _rep_c(params, gen, reading):
    n = params.n
    B = (params.omega @ params.Delta @ params.Psi_sqrt).T
    dw = params.delta_w
    b = _beta_b(n, reading)
    mixture = gen.family != "custom"

    def draw(g_rng, size):
        if reading == "corrected" and mixture:
            # R_i = sqrt(eta) chi_i with independent chi_1, chi_n and a shared eta
            r1 = _chi(g_rng, 1, size)
            rn = _chi(g_rng, n, size)
            eta = _eta(g_rng, gen, size)
            if eta is not None:
                se = np.sqrt(eta)
                r1, rn = se * r1, se * rn
        else:
            d1 = np.sqrt(_beta(g_rng, 0.5, b, size))
            r0 = _radial(g_rng, gen, n, size)
            r1 = r0 * d1
            rn = r0 * np.sqrt(1.0 - d1 * d1)
        abs_u1 = g_rng.random(size) if reading == "paper" else np.ones(size)
        un = _sphere(g_rng, n, size)
        return params.mu + (r1 * abs_u1)[:, None] * dw + rn[:, None] * (un @ B)

    return draw


def sample_representation(params, gen, variant, count, rng, threads=None):
    """Draw ``count`` rows from the chosen stochastic representation.

    ``variant`` is one of :data:`VARIANTS`. The ``*_paper`` variants use
    d1^2 ~ Beta(1/2, (n-1)/2) with |U^(1)| ~ Uniform[0, 1] exactly as printed
    (for n = 1 the Beta law degenerates to d1 = 1); the ``*_corrected``
    variants use d1^2 ~ Beta(1/2, n/2) with |U^(1)| = 1.
    """
    if variant == "conditioning":
        return sample_conditioning(params, gen, count, rng, threads)
    if variant == "rep_a":
        draw = _rep_a(params, gen)
    elif variant in ("rep_b_paper", "rep_b_corrected"):
        draw = _rep_b(params, gen, variant.rsplit("_", 1)[1])
    elif variant in ("rep_c_paper", "rep_c_corrected"):
        draw = _rep_c(params, gen, variant.rsplit("_", 1)[1])
    else:
        raise ValidationError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return _sharded(draw, count, rng, threads)


def sample_smsn(params, mixing: MixingLaw, count, rng, threads=None):
    """Scale mixture of skew-normals: rows mu + sqrt(eta) Z, Z ~ SN_n(0, Omega, alpha)."""
    n = params.n
    L = np.linalg.cholesky(params.Psi)
    wd = np.diag(params.omega) * params.delta
    wD = np.diag(params.omega) * np.diag(params.Delta)

    def draw(g_rng, size):
        z0 = g_rng.standard_normal(size)
        z = g_rng.standard_normal((size, n)) @ L.T
        sn = np.abs(z0)[:, None] * wd + z * wD
        eta = mixing.sample(g_rng, size)
        return params.mu + np.sqrt(eta)[:, None] * sn

    return _sharded(draw, count, rng, threads)


def sample_skew_uniform(delta, count, rng, u1_law="uniform", beta="paper", threads=None):
    """Draws of d1 delta |U^(1)| + d2 Delta U^(n) (the skew-uniform vector).

    ``u1_law`` selects |U^(1)| ~ Uniform[0, 1] (``"uniform"``) or |U^(1)| = 1
    (``"sphere"``); ``beta`` selects d1^2 ~ Beta(1/2, (n-1)/2) (``"paper"``)
    or Beta(1/2, n/2) (``"corrected"``).
    """
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    n = delta.size
    if np.any(np.abs(delta) >= 1):
        raise ValidationError("delta entries must lie in (-1, 1)")
    D = np.sqrt(1.0 - delta**2)
    b = _beta_b(n, beta)

    def draw(g_rng, size):
        d1 = np.sqrt(_beta(g_rng, 0.5, b, size))
        d2 = np.sqrt(1.0 - d1 * d1)
        a = g_rng.random(size) if u1_law == "uniform" else np.ones(size)
        un = _sphere(g_rng, n, size)
        return (d1 * a)[:, None] * delta + d2[:, None] * un * D

    return _sharded(draw, count, rng, threads)


def pearson_ii_logpdf(n, u):
    """Log density of one coordinate of a uniform point on the sphere in R^n (n >= 2)."""
    u = np.asarray(u, dtype=float)
    logc = math.lgamma(n / 2.0) - 0.5 * math.log(math.pi) - math.lgamma((n - 1) / 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(np.abs(u) < 1, logc + 0.5 * (n - 3) * np.log1p(-u * u), -np.inf)
