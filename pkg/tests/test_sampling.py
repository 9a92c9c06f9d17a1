import math

import numpy as np
import pytest
from scipy import stats

from conftest import model
from skell.exceptions import ValidationError
from skell.model import MixingLaw, custom, normal, student_t
from skell.sampling import (
    SHARD_SIZE,
    VARIANTS,
    RngState,
    pearson_ii_logpdf,
    resolve_threads,
    sample_beta,
    sample_conditioning,
    sample_radial,
    sample_representation,
    sample_skew_uniform,
    sample_smsn,
    sample_unit_sphere,
)
from skell.verification import ks_test, mc_moment_set


def zmax(a, b):
    """max |z| over M1..M4 blocks between two sample matrices."""
    ea, eb = mc_moment_set(a), mc_moment_set(b)
    worst = 0.0
    for name in ("M1", "M2", "M3", "M4"):
        d = getattr(ea.estimate, name) - getattr(eb.estimate, name)
        s = np.hypot(getattr(ea.se, name), getattr(eb.se, name))
        worst = max(worst, float(np.max(np.abs(d) / s)))
    return worst


def test_sphere_n1_is_two_point():
    x = sample_unit_sphere(1, RngState(1), 100_000)
    assert set(np.unique(x)) == {-1.0, 1.0}
    assert abs(x.mean()) < 4 / math.sqrt(x.size)


def test_sphere_norm_and_beta_coordinate():
    x = sample_unit_sphere(4, RngState(2), 100_000)
    np.testing.assert_allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-15)
    assert ks_test(x[:, 0] ** 2, stats.beta(0.5, 1.5).cdf)["passed"]


def test_sphere_mean():
    n = 3
    x = sample_unit_sphere(n, RngState(3), 10**6)
    assert np.linalg.norm(x.mean(axis=0)) < 4 / 1000 * math.sqrt(n)


def test_single_sphere_point():
    u = sample_unit_sphere(5, np.random.default_rng(0))
    assert u.shape == (5,) and abs(np.linalg.norm(u) - 1) < 1e-15


@pytest.mark.parametrize("gen,n,k,target", [
    (normal(), 1, 1, math.sqrt(math.pi / 2)),
    (normal(), 2, 2, 3.0),
    (student_t(6), 2, 2, 4.5),
])
def test_radial_moments_by_simulation(gen, n, k, target):
    r = sample_radial(gen, n, RngState(4), 400_000) ** k
    assert abs(r.mean() - target) < 4 * r.std() / math.sqrt(r.size)


def test_custom_radial_by_inverse_cdf():
    gen = custom(lambda u: (2 * math.pi) ** -1.5 * math.exp(-u / 2), 3)
    r = sample_radial(gen, 2, RngState(5), 200_000)
    assert ks_test(r, stats.chi(3).cdf)["passed"]


def test_beta_split_of_sphere():
    n = 4
    s = sample_unit_sphere(n + 1, RngState(6), 100_000)
    assert ks_test(s[:, 0] ** 2, stats.beta(0.5, n / 2).cdf)["passed"]
    b = sample_beta(0.5, n / 2, RngState(7), 100_000)
    assert ks_test(b, stats.beta(0.5, n / 2).cdf)["passed"]


@pytest.mark.parametrize("n", [3, 5])
def test_pearson_ii_marginal(n):
    x = sample_unit_sphere(n, RngState(8), 100_000)[:, 0]
    grid = np.linspace(-1, 1, 4001)
    pdf = np.exp(pearson_ii_logpdf(n, grid))
    cdf_vals = np.concatenate([[0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(grid))])
    cdf_vals /= cdf_vals[-1]
    assert ks_test(x, lambda v: np.interp(v, grid, cdf_vals))["passed"]


def test_conditioning_symmetric_is_normal():
    p = model(2)
    from skell.model import derive_params
    q = derive_params(p.mu, p.Omega, [0.0, 0.0])
    x = sample_conditioning(q, normal(), 100_000, RngState(9))
    for i in range(2):
        cdf = stats.norm(q.mu[i], math.sqrt(q.Omega[i, i])).cdf
        assert ks_test(x[:, i], cdf)["passed"]


def test_conditioning_scalar_mean():
    from skell.model import derive_params
    p = derive_params([0.0], [[1.0]], [1.0])
    x = sample_conditioning(p, normal(), 10**6, RngState(10))[:, 0]
    target = math.sqrt(2 / math.pi) / math.sqrt(2)
    assert abs(x.mean() - target) < 4 * x.std() / 1000


@pytest.mark.parametrize("alpha", [3.0, -3.0])
def test_skewness_sign(alpha):
    from skell.model import derive_params
    p = derive_params([0.0], [[1.0]], [alpha])
    x = sample_conditioning(p, normal(), 100_000, RngState(11))[:, 0]
    assert np.sign(stats.skew(x)) == np.sign(alpha)


def test_determinism_and_thread_independence():
    p = model(3)
    a = sample_representation(p, student_t(5), "rep_b_corrected", 3 * SHARD_SIZE + 17, RngState(12), threads=1)
    b = sample_representation(p, student_t(5), "rep_b_corrected", 3 * SHARD_SIZE + 17, RngState(12), threads=4)
    assert a.tobytes() == b.tobytes()
    c = sample_representation(p, student_t(5), "rep_b_corrected", 100, RngState(12, stream_id=1))
    assert not np.array_equal(a[:100], c)


def test_resolve_threads(monkeypatch):
    monkeypatch.setenv("SKELL_THREADS", "3")
    assert resolve_threads() == 3
    assert resolve_threads(2) == 2
    monkeypatch.delenv("SKELL_THREADS")
    assert resolve_threads() >= 1


def test_integer_seed_and_generator_inputs():
    p = model(1)
    a = sample_conditioning(p, normal(), 10, 5)
    b = sample_conditioning(p, normal(), 10, RngState(5))
    assert a.tobytes() == b.tobytes()
    c = sample_conditioning(p, normal(), 10, np.random.default_rng(0))
    assert c.shape == (10, 1)


def test_unknown_variant():
    with pytest.raises(ValidationError):
        sample_representation(model(2), normal(), "rep_z", 10, RngState(0))
    with pytest.raises(ValidationError):
        sample_conditioning(model(2), normal(), -1, RngState(0))


@pytest.mark.parametrize("variant", ["rep_a", "rep_b_corrected", "rep_c_corrected"])
def test_variant_matches_conditioning_moments(variant):
    p = model(2)
    ref = sample_conditioning(p, normal(), 400_000, RngState(20, 0))
    x = sample_representation(p, normal(), variant, 400_000, RngState(20, 1))
    assert zmax(x, ref) < 4.5
    for i in range(2):
        assert stats.ks_2samp(x[:, i], ref[:, i]).pvalue > 0.01


def test_rep_c_radial_decomposition():
    # R1 = R0 d1 and Rn = R0 sqrt(1 - d1^2) give R1^2 + Rn^2 = R0^2 in law
    n = 2
    gen = student_t(7)
    r0 = sample_radial(gen, n, RngState(21), 400_000)
    d1 = np.sqrt(sample_beta(0.5, n / 2, RngState(22), 400_000))
    r1, rn = r0 * d1, r0 * np.sqrt(1 - d1 * d1)
    np.testing.assert_allclose(r1**2 + rn**2, r0**2, rtol=1e-12)
    ind = np.sqrt(stats.chi2.rvs(1, size=400_000, random_state=1) + stats.chi2.rvs(n, size=400_000, random_state=2))
    eta = 7 / stats.chi2.rvs(7, size=400_000, random_state=3)
    s = (ind**2) * eta
    z = abs(s.mean() - (r0**2).mean()) / math.hypot(s.std(), (r0**2).std()) * math.sqrt(400_000)
    assert z < 4


def test_paper_variants_are_drawn():
    p = model(2)
    for v in VARIANTS:
        x = sample_representation(p, normal(), v, 1000, RngState(23))
        assert x.shape == (1000, 2) and np.all(np.isfinite(x))


def test_n1_paper_variant_degenerate_beta():
    x = sample_representation(model(1), normal(), "rep_b_paper", 1000, RngState(24))
    assert np.all(np.isfinite(x))


def test_smsn_degenerate_mixing_is_skew_normal():
    p = model(2)
    mix = MixingLaw("discrete", points=(1.0,), weights=(1.0,))
    a = sample_smsn(p, mix, 400_000, RngState(25))
    b = sample_conditioning(p, normal(), 400_000, RngState(26))
    assert zmax(a, b) < 4.5


def test_smsn_inverse_gamma_second_moments():
    from skell.moments import se_moments

    p = model(2)
    x = sample_smsn(p, MixingLaw("inverse_gamma_from_t", nu=5.0), 10**6, RngState(27))
    est = mc_moment_set(x, order=2)
    M2 = se_moments(p, student_t(5), order=2).M2
    assert np.all(np.abs(est.estimate.M2 - M2) <= 4 * est.se.M2)


def test_skew_uniform_shapes():
    x = sample_skew_uniform([0.3, -0.2], 1000, RngState(28))
    assert x.shape == (1000, 2)
    with pytest.raises(ValidationError):
        sample_skew_uniform([1.0, 0.0], 10, RngState(0))
    y = sample_skew_uniform([0.0, 0.0], 1000, RngState(28), u1_law="sphere", beta="corrected")
    assert np.all(np.linalg.norm(y, axis=1) <= 1 + 1e-12)
