import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import model
from oracles import sn_exact_moments
from skell.exceptions import MomentNotFoundError, ValidationError
from skell.model import derive_params, normal, student_t
from skell.moments import (
    MAX_TENSOR_DIM,
    available_order,
    b3_ablation,
    identity_suite,
    qform_mean,
    qform_second,
    radial_ratios,
    se_moments,
    sn_moments,
)
from skell.sampling import RngState, sample_conditioning
from skell.verification import mc_moment_set


def sym_matrix(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    return 0.5 * (A + A.T)


def test_normal_ratios_are_one():
    np.testing.assert_array_equal(radial_ratios(normal(), 3), np.ones(4))


def test_t5_second_ratio():
    # E R_y^2 / E chi^2 = nu / (nu - 2)
    r = radial_ratios(student_t(5), 2)
    assert r[1] == pytest.approx(5 / 3, rel=1e-10)


def test_t_ratio_order_limit():
    assert available_order(student_t(3), 2) == 2
    with pytest.raises(MomentNotFoundError):
        radial_ratios(student_t(3), 2)


def test_sn_second_moment_is_omega():
    p = model(3, centred=True)
    np.testing.assert_allclose(sn_moments(p).M2, p.Omega, atol=1e-14)


def test_sn_moments_rejects_location():
    with pytest.raises(ValidationError):
        sn_moments(model(2))


def test_normal_moments_match_exact_expansion(params_n):
    p = params_n
    ms = se_moments(p, normal())
    m1, m2, M3, M4 = sn_exact_moments(p.mu, p.delta_w, p.Omega)
    np.testing.assert_allclose(ms.M1, m1, atol=1e-13)
    np.testing.assert_allclose(ms.M2, m2, atol=1e-13)
    np.testing.assert_allclose(ms.M3, M3, atol=1e-12)
    np.testing.assert_allclose(ms.M4, M4, atol=1e-11)


def test_symmetric_t_second_moment():
    p = derive_params([0.0, 0.0], [[2.0, 0.6], [0.6, 1.0]], [0.0, 0.0])
    ms = se_moments(p, student_t(5))
    np.testing.assert_allclose(ms.M2, 5 / 3 * p.Omega, rtol=1e-10)
    np.testing.assert_allclose(ms.M1, 0.0, atol=1e-15)


def test_one_dimensional_variance():
    # n = 1, Omega = 1, mu = 0: E Y^2 = 1 and E Y^4 = 3 regardless of alpha
    p = derive_params([0.0], [[1.0]], [3.0])
    ms = se_moments(p, normal())
    assert ms.M2[0, 0] == pytest.approx(1.0, abs=1e-14)
    assert ms.M4[0, 0] == pytest.approx(3.0, abs=1e-13)


def test_moment_layout_symmetries(params_n):
    ms = se_moments(params_n, student_t(9))
    n = params_n.n
    np.testing.assert_allclose(ms.M2, ms.M2.T, atol=1e-14)
    np.testing.assert_allclose(ms.M4, ms.M4.T, atol=1e-12)
    assert np.linalg.eigvalsh(ms.cov).min() > 0
    assert np.linalg.eigvalsh(ms.M4).min() > -1e-10
    m3 = np.empty((n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                m3[i, j, k] = ms.M3[i * n + k, j]
    for perm in ((1, 0, 2), (2, 1, 0), (0, 2, 1)):
        np.testing.assert_allclose(m3, m3.transpose(perm), atol=1e-12)


def test_partial_moments_truncate():
    p = model(2)
    ms = se_moments(p, student_t(3), partial=True)
    assert ms.order == 2 and ms.M3 is None and ms.M4 is None
    assert set(ms.blocks()) == {"M1", "M2"}
    with pytest.raises(MomentNotFoundError):
        se_moments(p, student_t(3))
    with pytest.raises(MomentNotFoundError):
        se_moments(p, student_t(1), partial=True)


def test_order_validation():
    with pytest.raises(ValidationError):
        se_moments(model(2), normal(), order=5)


def test_dimension_cap():
    n = MAX_TENSOR_DIM + 1
    p = derive_params(np.zeros(n), np.eye(n), np.zeros(n))
    with pytest.raises(ValidationError):
        se_moments(p, normal())


def test_to_dict_round_trip():
    d = se_moments(model(2), normal()).to_dict()
    assert np.asarray(d["M4"]).shape == (4, 4)
    assert d["ratios"] == [1.0] * 4


@pytest.mark.parametrize("family", [normal(), student_t(9)])
def test_moments_against_mc(family):
    p = model(2)
    ms = se_moments(p, family)
    est = mc_moment_set(sample_conditioning(p, family, 400_000, RngState(11)))
    for name in ("M1", "M2", "M3", "M4"):
        z = np.abs(getattr(ms, name) - getattr(est.estimate, name)) / getattr(est.se, name)
        assert z.max() < 4.5, name


def test_b3_ablation_keys():
    p = model(2)
    ms = se_moments(p, normal())
    out = b3_ablation(p, normal(), ms.M4, np.full((4, 4), 1e-3))
    assert out["full"] == pytest.approx(0.0, abs=1e-9)
    assert len(out) == 17
    assert max(v for k, v in out.items() if k != "full") > 0


def test_qform_examples():
    p = model(2)
    assert qform_mean(p, normal(), np.eye(2)) == pytest.approx(np.trace(se_moments(p, normal()).M2))
    out = qform_second(p, normal(), np.eye(2))
    assert out["var_A"] == pytest.approx(out["cov_AB"], rel=1e-12)
    assert out["var_A"] > 0


def test_qform_one_dimensional_variance():
    # Y^2 with Y ~ SN_1(0, w^2, alpha) has variance 2 w^4
    p = derive_params([0.0], [[1.7]], [-1.3])
    out = qform_second(p, normal(), [[1.0]])
    assert out["var_A"] == pytest.approx(2 * 1.7**2, rel=1e-12)


def test_qform_symmetric_argument_required():
    with pytest.raises(ValidationError):
        qform_mean(model(2), normal(), [[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValidationError):
        qform_mean(model(2), normal(), np.eye(3))


def test_qform_cov_is_bilinear():
    p = model(3)
    A, B, C = (sym_matrix(3, s) for s in (1, 2, 3))
    g = student_t(9)
    lhs = qform_second(p, g, A, B + 2 * C)["cov_AB"]
    rhs = qform_second(p, g, A, B)["cov_AB"] + 2 * qform_second(p, g, A, C)["cov_AB"]
    assert lhs == pytest.approx(rhs, rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31), st.sampled_from([0, 5, 9]))
def test_qform_trace_matches_expansion(n, seed, nu):
    # qform_mean raises if the two routes disagree beyond 1e-12 relative
    p = model(n)
    g = normal() if nu == 0 else student_t(nu)
    A = sym_matrix(n, seed)
    assert math.isfinite(qform_mean(p, g, A))


def test_qform_against_mc():
    p = model(2)
    g = normal()
    A, B = sym_matrix(2, 5), sym_matrix(2, 6)
    x = sample_conditioning(p, g, 400_000, RngState(12))
    qa = np.einsum("ni,ij,nj->n", x, A, x)
    qb = np.einsum("ni,ij,nj->n", x, B, x)
    out = qform_second(p, g, A, B)
    N = len(x)
    assert abs(qa.mean() - out["mean"]) < 4.5 * qa.std() / math.sqrt(N)
    prod = (qa - qa.mean()) * (qb - qb.mean())
    assert abs(prod.mean() - out["cov_AB"]) < 4.5 * prod.std() / math.sqrt(N)


def test_identity_suite():
    for name, (numeric, target, display) in identity_suite().items():
        assert numeric == pytest.approx(target, abs=1e-10), name
        assert display == pytest.approx(target, abs=1e-12), name
