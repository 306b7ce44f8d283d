import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import radstab as rs
from radstab.errors import DomainError, HypothesisError

mp.mp.dps = 40


def _mp_F(f, u):
    return float(mp.quad(lambda s: 1 / f(s), [u, 10 * u, 1000 * u, mp.inf]))


# -- exponents ---------------------------------------------------------------


@pytest.mark.parametrize("N", range(11, 16))
def test_exponents_match_closed_forms(N):
    ce = rs.critical_exponents(N)
    root = mp.sqrt(N - 1)
    p_jl = 1 + 4 / (N - 4 - 2 * root)
    assert ce.p_JL == pytest.approx(float(p_jl), abs=1e-12)
    assert ce.q_JL == pytest.approx(float((N - 2 * root) / 4), abs=1e-12)
    # the conjugate relation 1/p + 1/q = 1
    assert 1 / ce.p_JL + 1 / ce.q_JL == pytest.approx(1.0, abs=1e-12)
    assert ce.p_S == pytest.approx((N + 2) / (N - 2), abs=1e-15)
    assert ce.q_S == pytest.approx((N + 2) / 4, abs=1e-15)


def test_exponents_n12_values():
    ce = rs.critical_exponents(12)
    assert ce.p_S == pytest.approx(1.4)
    assert ce.q_S == pytest.approx(3.5)
    assert ce.p_JL == pytest.approx(3.92664991614216, abs=1e-12)
    assert ce.q_JL == pytest.approx(1.34168760482230, abs=1e-12)


@pytest.mark.parametrize("N", [3, 5, 10])
def test_low_dimension_has_no_finite_jl(N):
    ce = rs.critical_exponents(N)
    assert ce.p_JL == math.inf and ce.q_JL is None
    assert ce.to_dict()["p_JL_finite"] is False


@pytest.mark.parametrize("N", [2, 0, 11.5])
def test_exponents_reject_bad_dimension(N):
    with pytest.raises(DomainError):
        rs.critical_exponents(N)


@pytest.mark.parametrize("N", range(11, 16))
def test_hardy_gate_zero_at_qjl_negative_below(N):
    qjl = rs.critical_exponents(N).q_JL
    assert abs(rs.hardy_gate(qjl, N)) <= 1e-10
    for q in np.linspace(1.0, qjl, 20)[:-1]:
        assert rs.hardy_gate(q, N) < 0


@given(st.integers(11, 40), st.floats(0.0, 1.0, exclude_max=True))
def test_hardy_gate_sign_property(N, t):
    qjl = rs.critical_exponents(N).q_JL
    q = 1.0 + t * (qjl - 1.0)
    assert rs.hardy_gate(q, N) < 1e-12


# -- families ------------------------------------------------------------------


def test_power_rational_value_at_one(rational):
    f, f1, _ = rational.eval_derivatives(1.0)
    assert f == pytest.approx(1 / 8, rel=1e-15)
    assert f1 == pytest.approx(7 / 16, rel=1e-15)


@pytest.mark.parametrize(
    "spec_args, fn",
    [
        (("power", 3.0), lambda s: s**3),
        (("power_sum", 6.0, 13 / 3), lambda s: s**6 + s ** (mp.mpf(13) / 3)),
        (("power_rational", 5.0, 3.0), lambda s: s**5 / (1 + s) ** 3),
    ],
)
@pytest.mark.parametrize("u", [1e-6, 1e-2, 0.7, 3.0, 1e3, 1e7])
def test_F_matches_mpmath(spec_args, fn, u):
    spec = rs.from_config(dict(zip(("family", "p1", "p2"), spec_args)) if spec_args[0] != "power" else {"family": "power", "p": spec_args[1]})
    assert spec.F(u) == pytest.approx(_mp_F(fn, mp.mpf(u)), rel=1e-10)


@pytest.mark.parametrize("u", [1e-3, 0.5, 2.0, 1e4])
def test_derivatives_match_mpmath(psum, u):
    f = lambda s: s**6 + s ** (mp.mpf(13) / 3)
    vals = psum.eval_derivatives(u)
    for k, v in enumerate(vals):
        assert v == pytest.approx(float(mp.diff(f, mp.mpf(u), k)), rel=1e-12)


@given(st.floats(-10.0, 10.0))
def test_F_inverse_round_trip(t):
    spec = rs.power_rational(5.0, 3.0)
    u = 10.0**t
    assert spec.invert_F(spec.F(u)) == pytest.approx(u, rel=1e-10)


@given(st.floats(-8.0, 8.0), st.floats(0.01, 2.0))
def test_F_strictly_decreasing(t, dt):
    spec = rs.power_sum(6.0, 4.0)
    assert spec.F(10.0 ** (t + dt)) < spec.F(10.0**t)


def test_power_F_closed_form(p5):
    u = np.logspace(-3, 3, 7)
    np.testing.assert_allclose(p5.F(u), u**-4 / 4, rtol=1e-15)
    np.testing.assert_allclose(p5.q_of(u), 1.25, rtol=1e-14)


def test_custom_spec_matches_builtin():
    c = rs.custom(lambda u: u**3, lambda u: 3 * u**2, lambda u: 6 * u)
    b = rs.power(3.0)
    u = np.logspace(-4, 4, 9)
    np.testing.assert_allclose(c.F(u), b.F(u), rtol=1e-10)
    np.testing.assert_allclose(c.q_of(u), 1.5, rtol=1e-9)


def test_F_refuses_nonpositive(p5, rational):
    with pytest.raises(DomainError):
        p5.F(0.0)
    with pytest.raises(DomainError):
        rational.F(-1.0)
    with pytest.raises(DomainError):
        rational.invert_F(0.0)


def test_eval_derivatives_rejects_nonconvex():
    spec = rs.custom(lambda u: u, lambda u: 1.0 + 0 * u, lambda u: 0 * u)
    with pytest.raises(HypothesisError):
        spec.eval_derivatives(1.0)
    assert not rs.check_hypotheses(spec).ok


@pytest.mark.parametrize("cfg", [{"family": "power", "p": 1.0}, {"family": "power_rational", "p1": 4.0, "p2": 3.0}, {"family": "nope"}])
def test_bad_configs_rejected(cfg):
    with pytest.raises(DomainError):
        rs.from_config(cfg)


# -- limits and curvature --------------------------------------------------------


def test_limits_power_rational(rational):
    lim = rational.q_of(np.array([1e-10, 1e10]))
    assert lim[0] == pytest.approx(1.25, abs=1e-3)
    assert lim[1] == pytest.approx(2.0, abs=1e-3)
    est = rs.estimate_limits(rational)
    assert est.q0 == pytest.approx(1.25, abs=1e-3)
    assert est.q_inf == pytest.approx(2.0, abs=1e-3)
    assert est.p0 == pytest.approx(5.0, abs=1e-2)
    assert est.p_inf == pytest.approx(2.0, abs=1e-2)


def test_power_sum_curvature_upper_bound(psum):
    u = np.logspace(-6, 6, 200)
    assert np.all(psum.curvature_ratio(u) <= 1.3 * (1 + 1e-12))
    assert np.all(psum.q_of(u) <= 1.3 * (1 + 1e-9))


def test_power_sum_curvature_minimum_oracle(psum):
    # the mixed term pulls the ratio below 1.2 near u ~ 1.6; oracle by mpmath
    a, b = mp.mpf(6), mp.mpf(13) / 3

    def ratio(x):
        x = mp.mpf(x)
        f = x**a + x**b
        f1 = a * x ** (a - 1) + b * x ** (b - 1)
        f2 = a * (a - 1) * x ** (a - 2) + b * (b - 1) * x ** (b - 2)
        return f1 * f1 / (f * f2)

    t = mp.findroot(lambda t: mp.diff(lambda s: ratio(mp.e**s), t), 0.4)
    exact_min = float(ratio(mp.e**t))
    assert exact_min == pytest.approx(1.19388, abs=1e-5)
    u = np.logspace(-2, 2, 4001)
    assert psum.curvature_ratio(u).min() == pytest.approx(exact_min, rel=1e-7)


@pytest.mark.parametrize("u", [1e-8, 1e-3, 1.0, 1e3, 1e8])
def test_q_of_consistent_with_curvature_sandwich_limits(psum, u):
    # f'F is an average of the curvature ratio, so it lies inside the ratio's range
    lo = psum.curvature_ratio(np.logspace(-12, 12, 2001)).min()
    assert lo * (1 - 1e-9) <= psum.q_of(u) <= 1.3 * (1 + 1e-9)
