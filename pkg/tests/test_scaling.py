import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import radstab as rs
from radstab.errors import DomainError
from radstab.radial_ode import SolverConfig
from radstab.scaling import (
    beta_of_alpha,
    count_model_intersections,
    gradient_invariant,
    lambda_of_alpha,
    model_first_zero,
    model_from_q,
    singular_constant,
)


def test_singular_constant_closed_form():
    # N=12, p=5: L^4 = (2/4)(10 - 1/2) = 4.75
    assert singular_constant(5.0, 12) == pytest.approx(4.75**0.25, rel=1e-15)
    with pytest.raises(DomainError):
        singular_constant(1.2, 3)


@pytest.mark.parametrize("p", [4.0, 5.0, 9.0])
def test_W_solves_the_model_equation(p):
    ref = rs.model_reference(rs.power_model(p), 12)
    r = np.logspace(-1, 1, 50)
    assert ref.residual(r).max() <= 1e-10


def test_Z_solves_the_exponential_equation():
    ref = rs.model_reference(rs.exponential_model(), 12)
    assert ref.residual(np.logspace(-1, 1, 50)).max() <= 1e-10
    assert ref(1.0) == pytest.approx(math.log(20.0))


def test_model_reference_domain():
    with pytest.raises(DomainError):
        rs.model_reference(rs.power_model(2.0), 12)
    with pytest.raises(DomainError):
        rs.model_reference(rs.power_model(5.0), 10)
    with pytest.raises(DomainError):
        rs.model_reference(rs.exponential_model(), 9)


def test_model_from_q():
    assert model_from_q(1.25).p == pytest.approx(5.0)
    assert model_from_q(1.0).kind == "exponential"
    with pytest.raises(DomainError):
        model_from_q(0.9)


@given(st.floats(-6, 6))
def test_model_G_inverse(t):
    for model in (rs.power_model(3.0), rs.exponential_model()):
        v = 10.0**t if model.kind == "power" else t
        assert model.G_inv(model.G(v)) == pytest.approx(v, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_model_bounds_power(sigma):
    rep = rs.verify_model_bounds(rs.power_model(5.0), 12, [sigma])
    assert rep.ok
    row = rep.rows[0]
    assert row["gap_min_rel"] > 0 and row["G_margin_min_rel"] > 0


def test_model_bounds_exponential():
    assert rs.verify_model_bounds(rs.exponential_model(), 12, [0.0, 1.0]).ok


def _round_trip(spec, model, alpha, r_max=50.0):
    prof = rs.solve_ivp(spec, 12, alpha, SolverConfig(r_max=r_max))
    lam = lambda_of_alpha(spec, model, alpha)
    v = rs.push_forward(spec, prof, model, lam)
    back = rs.pull_back(spec, v, lam, model)
    ref = prof.evaluate(back.r)[0]
    return prof, v, back, float(np.max(np.abs(back.u - ref) / ref))


@pytest.mark.parametrize("alpha", [0.1, 1.0, 10.0])
def test_round_trip(rational, alpha):
    _, _, _, err = _round_trip(rational, rs.power_model(2.0), alpha)
    assert err <= 1e-8


def test_round_trip_exponential(psum):
    _, _, _, err = _round_trip(psum, rs.exponential_model(), 1.0)
    assert err <= 1e-8


@pytest.mark.parametrize("spec_name", ["rational", "psum"])
def test_gradient_invariant(spec_name, request):
    spec = request.getfixturevalue(spec_name)
    prof, v, _, _ = _round_trip(spec, rs.power_model(3.0), 2.0)
    iu = gradient_invariant(spec, prof)[1:]
    iv = gradient_invariant(v.nonlinearity, v)[1:]
    assert np.max(np.abs(iv - iu) / np.abs(iu)) <= 1e-7


@pytest.mark.parametrize("lam", [0.3, 1.0, 4.0])
def test_classical_scaling(lam):
    spec = rs.power(3.0)
    prof = rs.solve_ivp(spec, 12, 1.0, SolverConfig(r_max=60.0))
    v = rs.push_forward(spec, prof, rs.power_model(3.0), lam)
    s = v.r[1:]
    expected = lam ** (2.0 / 2.0) * prof.evaluate(lam * s)[0]
    assert np.max(np.abs(v.u[1:] - expected) / expected) <= 1e-6


def test_transformed_profile_solves_perturbed_equation(rational):
    # v'' + (N-1)v'/s + g(v) + perturbation = 0
    model = rs.power_model(2.0)
    prof = rs.solve_ivp(rational, 12, 3.0, SolverConfig(r_max=20.0))
    lam = lambda_of_alpha(rational, model, 3.0)
    v = rs.push_forward(rational, prof, model, lam)
    from radstab.scaling import model_equation_residual, perturbation_term

    idx = slice(5, -5, 7)
    s = v.r[idx]
    lhs = model_equation_residual(v, s)
    pert = perturbation_term(rational, model, v)[idx]
    scale = np.abs(model.g(v.u[idx])) + np.abs(pert)
    assert np.max(np.abs(lhs + pert) / scale) <= 1e-5


def test_beta_of_alpha_identity_and_ratio(rational):
    model = rs.power_model(2.0)
    assert beta_of_alpha(rational, model, 1.0, 7.0) == 7.0
    b = beta_of_alpha(rational, model, 0.5, 7.0)
    assert rational.F(b) / rational.F(7.0) == pytest.approx(model.G(0.5) / model.G(1.0), rel=1e-12)
    with pytest.raises(DomainError):
        beta_of_alpha(rational, model, 0.5, 0.0)


def test_model_intersection_counts():
    assert count_model_intersections(rs.power_model(2.0), 12, 1.0, 0.5, 1e3) >= 3
    assert count_model_intersections(rs.power_model(1.4), 12, 1.0, 0.5, 1e3) == 1
    assert count_model_intersections(rs.power_model(5.0), 12, 1.0, 0.5, 1e3) == 0


def test_intersection_growth():
    g = rs.intersection_growth(rs.power_model(2.0), 12, 1.0, 0.5)
    assert g["unbounded"]
    assert g["counts"] == sorted(g["counts"])


def test_model_crossings_argument_order():
    with pytest.raises(DomainError):
        rs.model_crossings(rs.power_model(2.0), 12, 0.5, 1.0, 100.0)


def test_convergence_decreasing(rational, psum):
    model = rs.power_model(2.0)
    st1 = rs.convergence_study(rational, 12, model, 1.0, [1e1, 1e2, 1e3, 1e4])
    assert st1.strictly_decreasing
    st2 = rs.convergence_study(psum, 12, model, 1.0, [1e-1, 1e-2, 1e-3, 1e-4])
    assert st2.strictly_decreasing
    assert model_first_zero(model, 12, 1.0) is None
    assert st1.S == pytest.approx(0.5 * 1e3)


def test_convergence_window_checked():
    model = rs.power_model(1.2)
    s0 = model_first_zero(model, 12, 1.0)
    assert s0 is not None
    with pytest.raises(rs.PreconditionError):
        rs.convergence_study(rs.power(1.2), 12, model, 1.0, [1.0], S=2 * s0)
