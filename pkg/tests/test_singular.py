import numpy as np
import pytest

import radstab as rs
from radstab.errors import HypothesisError, PreconditionError
from radstab.singular import hardy_margin


@pytest.fixture(scope="module")
def sing5():
    return rs.approximate_singular(rs.power(5.0), 12, override=True)


def test_ladder_monotone_and_close_to_W(sing5):
    assert all(row["min_gap_rel"] > 0 for row in sing5.ordering)
    W = rs.model_reference(rs.power_model(5.0), 12)
    r = np.linspace(1.0, 10.0, 200)
    errs = [np.max(np.abs(p.evaluate(r)[0] / W(r) - 1)) for p in sing5.profiles]
    assert errs[-1] <= 1e-2
    # decreasing down the ladder until the solver's noise floor
    for a, b in zip(errs, errs[1:]):
        assert b < a or b <= 1e-10


def test_hardy_margin_closed_form(sing5):
    assert rs.singular_hardy_check(sing5) == pytest.approx(25.0 - 23.75, abs=1e-6)


@pytest.mark.parametrize("N", [11, 12, 15])
def test_hardy_margin_vanishes_at_jl(N):
    p = rs.critical_exponents(N).p_JL
    ref = rs.model_reference(rs.power_model(p), N)
    r = np.logspace(-1, 1, 30)
    assert np.max(np.abs(hardy_margin(r, ref(r), rs.power(p), N))) <= 1e-9


def test_hardy_margin_flat_source():
    spec = rs.custom(lambda u: 1.0 + 0 * u, lambda u: 0 * u, lambda u: 0 * u)
    np.testing.assert_allclose(hardy_margin(np.array([0.5, 2.0]), np.array([1.0, 1.0]), spec, 12), 25.0)


def test_decay_bounds(sing5):
    rep = rs.verify_decay_bounds(sing5)
    assert rep["decay_exponent"] == pytest.approx(-0.5, abs=1e-6)
    assert rep["decay_ok"] and rep["F_bound_integrated_ok"] and rep["F_bound_power_ok"]
    assert rep["F_lower_ok"]


def test_decay_bounds_hypothesis_failure(sing5):
    with pytest.raises(HypothesisError):
        rs.verify_decay_bounds(sing5, spec=rs.power(1.2))


def test_residual_and_estimate(sing5):
    assert sing5.residual_max <= 100 * 1e-10
    assert 0 < sing5.error_estimate < 1e-10
    with pytest.raises(rs.DomainError):
        sing5.evaluate(1e-3)


def test_power_sum_ladder_cauchy(psum):
    sp = rs.approximate_singular(psum, 12, r_min=0.5, r_max=50.0)
    d = sp.step_defects
    assert d[-1] < 1e-10 and d[0] > d[-1]


def test_type_I_precondition(p2):
    with pytest.raises(PreconditionError):
        rs.approximate_singular(p2, 12)


def test_csv(tmp_path, sing5):
    sing5.to_csv(tmp_path / "s.csv")
    text = (tmp_path / "s.csv").read_text()
    assert text.startswith("r,u,du,defect\n")
