import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torusflow import GraphState, StepperConfig, build_grid, flow_rhs
from torusflow.mms import (
    ClosedForm,
    constant_field,
    convergence_study,
    cosine_1d,
    oracle_operator,
    radial_cosine,
    square_field,
    steady_case,
    wrap_field,
)


def _fd_operator(field, y, r, h=1e-5):
    """Operator from central differences of the closed-form value only."""
    f = lambda a, b: float(field(np.array(a), np.array(b)))
    uy = (f(y + h, r) - f(y - h, r)) / (2 * h)
    ur = (f(y, r + h) - f(y, r - h)) / (2 * h)
    uyy = (f(y + h, r) - 2 * f(y, r) + f(y - h, r)) / h ** 2
    urr = (f(y, r + h) - 2 * f(y, r) + f(y, r - h)) / h ** 2
    uyr = (f(y + h, r + h) - f(y + h, r - h) - f(y - h, r + h) + f(y - h, r - h)) / (4 * h * h)
    vt2 = 1 + r * r * (uy * uy + ur * ur)
    return (uyy + urr - r * r * (uy * uy * uyy + 2 * uy * ur * uyr + ur * ur * urr) / vt2
            + ur / r * (1 + 1 / vt2))


def test_constant_operator_zero():
    assert oracle_operator(constant_field(3.0), 0.1, 1.4) == 0.0


def test_cosine_operator_value():
    assert float(oracle_operator(cosine_1d(0.01, 1.0, 2.0), 0.0, 1.5)) == pytest.approx(-0.0418415, abs=1e-7)


@pytest.mark.parametrize("y, r", [(0.3, 1.2), (-0.7, 2.0), (1.1, 0.6)])
def test_square_field_closed_form(y, r):
    vt2 = 1 + 4 * r * r * y * y
    assert float(oracle_operator(square_field(), y, r)) == pytest.approx(2 / vt2, rel=1e-14)
    assert _fd_operator(square_field(), y, r) == pytest.approx(2 / vt2, rel=1e-5)


@settings(max_examples=40, deadline=None)
@given(rad=st.floats(0.05, 0.45), ang=st.floats(0, 2 * math.pi), amp=st.floats(0.1, 3.0))
def test_radial_fields_match_finite_differences(rad, ang, amp):
    y, r = rad * math.cos(ang), 2.0 + rad * math.sin(ang)
    for field in (radial_cosine(amp, (0.0, 2.0), 0.5), wrap_field(amp, (0.0, 2.0), 0.5)):
        exact = float(oracle_operator(field, y, r))
        assert _fd_operator(field, y, r) == pytest.approx(exact, rel=1e-4, abs=1e-4 * amp)


def test_radial_field_at_center_finite():
    f = radial_cosine(1.0, (0.0, 2.0), 0.5)
    uyy, uyr, urr = f.hess(np.array(0.0), np.array(2.0), 0.0)
    assert uyy == urr == pytest.approx(-(math.pi / 0.5) ** 2)
    assert uyr == 0.0


def test_stencil_matches_oracle_at_order_two(round_torus):
    field = radial_cosine(1.0, (0.0, 2.0), 0.5)
    errs = []
    for n in (16, 32, 64):
        g = build_grid(round_torus, (n, n))
        num = flow_rhs(GraphState.from_field(g, field(g.y, g.r)))
        errs.append(np.max(np.abs(num - oracle_operator(field, g.y, g.r))))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(1.7 <= p <= 2.3 for p in orders), orders


def test_levels_below_three_rejected(annulus):
    with pytest.raises(ValueError, match="levels ≥ 3"):
        convergence_study(steady_case(constant_field(1.0)), annulus, 9, levels=2)


def test_constant_case_exact(annulus):
    res = convergence_study(steady_case(constant_field(0.3)), annulus, 9, levels=3)
    assert res.errors == [0.0, 0.0, 0.0] and res.exact
    assert all(math.isinf(p) for p in res.orders)


def test_1d_study_orders(annulus):
    res = convergence_study(steady_case(cosine_1d(1.0, 1.0, 2.0)), annulus, 33, levels=3, t_final=0.05)
    assert [r for r in res.resolutions] == [33, 65, 129]
    assert all(1.8 <= p <= 2.2 for p in res.orders), res.orders
    assert res.rows()[0]["order"] is None


def test_time_dependent_case(annulus):
    """Decaying cosine with its own forcing; spatial error still dominates."""
    base = cosine_1d(1.0, 1.0, 2.0)
    lam = 2.0
    field = ClosedForm(
        value=lambda y, r, t: math.exp(-lam * t) * base.value(y, r, t),
        grad=lambda y, r, t: tuple(math.exp(-lam * t) * c for c in base.grad(y, r, t)),
        hess=lambda y, r, t: tuple(math.exp(-lam * t) * c for c in base.hess(y, r, t)),
        dt=lambda y, r, t: -lam * math.exp(-lam * t) * base.value(y, r, t),
    )
    from torusflow.mms import ManufacturedCase

    res = convergence_study(ManufacturedCase(field), annulus, 17, levels=3, t_final=0.02,
                            cfg=StepperConfig(sigma=0.05))
    assert all(1.7 <= p <= 2.3 for p in res.orders), res.orders
