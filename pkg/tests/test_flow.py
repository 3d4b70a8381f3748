import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torusflow import (
    FlowAbort,
    GraphState,
    StepperConfig,
    build_grid,
    cfl_dt,
    flow_rhs,
    gradient,
    inverse_metric,
    mean_curvature,
    normal_vector,
    run_flow,
    step,
    vtilde,
)
from torusflow.flow import (
    boundary_normal_derivative,
    compatibility_defect,
    embed,
    embed_point,
    geom_fields,
    metric,
    rotation_field,
)
from conftest import radial_s, smooth_field


# ---------------------------------------------------------------- Neumann ghosts

def test_1d_ghost_is_mirror(annulus):
    g = build_grid(annulus, 9)
    u = np.linspace(5.0, 3.0, 9) ** 2
    s = GraphState.from_field(g, u)
    assert s.ghost[0] == u[1]
    assert s.ghost[1] == u[-2]


def test_constant_ghost(grid1d, grid2d):
    for g in (grid1d, grid2d):
        s = GraphState.from_field(g, 1.7)
        assert np.all(s.ghost == 1.7)
        assert np.all(boundary_normal_derivative(s) == 0.0)


def test_ghost_enforces_zero_normal_slope(oval_grid):
    rng = np.random.default_rng(3)
    s = GraphState.from_field(oval_grid, rng.normal(size=oval_grid.shape))
    assert np.max(np.abs(boundary_normal_derivative(s))) <= 1e-12


def test_radial_field_boundary_slope_second_order(round_torus):
    # f(s) = s^2 - 2 s^3 / 3 has f'(1) = 0 but a nonzero third derivative, exposing the O(h^2) term
    defects = []
    for n in (16, 32, 64):
        g = build_grid(round_torus, (n, n))
        s = radial_s(g)
        defects.append(compatibility_defect(g, s ** 2 - 2 * s ** 3 / 3))
    ratios = [a / b for a, b in zip(defects, defects[1:])]
    assert all(3.5 <= q <= 4.5 for q in ratios), ratios


# ---------------------------------------------------------------- gradient, vtilde, metric

def test_gradient_exact_on_quadratic(annulus):
    g = build_grid(annulus, 5)
    s = GraphState.from_field(g, g.r ** 2)
    assert gradient(s)[2, 0] == 3.0


def test_gradient_of_constant_is_zero(grid1d, grid2d):
    for g in (grid1d, grid2d):
        assert np.all(gradient(GraphState.from_field(g, -0.3)) == 0.0)


@pytest.mark.parametrize("which", [0, 1])
def test_gradient_exact_on_linear_2d(round_torus, which):
    g = build_grid(round_torus, (16, 16))
    u = g.y if which == 0 else g.r
    Du = gradient(GraphState.from_field(g, u))[:-1]  # last ring sees the Neumann ghost
    expected = np.zeros(2)
    expected[which] = 1.0
    assert np.max(np.abs(Du - expected)) <= 1e-10


@pytest.mark.parametrize("r, du, expected", [(1.5, 3.0, math.sqrt(21.25)), (2.0, 0.5, math.sqrt(2.0)),
                                             (1.2, 0.0, 1.0)])
def test_vtilde_values(r, du, expected):
    vt, v, Q = vtilde(np.array([r]), np.array([[du]]))
    assert vt[0] == pytest.approx(expected, rel=1e-14)
    assert v[0] == pytest.approx(expected / r, rel=1e-14)
    assert Q[0] == pytest.approx(math.log(expected / r), rel=1e-14)


def test_inverse_metric_values():
    gi = inverse_metric(np.array([1.5]), np.array([[3.0]]))
    assert gi[0, 0, 0] == pytest.approx(1 / 21.25, rel=1e-14)
    assert np.array_equal(inverse_metric(np.array([1.0, 2.0]), np.zeros((2, 2))), np.broadcast_to(np.eye(2), (2, 2, 2)))


@pytest.mark.parametrize("r", [1.0, 1.7, 2.5])
def test_inverse_metric_axis_gradient(r):
    p = 2.3
    gi = inverse_metric(np.array([r]), np.array([[p, 0.0]]))[0]
    assert gi[0, 0] == pytest.approx(1 / (1 + r * r * p * p), rel=1e-14)
    assert gi[1, 1] == 1.0 and gi[0, 1] == 0.0
    g = metric(np.array([r]), np.array([[p, 0.0]]))[0]
    assert np.max(np.abs(g @ gi - np.eye(2))) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(r=st.floats(0.05, 5.0), a=st.floats(-20, 20), b=st.floats(-20, 20))
def test_metric_invariants(r, a, b):
    rr, Du = np.array([r]), np.array([[a, b]])
    vt = vtilde(rr, Du)[0][0]
    gi = inverse_metric(rr, Du)[0]
    g = metric(rr, Du)[0]
    assert vt >= 1.0
    assert np.array_equal(gi, gi.T)
    ev = np.linalg.eigvalsh(gi)
    assert ev.min() >= 1 / vt ** 2 * (1 - 1e-12) and ev.max() <= 1 + 1e-12
    assert abs(vt * vt * np.linalg.det(gi) - 1) <= 1e-10
    assert abs(np.linalg.det(g) / vt ** 2 - 1) <= 1e-10
    assert np.max(np.abs(g @ gi - np.eye(2))) <= 1e-12 * max(1.0, vt ** 2 / 1e3)


# ---------------------------------------------------------------- rhs and H

def test_rhs_of_constant_is_zero(grid1d, grid2d, oval_grid):
    for g in (grid1d, grid2d, oval_grid):
        assert np.all(flow_rhs(GraphState.from_field(g, 4.2)) == 0.0)
        assert np.all(mean_curvature(GraphState.from_field(g, 4.2)) == 0.0)


def _hand_cosine(r):
    A, w = 0.01, math.pi
    up = -A * w * math.sin(w * (r - 1))
    upp = -A * w * w * math.cos(w * (r - 1))
    vt2 = 1 + r * r * up * up
    return up, upp, vt2, upp / vt2 + up / r * (1 + 1 / vt2)


def test_rhs_cosine_example(annulus):
    up, upp, vt2, rhs = _hand_cosine(1.5)
    assert up == pytest.approx(-0.0314159, abs=1e-7)
    assert vt2 == pytest.approx(1.0022207, abs=1e-7)
    assert rhs == pytest.approx(-0.0418415, abs=1e-7)
    g = build_grid(annulus, 257)
    s = GraphState.from_field(g, 0.01 * np.cos(math.pi * (g.r - 1)))
    mid = 128
    assert g.r[mid] == 1.5
    assert flow_rhs(s)[mid] == pytest.approx(rhs, abs=3e-6)
    H = -(1.5 / math.sqrt(vt2)) * rhs
    # composing the rounded example values gives 0.0626927; the exact composition is checked here
    assert H == pytest.approx(0.0626929, abs=3e-7)
    assert mean_curvature(s)[mid] == pytest.approx(H, abs=3e-6)


def test_three_node_euler_step(annulus):
    g = build_grid(annulus, 3)
    s = GraphState.from_field(g, [0.0, 0.1, 0.0])
    # mirror ghosts give u' = 0 at all three nodes and u'' = +-0.8
    expected_rhs = np.array([0.8, -0.8, 0.8])
    assert np.allclose(flow_rhs(s), expected_rhs, rtol=0, atol=1e-15)
    out = step(s, StepperConfig(), dt=0.002)
    assert np.allclose(out.u, [0.0016, 0.0984, 0.0016], rtol=0, atol=1e-16)
    assert out.t == 0.002


def test_rhs_shift_invariant(grid2d):
    u = smooth_field(grid2d, 2.0)
    a = flow_rhs(GraphState.from_field(grid2d, u))
    b = flow_rhs(GraphState.from_field(grid2d, u + 2 * math.pi))
    assert np.max(np.abs(a - b)) <= 1e-11


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), amp=st.floats(0.01, 5.0))
def test_mean_curvature_odd(oval_grid, seed, amp):
    rng = np.random.default_rng(seed)
    u = amp * rng.normal(size=oval_grid.shape)
    H = mean_curvature(GraphState.from_field(oval_grid, u))
    Hm = mean_curvature(GraphState.from_field(oval_grid, -u))
    assert np.array_equal(Hm, -H)


# ---------------------------------------------------------------- embedding and normal

@pytest.mark.parametrize("u, expected", [(0.0, (0.3, 1.2, 0.0)), (math.pi / 2, (0.3, 0.0, 1.2)),
                                         (math.pi, (0.3, -1.2, 0.0))])
def test_embed_point(u, expected):
    assert np.allclose(embed_point(0.3, 1.2, u), expected, atol=1e-15)


def test_embed_state_shapes(grid1d, grid2d):
    assert embed(GraphState.from_field(grid1d, 0.0)).shape == (65, 2)
    assert embed(GraphState.from_field(grid2d, 0.0), (0, 0)).shape == (3,)


def test_normal_of_flat_state_is_tau(grid2d):
    s = GraphState.from_field(grid2d, 0.0)
    nu = normal_vector(s)
    assert np.array_equal(nu, np.broadcast_to([0.0, 0.0, 1.0], nu.shape))
    _, tau = rotation_field(s.u, 2)
    assert np.all(np.sum(nu * tau, axis=-1) * vtilde(grid2d, gradient(s))[0] == 1.0)


def test_normal_identity_1d(annulus):
    g = build_grid(annulus, 257)
    s = GraphState.from_field(g, 0.01 * np.cos(math.pi * (g.r - 1)))
    nu = normal_vector(s, 128)
    _, tau = rotation_field(s.u[128], 1)
    vt = vtilde(g, gradient(s))[0][128]
    assert float(nu @ tau) == pytest.approx(1 / vt, abs=1e-10)
    assert 1 / vt == pytest.approx(0.9988915, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), amp=st.floats(0.01, 8.0))
def test_normal_identities_random_states(oval_grid, seed, amp):
    rng = np.random.default_rng(seed)
    s = GraphState.from_field(oval_grid, amp * rng.normal(size=oval_grid.shape))
    nu = normal_vector(s)
    _, tau = rotation_field(s.u, 2)
    vt = vtilde(oval_grid, gradient(s))[0]
    assert np.max(np.abs(np.linalg.norm(nu, axis=-1) - 1)) <= 1e-12
    assert np.max(np.abs(np.sum(nu * tau, axis=-1) * vt - 1)) <= 1e-10
    # nu is orthogonal to both tangent vectors of the graph
    Du = gradient(s)
    rhat, _ = rotation_field(s.u, 2)
    e1 = np.zeros_like(rhat)
    e1[..., 0] = 1
    r = oval_grid.r[..., None]
    for t in (e1 + r * Du[..., :1] * tau, rhat + r * Du[..., 1:] * tau):
        assert np.max(np.abs(np.sum(nu * t, axis=-1))) <= 1e-10 * np.max(np.linalg.norm(t, axis=-1))


def test_geom_fields_consistent(grid2d):
    s = GraphState.from_field(grid2d, smooth_field(grid2d, 2.0))
    gf = geom_fields(s)
    assert np.allclose(gf.w, grid2d.r / gf.vtilde, rtol=1e-15)
    assert np.allclose(gf.Q, np.log(gf.vtilde / grid2d.r), rtol=1e-14)
    assert np.allclose(gf.v, gf.vtilde / grid2d.r, rtol=1e-14)
    assert np.all(gf.vtilde >= 1)


# ---------------------------------------------------------------- stepping

def test_cfl_dt(annulus, grid2d):
    g = build_grid(annulus, 11)
    assert cfl_dt(g, StepperConfig(sigma=0.2)) == pytest.approx(0.002, rel=1e-14)
    assert cfl_dt(grid2d, StepperConfig(sigma=0.2)) == pytest.approx(0.2 * grid2d.h_min ** 2)


def test_stepper_config_validation():
    with pytest.raises(ValueError, match=r"sigma ∈ \(0, 0.5\]"):
        StepperConfig(sigma=0.0)
    with pytest.raises(ValueError):
        StepperConfig(t_final=0.0)
    with pytest.raises(ValueError):
        StepperConfig(vtilde_cap=1.0)
    with pytest.raises(ValueError):
        StepperConfig(scheme="leapfrog")


def test_cfl_dt_rejects_zero_sigma(grid1d):
    cfg = StepperConfig()
    object.__setattr__(cfg, "sigma", 0.0)
    with pytest.raises(ValueError, match="sigma out of range"):
        cfl_dt(grid1d, cfg)


@pytest.mark.parametrize("scheme", ["euler", "rk4", "rkl2"])
def test_constant_is_stationary(grid2d, scheme):
    s = GraphState.from_field(grid2d, 0.7)
    cfg = StepperConfig(scheme=scheme)
    for _ in range(20):
        s = step(s, cfg)
    assert np.all(s.u == 0.7)
    assert s.t > 0


@pytest.mark.parametrize("scheme", ["euler", "rk4", "rkl2"])
def test_equivariance(oval_grid, scheme):
    u = smooth_field(oval_grid, 3.0) + 0.3 * np.sin(oval_grid.y * 7)
    cfg = StepperConfig(scheme=scheme)

    def evolve(v, n=30):
        s = GraphState.from_field(oval_grid, v)
        for _ in range(n):
            s = step(s, cfg)
        return s.u

    base = evolve(u)
    assert np.max(np.abs(evolve(u + 2 * math.pi) - 2 * math.pi - base)) <= 1e-12
    assert np.array_equal(-evolve(-u), base)


def test_schemes_agree_on_smooth_data(grid1d):
    u0 = smooth_field(grid1d, 1.0)
    finals = {}
    for scheme in ("euler", "rk4", "rkl2"):
        res = run_flow(u0, grid1d, StepperConfig(scheme=scheme, t_final=0.02, osc_tol=0.0))
        assert res.state.t == pytest.approx(0.02, rel=1e-12)
        finals[scheme] = res.state.u
    assert np.max(np.abs(finals["euler"] - finals["rk4"])) <= 1e-4
    assert np.max(np.abs(finals["rkl2"] - finals["rk4"])) <= 1e-4


def test_rkl2_matches_rk4_in_2d(grid2d):
    u0 = smooth_field(grid2d, 1.0)
    a = run_flow(u0, grid2d, StepperConfig(scheme="rk4", t_final=0.005, osc_tol=0.0)).state.u
    b = run_flow(u0, grid2d, StepperConfig(scheme="rkl2", stages=8, t_final=0.005, osc_tol=0.0)).state.u
    assert np.max(np.abs(a - b)) <= 1e-4


def test_run_flow_constant_converges_immediately(grid1d):
    res = run_flow(0.7, grid1d, StepperConfig())
    assert res.reason == "converged" and res.steps == 0
    assert np.all(res.state.u == 0.7)


def test_run_flow_hooks_and_cadence(grid1d):
    seen = []
    res = run_flow(smooth_field(grid1d), grid1d, StepperConfig(t_final=1.0, osc_tol=0.0, max_steps=25),
                   hooks=(lambda s: seen.append(s.t) or s.t,), cadence=10)
    assert res.reason == "t_final" and res.steps == 25
    assert len(seen) == 4 and seen[0] == 0.0 and seen[-1] == res.state.t
    assert res.samples == seen


def test_blow_up_aborts(grid1d):
    u0 = 2 * math.pi * np.cos(math.pi * (grid1d.r - 1))
    res = run_flow(u0, grid1d, StepperConfig(vtilde_cap=1.0001))
    assert res.reason == "aborted"
    assert "gradient blow-up at t=" in str(res.error)
    with pytest.raises(FlowAbort, match="gradient blow-up"):
        run_flow(u0, grid1d, StepperConfig(vtilde_cap=1.0001), raise_on_abort=True)


def test_non_finite_input_rejected(grid1d):
    u = smooth_field(grid1d)
    u[3] = np.nan
    with pytest.raises(ValueError):
        run_flow(u, grid1d, StepperConfig())


def test_incompatible_data_warns(grid1d, caplog):
    run_flow(grid1d.r.copy(), grid1d, StepperConfig(max_steps=1))
    assert "Neumann-compatible" in caplog.text


def test_extrema_monotone_short_run(oval_grid):
    u0 = smooth_field(oval_grid, 4.0) + np.sin(3 * oval_grid.y)
    res = run_flow(u0, oval_grid, StepperConfig(t_final=0.01, osc_tol=0.0))
    assert res.max_increase + res.min_decrease <= 1e-6 * np.ptp(u0)
    assert res.osc < np.ptp(u0)


def test_multiwrap_data_not_reduced(grid1d):
    u0 = 5 * math.pi * (1 + np.cos(math.pi * radial_s(grid1d))) / 2
    res = run_flow(u0, grid1d, StepperConfig(t_final=0.01, osc_tol=0.0))
    assert res.state.u.max() > 2 * math.pi
