"""Invariant battery behind ``torusflow check``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import (
    Recorder,
    energy_identity_residual,
    flux_identity_residual,
    level_set_accumulate,
)
from .flow import (
    GraphState,
    boundary_normal_derivative,
    gradient,
    inverse_metric,
    metric,
    normal_vector,
    rotation_field,
    run_flow,
    step,
    vtilde,
)

__all__ = ["CheckResult", "run_checks", "format_table", "identity_errors"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float
    note: str = ""

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


def identity_errors(state: GraphState):
    """``(max |<nu,tau> vt - 1|, max ||g g^-1 - I||, max |vt^2 det g^-1 - 1|)`` over all nodes."""
    g = state.grid
    Du = gradient(state)
    vt = vtilde(g, Du)[0]
    nu = normal_vector(state)
    _, tau = rotation_field(state.u, g.dim)
    e_nt = float(np.max(np.abs(np.sum(nu * tau, axis=-1) * vt - 1.0)))
    gi = inverse_metric(g, Du)
    gm = metric(g, Du)
    eye = np.eye(g.dim)
    prod = np.einsum("...ij,...jk->...ik", gm, gi)
    e_gg = float(np.max(np.abs(prod - eye)))
    e_det = float(np.max(np.abs(vt * vt * np.linalg.det(gi) - 1.0)))
    return e_nt, e_gg, e_det


def _evolve(u, grid, cfg, nsteps):
    state = GraphState.from_field(grid, u)
    for _ in range(nsteps):
        state = step(state, cfg)
    return state.u


def run_checks(cfg, grid, stepper, u0, levels, cadence=10, h2v2_cap_factor=100.0,
               equivariance_steps=100, stationarity_steps=100):
    """Run every check on the configured problem and return a list of :class:`CheckResult`."""
    out = []
    u0 = np.broadcast_to(np.asarray(u0, dtype=float), grid.shape)
    osc0 = float(np.ptp(u0))

    # a constant field must not move
    c = float(np.mean(u0))
    uc = _evolve(np.full(grid.shape, c), grid, stepper, stationarity_steps)
    err = float(np.max(np.abs(uc - c)))
    out.append(CheckResult("stationarity", err <= 1e-12, err, 1e-12))

    # rotation by 2 pi and reflection u -> -u commute with the flow
    base = _evolve(u0, grid, stepper, equivariance_steps)
    shifted = _evolve(u0 + 2 * math.pi, grid, stepper, equivariance_steps) - 2 * math.pi
    mirrored = -_evolve(-u0, grid, stepper, equivariance_steps)
    e_shift = float(np.max(np.abs(shifted - base)))
    e_mirror = float(np.max(np.abs(mirrored - base)))
    lim = 1e-12
    out.append(CheckResult("equivariance_2pi", e_shift <= lim, e_shift, lim))
    out.append(CheckResult("equivariance_reflect", e_mirror <= lim, e_mirror, lim))

    # ghost layer enforces zero normal slope
    st0 = GraphState.from_field(grid, u0)
    bnd = float(np.max(np.abs(boundary_normal_derivative(st0))))
    grad_scale = max(1.0, float(np.max(np.abs(gradient(st0)))))
    lim = 1e-10 * grad_scale
    out.append(CheckResult("neumann", bnd <= lim, bnd, lim))

    # configured run with identity checks on every sampled state
    ident = [0.0, 0.0, 0.0]
    rec = Recorder(tuple(levels))

    def hook(state):
        row = rec(state)
        for i, e in enumerate(identity_errors(state)):
            ident[i] = max(ident[i], e)
        return row

    res = run_flow(u0, grid, stepper, hooks=(hook,), cadence=cadence)
    out.append(CheckResult("run_not_aborted", res.reason != "aborted", float(res.reason == "aborted"), 0.0,
                           res.reason if res.error is None else str(res.error)))
    out.append(CheckResult("normal_identity", ident[0] <= 1e-10, ident[0], 1e-10))
    out.append(CheckResult("metric_inverse", ident[1] <= 1e-12, ident[1], 1e-12))
    out.append(CheckResult("metric_determinant", ident[2] <= 1e-10, ident[2], 1e-10))
    # steep initial data is under-resolved, so the flux balance is judged on the settled state
    num, norm = flux_identity_residual(res.state)
    flux = num / norm if norm > 1e-12 else 0.0
    out.append(CheckResult("flux_identity", flux <= 2e-2, flux, 2e-2, "final state"))

    rows = rec.rows
    resid, accum, bound_ok, drop = energy_identity_residual(rows)
    lim = 1e-2 * abs(drop) + 1e-12
    out.append(CheckResult("energy_identity", resid <= lim, resid, lim))
    out.append(CheckResult("energy_bound", bound_ok, accum, rows[0].area * 1.02))

    drift = res.max_increase + res.min_decrease
    lim = 1e-6 * max(osc0, 1e-300)
    out.append(CheckResult("extremum_monotone", drift <= lim or drift == 0.0, drift, lim))

    r_min = float(np.min(grid.r))
    ls = level_set_accumulate(rows, r_min)
    worst = float(np.max((ls.measures - 2 * ls.tau_top_spacetime)[ls.eligible], initial=-np.inf))
    out.append(CheckResult("level_set_inequality", ls.all_hold, worst, 1e-8,
                           f"{int(ls.eligible.sum())} eligible levels"))

    h0 = rows[0].h2v2_max
    hmax = max(r.h2v2_max for r in rows)
    cap = h2v2_cap_factor * h0
    out.append(CheckResult("h2v2_cap", h0 == 0.0 and hmax <= 1e-20 or hmax <= cap, hmax, cap))
    return out


def format_table(results) -> str:
    w = max(len(r.name) for r in results)
    lines = [f"{'check'.ljust(w)}  status  {'value':>12}  {'limit':>12}"]
    for r in results:
        line = f"{r.name.ljust(w)}  {r.status:6}  {r.value:12.4g}  {r.limit:12.4g}"
        if r.note:
            line += f"  {r.note}"
        lines.append(line)
    return "\n".join(lines)
