"""Monitored integrals and extrema along a run.

All integrals use the midpoint rule with the grid cell volumes; integrals
against the surface measure weight by ``vt`` (``dmu = vt dx``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .flow import GraphState, geom_fields, normal_vector, rotation_field

__all__ = [
    "DiagnosticsRow",
    "Recorder",
    "integrate_dx",
    "integrate_dmu",
    "sample",
    "flux_identity_residual",
    "energy_identity_residual",
    "stahl_boundary_residual",
    "level_set_accumulate",
    "LevelSetSummary",
    "DEFAULT_LEVELS",
]

DEFAULT_LEVELS = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)


@dataclass
class DiagnosticsRow:
    t: float
    area: float
    u_min: float
    u_max: float
    vtilde_max: float
    Q_max: float
    h2v2_max: float
    flux_Hr: float
    flux_abs: float
    tau_top: float
    kappa: float
    h2_integral: float
    energy_accum: float
    level_measures: tuple = ()

    @property
    def osc(self) -> float:
        return self.u_max - self.u_min

    def as_record(self) -> dict:
        rec = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "level_measures"}
        rec["osc"] = self.osc
        for k, m in self.level_measures:
            rec[f"level[{k!r}]"] = m
        return rec


def integrate_dx(grid, f) -> float:
    return float(np.sum(np.asarray(f) * grid.vol))


def integrate_dmu(grid, f, vt) -> float:
    return float(np.sum(np.asarray(f) * vt * grid.vol))


def sample(state: GraphState, levels=DEFAULT_LEVELS, prev: DiagnosticsRow | None = None) -> DiagnosticsRow:
    """Diagnostics of one state; ``prev`` continues the time-trapezoid energy sum."""
    g = state.grid
    gf = geom_fields(state)
    vt, H, u, r = gf.vtilde, gf.H, state.u, g.r
    v = vt / r
    du2 = np.sum(gf.Du * gf.Du, axis=-1)
    tau2 = r * r * du2 / (vt * vt)
    h2 = integrate_dmu(g, H * H, vt)
    accum = 0.0
    if prev is not None:
        accum = prev.energy_accum + 0.5 * (state.t - prev.t) * (prev.h2_integral + h2)
    cell = vt * g.vol
    lev = tuple((float(k), float(np.sum(cell[gf.Q > k]))) for k in levels)
    return DiagnosticsRow(
        t=state.t,
        area=float(np.sum(cell)),
        u_min=float(u.min()),
        u_max=float(u.max()),
        vtilde_max=float(vt.max()),
        Q_max=float(gf.Q.max()),
        h2v2_max=float(np.max(H * H * v * v)),
        flux_Hr=integrate_dx(g, H * r),
        flux_abs=integrate_dx(g, np.abs(H) * r),
        tau_top=integrate_dmu(g, tau2, vt),
        kappa=integrate_dmu(g, u * u * r * r, vt),
        h2_integral=h2,
        energy_accum=accum,
        level_measures=lev,
    )


@dataclass
class Recorder:
    """Run hook collecting a time series of diagnostics rows."""

    levels: tuple = DEFAULT_LEVELS
    rows: list = field(default_factory=list)

    def __call__(self, state: GraphState) -> DiagnosticsRow:
        prev = self.rows[-1] if self.rows else None
        if prev is not None and state.t == prev.t:
            return prev
        row = sample(state, self.levels, prev)
        self.rows.append(row)
        return row


def flux_identity_residual(state: GraphState):
    """Return ``(|int H r dx|, int |H| r dx)``; the first vanishes for the exact flow."""
    gf = geom_fields(state)
    g = state.grid
    return abs(integrate_dx(g, gf.H * g.r)), integrate_dx(g, np.abs(gf.H) * g.r)


def energy_identity_residual(series, tol: float = 0.02):
    """Area balance ``|area(T) - area(0) + int_0^T int H^2 dmu dt|``.

    Returns ``(residual, energy_accum, bound_ok, area_drop)`` where
    ``bound_ok`` checks ``energy_accum <= area(0) * (1 + tol)``.
    """
    first, last = series[0], series[-1]
    accum = last.energy_accum - first.energy_accum
    drop = first.area - last.area
    residual = abs(-drop + accum)
    return residual, accum, accum <= first.area * (1 + tol), drop


def stahl_boundary_residual(state: GraphState) -> float:
    """Max over both ends of ``|d_mu H - H A(nu, nu)|`` for the 1D flow.

    ``A`` is the boundary curvature with the convex-positive sign, i.e.
    ``-A(tau, tau)`` of ``sigma_rotational_eigenvalue(normalized=True)``.
    Follows from differentiating the Neumann condition in time.
    """
    g = state.grid
    if g.dim != 1:
        raise ValueError("stahl_boundary_residual is implemented for the 1D flow only")
    gf = geom_fields(state)
    H, vt, h = gf.H, gf.vtilde, g.h
    dH0 = (-3 * H[0] + 4 * H[1] - H[2]) / (2 * h)
    dH1 = (3 * H[-1] - 4 * H[-2] + H[-3]) / (2 * h)
    nu = normal_vector(state)
    _, tau = rotation_field(state.u, 1)
    out = 0.0
    for idx, dHdr, mu_r, a_tt in ((0, dH0, -1.0, g.sigma_eig[0]), (-1, dH1, 1.0, g.sigma_eig[1])):
        r = g.r[idx]
        curv = a_tt / (r * r)  # A(tau, tau) with the torus-section sign
        nt = float(np.dot(nu[idx], tau[idx]))
        lhs = mu_r * dHdr / vt[idx]
        rhs = H[idx] * (-curv) * nt * nt
        out = max(out, abs(lhs - rhs))
    return out


@dataclass
class LevelSetSummary:
    ks: np.ndarray
    measures: np.ndarray
    tau_top_spacetime: float
    eligible: np.ndarray
    holds: np.ndarray

    @property
    def all_hold(self) -> bool:
        return bool(np.all(self.holds[self.eligible]))


def _trapezoid(t, y):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 2:
        return np.zeros(y.shape[1:]) if y.ndim > 1 else 0.0
    dt = np.diff(t)
    return np.tensordot(dt, 0.5 * (y[1:] + y[:-1]), axes=(0, 0))


def level_set_accumulate(series, r_min: float, slack: float = 1e-8) -> LevelSetSummary:
    """Spacetime measures of ``{Q > k}`` against ``2 * int int |tau^T|^2 dmu dt``.

    A level ``k`` is eligible when ``exp(k) * r_min >= sqrt(2)``, i.e. every
    point with ``Q > k`` has ``<nu, tau> <= 1/sqrt(2)``.
    """
    t = [row.t for row in series]
    ks = np.array([k for k, _ in series[0].level_measures])
    m = _trapezoid(t, [[mm for _, mm in row.level_measures] for row in series])
    tt = float(_trapezoid(t, [row.tau_top for row in series]))
    eligible = np.exp(ks) * r_min >= math.sqrt(2.0)
    holds = np.asarray(m) <= 2.0 * tt + slack
    return LevelSetSummary(ks, np.asarray(m, dtype=float), tt, eligible, holds)
