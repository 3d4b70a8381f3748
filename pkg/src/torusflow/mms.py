"""Manufactured solutions and the analytic operator oracle.

The oracle evaluates the flow operator

    N(u) = g^{ij} D_ij u + (D_r u / r)(1 + 1/vt^2)

from hand-coded first and second derivatives of a closed-form field, so it
shares no code with the stencils in :mod:`torusflow.kernels`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .flow import GraphState, StepperConfig, run_flow
from .geometry import ProfileCurve, build_grid

__all__ = [
    "ClosedForm",
    "ManufacturedCase",
    "StudyResult",
    "oracle_operator",
    "constant_field",
    "cosine_1d",
    "radial_cosine",
    "wrap_field",
    "square_field",
    "steady_case",
    "convergence_study",
]


@dataclass(frozen=True)
class ClosedForm:
    """Closed-form field with derivatives in half-plane coordinates ``(y, r)``.

    ``grad`` returns ``(u_y, u_r)`` and ``hess`` returns ``(u_yy, u_yr, u_rr)``.
    """

    value: Callable
    grad: Callable
    hess: Callable
    dt: Callable = lambda y, r, t: np.zeros(np.broadcast(y, r).shape)
    description: str = ""

    def __call__(self, y, r, t=0.0):
        return self.value(y, r, t)


def oracle_operator(field: ClosedForm, y, r, t=0.0):
    """``N(u)`` at points ``(y, r)`` by direct evaluation of the analytic derivatives."""
    y = np.asarray(y, dtype=float)
    r = np.asarray(r, dtype=float)
    uy, ur = field.grad(y, r, t)
    uyy, uyr, urr = field.hess(y, r, t)
    vt2 = 1.0 + r * r * (uy * uy + ur * ur)
    g11 = 1.0 - r * r * uy * uy / vt2
    g12 = -r * r * uy * ur / vt2
    g22 = 1.0 - r * r * ur * ur / vt2
    return g11 * uyy + 2.0 * g12 * uyr + g22 * urr + ur / r * (1.0 + 1.0 / vt2)


def _zeros(y, r):
    return np.zeros(np.broadcast(np.asarray(y, float), np.asarray(r, float)).shape)


def constant_field(c: float) -> ClosedForm:
    return ClosedForm(
        value=lambda y, r, t: _zeros(y, r) + c,
        grad=lambda y, r, t: (_zeros(y, r), _zeros(y, r)),
        hess=lambda y, r, t: (_zeros(y, r),) * 3,
        description=f"u = {c!r}",
    )


def cosine_1d(amplitude: float, r0: float, r1: float, k: int = 1) -> ClosedForm:
    """``A cos(k pi (r - r0) / (r1 - r0))``; zero slope at both ends."""
    w = k * math.pi / (r1 - r0)

    def value(y, r, t):
        return amplitude * np.cos(w * (np.asarray(r) - r0)) + 0.0 * np.asarray(y)

    def grad(y, r, t):
        return _zeros(y, r), -amplitude * w * np.sin(w * (np.asarray(r) - r0)) + _zeros(y, r)

    def hess(y, r, t):
        z = _zeros(y, r)
        return z, z, -amplitude * w * w * np.cos(w * (np.asarray(r) - r0)) + z

    return ClosedForm(value, grad, hess, description=f"u = {amplitude!r} cos({k} pi (r - {r0!r}) / {r1 - r0!r})")


def _radial(center, a, f, f1, f2, f1_over_s0, description):
    """Field ``f(s)`` of the polar coordinate ``s = |x - center| / a``.

    ``f1_over_s0`` is the limit of ``f'(s)/s`` at the center.
    """
    cy, cr = center

    def parts(y, r):
        dy = np.asarray(y, dtype=float) - cy
        dr = np.asarray(r, dtype=float) - cr
        rho = np.hypot(dy, dr)
        s = rho / a
        safe = np.where(rho > 0, rho, 1.0)
        ey = np.where(rho > 0, dy / safe, 0.0)
        er = np.where(rho > 0, dr / safe, 0.0)
        return s, ey, er

    def value(y, r, t):
        return f(parts(y, r)[0])

    def grad(y, r, t):
        s, ey, er = parts(y, r)
        d = f1(s) / a
        return d * ey, d * er

    def hess(y, r, t):
        s, ey, er = parts(y, r)
        fs = np.where(s > 0, f1(s) / np.where(s > 0, s, 1.0), f1_over_s0)
        rad = f2(s) / a**2
        tan = fs / a**2
        # rad * e e^T + tan * (I - e e^T); at the center both equal f''(0)/a^2
        return (rad * ey * ey + tan * (1 - ey * ey),
                (rad - tan) * ey * er,
                rad * er * er + tan * (1 - er * er))

    return ClosedForm(value, grad, hess, description=description)


def radial_cosine(amplitude: float, center, a: float, k: int = 1) -> ClosedForm:
    """``A cos(k pi s)`` on the disk of radius ``a``; smooth at the center, zero slope at ``s = 1``."""
    w = k * math.pi
    return _radial(
        center, a,
        lambda s: amplitude * np.cos(w * s),
        lambda s: -amplitude * w * np.sin(w * s),
        lambda s: -amplitude * w * w * np.cos(w * s),
        -amplitude * w * w,
        f"u = {amplitude!r} cos({k} pi s)",
    )


def wrap_field(amplitude: float, center, a: float) -> ClosedForm:
    """Multi-wrap profile ``A (1 + cos(pi s)) / 2``."""
    half = 0.5 * amplitude
    return _radial(
        center, a,
        lambda s: half * (1 + np.cos(math.pi * s)),
        lambda s: -half * math.pi * np.sin(math.pi * s),
        lambda s: -half * math.pi**2 * np.cos(math.pi * s),
        -half * math.pi**2,
        f"u = {amplitude!r} (1 + cos(pi s)) / 2",
    )


def square_field() -> ClosedForm:
    """``u = y^2``, for which ``N(u) = 2 / vt^2``."""
    return ClosedForm(
        value=lambda y, r, t: np.asarray(y, float) ** 2 + 0.0 * np.asarray(r, float),
        grad=lambda y, r, t: (2.0 * np.asarray(y, float) + _zeros(y, r), _zeros(y, r)),
        hess=lambda y, r, t: (_zeros(y, r) + 2.0, _zeros(y, r), _zeros(y, r)),
        description="u = y^2",
    )


@dataclass(frozen=True)
class ManufacturedCase:
    u_star: ClosedForm
    description: str = ""

    def forcing(self, y, r, t=0.0):
        """``f = d/dt u* - N(u*)``, so ``u*`` solves ``du/dt = N(u) + f``."""
        return self.u_star.dt(y, r, t) - oracle_operator(self.u_star, y, r, t)


def steady_case(u_star: ClosedForm) -> ManufacturedCase:
    return ManufacturedCase(u_star, f"steady {u_star.description}")


@dataclass
class StudyResult:
    resolutions: list
    h: list
    errors: list
    orders: list = field(default_factory=list)

    def rows(self):
        out = []
        for i, (res, h, e) in enumerate(zip(self.resolutions, self.h, self.errors)):
            out.append({
                "level": i,
                "resolution": "x".join(str(n) for n in np.atleast_1d(res)),
                "h": h,
                "error_linf": e,
                "order": self.orders[i - 1] if i else None,
            })
        return out

    @property
    def exact(self) -> bool:
        return all(e == 0.0 for e in self.errors)


def _order(e_coarse, e_fine):
    if e_coarse == 0.0 and e_fine == 0.0:
        return math.inf
    if e_fine == 0.0 or e_coarse == 0.0:
        return math.nan
    return math.log2(e_coarse / e_fine)


def convergence_study(case: ManufacturedCase, profile: ProfileCurve, base_resolution,
                      levels: int = 3, t_final: float = 0.05,
                      cfg: StepperConfig | None = None) -> StudyResult:
    """Run ``du/dt = N(u) + f`` from ``u*(., 0)`` to ``t_final`` on halved meshes.

    The 1D node count goes ``n, 2n - 1, 4n - 3, ...``; 2D doubles both ``ns`` and ``nphi``.
    Errors are ``max |u - u*(., t_final)|`` over the nodes.
    """
    if levels < 3:
        raise ValueError(f"levels ≥ 3 required, got {levels}")
    if cfg is None:
        cfg = StepperConfig(sigma=0.2, scheme="euler" if profile.dim == 1 else "rkl2",
                            stages=32, t_final=t_final, osc_tol=0.0)
    else:
        cfg = StepperConfig(**{**cfg.__dict__, "t_final": t_final, "osc_tol": 0.0})
    result = StudyResult([], [], [])
    for lev in range(levels):
        if profile.dim == 1:
            n = (int(np.atleast_1d(base_resolution)[0]) - 1) * 2**lev + 1
            res = n
        else:
            ns, nphi = base_resolution
            res = (ns * 2**lev, nphi * 2**lev)
        grid = build_grid(profile, res)
        u0 = case.u_star(grid.y, grid.r, 0.0)
        if all(case.u_star.dt(grid.y, grid.r, 0.0).ravel() == 0):
            forcing = case.forcing(grid.y, grid.r, 0.0)
        else:
            forcing = _TimeForcing(case, grid)
        out = run_flow(GraphState.from_field(grid, u0), grid, cfg, forcing=forcing, raise_on_abort=True)
        exact = case.u_star(grid.y, grid.r, out.state.t)
        result.resolutions.append(res)
        result.h.append(grid.h_min if profile.dim == 1 else grid.ds)
        result.errors.append(float(np.max(np.abs(out.state.u - exact))))
    result.orders = [_order(a, b) for a, b in zip(result.errors, result.errors[1:])]
    return result


class _TimeForcing:
    """Forcing evaluated at the start time of each step."""

    def __init__(self, case, grid):
        self.case, self.grid = case, grid

    def at(self, t):
        return self.case.forcing(self.grid.y, self.grid.r, t)
