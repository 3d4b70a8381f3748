"""Graphical mean curvature flow inside a torus of revolution.

The flowing hypersurface is the graph of the rotation angle ``u`` over the
cross-section, ``F(y, r) = y + r (cos u e_n + sin u e_{n+1})``, and evolves by

    du/dt = g^{ij} D_ij u + (D_r u / r) (1 + 1/vt^2) = -H vt / r,
    gamma . Du = 0 on the boundary,

with ``g_ij = delta_ij + r^2 D_i u D_j u`` and ``vt = sqrt(1 + r^2 |Du|^2)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .geometry import DomainGrid

__all__ = [
    "FlowAbort",
    "StepperConfig",
    "GraphState",
    "GeomFields",
    "FlowResult",
    "apply_neumann",
    "gradient",
    "vtilde",
    "inverse_metric",
    "flow_rhs",
    "mean_curvature",
    "geom_fields",
    "embed",
    "embed_point",
    "normal_vector",
    "rotation_field",
    "cfl_dt",
    "step",
    "run_flow",
    "boundary_normal_derivative",
    "compatibility_defect",
]

log = logging.getLogger(__name__)

SCHEMES = ("euler", "rk4", "rkl2")


class FlowAbort(RuntimeError):
    """Raised when a step produces a blown-up gradient or non-finite data."""

    def __init__(self, message, t, location=None):
        super().__init__(message)
        self.t = t
        self.location = location


@dataclass
class StepperConfig:
    """Time stepping controls.

    ``stages`` is only used by the ``rkl2`` super-time-stepping scheme, whose
    step is ``cfl_dt * (stages**2 + stages - 2) / 4``.
    """

    sigma: float = 0.2
    scheme: str = "euler"
    t_final: float = 1.0
    vtilde_cap: float = 1e3
    osc_tol: float = 1e-4
    stages: int = 16
    max_steps: int | None = None

    def __post_init__(self):
        if not 0 < self.sigma <= 0.5:
            raise ValueError(f"sigma ∈ (0, 0.5]: got {self.sigma}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}: got {self.scheme!r}")
        if not self.t_final > 0:
            raise ValueError(f"t_final must be > 0: got {self.t_final}")
        if not self.vtilde_cap > 1:
            raise ValueError(f"vtilde_cap must be > 1: got {self.vtilde_cap}")
        if not self.osc_tol >= 0:
            raise ValueError(f"osc_tol must be >= 0: got {self.osc_tol}")
        if self.stages < 2:
            raise ValueError(f"stages must be >= 2: got {self.stages}")

    @property
    def step_factor(self) -> float:
        if self.scheme == "rkl2":
            s = self.stages
            return (s * s + s - 2) / 4.0
        return 1.0


@dataclass(eq=False)
class GraphState:
    """Angle field ``u`` on a grid at time ``t``, stored with its ghost layer."""

    grid: DomainGrid
    padded: np.ndarray
    t: float = 0.0

    @classmethod
    def from_field(cls, grid: DomainGrid, u, t: float = 0.0) -> "GraphState":
        u = np.asarray(u, dtype=float)
        if u.shape != grid.shape:
            u = np.broadcast_to(u, grid.shape)
        padded = np.zeros(tuple(n + 2 for n in grid.shape))
        state = cls(grid, padded, float(t))
        state.u[...] = u
        return apply_neumann(state)

    @property
    def u(self) -> np.ndarray:
        if self.grid.dim == 1:
            return self.padded[1:-1]
        return self.padded[1:-1, 1:-1]

    @property
    def ghost(self) -> np.ndarray:
        """Exterior values: both 1D mirror ghosts, or the 2D ring outside ``s = 1``."""
        if self.grid.dim == 1:
            return self.padded[[0, -1]]
        return self.padded[-1, 1:-1]

    def copy(self) -> "GraphState":
        return GraphState(self.grid, self.padded.copy(), self.t)


@dataclass
class GeomFields:
    Du: np.ndarray
    vtilde: np.ndarray
    ginv: np.ndarray
    H: np.ndarray
    w: np.ndarray
    Q: np.ndarray
    rhs: np.ndarray

    @property
    def v(self):
        return 1.0 / self.w


def _fill(grid: DomainGrid, padded: np.ndarray):
    be = kernels.active()
    if grid.dim == 1:
        be.fill_1d(padded)
    else:
        be.fill_2d(padded, grid.ds, grid.dphi, grid.nb_ratio)


def _rhs(grid: DomainGrid, padded: np.ndarray, out: np.ndarray, vt2: np.ndarray):
    be = kernels.active()
    if grid.dim == 1:
        be.rhs_1d(padded, grid.r, grid.h, out, vt2)
    else:
        be.rhs_2d(padded, grid.coef, grid.ds, grid.dphi, out, vt2)


def apply_neumann(state: GraphState) -> GraphState:
    """Refresh the ghost layer in place so that the discrete ``gamma . Du`` vanishes."""
    _fill(state.grid, state.padded)
    return state


def boundary_normal_derivative(state: GraphState) -> np.ndarray:
    """Discrete ``gamma . Du`` at the boundary from the current ghost layer.

    1D: central differences at the two end nodes (inner, outer).
    2D: at ``s = 1`` per ring angle, normal difference across the boundary and
    the tangential derivative extrapolated from the two outermost rings.
    """
    g = state.grid
    p = state.padded
    if g.dim == 1:
        d = (p[2:] - p[:-2]) / (2 * g.h)
        return np.array([-d[0], d[-1]])
    ns = g.shape[0]
    u_s = (p[ns + 1, 1:-1] - p[ns, 1:-1]) / g.ds
    up1 = (p[ns, 2:] - p[ns, :-2]) / (2 * g.dphi)
    up2 = (p[ns - 1, 2:] - p[ns - 1, :-2]) / (2 * g.dphi)
    return g.nb_alpha * u_s + g.nb_beta * (1.5 * up1 - 0.5 * up2)


def compatibility_defect(grid: DomainGrid, u0) -> float:
    """Largest one-sided normal derivative of raw initial data at the boundary."""
    u0 = np.asarray(u0, dtype=float)
    if grid.dim == 1:
        h = grid.h
        left = (-3 * u0[0] + 4 * u0[1] - u0[2]) / (2 * h)
        right = (3 * u0[-1] - 4 * u0[-2] + u0[-3]) / (2 * h)
        return float(max(abs(left), abs(right)))
    # s-derivative extrapolated to s = 1 from rings at distance ds/2, 3ds/2, 5ds/2
    u_s = (2 * u0[-1] - 3 * u0[-2] + u0[-3]) / grid.ds
    ring = u0[-1]
    u_p = (np.roll(ring, -1) - np.roll(ring, 1)) / (2 * grid.dphi)
    return float(np.max(np.abs(grid.nb_alpha * u_s + grid.nb_beta * u_p)))


def gradient(state: GraphState) -> np.ndarray:
    """Second-order central gradient in half-plane components, shape ``(*shape, dim)``.

    The last component is always the ``r`` derivative.
    """
    g = state.grid
    p = state.padded
    if g.dim == 1:
        return ((p[2:] - p[:-2]) / (2 * g.h))[..., None]
    us = (p[2:, 1:-1] - p[:-2, 1:-1]) / (2 * g.ds)
    up = (p[1:-1, 2:] - p[1:-1, :-2]) / (2 * g.dphi)
    return g.jinv[..., 0, :] * us[..., None] + g.jinv[..., 1, :] * up[..., None]


def vtilde(grid: DomainGrid, Du):
    """Return ``(vt, v, Q)`` with ``vt = sqrt(1 + r^2 |Du|^2)``, ``v = vt / r``, ``Q = log v``."""
    Du = np.asarray(Du, dtype=float)
    r = np.asarray(grid.r if isinstance(grid, DomainGrid) else grid, dtype=float)
    vt = np.sqrt(1.0 + r * r * np.sum(Du * Du, axis=-1))
    v = vt / r
    return vt, v, np.log(v)


def inverse_metric(grid: DomainGrid, Du) -> np.ndarray:
    """``g^{ij} = delta_ij - r^2 D_i u D_j u / vt^2`` with shape ``(*shape, dim, dim)``.

    Evaluated in cofactor form ``adj(g) / det g`` (``det g = vt^2``), which keeps
    the diagonal free of the ``1 - (1 - 1/vt^2)`` cancellation for steep data.
    """
    Du = np.asarray(Du, dtype=float)
    r = np.asarray(grid.r if isinstance(grid, DomainGrid) else grid, dtype=float)
    dim = Du.shape[-1]
    r2 = r * r
    sq = r2[..., None] * Du * Du
    vt2 = 1.0 + np.sum(sq, axis=-1)
    out = np.empty(Du.shape + (dim,))
    if dim == 1:
        out[..., 0, 0] = 1.0 / vt2
        return out
    out[..., 0, 0] = (1.0 + sq[..., 1]) / vt2
    out[..., 1, 1] = (1.0 + sq[..., 0]) / vt2
    out[..., 0, 1] = out[..., 1, 0] = -r2 * Du[..., 0] * Du[..., 1] / vt2
    return out


def metric(grid: DomainGrid, Du) -> np.ndarray:
    Du = np.asarray(Du, dtype=float)
    r = np.asarray(grid.r if isinstance(grid, DomainGrid) else grid, dtype=float)
    dim = Du.shape[-1]
    return np.eye(dim) + (r * r)[..., None, None] * Du[..., :, None] * Du[..., None, :]


def flow_rhs(state: GraphState) -> np.ndarray:
    out = np.empty(state.grid.shape)
    vt2 = np.empty(state.grid.shape)
    _rhs(state.grid, state.padded, out, vt2)
    return out


def mean_curvature(state: GraphState) -> np.ndarray:
    """``H = -(r / vt) * du/dt`` (orientation fixed by ``<nu, tau> > 0``)."""
    Du = gradient(state)
    vt, _, _ = vtilde(state.grid, Du)
    return -(state.grid.r / vt) * flow_rhs(state)


def geom_fields(state: GraphState) -> GeomFields:
    g = state.grid
    Du = gradient(state)
    vt, v, Q = vtilde(g, Du)
    rhs = flow_rhs(state)
    H = -(g.r / vt) * rhs
    return GeomFields(Du=Du, vtilde=vt, ginv=inverse_metric(g, Du), H=H, w=1.0 / v, Q=Q, rhs=rhs)


def embed_point(y, r, u, dim: int = 2) -> np.ndarray:
    """Ambient position of the graph point over ``(y, r)``: ``R^2`` for dim 1, ``R^3`` for dim 2."""
    y, r, u = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (y, r, u)))
    if dim == 1:
        return np.stack([r * np.cos(u), r * np.sin(u)], axis=-1)
    return np.stack([y, r * np.cos(u), r * np.sin(u)], axis=-1)


def embed(state: GraphState, node=None) -> np.ndarray:
    g = state.grid
    pts = embed_point(g.y, g.r, state.u, g.dim)
    return pts if node is None else pts[node]


def rotation_field(u, dim: int = 2):
    """Unit radial field ``r_hat`` and rotation field ``tau`` at angle ``u``."""
    u = np.asarray(u, dtype=float)
    c, s = np.cos(u), np.sin(u)
    z = np.zeros_like(u)
    if dim == 1:
        return np.stack([c, s], axis=-1), np.stack([-s, c], axis=-1)
    return np.stack([z, c, s], axis=-1), np.stack([z, -s, c], axis=-1)


def normal_vector(state: GraphState, node=None) -> np.ndarray:
    """Unit normal built from the tangent frame, oriented so that ``<nu, tau> > 0``."""
    g = state.grid
    Du = gradient(state)
    rhat, tau = rotation_field(state.u, g.dim)
    r = g.r[..., None]
    if g.dim == 1:
        t_r = rhat + r * Du[..., 0:1] * tau
        nu = np.stack([-t_r[..., 1], t_r[..., 0]], axis=-1)
    else:
        e1 = np.zeros_like(rhat)
        e1[..., 0] = 1.0
        t_y = e1 + r * Du[..., 0:1] * tau
        t_r = rhat + r * Du[..., 1:2] * tau
        nu = np.cross(t_y, t_r)
    nu /= np.linalg.norm(nu, axis=-1, keepdims=True)
    flip = np.sum(nu * tau, axis=-1) < 0
    nu[flip] *= -1
    return nu if node is None else nu[node]


def cfl_dt(state, cfg: StepperConfig) -> float:
    """Base explicit step ``sigma * h_min^2`` (``state`` may also be a grid)."""
    if not 0 < cfg.sigma <= 0.5:
        raise ValueError(f"sigma out of range: sigma ∈ (0, 0.5], got {cfg.sigma}")
    grid = state.grid if isinstance(state, GraphState) else state
    return cfg.sigma * grid.h_min ** 2


# ------------------------------------------------------------------ stepping

def _rkl2_coefficients(s: int):
    """Coefficients of the second-order Runge-Kutta-Legendre scheme with ``s`` stages."""
    b = np.empty(s + 1)
    b[:3] = 1.0 / 3.0
    for j in range(2, s + 1):
        b[j] = (j * j + j - 2.0) / (2.0 * j * (j + 1.0))
    a = 1.0 - b
    w1 = 4.0 / (s * s + s - 2.0)
    mu = np.zeros(s + 1)
    nu = np.zeros(s + 1)
    mut = np.zeros(s + 1)
    gt = np.zeros(s + 1)
    mut[1] = b[1] * w1
    for j in range(2, s + 1):
        mu[j] = (2.0 * j - 1.0) / j * b[j] / b[j - 1]
        nu[j] = -(j - 1.0) / j * b[j] / b[j - 2]
        mut[j] = mu[j] * w1
        gt[j] = -a[j - 1] * mut[j]
    return mu, nu, mut, gt


class _Stepper:
    """Work arrays and stage logic shared by ``step`` and ``run_flow``."""

    def __init__(self, grid: DomainGrid, cfg: StepperConfig, forcing=None):
        self.grid = grid
        self.cfg = cfg
        # forcing: None, a fixed array, or an object with ``at(t)`` (held fixed over a step)
        self.forcing = forcing if forcing is None or hasattr(forcing, "at") else np.asarray(forcing, dtype=float)
        self._fcur = None if hasattr(forcing, "at") else self.forcing
        pshape = tuple(n + 2 for n in grid.shape)
        self.k = np.empty(grid.shape)
        self.vt2 = np.empty(grid.shape)
        self.stage = np.zeros(pshape)
        if cfg.scheme == "rk4":
            self.acc = np.empty(grid.shape)
            self.base = np.empty(grid.shape)
        elif cfg.scheme == "rkl2":
            self.coeffs = _rkl2_coefficients(cfg.stages)
            self.y0 = np.empty(grid.shape)
            self.l0 = np.empty(grid.shape)
            self.d = [np.zeros(grid.shape) for _ in range(3)]
        self.last_vmax2 = 1.0

    def _interior(self, p):
        return p[1:-1] if self.grid.dim == 1 else p[1:-1, 1:-1]

    def tendency(self, padded, out, check=False, t=0.0):
        """Fill ghosts of ``padded`` and write ``L(u)`` into ``out``."""
        _fill(self.grid, padded)
        _rhs(self.grid, padded, out, self.vt2)
        if check:
            vmax2 = float(self.vt2.max())
            self.last_vmax2 = vmax2
            if not math.isfinite(vmax2) or not np.isfinite(out).all():
                raise FlowAbort(f"non-finite values at t={t!r}", t)
            if vmax2 > self.cfg.vtilde_cap ** 2:
                loc = np.unravel_index(int(np.argmax(self.vt2)), self.vt2.shape)
                where = self._describe(loc)
                raise FlowAbort(
                    f"gradient blow-up at t={t!r}: vtilde={math.sqrt(vmax2):.6g} > cap "
                    f"{self.cfg.vtilde_cap:.6g} at {where}", t, loc)
        if self._fcur is not None:
            out += self._fcur
        return out

    def _describe(self, loc):
        g = self.grid
        if g.dim == 1:
            return f"node {loc[0]} (r={g.r[loc]:.6g})"
        return f"node {tuple(int(i) for i in loc)} (y={g.y[loc]:.6g}, r={g.r[loc]:.6g})"

    def advance(self, padded, t, dt):
        """Advance ``padded`` in place by one step of size ``dt``; ghosts refreshed on exit."""
        u = self._interior(padded)
        scheme = self.cfg.scheme
        if hasattr(self.forcing, "at"):
            self._fcur = self.forcing.at(t)
        if scheme == "euler":
            self.tendency(padded, self.k, check=True, t=t)
            u += dt * self.k
        elif scheme == "rk4":
            st = self.stage
            su = self._interior(st)
            self.base[...] = u
            self.tendency(padded, self.k, check=True, t=t)
            self.acc[...] = self.k
            for c, w in ((0.5, 2.0), (0.5, 2.0), (1.0, 1.0)):
                np.multiply(self.k, c * dt, out=su)
                su += self.base
                self.tendency(st, self.k)
                self.acc += w * self.k
            u += (dt / 6.0) * self.acc
        else:
            self._rkl2(padded, t, dt)
        _fill(self.grid, padded)

    def _rkl2(self, padded, t, dt):
        mu, nu, mut, gt = self.coeffs
        s = self.cfg.stages
        u = self._interior(padded)
        self.y0[...] = u
        self.tendency(padded, self.l0, check=True, t=t)
        st = self.stage
        su = self._interior(st)
        d2, d1, dj = self.d
        d2[...] = 0.0
        np.multiply(self.l0, mut[1] * dt, out=d1)
        np.add(self.y0, d1, out=su)
        combine = kernels.active().rkl2_stage
        views = (self.y0, self.k, self.l0)
        if self.grid.dim == 1:
            d2, d1, dj = d2[None, :], d1[None, :], dj[None, :]
            out = su[None, :]
            views = tuple(v[None, :] for v in views)
        else:
            out = su
        y0, k, l0 = views
        for j in range(2, s + 1):
            self.tendency(st, self.k)
            combine(out, dj, d1, d2, y0, k, l0, mu[j], nu[j], mut[j] * dt, gt[j] * dt)
            d2, d1, dj = d1, dj, d2
        u[...] = su


def step(state: GraphState, cfg: StepperConfig, dt: float | None = None, forcing=None) -> GraphState:
    """One Euler / RK4 / RKL2 step; returns a new state with ``t`` advanced."""
    stepper = _Stepper(state.grid, cfg, forcing)
    if dt is None:
        dt = cfl_dt(state, cfg) * cfg.step_factor
    out = state.copy()
    stepper.advance(out.padded, out.t, dt)
    out.t = state.t + dt
    return out


@dataclass
class FlowResult:
    state: GraphState
    reason: str
    steps: int
    osc0: float
    max_increase: float = 0.0
    min_decrease: float = 0.0
    vtilde_max: float = 1.0
    error: FlowAbort | None = None
    samples: list = field(default_factory=list)

    @property
    def osc(self) -> float:
        return float(np.ptp(self.state.u))


def run_flow(u0, grid: DomainGrid, cfg: StepperConfig,
             hooks: Sequence[Callable[[GraphState], object]] = (),
             cadence: int = 10, forcing=None, raise_on_abort: bool = False,
             step_hooks: Sequence[Callable[[GraphState, int], None]] = ()) -> FlowResult:
    """Integrate until ``t_final`` or ``osc(u) < osc_tol``.

    ``hooks`` are called with the state at step 0, every ``cadence`` steps and
    at termination; their return values are collected in ``FlowResult.samples``.
    ``step_hooks`` run after every step with ``(state, step_index)``.
    Extremum monotonicity is tracked on every step.
    """
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    if isinstance(u0, GraphState):
        state = u0.copy()
    else:
        u0 = np.asarray(u0, dtype=float)
        if not np.all(np.isfinite(u0)):
            raise ValueError("u0 must be finite")
        u0 = np.broadcast_to(u0, grid.shape)
        r0, r1 = grid.profile.r_range
        defect = compatibility_defect(grid, u0) * (r1 - r0) / max(float(np.ptp(u0)), 1e-300)
        if defect > 5e-2:
            log.warning("initial data not Neumann-compatible (relative |gamma.Du0| ~ %.3g); "
                        "the first steps will mollify it", defect)
        state = GraphState.from_field(grid, u0)
    stepper = _Stepper(grid, cfg, forcing)
    base_dt = cfl_dt(grid, cfg) * cfg.step_factor
    u = state.u
    umax, umin = float(u.max()), float(u.min())
    res = FlowResult(state=state, reason="t_final", steps=0, osc0=umax - umin)

    def sample():
        for hook in hooks:
            res.samples.append(hook(state))

    sample()
    last_sampled = 0
    n = 0
    res.vtilde_max = float(np.max(vtilde(grid, gradient(state))[0]))
    if umax - umin < cfg.osc_tol:
        res.reason = "converged"
        return res
    eps_t = 1e-12 * cfg.t_final
    while state.t < cfg.t_final - eps_t:
        if cfg.max_steps is not None and n >= cfg.max_steps:
            break
        dt = min(base_dt, cfg.t_final - state.t)
        try:
            stepper.advance(state.padded, state.t, dt)
        except FlowAbort as exc:
            res.reason = "aborted"
            res.error = exc
            if raise_on_abort:
                raise
            break
        n += 1
        state.t = state.t + dt
        res.vtilde_max = max(res.vtilde_max, math.sqrt(stepper.last_vmax2))
        new_max, new_min = float(u.max()), float(u.min())
        res.max_increase += max(0.0, new_max - umax)
        res.min_decrease += max(0.0, umin - new_min)
        umax, umin = new_max, new_min
        for hook in step_hooks:
            hook(state, n)
        if umax - umin < cfg.osc_tol:
            res.reason = "converged"
            break
        if n % cadence == 0:
            sample()
            last_sampled = n
    res.steps = n
    if res.reason != "aborted":
        vt_end = float(np.max(vtilde(grid, gradient(state))[0]))
        res.vtilde_max = max(res.vtilde_max, vt_end)
    if last_sampled != n:
        sample()
    return res
