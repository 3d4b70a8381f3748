"""Torus of revolution: cross-section profile, boundary geometry, grids.

Half-plane points are written ``(y, r)``: ``y`` is the symmetry coordinate
(absent in the one-dimensional case) and ``r > 0`` the distance to the
rotation axis.  A profile is star-shaped about its center::

    P(phi) = center + rho(phi) * (cos phi, sin phi)

with ``rho`` a finite trigonometric polynomial.  The one-dimensional
"profile" is the interval ``[r0, r1]``, i.e. the same formula evaluated on
the 0-sphere ``phi in {pi, 0}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ProfileError",
    "GridError",
    "ProfileCurve",
    "DomainGrid",
    "make_circle_profile",
    "make_star_profile",
    "make_interval_profile",
    "profile_normal",
    "sigma_rotational_eigenvalue",
    "build_grid",
]

_DENSE_SAMPLES = 4096


class ProfileError(ValueError):
    """Invalid cross-section profile."""


class GridError(ValueError):
    """Invalid grid request or folded mapping."""


@dataclass(frozen=True)
class ProfileCurve:
    kind: str
    center: tuple[float, float]
    cos_coeffs: tuple[float, ...]
    sin_coeffs: tuple[float, ...] = ()

    @property
    def dim(self) -> int:
        return 1 if self.kind == "interval" else 2

    @property
    def r_range(self) -> tuple[float, float]:
        if self.kind == "interval":
            return self.center[1] - self.cos_coeffs[0], self.center[1] + self.cos_coeffs[0]
        phi = np.linspace(0.0, 2 * np.pi, _DENSE_SAMPLES, endpoint=False)
        r = self.point(phi)[1]
        return float(r.min()), float(r.max())

    def rho(self, phi, deriv: int = 0):
        """Radial function and its first or second derivative."""
        phi = np.asarray(phi, dtype=float)
        out = np.zeros_like(phi)
        if deriv == 0:
            out = out + self.cos_coeffs[0]
        for m, am in enumerate(self.cos_coeffs[1:], start=1):
            out = out + am * _dtrig(np.cos, m, phi, deriv)
        for m, bm in enumerate(self.sin_coeffs, start=1):
            out = out + bm * _dtrig(np.sin, m, phi, deriv)
        return out

    def point(self, phi):
        """Boundary point ``(y, r)`` at parameter ``phi``."""
        phi = np.asarray(phi, dtype=float)
        rho = self.rho(phi)
        if self.kind == "interval":
            return np.zeros_like(phi), self.center[1] + rho * np.cos(phi)
        return self.center[0] + rho * np.cos(phi), self.center[1] + rho * np.sin(phi)


def _dtrig(fn, m, phi, deriv):
    # derivatives of cos(m phi) / sin(m phi)
    if deriv == 0:
        return fn(m * phi)
    if deriv == 1:
        return -m * np.sin(m * phi) if fn is np.cos else m * np.cos(m * phi)
    if deriv == 2:
        return -m * m * fn(m * phi)
    raise ValueError("deriv must be 0, 1 or 2")


def make_circle_profile(center, a: float) -> ProfileCurve:
    cy, cr = float(center[0]), float(center[1])
    if not a > 0:
        raise ProfileError(f"nonpositive radius: a = {a}")
    if cr - a <= 0:
        raise ProfileError(f"profile touches rotation axis: center_r - a = {cr - a} <= 0")
    return ProfileCurve("circle", (cy, cr), (float(a),))


def make_star_profile(center, coeffs) -> ProfileCurve:
    """Star-shaped profile with ``rho = a0 + sum(a_m cos m phi + b_m sin m phi)``.

    ``coeffs`` is either a mapping with keys ``a0, a1, b1, a2, ...`` or a pair
    ``(cos_coeffs, sin_coeffs)`` where ``cos_coeffs[0]`` is ``a0``.
    """
    if isinstance(coeffs, dict):
        unknown = [k for k in coeffs if not (len(k) > 1 and k[0] in "ab" and k[1:].isdigit())]
        if unknown or "b0" in coeffs:
            raise ProfileError(f"unrecognised coefficient keys: {sorted(unknown) or ['b0']}")
        top = max([int(k[1:]) for k in coeffs] + [0])
        cos_c = [float(coeffs.get(f"a{m}", 0.0)) for m in range(top + 1)]
        sin_c = [float(coeffs.get(f"b{m}", 0.0)) for m in range(1, top + 1)]
    else:
        cos_c, sin_c = (list(map(float, c)) for c in coeffs)
        if not cos_c:
            raise ProfileError("at least the constant coefficient a0 is required")
    prof = ProfileCurve("star", (float(center[0]), float(center[1])), tuple(cos_c), tuple(sin_c))
    phi = np.linspace(0.0, 2 * np.pi, _DENSE_SAMPLES, endpoint=False)
    rho = prof.rho(phi)
    if rho.min() <= 0:
        bad = phi[np.argmin(rho)]
        raise ProfileError(f"ρ ≤ 0: rho({bad:.6g}) = {rho.min():.6g}")
    if prof.point(phi)[1].min() <= 0:
        raise ProfileError("profile touches rotation axis: some boundary point has r <= 0")
    return prof


def make_interval_profile(r0: float, r1: float) -> ProfileCurve:
    r0, r1 = float(r0), float(r1)
    if not r0 > 0:
        raise ProfileError(f"profile touches rotation axis: r0 = {r0} <= 0")
    if not r1 > r0:
        raise ProfileError(f"nonpositive radius: need r0 < r1, got r0 = {r0}, r1 = {r1}")
    return ProfileCurve("interval", (0.0, 0.5 * (r0 + r1)), (0.5 * (r1 - r0),))


def profile_normal(profile: ProfileCurve, phi):
    """Outward unit normal ``(n_y, n_r)`` of the boundary curve at ``phi``."""
    phi = np.asarray(phi, dtype=float)
    if profile.kind == "interval":
        return np.zeros_like(phi), np.sign(np.cos(phi))
    rho, drho = profile.rho(phi), profile.rho(phi, 1)
    ty = drho * np.cos(phi) - rho * np.sin(phi)
    tr = drho * np.sin(phi) + rho * np.cos(phi)
    norm = np.hypot(ty, tr)
    # counterclockwise traversal: outward normal is the tangent turned clockwise
    return tr / norm, -ty / norm


def sigma_rotational_eigenvalue(profile: ProfileCurve, phi, normalized: bool = False):
    """Second fundamental form of the torus on the rotational direction.

    Returns ``A(r tau, r tau) = -r <mu, r_hat>``; with ``normalized=True``
    returns ``A(tau, tau) = -<mu, r_hat> / r`` instead.
    """
    _, r = profile.point(phi)
    _, mu_r = profile_normal(profile, phi)
    return -mu_r / r if normalized else -r * mu_r


@dataclass(frozen=True, eq=False)
class DomainGrid:
    """Discretized cross-section.

    1D: vertex nodes ``r_j`` on ``[r0, r1]`` (endpoints included).
    2D: cell-centered polar nodes ``x(s_j, phi_k)`` with the boundary at
    ``s = 1``.  ``jinv[..., a, i]`` holds ``d(s, phi)_a / d(y, r)_i``.
    """

    profile: ProfileCurve
    dim: int
    shape: tuple[int, ...]
    y: np.ndarray
    r: np.ndarray
    vol: np.ndarray
    h_min: float
    gamma: np.ndarray
    sigma_eig: np.ndarray
    boundary_r: np.ndarray
    ds: float = 0.0
    dphi: float = 0.0
    s: np.ndarray | None = None
    phi: np.ndarray | None = None
    jac: np.ndarray | None = None
    jinv: np.ndarray | None = None
    x_ss: np.ndarray | None = None
    x_sp: np.ndarray | None = None
    x_pp: np.ndarray | None = None
    nb_alpha: np.ndarray | None = None
    nb_beta: np.ndarray | None = None
    nb_ratio: np.ndarray | None = None
    coef: np.ndarray | None = field(default=None, repr=False)

    @property
    def h(self) -> float:
        """Node spacing of the 1D grid."""
        return float(self.r[1] - self.r[0])

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


def _polar_map(profile: ProfileCurve, s, phi):
    e = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    ep = np.stack([-np.sin(phi), np.cos(phi)], axis=-1)
    rho = profile.rho(phi)[..., None]
    d1 = profile.rho(phi, 1)[..., None]
    d2 = profile.rho(phi, 2)[..., None]
    s = np.asarray(s, dtype=float)[..., None]
    c = np.asarray(profile.center)
    x = c + s * rho * e
    x_s = rho * e
    x_p = s * (d1 * e + rho * ep)
    x_sp = d1 * e + rho * ep
    x_pp = s * (d2 * e + 2 * d1 * ep - rho * e)
    return x, x_s, x_p, x_sp, x_pp


def _discrete_metric(profile, x, s, phi, ds, dphi):
    """Mapping derivatives from the same central stencils that act on ``u``.

    The node coordinates are padded with the ghost rules used for ``u``
    (antipodal across the pole, the mapping's own extension past ``s = 1``),
    so every field linear in ``(y, r)`` has an exact discrete gradient and a
    vanishing discrete Hessian.
    """
    ns, nphi = x.shape[:2]
    X = np.empty((ns + 2, nphi + 2, 2))
    X[1:-1, 1:-1] = x
    X[0, 1:-1] = np.roll(x[0], -(nphi // 2), axis=0)
    X[-1, 1:-1] = _polar_map(profile, np.full(nphi, 1.0 + 0.5 * ds), phi)[0]
    X[:, 0] = X[:, nphi]
    X[:, -1] = X[:, 1]
    c = X[1:-1, 1:-1]
    x_s = (X[2:, 1:-1] - X[:-2, 1:-1]) / (2 * ds)
    x_p = (X[1:-1, 2:] - X[1:-1, :-2]) / (2 * dphi)
    x_ss = (X[2:, 1:-1] - 2 * c + X[:-2, 1:-1]) / ds ** 2
    x_pp = (X[1:-1, 2:] - 2 * c + X[1:-1, :-2]) / dphi ** 2
    x_sp = (X[2:, 2:] - X[2:, :-2] - X[:-2, 2:] + X[:-2, :-2]) / (4 * ds * dphi)
    return x_s, x_p, x_ss, x_sp, x_pp


def _jacobians(x_s, x_p):
    jac = np.stack([x_s, x_p], axis=-1)  # jac[..., i, a] = dX_i / d(s, phi)_a
    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    jinv = np.empty_like(jac)
    jinv[..., 0, 0] = jac[..., 1, 1] / det
    jinv[..., 0, 1] = -jac[..., 0, 1] / det
    jinv[..., 1, 0] = -jac[..., 1, 0] / det
    jinv[..., 1, 1] = jac[..., 0, 0] / det
    return jac, jinv, det


def build_grid(profile: ProfileCurve, resolution) -> DomainGrid:
    """Discretize the cross-section.

    ``resolution`` is ``n`` (node count) for an interval profile and
    ``(ns, nphi)`` otherwise; ``nphi`` must be even for the antipodal pole rule.
    """
    if profile.kind == "interval":
        n = int(resolution if np.isscalar(resolution) else resolution[0])
        # three nodes is the smallest grid carrying the one-sided boundary stencils
        if n < 3:
            raise GridError(f"resolution: need n >= 3, got {n}")
        r0, r1 = profile.r_range
        r = np.linspace(r0, r1, n)
        h = (r1 - r0) / (n - 1)
        vol = np.full(n, h)
        vol[0] = vol[-1] = 0.5 * h
        ends = np.array([np.pi, 0.0])
        return DomainGrid(
            profile=profile, dim=1, shape=(n,), y=np.zeros(n), r=r, vol=vol, h_min=h,
            gamma=np.array([-1.0, 1.0]),
            sigma_eig=sigma_rotational_eigenvalue(profile, ends),
            boundary_r=np.array([r0, r1]),
        )

    ns, nphi = (int(v) for v in resolution)
    if ns < 8 or nphi < 8:
        raise GridError(f"resolution: need ns, nphi >= 8, got ({ns}, {nphi})")
    if nphi % 2:
        raise GridError(f"resolution: nphi must be even for the pole rule, got {nphi}")
    ds, dphi = 1.0 / ns, 2 * np.pi / nphi
    s = (np.arange(ns) + 0.5) * ds
    phi = np.arange(nphi) * dphi
    S, P = np.meshgrid(s, phi, indexing="ij")
    x = _polar_map(profile, S, P)[0]
    x_s, x_p, x_ss, x_sp, x_pp = _discrete_metric(profile, x, s, phi, ds, dphi)
    jac, jinv, det = _jacobians(x_s, x_p)
    if not np.all(det > 0):
        j, k = np.argwhere(~(det > 0))[0]
        raise GridError(f"grid folding: Jacobian det {det[j, k]:.3g} <= 0 at phi = {phi[k]:.6g}")
    if not np.all(x[..., 1] > 0):
        raise GridError("grid node with r <= 0")

    # exact cell volumes: int s ds = s_j ds; int rho^2 dphi by Gauss-Legendre
    gx, gw = np.polynomial.legendre.leggauss(12)
    nodes = phi[:, None] + 0.5 * dphi * gx[None, :]
    rho2 = (profile.rho(nodes) ** 2 @ gw) * 0.5 * dphi
    vol = (s * ds)[:, None] * rho2[None, :]

    # physical spacings from the analytic mapping
    x_pa = _polar_map(profile, S, P)[2]
    speed = np.hypot(x_pa[..., 0], x_pa[..., 1]) / S
    h_min = float(min(np.min(profile.rho(phi)) * ds, np.min(speed[0] * s[0]) * dphi))

    # boundary geometry at s = 1, analytic
    xb, xb_s, xb_p, _, _ = _polar_map(profile, np.ones_like(phi), phi)
    _, jinv_b, _ = _jacobians(xb_s, xb_p)
    gy, gr = profile_normal(profile, phi)
    gamma = np.stack([gy, gr], axis=-1)
    alpha = np.einsum("ki,ki->k", jinv_b[:, 0, :], gamma)
    beta = np.einsum("ki,ki->k", jinv_b[:, 1, :], gamma)

    # packed per-node stencil coefficients for the kernels
    coef = np.empty((ns, nphi, 11))
    coef[..., 0] = jinv[..., 0, 0]
    coef[..., 1] = jinv[..., 0, 1]
    coef[..., 2] = jinv[..., 1, 0]
    coef[..., 3] = jinv[..., 1, 1]
    coef[..., 4] = x_sp[..., 0]
    coef[..., 5] = x_sp[..., 1]
    coef[..., 6] = x_pp[..., 0]
    coef[..., 7] = x_pp[..., 1]
    coef[..., 8] = x[..., 1]
    coef[..., 9] = x_ss[..., 0]
    coef[..., 10] = x_ss[..., 1]
    return DomainGrid(
        profile=profile, dim=2, shape=(ns, nphi), y=x[..., 0], r=x[..., 1], vol=vol,
        h_min=h_min, gamma=gamma, sigma_eig=sigma_rotational_eigenvalue(profile, phi),
        boundary_r=xb[..., 1], ds=ds, dphi=dphi, s=s, phi=phi, jac=jac, jinv=jinv,
        x_ss=x_ss, x_sp=x_sp, x_pp=x_pp, nb_alpha=alpha, nb_beta=beta, nb_ratio=beta / alpha,
        coef=np.ascontiguousarray(coef),
    )
