"""Stencil kernels for the graphical flow operator.

Every kernel exists twice: a numba-compiled loop and a vectorized numpy
version with the same signature.  Fields live on padded arrays carrying one
ghost layer on every side:

* 1D: ``p[1:n+1]`` are the nodes, ``p[0]`` and ``p[n+1]`` the mirror ghosts.
* 2D: ``p[1:ns+1, 1:nphi+1]`` are the nodes; row 0 is the antipodal copy of
  the innermost ring, row ``ns+1`` the Neumann ghost ring outside ``s = 1``,
  and columns 0 / ``nphi+1`` are periodic copies.

The rhs kernels write ``du/dt`` into ``out`` and ``vtilde**2`` into ``vt2``.
"""
import numpy as np

from ._numba import BACKEND, HAVE_NUMBA, THREADS, njit, prange


def _fill_1d_py(p):
    n2 = p.shape[0]
    p[0] = p[2]
    p[n2 - 1] = p[n2 - 3]


def _fill_2d_py(p, ds, dphi, ratio):
    ns = p.shape[0] - 2
    nphi = p.shape[1] - 2
    half = nphi // 2
    for k in range(nphi):
        p[0, 1 + k] = p[1, 1 + (k + half) % nphi]
    for k in range(nphi):
        kp = (k + 1) % nphi
        km = (k - 1) % nphi
        up1 = (p[ns, 1 + kp] - p[ns, 1 + km]) / (2.0 * dphi)
        up2 = (p[ns - 1, 1 + kp] - p[ns - 1, 1 + km]) / (2.0 * dphi)
        # gamma . Du = 0 with the tangential derivative extrapolated to s = 1
        p[ns + 1, 1 + k] = p[ns, 1 + k] - ds * ratio[k] * (1.5 * up1 - 0.5 * up2)
    for j in range(ns + 2):
        p[j, 0] = p[j, nphi]
        p[j, nphi + 1] = p[j, 1]


def _rhs_1d_py(p, r, h, out, vt2):
    n = r.shape[0]
    for i in range(n):
        um = p[i]
        uc = p[i + 1]
        up = p[i + 2]
        d1 = (up - um) / (2.0 * h)
        d2 = (up - 2.0 * uc + um) / (h * h)
        v2 = 1.0 + r[i] * r[i] * d1 * d1
        vt2[i] = v2
        out[i] = d2 / v2 + d1 / r[i] * (1.0 + 1.0 / v2)


def _rhs_2d_py(p, coef, ds, dphi, out, vt2):
    ns = out.shape[0]
    nphi = out.shape[1]
    i2s = 0.5 / ds
    i2p = 0.5 / dphi
    iss = 1.0 / (ds * ds)
    ipp = 1.0 / (dphi * dphi)
    isp = 0.25 / (ds * dphi)
    for j in prange(ns):
        for k in range(nphi):
            jj = j + 1
            kk = k + 1
            c = p[jj, kk]
            sp = p[jj + 1, kk]
            sm = p[jj - 1, kk]
            pp = p[jj, kk + 1]
            pm = p[jj, kk - 1]
            us = (sp - sm) * i2s
            uph = (pp - pm) * i2p
            uss = (sp - 2.0 * c + sm) * iss
            upp = (pp - 2.0 * c + pm) * ipp
            usp = (p[jj + 1, kk + 1] - p[jj + 1, kk - 1] - p[jj - 1, kk + 1] + p[jj - 1, kk - 1]) * isp
            sy = coef[j, k, 0]
            sr = coef[j, k, 1]
            py = coef[j, k, 2]
            pr = coef[j, k, 3]
            uy = sy * us + py * uph
            ur = sr * us + pr * uph
            tss = uss - uy * coef[j, k, 9] - ur * coef[j, k, 10]
            tsp = usp - uy * coef[j, k, 4] - ur * coef[j, k, 5]
            tpp = upp - uy * coef[j, k, 6] - ur * coef[j, k, 7]
            uyy = sy * sy * tss + 2.0 * sy * py * tsp + py * py * tpp
            urr = sr * sr * tss + 2.0 * sr * pr * tsp + pr * pr * tpp
            uyr = sy * sr * tss + (sy * pr + py * sr) * tsp + py * pr * tpp
            r = coef[j, k, 8]
            v2 = 1.0 + r * r * (uy * uy + ur * ur)
            iv2 = 1.0 / v2
            vt2[j, k] = v2
            out[j, k] = (
                uyy + urr
                - r * r * (uy * uy * uyy + 2.0 * uy * ur * uyr + ur * ur * urr) * iv2
                + ur / r * (1.0 + iv2)
            )


def _rkl2_stage_py(out, d, d1, d2, y0, k, l0, mu, nu, mdt, gdt):
    # increment form d_j = y_j - y0, so constant data stays exactly constant
    for i in range(d.shape[0]):
        for j in range(d.shape[1]):
            v = mu * d1[i, j] + nu * d2[i, j] + mdt * k[i, j] + gdt * l0[i, j]
            d[i, j] = v
            out[i, j] = y0[i, j] + v


# ---------------------------------------------------------------- numpy path

def rkl2_stage_numpy(out, d, d1, d2, y0, k, l0, mu, nu, mdt, gdt):
    np.multiply(d1, mu, out=d)
    d += nu * d2
    d += mdt * k
    d += gdt * l0
    np.add(y0, d, out=out)


def fill_1d_numpy(p):
    p[0] = p[2]
    p[-1] = p[-3]


def fill_2d_numpy(p, ds, dphi, ratio):
    ns = p.shape[0] - 2
    nphi = p.shape[1] - 2
    half = nphi // 2
    p[0, 1:-1] = np.roll(p[1, 1:-1], -half)
    ring1 = p[ns, 1:-1]
    ring2 = p[ns - 1, 1:-1]
    up1 = (np.roll(ring1, -1) - np.roll(ring1, 1)) / (2.0 * dphi)
    up2 = (np.roll(ring2, -1) - np.roll(ring2, 1)) / (2.0 * dphi)
    p[ns + 1, 1:-1] = ring1 - ds * ratio * (1.5 * up1 - 0.5 * up2)
    p[:, 0] = p[:, nphi]
    p[:, nphi + 1] = p[:, 1]


def rhs_1d_numpy(p, r, h, out, vt2):
    d1 = (p[2:] - p[:-2]) / (2.0 * h)
    d2 = (p[2:] - 2.0 * p[1:-1] + p[:-2]) / (h * h)
    vt2[...] = 1.0 + r * r * d1 * d1
    out[...] = d2 / vt2 + d1 / r * (1.0 + 1.0 / vt2)


def rhs_2d_numpy(p, coef, ds, dphi, out, vt2):
    i2s, i2p = 0.5 / ds, 0.5 / dphi
    iss, ipp, isp = 1.0 / (ds * ds), 1.0 / (dphi * dphi), 0.25 / (ds * dphi)
    c = p[1:-1, 1:-1]
    sp, sm = p[2:, 1:-1], p[:-2, 1:-1]
    pp, pm = p[1:-1, 2:], p[1:-1, :-2]
    us = (sp - sm) * i2s
    uph = (pp - pm) * i2p
    uss = (sp - 2.0 * c + sm) * iss
    upp = (pp - 2.0 * c + pm) * ipp
    usp = (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) * isp
    sy, sr, py, pr = coef[..., 0], coef[..., 1], coef[..., 2], coef[..., 3]
    uy = sy * us + py * uph
    ur = sr * us + pr * uph
    tss = uss - uy * coef[..., 9] - ur * coef[..., 10]
    tsp = usp - uy * coef[..., 4] - ur * coef[..., 5]
    tpp = upp - uy * coef[..., 6] - ur * coef[..., 7]
    uyy = sy * sy * tss + 2.0 * sy * py * tsp + py * py * tpp
    urr = sr * sr * tss + 2.0 * sr * pr * tsp + pr * pr * tpp
    uyr = sy * sr * tss + (sy * pr + py * sr) * tsp + py * pr * tpp
    r = coef[..., 8]
    vt2[...] = 1.0 + r * r * (uy * uy + ur * ur)
    iv2 = 1.0 / vt2
    out[...] = (
        uyy + urr
        - r * r * (uy * uy * uyy + 2.0 * uy * ur * uyr + ur * ur * urr) * iv2
        + ur / r * (1.0 + iv2)
    )


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:
    fill_1d_numba = njit(_fill_1d_py)
    fill_2d_numba = njit(_fill_2d_py)
    rhs_1d_numba = njit(_rhs_1d_py)
    rhs_2d_numba = njit(_rhs_2d_py)
    rhs_2d_numba_parallel = njit(parallel=True)(_rhs_2d_py)
    rkl2_stage_numba = njit(_rkl2_stage_py)
else:  # pragma: no cover
    rkl2_stage_numba = rkl2_stage_numpy
    fill_1d_numba, fill_2d_numba = fill_1d_numpy, fill_2d_numpy
    rhs_1d_numba, rhs_2d_numba = rhs_1d_numpy, rhs_2d_numpy
    rhs_2d_numba_parallel = rhs_2d_numpy


class Backend:
    """Bundle of kernels for one backend name."""

    def __init__(self, name):
        if name == "numba":
            self.fill_1d, self.fill_2d = fill_1d_numba, fill_2d_numba
            self.rhs_1d = rhs_1d_numba
            self.rhs_2d = rhs_2d_numba_parallel if THREADS > 1 else rhs_2d_numba
            self.rkl2_stage = rkl2_stage_numba
        elif name == "numpy":
            self.fill_1d, self.fill_2d = fill_1d_numpy, fill_2d_numpy
            self.rhs_1d, self.rhs_2d = rhs_1d_numpy, rhs_2d_numpy
            self.rkl2_stage = rkl2_stage_numpy
        else:
            raise ValueError(f"unknown backend {name!r}")
        self.name = name


_active = Backend(BACKEND)


def active():
    return _active


def use_backend(name):
    """Switch the kernels used by the flow code; returns the previous name."""
    global _active
    prev = _active.name
    _active = Backend(name)
    return prev
