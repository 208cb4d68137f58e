"""Godunov PLM advection: limited slopes, time-centred face states, flux divergence.

Face states are traced along the face normal, and the transverse part of the
material derivative plus any force is added as a cell-centred increment
(MUSCL-Hancock style) so the states are second order at t + dt/2.  A face
value is always computed by the same expression from the same inputs,
whichever adjacent cell asks for it, so the flux divergence telescopes
exactly and the slab kernels stay independent.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .grid import CellScalarField, CellVectorField, FaceVelocitySet
from .parallel import get_pool


class CFLViolation(RuntimeError):
    pass


@njit(cache=True, nogil=True, inline="always")
def _mc(am, a0, ap):
    """Monotonized-central limited difference across three cells."""
    dm = a0 - am
    dp = ap - a0
    if dm * dp <= 0.0:
        return 0.0
    dc = 0.5 * (dm + dp)
    s = min(2.0 * abs(dm), 2.0 * abs(dp), abs(dc))
    return s if dc > 0.0 else -s


@njit(cache=True, nogil=True, inline="always")
def _upwind(left, right, vel):
    if vel > 0.0:
        return left
    if vel < 0.0:
        return right
    return 0.5 * (left + right)


@njit(cache=True, nogil=True, inline="always")
def _face_state(cm2, cm1, c0, c1, tm1, t0, vel, lam):
    """Upwinded state at the face between cells cm1 and c0; lam = dt / h.

    tm1, t0 are the transverse/source increments of the two cells.
    """
    left = cm1 + 0.5 * (1.0 - vel * lam) * _mc(cm2, cm1, c0) + tm1
    right = c0 - 0.5 * (1.0 + vel * lam) * _mc(cm1, c0, c1) + t0
    return _upwind(left, right, vel)


@njit(cache=True, nogil=True)
def _slopes_kernel(a, axis, h, out, lo, hi):
    n0, n1, n2 = a.shape
    for i in range(lo, hi):
        for j in range(n1):
            for k in range(n2):
                if axis == 0:
                    if i == 0 or i == n0 - 1:
                        continue
                    out[i, j, k] = _mc(a[i - 1, j, k], a[i, j, k], a[i + 1, j, k]) / h
                elif axis == 1:
                    if j == 0 or j == n1 - 1:
                        continue
                    out[i, j, k] = _mc(a[i, j - 1, k], a[i, j, k], a[i, j + 1, k]) / h
                else:
                    if k == 0 or k == n2 - 1:
                        continue
                    out[i, j, k] = _mc(a[i, j, k - 1], a[i, j, k], a[i, j, k + 1]) / h


def plm_slopes(field: CellScalarField, axis: int) -> np.ndarray:
    """Limited slope (field units per metre) on the ghosted array; 0 on the outermost layer."""
    g = field.grid
    h = (g.dx, g.dy, g.dz)[axis]
    out = np.zeros_like(field.data)
    get_pool().run(_slopes_kernel, out.shape[0], field.data, axis, h, out)
    return out


@njit(cache=True, nogil=True, inline="always")
def _riemann(left, right):
    if left > 0.0 and left + right > 0.0:
        return left
    if right < 0.0 and left + right < 0.0:
        return right
    return 0.0


@njit(cache=True, nogil=True)
def _predict_kernel(u, v, w, tu, tv, tw, dt, dx, dy, dz, g, uf, vf, wf, lo, hi):
    nx = vf.shape[0]
    ny = uf.shape[1]
    nz = uf.shape[2]
    lx, ly, lz = dt / dx, dt / dy, dt / dz
    for i in range(lo, hi):
        I = i + g
        for j in range(ny + 1):
            J = j + g
            for k in range(nz + 1):
                K = k + g
                if j < ny and k < nz:
                    a = u[I - 1, J, K]
                    b = u[I, J, K]
                    left = a + 0.5 * (1.0 - a * lx) * _mc(u[I - 2, J, K], a, b) + tu[I - 1, J, K]
                    right = b - 0.5 * (1.0 + b * lx) * _mc(a, b, u[I + 1, J, K]) + tu[I, J, K]
                    uf[i, j, k] = _riemann(left, right)
                if i < nx and k < nz:
                    a = v[I, J - 1, K]
                    b = v[I, J, K]
                    left = a + 0.5 * (1.0 - a * ly) * _mc(v[I, J - 2, K], a, b) + tv[I, J - 1, K]
                    right = b - 0.5 * (1.0 + b * ly) * _mc(a, b, v[I, J + 1, K]) + tv[I, J, K]
                    vf[i, j, k] = _riemann(left, right)
                if i < nx and j < ny:
                    if k == 0 or k == nz:
                        wf[i, j, k] = 0.0
                    else:
                        a = w[I, J, K - 1]
                        b = w[I, J, K]
                        left = a + 0.5 * (1.0 - a * lz) * _mc(w[I, J, K - 2], a, b) + tw[I, J, K - 1]
                        right = b - 0.5 * (1.0 + b * lz) * _mc(a, b, w[I, J, K + 1]) + tw[I, J, K]
                        wf[i, j, k] = _riemann(left, right)


def max_normal_cfl(u: CellVectorField, dt: float) -> float:
    g = u.grid
    return max(np.abs(c.interior).max() * dt / h
               for c, h in zip(u.components, (g.dx, g.dy, g.dz)))


def transverse_terms(c: CellScalarField, vel: CellVectorField | None, dt: float,
                     src: np.ndarray | None = None):
    """Per-direction cell increments added to traced face states.

    For faces normal to x the increment is dt/2 * (src - v dc/dy - w dc/dz),
    and likewise for y and z.  Slopes are the limited PLM slopes.  With no
    velocity and no source all three are zero (pure normal tracing).
    """
    shape = c.data.shape
    if vel is None:
        t = [np.zeros(shape) for _ in range(3)]
    else:
        sl = [plm_slopes(c, a) for a in range(3)]
        adv = [comp.data * s for comp, s in zip(vel.components, sl)]
        t = [-0.5 * dt * (adv[1] + adv[2]), -0.5 * dt * (adv[0] + adv[2]),
             -0.5 * dt * (adv[0] + adv[1])]
    if src is not None:
        for a in range(3):
            t[a] += 0.5 * dt * src
    return t


def predict_face_velocities(u: CellVectorField, dt: float,
                            src: CellVectorField | None = None,
                            transverse: bool = True) -> FaceVelocitySet:
    """Time-centred normal face velocities from a ghost-filled cell velocity.

    ``src`` (ghost-filled) is the explicit force estimate, added as dt/2 * src
    to both traced states.  z-boundary faces are impenetrable.
    """
    g = u.grid
    cfl = max_normal_cfl(u, dt)
    if cfl > 1.0:
        raise CFLViolation(f"normal-direction CFL {cfl:.3f} > 1 in the predictor")
    vel = u if transverse else None
    incr = []
    for a, comp in enumerate(u.components):
        s = None if src is None else src.components[a].data
        incr.append(transverse_terms(comp, vel, dt, s)[a])
    faces = FaceVelocitySet.zeros(g)
    get_pool().run(_predict_kernel, g.nx + 1,
                   u.u.data, u.v.data, u.w.data, incr[0], incr[1], incr[2],
                   float(dt), g.dx, g.dy, g.dz, g.ghost, faces.uf, faces.vf, faces.wf)
    return faces


@njit(cache=True, nogil=True)
def _advect_kernel(c, tx, ty, tz, uf, vf, wf, dt, dx, dy, dz, g, out, lo, hi):
    ny = out.shape[1]
    nz = out.shape[2]
    lx, ly, lz = dt / dx, dt / dy, dt / dz
    for i in range(lo, hi):
        I = i + g
        for j in range(ny):
            J = j + g
            for k in range(nz):
                K = k + g
                ul = uf[i, j, k]
                ur = uf[i + 1, j, k]
                fxl = ul * _face_state(c[I - 2, J, K], c[I - 1, J, K], c[I, J, K], c[I + 1, J, K], tx[I - 1, J, K], tx[I, J, K], ul, lx)
                fxr = ur * _face_state(c[I - 1, J, K], c[I, J, K], c[I + 1, J, K], c[I + 2, J, K], tx[I, J, K], tx[I + 1, J, K], ur, lx)
                vl = vf[i, j, k]
                vr = vf[i, j + 1, k]
                fyl = vl * _face_state(c[I, J - 2, K], c[I, J - 1, K], c[I, J, K], c[I, J + 1, K], ty[I, J - 1, K], ty[I, J, K], vl, ly)
                fyr = vr * _face_state(c[I, J - 1, K], c[I, J, K], c[I, J + 1, K], c[I, J + 2, K], ty[I, J, K], ty[I, J + 1, K], vr, ly)
                wl = wf[i, j, k]
                wr = wf[i, j, k + 1]
                fzl = wl * _face_state(c[I, J, K - 2], c[I, J, K - 1], c[I, J, K], c[I, J, K + 1], tz[I, J, K - 1], tz[I, J, K], wl, lz)
                fzr = wr * _face_state(c[I, J, K - 1], c[I, J, K], c[I, J, K + 1], c[I, J, K + 2], tz[I, J, K], tz[I, J, K + 1], wr, lz)
                out[i, j, k] = -((fxr - fxl) / dx + (fyr - fyl) / dy + (fzr - fzl) / dz)


def advect_array(c: CellScalarField, mac: FaceVelocitySet, dt: float,
                 vel: CellVectorField | None = None, src: np.ndarray | None = None) -> np.ndarray:
    g = c.grid
    tx, ty, tz = transverse_terms(c, vel, dt, src)
    out = np.empty(g.shape)
    get_pool().run(_advect_kernel, g.nx, c.data, tx, ty, tz, mac.uf, mac.vf, mac.wf, float(dt),
                   g.dx, g.dy, g.dz, g.ghost, out)
    return out


def advect(c, mac: FaceVelocitySet, dt: float, vel: CellVectorField | None = None, src=None):
    """Conservative advective tendency -div(u c) of a ghost-filled field.

    ``vel`` (ghost-filled cell velocity) switches on the transverse tracing
    terms; ``src`` adds dt/2 * src to the traced states (a ghosted array, or a
    CellVectorField when ``c`` is one).  Returns an (nx, ny, nz) array for a
    scalar field, or a tuple of three for a CellVectorField, each component
    advected as a scalar.
    """
    if isinstance(c, CellVectorField):
        srcs = (None,) * 3 if src is None else tuple(s.data for s in src.components)
        return tuple(advect_array(comp, mac, dt, vel, s) for comp, s in zip(c.components, srcs))
    if isinstance(src, CellScalarField):
        src = src.data
    return advect_array(c, mac, dt, vel, src)
