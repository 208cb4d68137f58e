"""Approximate nodal projection with the 27-point trilinear-element operator.

Nodes are stored as the (nx, ny, nz+1) array of independent nodes (periodic
in x and y).  The operator is the assembled stiffness matrix K of trilinear
elements with coefficient c = dt / rho, which is symmetric positive
semidefinite with constants in its nullspace.  The right-hand side is the
weak divergence b = vol * G^T V built from cell differences averaged to the
nodes, and the cell gradient G averages the four edge differences in each
direction.  Because K != c vol G^T G the projection is approximate.
"""
from __future__ import annotations

import time

import numpy as np
from numba import njit

from ..grid import CellScalarField, CellVectorField, NodeScalarField
from ..parallel import get_pool
from . import SolveStats, SolverFailure

DENSE_COARSE_MAX = 4096


def stencil_weights(nz: int, h: tuple[float, float, float], coef: float) -> np.ndarray:
    """27-point weights W[k, a, b, c] for offsets (a-1, b-1, c-1) at node level k."""
    hx, hy, hz = h
    kx = np.array([-1.0, 2.0, -1.0]) / hx
    mx = hx * np.array([1 / 6, 2 / 3, 1 / 6])
    ky = np.array([-1.0, 2.0, -1.0]) / hy
    my = hy * np.array([1 / 6, 2 / 3, 1 / 6])
    W = np.empty((nz + 1, 3, 3, 3))
    for k in range(nz + 1):
        kz = np.array([-1.0, 2.0, -1.0]) / hz
        mz = hz * np.array([1 / 6, 2 / 3, 1 / 6])
        if k == 0:
            kz = np.array([0.0, 1.0, -1.0]) / hz
            mz = hz * np.array([0.0, 1 / 3, 1 / 6])
        elif k == nz:
            kz = np.array([-1.0, 1.0, 0.0]) / hz
            mz = hz * np.array([1 / 6, 1 / 3, 0.0])
        W[k] = coef * (np.einsum("a,b,c->abc", kx, my, mz)
                       + np.einsum("a,b,c->abc", mx, ky, mz)
                       + np.einsum("a,b,c->abc", mx, my, kz))
    return W


@njit(cache=True, nogil=True)
def _apply27(x, W, out, lo, hi):
    nx, ny, nk = x.shape
    for i in range(lo, hi):
        for j in range(ny):
            for k in range(nk):
                s = 0.0
                for a in range(3):
                    ii = (i + a - 1 + nx) % nx
                    for b in range(3):
                        jj = (j + b - 1 + ny) % ny
                        for c in range(3):
                            kk = k + c - 1
                            if kk >= 0 and kk < nk:
                                s += W[k, a, b, c] * x[ii, jj, kk]
                out[i, j, k] = s


@njit(cache=True, nogil=True)
def _residual27(x, f, W, out, lo, hi):
    nx, ny, nk = x.shape
    for i in range(lo, hi):
        for j in range(ny):
            for k in range(nk):
                s = 0.0
                for a in range(3):
                    ii = (i + a - 1 + nx) % nx
                    for b in range(3):
                        jj = (j + b - 1 + ny) % ny
                        for c in range(3):
                            kk = k + c - 1
                            if kk >= 0 and kk < nk:
                                s += W[k, a, b, c] * x[ii, jj, kk]
                out[i, j, k] = f[i, j, k] - s


@njit(cache=True, nogil=True)
def _gs27(x, f, W, ci, cj, ck, lo, hi):
    """One colour of 8-colour Gauss-Seidel (parity of i, j, k)."""
    nx, ny, nk = x.shape
    for i in range(lo, hi):
        if i % 2 != ci:
            continue
        for j in range(cj, ny, 2):
            for k in range(ck, nk, 2):
                s = 0.0
                for a in range(3):
                    ii = (i + a - 1 + nx) % nx
                    for b in range(3):
                        jj = (j + b - 1 + ny) % ny
                        for c in range(3):
                            kk = k + c - 1
                            if kk >= 0 and kk < nk:
                                s += W[k, a, b, c] * x[ii, jj, kk]
                x[i, j, k] += (f[i, j, k] - s) / W[k, 1, 1, 1]


_COLORS = [(a, b, c) for c in (0, 1) for b in (0, 1) for a in (0, 1)]


def _prolong_periodic(c, axis):
    n = c.shape[axis]
    shape = list(c.shape)
    shape[axis] = 2 * n
    f = np.empty(shape)
    ev = [slice(None)] * 3
    od = [slice(None)] * 3
    ev[axis] = slice(0, None, 2)
    od[axis] = slice(1, None, 2)
    f[tuple(ev)] = c
    f[tuple(od)] = 0.5 * (c + np.roll(c, -1, axis))
    return f


def _restrict_periodic(f, axis):
    ev = [slice(None)] * 3
    od = [slice(None)] * 3
    ev[axis] = slice(0, None, 2)
    od[axis] = slice(1, None, 2)
    fo = f[tuple(od)]
    return f[tuple(ev)] + 0.5 * (fo + np.roll(fo, 1, axis))


def prolong(c: np.ndarray) -> np.ndarray:
    f = _prolong_periodic(_prolong_periodic(c, 0), 1)
    nkc = f.shape[2]
    out = np.empty(f.shape[:2] + (2 * nkc - 1,))
    out[:, :, 0::2] = f
    out[:, :, 1::2] = 0.5 * (f[:, :, :-1] + f[:, :, 1:])
    return out


def restrict(f: np.ndarray) -> np.ndarray:
    """Transpose of :func:`prolong` (weak-form residuals need no scaling)."""
    r = _restrict_periodic(_restrict_periodic(f, 0), 1)
    out = r[:, :, 0::2].copy()
    odd = 0.5 * r[:, :, 1::2]
    out[:, :, :-1] += odd
    out[:, :, 1:] += odd
    return out


class _Level:
    def __init__(self, shape, h, coef):
        self.shape = shape  # node array shape (nx, ny, nz+1)
        self.h = h
        self.W = stencil_weights(shape[2] - 1, h, coef)


class NodalMG:
    """V(2,2) multigrid with 8-colour Gauss-Seidel for K phi = b.

    Coarse operators are rediscretisations on 2h, which for trilinear
    elements with constant coefficient coincide with the Galerkin product.
    """

    def __init__(self, grid, coef: float, pre: int = 2, post: int = 2, max_cycles: int = 50):
        if not (grid.periodic_x and grid.periodic_y):
            raise NotImplementedError("nodal multigrid requires periodic x and y")
        self.grid, self.coef = grid, float(coef)
        self.pre, self.post, self.max_cycles = pre, post, max_cycles
        cells = grid.shape
        h = (grid.dx, grid.dy, grid.dz)
        self.levels = [_Level((cells[0], cells[1], cells[2] + 1), h, self.coef)]
        while all(n % 2 == 0 and n >= 4 for n in cells):
            cells = tuple(n // 2 for n in cells)
            h = tuple(2 * hh for hh in h)
            self.levels.append(_Level((cells[0], cells[1], cells[2] + 1), h, self.coef))
        coarse = self.levels[-1]
        ncoarse = int(np.prod(coarse.shape))
        self._pinv = None
        if ncoarse <= DENSE_COARSE_MAX:
            A = np.empty((ncoarse, ncoarse))
            e = np.zeros(coarse.shape)
            for col in range(ncoarse):
                e.flat[col] = 1.0
                A[:, col] = self.apply(e, coarse).ravel()
                e.flat[col] = 0.0
            self._pinv = np.linalg.pinv(A, rcond=1e-12)

    def apply(self, x, lev=None):
        lev = self.levels[0] if lev is None else lev
        out = np.empty_like(x)
        get_pool().run(_apply27, x.shape[0], x, lev.W, out)
        return out

    def _residual(self, lev, x, f):
        out = np.empty_like(x)
        get_pool().run(_residual27, x.shape[0], x, f, lev.W, out)
        return out

    def _smooth(self, lev, x, f, sweeps, colors):
        for _ in range(sweeps):
            for ci, cj, ck in colors:
                get_pool().run(_gs27, x.shape[0], x, f, lev.W, ci, cj, ck)

    def _coarse_solve(self, lev, f):
        f = f - f.mean()
        if self._pinv is not None:
            return (self._pinv @ f.ravel()).reshape(lev.shape)
        x = np.zeros_like(f)
        r = f.copy()
        p = r.copy()
        rr = float(np.dot(r.ravel(), r.ravel()))
        stop = 1e-24 * rr
        for _ in range(10 * r.size):
            if rr <= stop or rr == 0.0:
                break
            q = self.apply(p, lev)
            a = rr / float(np.dot(p.ravel(), q.ravel()))
            x += a * p
            r -= a * q
            r -= r.mean()
            rr_new = float(np.dot(r.ravel(), r.ravel()))
            p = r + (rr_new / rr) * p
            rr = rr_new
        return x - x.mean()

    def vcycle(self, x, f, level=0):
        lev = self.levels[level]
        if level == len(self.levels) - 1:
            x[...] = self._coarse_solve(lev, f)
            return x
        self._smooth(lev, x, f, self.pre, _COLORS)
        rc = restrict(self._residual(lev, x, f))
        ec = self.vcycle(np.zeros(rc.shape), rc, level + 1)
        x += prolong(ec)
        self._smooth(lev, x, f, self.post, _COLORS[::-1])
        return x

    def solve(self, b: np.ndarray, tol: float, x0=None, raise_on_fail: bool = True):
        t0 = time.perf_counter()
        lev = self.levels[0]
        b = b - b.mean()
        x = np.zeros(lev.shape) if x0 is None else np.array(x0, dtype=float)
        bnorm = float(np.linalg.norm(b))
        stats = SolveStats(tol=tol, history=[])
        if bnorm == 0.0:
            x[...] = 0.0
            stats.wall_time = time.perf_counter() - t0
            return x, stats
        x -= x.mean()
        rel = float(np.linalg.norm(self._residual(lev, x, b))) / bnorm
        stats.history.append(rel)
        while rel > tol and stats.iterations < self.max_cycles:
            self.vcycle(x, b)
            x -= x.mean()
            stats.iterations += 1
            rel = float(np.linalg.norm(self._residual(lev, x, b))) / bnorm
            stats.history.append(rel)
        stats.final_relative_residual = rel
        stats.converged = rel <= tol
        stats.wall_time = time.perf_counter() - t0
        if not stats.converged and raise_on_fail:
            raise SolverFailure(f"nodal MG did not reach {tol:g} in {stats.iterations} "
                                f"V-cycles (residual {rel:.3e})", stats)
        return x, stats


def _pair_sum_z(a):
    """Sum of the (up to) two cells adjacent to each node level along z."""
    nx, ny, nz = a.shape
    p = np.zeros((nx, ny, nz + 2))
    p[:, :, 1:-1] = a
    return p[:, :, :-1] + p[:, :, 1:]


def nodal_rhs(vx, vy, vz, grid) -> np.ndarray:
    """Weak divergence b_a = integral(V . grad N_a) with one-point quadrature per cell."""
    dx, dy, dz = grid.dx, grid.dy, grid.dz
    tx = _pair_sum_z(vx)
    tx = tx + np.roll(tx, 1, axis=1)
    ty = _pair_sum_z(vy)
    ty = ty + np.roll(ty, 1, axis=0)
    tz = vz + np.roll(vz, 1, axis=0)
    tz = tz + np.roll(tz, 1, axis=1)
    nx, ny, nz = vz.shape
    pz = np.zeros((nx, ny, nz + 2))
    pz[:, :, 1:-1] = tz
    b = (dy * dz / 4) * (np.roll(tx, 1, axis=0) - tx)
    b += (dx * dz / 4) * (np.roll(ty, 1, axis=1) - ty)
    b += (dx * dy / 4) * (pz[:, :, :-1] - pz[:, :, 1:])
    return b


def nodal_gradient(phi: np.ndarray, grid):
    """Cell-centred gradient: four edge differences averaged per direction."""
    dx, dy, dz = grid.dx, grid.dy, grid.dz
    ex = (np.roll(phi, -1, axis=0) - phi) / dx
    ex = ex[:, :, :-1] + ex[:, :, 1:]
    gx = 0.25 * (ex + np.roll(ex, -1, axis=1))
    ey = (np.roll(phi, -1, axis=1) - phi) / dy
    ey = ey[:, :, :-1] + ey[:, :, 1:]
    gy = 0.25 * (ey + np.roll(ey, -1, axis=0))
    ez = (phi[:, :, 1:] - phi[:, :, :-1]) / dz
    ez = ez + np.roll(ez, -1, axis=0)
    gz = 0.25 * (ez + np.roll(ez, -1, axis=1))
    return gx, gy, gz


def nodal_project(u: CellVectorField, gp_old: CellVectorField, rho: float, dt: float,
                  tol: float = 1e-4, solver: NodalMG | None = None, phi0=None):
    """Project the intermediate velocity; returns (u_new, p_new, gp_new, stats).

    u_new = V - c grad(phi) with V = u* + c gp_old, c = dt / rho, and
    p_new = phi, gp_new = grad(phi).  Ghost layers of the outputs are left
    zero; callers refill them.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if not rho > 0:
        raise ValueError("rho must be > 0")
    g = u.grid
    coef = dt / rho
    if solver is None or solver.coef != coef or solver.grid != g:
        solver = NodalMG(g, coef)
    V = [uc.interior + coef * gc.interior for uc, gc in zip(u.components, gp_old.components)]
    b = nodal_rhs(*V, g)
    phi, stats = solver.solve(b, tol, x0=phi0)
    grad = nodal_gradient(phi, g)
    u_new = CellVectorField(*(CellScalarField.from_interior(g, v - coef * gr)
                              for v, gr in zip(V, grad)))
    gp_new = CellVectorField(*(CellScalarField.from_interior(g, gr) for gr in grad))
    return u_new, NodeScalarField.from_unique(g, phi), gp_new, stats
