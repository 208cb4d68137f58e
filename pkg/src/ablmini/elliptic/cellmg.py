"""Cell-centred 7-point Poisson operator, geometric multigrid, MAC projection.

Unknowns are interior cell arrays (nx, ny, nz), periodic in x and y with
zero-flux walls in z.  The operator is L x = beta * lap7(x) (negative
semidefinite, constants in the nullspace).
"""
from __future__ import annotations

import time

import numpy as np
from numba import njit

from ..grid import FaceVelocitySet, divergence_mac
from ..parallel import get_pool
from . import SolveStats, SolverFailure

DENSE_COARSE_MAX = 4096


@njit(cache=True, nogil=True)
def _apply7(x, cx, cy, cz, out, lo, hi):
    nx, ny, nz = x.shape
    for i in range(lo, hi):
        im = i - 1 if i > 0 else nx - 1
        ip = i + 1 if i < nx - 1 else 0
        for j in range(ny):
            jm = j - 1 if j > 0 else ny - 1
            jp = j + 1 if j < ny - 1 else 0
            for k in range(nz):
                c = x[i, j, k]
                s = cx * (x[ip, j, k] + x[im, j, k] - 2.0 * c) + cy * (x[i, jp, k] + x[i, jm, k] - 2.0 * c)
                if k > 0:
                    s += cz * (x[i, j, k - 1] - c)
                if k < nz - 1:
                    s += cz * (x[i, j, k + 1] - c)
                out[i, j, k] = s


@njit(cache=True, nogil=True)
def _residual7(x, f, cx, cy, cz, out, lo, hi):
    nx, ny, nz = x.shape
    for i in range(lo, hi):
        im = i - 1 if i > 0 else nx - 1
        ip = i + 1 if i < nx - 1 else 0
        for j in range(ny):
            jm = j - 1 if j > 0 else ny - 1
            jp = j + 1 if j < ny - 1 else 0
            for k in range(nz):
                c = x[i, j, k]
                s = cx * (x[ip, j, k] + x[im, j, k] - 2.0 * c) + cy * (x[i, jp, k] + x[i, jm, k] - 2.0 * c)
                if k > 0:
                    s += cz * (x[i, j, k - 1] - c)
                if k < nz - 1:
                    s += cz * (x[i, j, k + 1] - c)
                out[i, j, k] = f[i, j, k] - s


@njit(cache=True, nogil=True)
def _rbgs7(x, f, cx, cy, cz, color, lo, hi):
    nx, ny, nz = x.shape
    for i in range(lo, hi):
        im = i - 1 if i > 0 else nx - 1
        ip = i + 1 if i < nx - 1 else 0
        for j in range(ny):
            jm = j - 1 if j > 0 else ny - 1
            jp = j + 1 if j < ny - 1 else 0
            k0 = (i + j + color) % 2
            for k in range(k0, nz, 2):
                off = cx * (x[ip, j, k] + x[im, j, k]) + cy * (x[i, jp, k] + x[i, jm, k])
                diag = -2.0 * (cx + cy)
                if k > 0:
                    off += cz * x[i, j, k - 1]
                    diag -= cz
                if k < nz - 1:
                    off += cz * x[i, j, k + 1]
                    diag -= cz
                x[i, j, k] = (f[i, j, k] - off) / diag


def poisson7_apply(x: np.ndarray, h: tuple[float, float, float], beta: float = 1.0) -> np.ndarray:
    out = np.empty_like(x)
    cx, cy, cz = (beta / hh ** 2 for hh in h)
    get_pool().run(_apply7, x.shape[0], x, cx, cy, cz, out)
    return out


# --------------------------------------------------------------------------
# transfers: trilinear cell-centred prolongation, restriction = P^T / 8
# --------------------------------------------------------------------------

def _take(a, idx, axis):
    s = [slice(None)] * 3
    s[axis] = idx
    return a[tuple(s)]


def _prolong_axis(c, axis, periodic):
    n = c.shape[axis]
    shape = list(c.shape)
    shape[axis] = 2 * n
    f = np.empty(shape)
    lo = np.arange(n) - 1
    hi = np.arange(n) + 1
    if periodic:
        lo %= n
        hi %= n
    else:
        lo = np.maximum(lo, 0)
        hi = np.minimum(hi, n - 1)
    even = [slice(None)] * 3
    odd = [slice(None)] * 3
    even[axis] = slice(0, None, 2)
    odd[axis] = slice(1, None, 2)
    f[tuple(even)] = 0.75 * c + 0.25 * _take(c, lo, axis)
    f[tuple(odd)] = 0.75 * c + 0.25 * _take(c, hi, axis)
    return f


def _restrict_axis(f, axis, periodic):
    fe = _take(f, slice(0, None, 2), axis)
    fo = _take(f, slice(1, None, 2), axis)
    n = fe.shape[axis]
    tm = np.roll(fe, -1, axis)
    tp = np.roll(fo, 1, axis)
    if not periodic:
        first = [slice(None)] * 3
        last = [slice(None)] * 3
        first[axis] = 0
        last[axis] = n - 1
        first, last = tuple(first), tuple(last)
        tm[last] = 0.0
        tm[first] += fe[first]
        tp[first] = 0.0
        tp[last] += fo[last]
    return 0.5 * (0.75 * (fe + fo) + 0.25 * (tm + tp))


def prolong(c: np.ndarray) -> np.ndarray:
    return _prolong_axis(_prolong_axis(_prolong_axis(c, 0, True), 1, True), 2, False)


def restrict(f: np.ndarray) -> np.ndarray:
    return _restrict_axis(_restrict_axis(_restrict_axis(f, 0, True), 1, True), 2, False)


class _Level:
    def __init__(self, shape, h, beta):
        self.shape = shape
        self.h = h
        self.c = tuple(beta / hh ** 2 for hh in h)


class CellPoissonMG:
    """V-cycle multigrid for beta * lap7(x) = f with RB Gauss-Seidel smoothing.

    Coarsening halves every dimension while all are even and >= 4.
    """

    def __init__(self, grid, beta: float = 1.0, pre: int = 2, post: int = 2,
                 max_cycles: int = 50):
        if not (grid.periodic_x and grid.periodic_y):
            raise NotImplementedError("multigrid requires periodic x and y")
        self.grid = grid
        self.beta = float(beta)
        self.pre, self.post, self.max_cycles = pre, post, max_cycles
        shape = grid.shape
        h = (grid.dx, grid.dy, grid.dz)
        self.levels = [_Level(shape, h, self.beta)]
        while all(n % 2 == 0 and n >= 4 for n in shape):
            shape = tuple(n // 2 for n in shape)
            h = tuple(2 * hh for hh in h)
            self.levels.append(_Level(shape, h, self.beta))
        coarse = self.levels[-1]
        ncoarse = int(np.prod(coarse.shape))
        self._pinv = None
        if ncoarse <= DENSE_COARSE_MAX:
            A = np.empty((ncoarse, ncoarse))
            e = np.zeros(coarse.shape)
            for col in range(ncoarse):
                e.flat[col] = 1.0
                A[:, col] = self._apply(coarse, e).ravel()
                e.flat[col] = 0.0
            self._pinv = np.linalg.pinv(A, rcond=1e-12)

    # -- level kernels -----------------------------------------------------
    def _apply(self, lev, x):
        out = np.empty_like(x)
        get_pool().run(_apply7, x.shape[0], x, *lev.c, out)
        return out

    def _residual(self, lev, x, f):
        out = np.empty_like(x)
        get_pool().run(_residual7, x.shape[0], x, f, *lev.c, out)
        return out

    def _smooth(self, lev, x, f, sweeps, order):
        for _ in range(sweeps):
            for color in order:
                get_pool().run(_rbgs7, x.shape[0], x, f, *lev.c, color)

    def _coarse_solve(self, lev, f):
        f = f - f.mean()
        if self._pinv is not None:
            return (self._pinv @ f.ravel()).reshape(lev.shape)
        return self._cg(lev, f, 1e-12)

    def _cg(self, lev, f, tol):
        # CG on -L (symmetric positive semidefinite), constants projected out
        x = np.zeros_like(f)
        r = -f.copy()
        r -= r.mean()
        p = r.copy()
        rr = float(np.dot(r.ravel(), r.ravel()))
        stop = tol ** 2 * rr
        for _ in range(10 * r.size):
            if rr <= stop or rr == 0.0:
                break
            q = -self._apply(lev, p)
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
        self._smooth(lev, x, f, self.pre, (0, 1))
        r = self._residual(lev, x, f)
        rc = restrict(r)
        ec = self.vcycle(np.zeros(rc.shape), rc, level + 1)
        x += prolong(ec)
        self._smooth(lev, x, f, self.post, (1, 0))
        return x

    def solve(self, f: np.ndarray, tol: float, x0: np.ndarray | None = None,
              raise_on_fail: bool = True):
        """Solve L x = f to relative 2-norm residual ``tol``; returns (x, stats)."""
        t0 = time.perf_counter()
        lev = self.levels[0]
        f = f - f.mean()
        x = np.zeros(lev.shape) if x0 is None else np.array(x0, dtype=float)
        fnorm = float(np.linalg.norm(f))
        stats = SolveStats(tol=tol, history=[])
        if fnorm == 0.0:
            x[...] = 0.0
            stats.wall_time = time.perf_counter() - t0
            return x, stats
        rel = float(np.linalg.norm(self._residual(lev, x, f))) / fnorm
        stats.history.append(rel)
        while rel > tol and stats.iterations < self.max_cycles:
            self.vcycle(x, f)
            x -= x.mean()
            stats.iterations += 1
            rel = float(np.linalg.norm(self._residual(lev, x, f))) / fnorm
            stats.history.append(rel)
        stats.final_relative_residual = rel
        stats.converged = rel <= tol
        stats.wall_time = time.perf_counter() - t0
        if not stats.converged and raise_on_fail:
            raise SolverFailure(f"MG did not reach {tol:g} in {stats.iterations} V-cycles "
                                f"(residual {rel:.3e})", stats)
        return x, stats


def mac_project(f: FaceVelocitySet, rho: float = 1.0, tol: float = 1e-4,
                solver: CellPoissonMG | None = None, psi0: np.ndarray | None = None):
    """Make face velocities discretely divergence-free.

    Solves div((1/rho) grad psi) = div(u_f) and returns
    (u_f - (1/rho) grad psi, psi, stats).  z-boundary faces are left untouched.
    """
    if not rho > 0:
        raise ValueError("rho must be > 0")
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    g = f.grid
    beta = 1.0 / rho
    if solver is None or solver.beta != beta or solver.grid != g:
        solver = CellPoissonMG(g, beta)
    rhs = divergence_mac(f).interior.copy()
    psi, stats = solver.solve(rhs, tol, x0=psi0)
    out = f.copy()
    gx = (psi - np.roll(psi, 1, axis=0)) / g.dx
    gy = (psi - np.roll(psi, 1, axis=1)) / g.dy
    out.uf[:-1] -= beta * gx
    out.uf[-1] = out.uf[0]
    out.vf[:, :-1] -= beta * gy
    out.vf[:, -1] = out.vf[:, 0]
    out.wf[:, :, 1:-1] -= beta * (psi[:, :, 1:] - psi[:, :, :-1]) / g.dz
    return out, psi, stats
