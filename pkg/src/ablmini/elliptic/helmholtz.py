"""Cell-centred 7-point Helmholtz operator and Jacobi-preconditioned BiCGStab.

    (alpha I - div(beta grad)) x = rhs

Face diffusivities are arithmetic means of the adjacent cells.  z sides take
``even`` (zero flux), ``flux`` (prescribed beta dx/dz, moved to the RHS) or
``odd`` (Dirichlet value on the boundary face).
"""
from __future__ import annotations

import time

import numpy as np
from numba import njit

from ..grid import BCSpec
from ..parallel import get_pool
from . import SolveStats, SolverFailure


@njit(cache=True, nogil=True)
def _helm_apply(x, alpha, bx, by, bz, dlo, dhi, idx2, idy2, idz2, out, lo, hi):
    nx, ny, nz = x.shape
    for i in range(lo, hi):
        ip = i + 1 if i < nx - 1 else 0
        im = i - 1 if i > 0 else nx - 1
        for j in range(ny):
            jp = j + 1 if j < ny - 1 else 0
            jm = j - 1 if j > 0 else ny - 1
            for k in range(nz):
                c = x[i, j, k]
                s = (bx[ip, j, k] * (x[ip, j, k] - c) - bx[i, j, k] * (c - x[im, j, k])) * idx2
                s += (by[i, jp, k] * (x[i, jp, k] - c) - by[i, j, k] * (c - x[i, jm, k])) * idy2
                if k < nz - 1:
                    s += bz[i, j, k + 1] * (x[i, j, k + 1] - c) * idz2
                else:
                    s -= dhi[i, j] * c
                if k > 0:
                    s -= bz[i, j, k] * (c - x[i, j, k - 1]) * idz2
                else:
                    s -= dlo[i, j] * c
                out[i, j, k] = alpha * c - s


class HelmholtzOperator:
    """Matrix-free operator with its Jacobi diagonal and boundary RHS terms."""

    def __init__(self, grid, alpha: float, beta: np.ndarray, bc: BCSpec):
        if not alpha > 0:
            raise ValueError("alpha must be > 0")
        beta = np.asarray(beta, dtype=float)
        if beta.ndim == 0:
            beta = np.full(grid.shape, float(beta))
        if np.any(beta < 0):
            raise ValueError("diffusivity must be >= 0")
        self.grid, self.alpha = grid, float(alpha)
        nx, ny, nz = grid.shape
        self.bx = 0.5 * (beta + np.roll(beta, 1, axis=0))
        self.by = 0.5 * (beta + np.roll(beta, 1, axis=1))
        self.bz = np.zeros((nx, ny, nz + 1))
        self.bz[:, :, 1:-1] = 0.5 * (beta[:, :, 1:] + beta[:, :, :-1])
        idz2 = 1.0 / grid.dz ** 2
        self.idx2, self.idy2, self.idz2 = 1.0 / grid.dx ** 2, 1.0 / grid.dy ** 2, idz2
        self.bc_rhs = np.zeros(grid.shape)
        self.dlo = np.zeros((nx, ny))
        self.dhi = np.zeros((nx, ny))
        for side, d, k in ((bc.zlo, self.dlo, 0), (bc.zhi, self.dhi, nz - 1)):
            wall_beta = beta[:, :, k]
            sign = -1.0 if k == 0 else 1.0
            if side.kind == "even":
                continue
            if side.kind == "flux":
                # beta dx/dz at the wall is known: its divergence contribution
                self.bc_rhs[:, :, k] += sign * np.asarray(side.value) / grid.dz
            elif side.kind == "gradient":
                self.bc_rhs[:, :, k] += sign * wall_beta * np.asarray(side.value) / grid.dz
            elif side.kind == "odd":
                d[...] = 2.0 * wall_beta * idz2
                self.bc_rhs[:, :, k] += d * np.asarray(side.value)
            else:
                raise ValueError(f"unsupported Helmholtz z boundary {side.kind!r}")
        self.diag = self._diagonal()

    def _diagonal(self):
        nx, ny, nz = self.grid.shape
        d = np.full(self.grid.shape, self.alpha)
        d += (self.bx + np.roll(self.bx, -1, axis=0)) * self.idx2
        d += (self.by + np.roll(self.by, -1, axis=1)) * self.idy2
        d += (self.bz[:, :, :-1] + self.bz[:, :, 1:]) * self.idz2
        d[:, :, 0] += self.dlo
        d[:, :, -1] += self.dhi
        return d

    def apply(self, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.empty_like(x)
        get_pool().run(_helm_apply, x.shape[0], x, self.alpha, self.bx, self.by, self.bz,
                       self.dlo, self.dhi, self.idx2, self.idy2, self.idz2, out)
        return out


def helmholtz_apply(alpha, beta, x, bc, grid):
    return HelmholtzOperator(grid, alpha, beta, bc).apply(x)


def _dot(a, b):
    return float(np.dot(a.ravel(), b.ravel()))


def bicgstab(op: HelmholtzOperator, b: np.ndarray, tol: float, x0=None,
             max_iter: int = 200):
    """Right-preconditioned BiCGStab; iterations count full (two-matvec) steps,
    a solve finishing on the half step counts as one."""
    t0 = time.perf_counter()
    minv = 1.0 / op.diag
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    bnorm = float(np.linalg.norm(b))
    stats = SolveStats(tol=tol, history=[])
    if bnorm == 0.0:
        x[...] = 0.0
        return x, stats
    restarts = 0
    r = b - op.apply(x)
    rel = float(np.linalg.norm(r)) / bnorm
    stats.history.append(rel)
    if rel <= tol:
        stats.final_relative_residual = rel
        stats.wall_time = time.perf_counter() - t0
        return x, stats
    rhat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    tiny = 1e-300
    while stats.iterations < max_iter:
        rho_new = _dot(rhat, r)
        if abs(rho_new) < 1e-30 * bnorm ** 2 or abs(omega) < tiny:
            if restarts >= 1:
                break
            restarts += 1
            r = b - op.apply(x)
            rhat = r.copy()
            rho = alpha = omega = 1.0
            v[...] = 0.0
            p[...] = 0.0
            continue
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        p = r + beta * (p - omega * v)
        phat = minv * p
        v = op.apply(phat)
        alpha = rho / _dot(rhat, v)
        s = r - alpha * v
        stats.iterations += 1
        srel = float(np.linalg.norm(s)) / bnorm
        if srel <= tol:
            x += alpha * phat
            rel = srel
            stats.history.append(rel)
            break
        shat = minv * s
        t = op.apply(shat)
        tt = _dot(t, t)
        omega = _dot(t, s) / tt if tt > 0 else 0.0
        x += alpha * phat + omega * shat
        r = s - omega * t
        rel = float(np.linalg.norm(r)) / bnorm
        stats.history.append(rel)
        if rel <= tol:
            break
    stats.final_relative_residual = rel
    stats.converged = rel <= tol
    stats.wall_time = time.perf_counter() - t0
    return x, stats


def helmholtz_solve(alpha: float, beta, rhs: np.ndarray, bc: BCSpec, tol: float = 1e-6,
                    x0: np.ndarray | None = None, grid=None, raise_on_fail: bool = True):
    """Solve (alpha I - div(beta grad)) x = rhs (+ boundary terms); returns (x, stats).

    ``beta`` is a cell diffusivity array or scalar; ``rhs`` an (nx, ny, nz) array.
    With ``x0`` the solve is for the correction ``x - x0`` and ``tol`` is relative to
    the initial residual; otherwise a small per-step change of a large field (theta
    near 265 K) would already satisfy a tolerance taken relative to ``rhs``.
    """
    if grid is None:
        raise ValueError("grid is required")
    op = HelmholtzOperator(grid, alpha, beta, bc)
    b = rhs + op.bc_rhs
    if x0 is None:
        x, stats = bicgstab(op, b, tol)
    else:
        x0 = np.asarray(x0, dtype=float)
        dx, stats = bicgstab(op, b - op.apply(x0), tol)
        x = x0 + dx
    if not stats.converged and raise_on_fail:
        raise SolverFailure(f"BiCGStab did not reach {tol:g} "
                            f"(residual {stats.final_relative_residual:.3e})", stats)
    return x, stats
