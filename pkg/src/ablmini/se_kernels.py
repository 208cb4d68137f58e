"""Spectral-element kernel microbenchmarks on affine unit-cube hexahedra.

Element data are stored ``[e, k, j, i]`` with i (x) fastest.  Every kernel is
a chain of 1-D contractions (sum factorisation), costing 2 m n (N+1)^2 flops
per element for an m x n matrix applied along one direction.

Work models, per element, in units of (N+1)^4 flops:

* Ax:  C = 12 (three derivatives in, three transposed out)
* fdm: C = 12 ((N+3)/(N+1))^4 on the (N+3)^3 extended box
* adv: C from the interpolation and derivative chain, see :func:`adv_flops`

The fdm box is read as polynomial order N+2, i.e. N+3 points per direction.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from numpy.polynomial import legendre as L

PRECISIONS = {32: np.float32, 64: np.float64}
KERNELS = ("ax", "adv", "fdm")
AFFINE_G = 0.5  # (2/h)^2 * (h/2)^3 with h = 1


# --------------------------------------------------------------------------
# 1-D operators
# --------------------------------------------------------------------------

def gll_points(N: int):
    """Gauss-Lobatto-Legendre nodes and weights on [-1, 1] (N+1 points)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    cN = np.zeros(N + 1)
    cN[-1] = 1.0
    interior = L.legroots(L.legder(cN)) if N > 1 else np.array([])
    x = np.concatenate(([-1.0], np.sort(interior.real), [1.0]))
    w = 2.0 / (N * (N + 1) * L.legval(x, cN) ** 2)
    return x, w


def lagrange_matrix(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """J[q, i] = l_i(x_q) for the Lagrange basis on ``nodes``."""
    J = np.ones((len(x), len(nodes)))
    for i, xi in enumerate(nodes):
        for m, xm in enumerate(nodes):
            if m != i:
                J[:, i] *= (x - xm) / (xi - xm)
    return J


def derivative_matrix(nodes: np.ndarray) -> np.ndarray:
    """D[a, i] = l_i'(x_a)."""
    n = len(nodes)
    c = np.array([np.prod([nodes[i] - nodes[m] for m in range(n) if m != i]) for i in range(n)])
    D = np.empty((n, n))
    for a in range(n):
        for i in range(n):
            if a != i:
                D[a, i] = c[a] / (c[i] * (nodes[a] - nodes[i]))
    D[np.diag_indices(n)] = 0.0
    D[np.diag_indices(n)] = -D.sum(axis=1)
    return D


def cubature_order(N: int) -> int:
    """Gauss points per direction for the dealiased advection operator."""
    return min(math.ceil(3 * (N + 1) / 2) + 1, N + 3)


# --------------------------------------------------------------------------
# batch and flop accounting
# --------------------------------------------------------------------------

class FlopCounter:
    """Counts multiplies and adds of the contractions actually executed."""

    def __init__(self):
        self.flops = 0

    def add(self, n):
        self.flops += int(n)


def _cx(A, u, counter=None):
    """Contract the x (last) axis with A (m x n)."""
    if counter is not None:
        counter.add(2 * A.shape[0] * u.size)
    return u @ A.T


def _cy(A, u, counter=None):
    if counter is not None:
        counter.add(2 * A.shape[0] * u.size)
    return np.matmul(A, u)


def _cz(A, u, counter=None):
    if counter is not None:
        counter.add(2 * A.shape[0] * u.size)
    E, n, b, c = u.shape
    return np.matmul(A, u.reshape(E, n, b * c)).reshape(E, A.shape[0], b, c)


def _scale(a, b, counter=None):
    if counter is not None:
        counter.add(max(np.size(a), np.size(b)))
    return a * b


@dataclass
class ElementBatch:
    E: int
    N: int
    precision: int = 64
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    D: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.E < 1:
            raise ValueError("E must be >= 1")
        if self.precision not in PRECISIONS:
            raise ValueError("precision must be 32 or 64")
        self.nodes, self.weights = gll_points(self.N)
        self.D = derivative_matrix(self.nodes)
        self.Nq = cubature_order(self.N)
        xq, wq = L.leggauss(self.Nq)
        self.Jq = lagrange_matrix(self.nodes, xq)
        self.wq = wq
        self._fdm = None

    @property
    def dtype(self):
        return PRECISIONS[self.precision]

    @property
    def n1(self) -> int:
        return self.N + 1

    def field(self, rng=None, n=None):
        n = self.n1 if n is None else n
        rng = np.random.default_rng(0) if rng is None else rng
        return rng.standard_normal((self.E, n, n, n)).astype(self.dtype)

    def cast(self, a):
        return np.asarray(a, dtype=self.dtype)

    def weights3(self, w=None):
        w = self.weights if w is None else w
        return w[:, None, None] * w[None, :, None] * w[None, None, :]

    def fdm_data(self):
        if self._fdm is None:
            self._fdm = fdm_operators(self.N)
        return self._fdm


# --------------------------------------------------------------------------
# Ax
# --------------------------------------------------------------------------

def ax_poisson(batch: ElementBatch, u: np.ndarray, counter: FlopCounter | None = None):
    """w = sum_d D_d^T (G W D_d u) for every element (affine unit cube)."""
    D = batch.cast(batch.D)
    GW = batch.cast(AFFINE_G * batch.weights3())
    u = batch.cast(u)
    ur = _scale(GW, _cx(D, u, counter), counter)
    us = _scale(GW, _cy(D, u, counter), counter)
    ut = _scale(GW, _cz(D, u, counter), counter)
    w = _cx(D.T, ur, counter)
    w += _cy(D.T, us, counter)
    w += _cz(D.T, ut, counter)
    if counter is not None:
        counter.add(2 * u.size)
    return w


def dense_stiffness(N: int) -> np.ndarray:
    """Assembled single-element stiffness via Kronecker products (oracle)."""
    x, w = gll_points(N)
    D = derivative_matrix(x)
    W = np.diag(w)
    A1 = D.T @ W @ D
    # index order (k, j, i) with i fastest, matching the batch layout
    return AFFINE_G * (np.kron(W, np.kron(W, A1)) + np.kron(W, np.kron(A1, W))
                       + np.kron(A1, np.kron(W, W)))


# --------------------------------------------------------------------------
# advection on the cubature grid
# --------------------------------------------------------------------------

def adv_cubature(batch: ElementBatch, u3, c, counter: FlopCounter | None = None):
    """Weak-form c . grad(u_m) for three components, dealiased on Nq^3 Gauss points.

    ``c`` is (cx, cy, cz), each (E, Nq, Nq, Nq), already on the cubature grid
    and in reference-to-physical units of the unit cube.  Returns three
    (E, N+1, N+1, N+1) arrays: J^T (W_q jac (c . grad u_m)).
    """
    J = batch.cast(batch.Jq)
    JD = batch.cast(batch.Jq @ batch.D * 2.0)  # d/dx = 2 d/dr on the unit cube
    Wq = batch.cast(batch.weights3(batch.wq) * 0.125)
    cx, cy, cz = (batch.cast(a) for a in c)
    out = []
    for u in u3:
        u = batch.cast(u)
        # shared partial interpolations
        a = _cx(J, u, counter)
        b = _cx(JD, u, counter)
        ab = _cy(J, a, counter)
        dx = _cz(J, _cy(J, b, counter), counter)
        dy = _cz(J, _cy(JD, a, counter), counter)
        dz = _cz(JD, ab, counter)
        f = _scale(cx, dx, counter)
        f += _scale(cy, dy, counter)
        f += _scale(cz, dz, counter)
        f = _scale(Wq, f, counter)
        out.append(_cx(J.T, _cy(J.T, _cz(J.T, f, counter), counter), counter))
    return tuple(out)


def adv_flops(N: int, E: int = 1) -> int:
    batch = ElementBatch(E, N)
    cnt = FlopCounter()
    z = np.zeros((E, batch.Nq, batch.Nq, batch.Nq))
    u = np.zeros((E, N + 1, N + 1, N + 1))
    adv_cubature(batch, (u, u, u), (z, z, z), cnt)
    return cnt.flops


# --------------------------------------------------------------------------
# fast diagonalisation on the extended box
# --------------------------------------------------------------------------

@dataclass
class FDMOperators:
    A: np.ndarray  # 1-D stiffness on N+3 points
    B: np.ndarray  # 1-D lumped mass
    S: np.ndarray  # generalised eigenvectors, S^T B S = I
    lam: np.ndarray  # 1-D eigenvalues
    Lsum: np.ndarray  # separable eigenvalue sums, (N+3)^3


def fdm_operators(N: int, overlap: float | None = None) -> FDMOperators:
    """1-D operators for the box extended by one node on each side.

    The element interval [-1, 1] carries its GLL points; each side gains a
    linear sliver of width ``overlap`` (default: the first GLL gap) ending in
    an extra unknown, plus a second sliver to a Dirichlet node.
    """
    x, w = gll_points(N)
    d = (x[1] - x[0]) if overlap is None else overlap
    D = derivative_matrix(x)
    n = N + 3
    A = np.zeros((n, n))
    B = np.zeros(n)
    A[1:-1, 1:-1] += D.T @ np.diag(w) @ D
    B[1:-1] += w
    lin_k = np.array([[1.0, -1.0], [-1.0, 1.0]]) / d
    for a, b in ((0, 1), (n - 2, n - 1)):
        A[a:b + 1, a:b + 1] += lin_k
        B[a] += 0.5 * d
        B[b] += 0.5 * d
    # outer slivers to the Dirichlet nodes contribute only their diagonal parts
    A[0, 0] += 1.0 / d
    A[-1, -1] += 1.0 / d
    B[0] += 0.5 * d
    B[-1] += 0.5 * d
    lam, S = scipy.linalg.eigh(A, np.diag(B))
    Lsum = lam[:, None, None] + lam[None, :, None] + lam[None, None, :]
    return FDMOperators(A, B, S, lam, Lsum)


def fdm_smoother(batch: ElementBatch, r: np.ndarray, counter: FlopCounter | None = None):
    """z = (S x S x S) Lsum^{-1} (S x S x S)^T r on (E, N+3, N+3, N+3) boxes."""
    op = batch.fdm_data()
    S = batch.cast(op.S)
    inv = batch.cast(1.0 / op.Lsum)
    r = batch.cast(r)
    t = _cz(S.T, _cy(S.T, _cx(S.T, r, counter), counter), counter)
    t = _scale(inv, t, counter)
    return _cz(S, _cy(S, _cx(S, t, counter), counter), counter)


def fdm_apply_operator(N: int, x: np.ndarray) -> np.ndarray:
    """The separable operator B x B x A + B x A x B + A x B x B on extended boxes."""
    op = fdm_operators(N)
    A, B = op.A, np.diag(op.B)
    y = _cx(A, _cy(B, _cz(B, x)))
    y += _cx(B, _cy(A, _cz(B, x)))
    y += _cx(B, _cy(B, _cz(A, x)))
    return y


# --------------------------------------------------------------------------
# benchmark
# --------------------------------------------------------------------------

def work_model(kernel: str, N: int):
    """(C, C_b): flops = C E (N+1)^4, bytes = C_b E (N+1)^3 wordsize."""
    n1 = N + 1
    if kernel == "ax":
        return 12.0, 2.0
    if kernel == "fdm":
        r = (N + 3) / n1
        return 12.0 * r ** 4, 2.0 * r ** 3
    if kernel == "adv":
        nq = cubature_order(N)
        return adv_flops(N) / n1 ** 4, 6.0 + 3.0 * (nq / n1) ** 3
    raise ValueError(f"unknown kernel {kernel!r}")


@dataclass
class KernelReport:
    kernel: str
    N: int
    E: int
    precision: int
    seconds: float
    C: float
    C_b: float

    @property
    def flops(self) -> float:
        return self.C * self.E * (self.N + 1) ** 4

    @property
    def bytes(self) -> float:
        return self.C_b * self.E * (self.N + 1) ** 3 * (self.precision // 8)

    @property
    def gflops(self) -> float:
        return self.flops / self.seconds / 1e9

    @property
    def gbs(self) -> float:
        return self.bytes / self.seconds / 1e9


def _runner(kernel: str, batch: ElementBatch):
    rng = np.random.default_rng(1)
    if kernel == "ax":
        u = batch.field(rng)
        return lambda: ax_poisson(batch, u)
    if kernel == "fdm":
        r = batch.field(rng, batch.N + 3)
        batch.fdm_data()
        return lambda: fdm_smoother(batch, r)
    if kernel == "adv":
        u3 = tuple(batch.field(rng) for _ in range(3))
        c = tuple(batch.field(rng, batch.Nq) for _ in range(3))
        return lambda: adv_cubature(batch, u3, c)
    raise ValueError(f"unknown kernel {kernel!r}")


def bench(kernels=KERNELS, N: int = 8, E: int = 512, precision: int = 64,
          repetitions: int = 50, warmup: int = 2) -> list[KernelReport]:
    """Best-of-``repetitions`` timing of each kernel after ``warmup`` untimed calls."""
    out = []
    for k in kernels:
        batch = ElementBatch(E, N, precision)
        fn = _runner(k, batch)
        for _ in range(warmup):
            fn()
        best = math.inf
        for _ in range(repetitions):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        C, Cb = work_model(k, N)
        out.append(KernelReport(k, N, E, precision, best, C, Cb))
    return out


REPORT_COLUMNS = ("kernel", "N", "E", "precision", "seconds", "C", "C_b", "model_flops",
                  "model_bytes", "GFLOPS", "GB_per_s")


def write_bench_csv(reports: list[KernelReport], path, meta: dict | None = None):
    with open(path, "w", newline="") as fh:
        meta = dict(meta or {})
        meta.setdefault("fdm_extension", "order N+2, (N+3)^3 points")
        meta.setdefault("flops_model", "C*E*(N+1)^4")
        meta.setdefault("bytes_model", "C_b*E*(N+1)^3*wordsize")
        for k, v in meta.items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            w.writerow([r.kernel, r.N, r.E, r.precision, f"{r.seconds:.6e}", f"{r.C:.6g}",
                        f"{r.C_b:.6g}", f"{r.flops:.6e}", f"{r.bytes:.6e}", f"{r.gflops:.4f}",
                        f"{r.gbs:.4f}"])
