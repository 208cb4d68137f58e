"""Structured-grid geometry and field containers.

Cell arrays are stored ``[i, j, k]`` with ``ghost`` extra layers on every side;
face and node arrays carry no ghosts.  External formats (checkpoints, slices)
are written x-fastest regardless of the in-memory order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GHOST = 2


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    nz: int
    Lx: float
    Ly: float
    Lz: float
    ghost: int = GHOST
    periodic_x: bool = True
    periodic_y: bool = True

    def __post_init__(self):
        for name in ("nx", "ny", "nz"):
            if getattr(self, name) < 4:
                raise ValueError(f"{name}={getattr(self, name)} must be >= 4")
        for name in ("Lx", "Ly", "Lz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name}={getattr(self, name)} must be > 0")
        if self.ghost < 2:
            raise ValueError(f"ghost={self.ghost} must be >= 2")

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def dy(self) -> float:
        return self.Ly / self.ny

    @property
    def dz(self) -> float:
        return self.Lz / self.nz

    @property
    def n(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def ghosted_shape(self) -> tuple[int, int, int]:
        g2 = 2 * self.ghost
        return (self.nx + g2, self.ny + g2, self.nz + g2)

    @property
    def avg_dx(self) -> float:
        """Average grid spacing (Lx Ly Lz / n) ** (1/3)."""
        return float(np.cbrt(self.Lx * self.Ly * self.Lz / self.n))

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy * self.dz

    @property
    def interior(self) -> tuple[slice, slice, slice]:
        g = self.ghost
        return (slice(g, g + self.nx), slice(g, g + self.ny), slice(g, g + self.nz))

    def z_centers(self) -> np.ndarray:
        return (np.arange(self.nz) + 0.5) * self.dz

    def x_centers(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    def y_centers(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.dy


def build_grid(nx, ny, nz, Lx, Ly, Lz, periodic_x=True, periodic_y=True,
               ghost=GHOST) -> GridSpec:
    return GridSpec(int(nx), int(ny), int(nz), float(Lx), float(Ly), float(Lz),
                    ghost=int(ghost), periodic_x=periodic_x, periodic_y=periodic_y)


@dataclass
class CellScalarField:
    grid: GridSpec
    data: np.ndarray

    @classmethod
    def zeros(cls, grid: GridSpec) -> "CellScalarField":
        return cls(grid, np.zeros(grid.ghosted_shape))

    @classmethod
    def from_interior(cls, grid: GridSpec, values) -> "CellScalarField":
        f = cls.zeros(grid)
        f.interior[...] = values
        return f

    @property
    def interior(self) -> np.ndarray:
        return self.data[self.grid.interior]

    def copy(self) -> "CellScalarField":
        return CellScalarField(self.grid, self.data.copy())


@dataclass
class CellVectorField:
    u: CellScalarField
    v: CellScalarField
    w: CellScalarField

    def __post_init__(self):
        if not (self.u.grid == self.v.grid == self.w.grid):
            raise ValueError("vector components must share one grid")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "CellVectorField":
        return cls(*(CellScalarField.zeros(grid) for _ in range(3)))

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    @property
    def components(self) -> tuple[CellScalarField, CellScalarField, CellScalarField]:
        return (self.u, self.v, self.w)

    def copy(self) -> "CellVectorField":
        return CellVectorField(self.u.copy(), self.v.copy(), self.w.copy())


@dataclass
class FaceVelocitySet:
    """Normal velocities on x-, y- and z-faces."""
    grid: GridSpec
    uf: np.ndarray  # (nx+1, ny, nz)
    vf: np.ndarray  # (nx, ny+1, nz)
    wf: np.ndarray  # (nx, ny, nz+1)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "FaceVelocitySet":
        nx, ny, nz = grid.shape
        return cls(grid, np.zeros((nx + 1, ny, nz)), np.zeros((nx, ny + 1, nz)),
                   np.zeros((nx, ny, nz + 1)))

    def copy(self) -> "FaceVelocitySet":
        return FaceVelocitySet(self.grid, self.uf.copy(), self.vf.copy(), self.wf.copy())


@dataclass
class NodeScalarField:
    """Nodal values including the duplicated periodic planes (i=nx, j=ny)."""
    grid: GridSpec
    data: np.ndarray  # (nx+1, ny+1, nz+1)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "NodeScalarField":
        nx, ny, nz = grid.shape
        return cls(grid, np.zeros((nx + 1, ny + 1, nz + 1)))

    @classmethod
    def from_unique(cls, grid: GridSpec, values: np.ndarray) -> "NodeScalarField":
        """Build from the (nx, ny, nz+1) array of independent periodic nodes."""
        nx, ny, _ = grid.shape
        data = np.empty((nx + 1, ny + 1, values.shape[2]))
        data[:nx, :ny] = values
        data[nx, :ny] = values[0]
        data[:, ny] = data[:, 0]
        return cls(grid, data)

    @property
    def unique(self) -> np.ndarray:
        nx, ny, _ = self.grid.shape
        return self.data[:nx, :ny]


@dataclass
class Profile:
    z: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.z) != len(self.values):
            raise ValueError("profile length mismatch")

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]


# --------------------------------------------------------------------------
# boundary conditions
# --------------------------------------------------------------------------

BC_KINDS = ("periodic", "even", "odd", "gradient", "flux")


@dataclass(frozen=True)
class BC:
    """One boundary side.

    ``even``: zero-gradient mirror.  ``odd``: mirror about ``value`` at the
    boundary face (Dirichlet).  ``gradient``: mirror plus ``value`` * distance,
    where ``value`` is the outward-positive-z derivative (may be an (nx, ny)
    array for z sides).  ``flux``: prescribed diffusive flux beta * d/dz,
    meaningful only to the Helmholtz solver.
    """
    kind: str
    value: float | np.ndarray = 0.0

    def __post_init__(self):
        if self.kind not in BC_KINDS:
            raise ValueError(f"unknown BC kind {self.kind!r}")


PERIODIC = BC("periodic")


@dataclass(frozen=True)
class BCSpec:
    zlo: BC
    zhi: BC
    xlo: BC = PERIODIC
    xhi: BC = PERIODIC
    ylo: BC = PERIODIC
    yhi: BC = PERIODIC

    def __post_init__(self):
        if "periodic" in (self.zlo.kind, self.zhi.kind):
            raise ValueError("periodic boundaries are not supported in z")
        for lo, hi, ax in ((self.xlo, self.xhi, "x"), (self.ylo, self.yhi, "y")):
            if (lo.kind == "periodic") != (hi.kind == "periodic"):
                raise ValueError(f"periodic {ax} must be set on both sides")


def _fill_axis_lo(a, g, n, axis, bc: BC, h):
    def sl(idx):
        s = [slice(None)] * 3
        s[axis] = idx
        return tuple(s)

    for m in range(1, g + 1):
        ghost, mirror = g - m, g + m - 1
        if bc.kind == "periodic":
            a[sl(ghost)] = a[sl(ghost + n)]
        elif bc.kind == "even":
            a[sl(ghost)] = a[sl(mirror)]
        elif bc.kind == "odd":
            a[sl(ghost)] = 2.0 * bc.value - a[sl(mirror)]
        elif bc.kind == "gradient":
            a[sl(ghost)] = a[sl(mirror)] - (2 * m - 1) * h * bc.value
        else:
            raise ValueError(f"cannot fill ghosts for a {bc.kind!r} boundary")


def _fill_axis_hi(a, g, n, axis, bc: BC, h):
    def sl(idx):
        s = [slice(None)] * 3
        s[axis] = idx
        return tuple(s)

    for m in range(1, g + 1):
        ghost, mirror = g + n - 1 + m, g + n - m
        if bc.kind == "periodic":
            a[sl(ghost)] = a[sl(ghost - n)]
        elif bc.kind == "even":
            a[sl(ghost)] = a[sl(mirror)]
        elif bc.kind == "odd":
            a[sl(ghost)] = 2.0 * bc.value - a[sl(mirror)]
        elif bc.kind == "gradient":
            a[sl(ghost)] = a[sl(mirror)] + (2 * m - 1) * h * bc.value
        else:
            raise ValueError(f"cannot fill ghosts for a {bc.kind!r} boundary")


def fill_ghost(f, bc) -> None:
    """Fill ghost layers in place.

    ``f`` is a CellScalarField with a BCSpec, or a CellVectorField with a
    sequence of three BCSpecs (one per component).
    """
    if isinstance(f, CellVectorField):
        for comp, b in zip(f.components, bc):
            fill_ghost(comp, b)
        return
    grid, a, g = f.grid, f.data, f.grid.ghost
    if grid.periodic_x != (bc.xlo.kind == "periodic"):
        raise ValueError("x boundary kind disagrees with grid periodicity")
    if grid.periodic_y != (bc.ylo.kind == "periodic"):
        raise ValueError("y boundary kind disagrees with grid periodicity")
    # z on interior columns, then x on all z, then y on everything: corners
    # end up consistent with both directions
    inner = a[g:g + grid.nx, g:g + grid.ny, :]
    _fill_axis_lo(inner, g, grid.nz, 2, bc.zlo, grid.dz)
    _fill_axis_hi(inner, g, grid.nz, 2, bc.zhi, grid.dz)
    xs = a[:, g:g + grid.ny, :]
    _fill_axis_lo(xs, g, grid.nx, 0, bc.xlo, grid.dx)
    _fill_axis_hi(xs, g, grid.nx, 0, bc.xhi, grid.dx)
    _fill_axis_lo(a, g, grid.ny, 1, bc.ylo, grid.dy)
    _fill_axis_hi(a, g, grid.ny, 1, bc.yhi, grid.dy)


# --------------------------------------------------------------------------
# reductions and discrete operators
# --------------------------------------------------------------------------

def plane_average_array(a: np.ndarray) -> np.ndarray:
    """Mean over the first two axes of an (nx, ny, nz) array.

    Each level is reduced as one contiguous row, so numpy's pairwise summation
    fixes the order independently of worker count.  Deviations from the
    level's first sample are summed, which makes constant levels exact.
    """
    nx, ny, nz = a.shape
    rows = np.ascontiguousarray(a.reshape(nx * ny, nz).T)
    ref = rows[:, 0].copy()
    return ref + (rows - ref[:, None]).sum(axis=1) / (nx * ny)


def plane_average(f: CellScalarField) -> Profile:
    return Profile(f.grid.z_centers(), plane_average_array(f.interior))


def divergence_mac(f: FaceVelocitySet) -> CellScalarField:
    g = f.grid
    d = ((f.uf[1:] - f.uf[:-1]) / g.dx
         + (f.vf[:, 1:] - f.vf[:, :-1]) / g.dy
         + (f.wf[:, :, 1:] - f.wf[:, :, :-1]) / g.dz)
    return CellScalarField.from_interior(g, d)
