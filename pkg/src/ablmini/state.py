"""The time-level solution bundle."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import CellScalarField, CellVectorField, GridSpec, NodeScalarField
from .wall import SurfaceState


@dataclass
class State:
    t: float
    step_index: int
    u: CellVectorField
    theta: CellScalarField
    p: NodeScalarField
    gp: CellVectorField
    nu_t: CellScalarField
    surface: SurfaceState = field(default_factory=SurfaceState)
    psi: np.ndarray | None = None  # last MAC potential, warm start only

    @classmethod
    def zeros(cls, grid: GridSpec, theta: float = 0.0) -> "State":
        th = CellScalarField.zeros(grid)
        th.data[...] = theta
        return cls(0.0, 0, CellVectorField.zeros(grid), th, NodeScalarField.zeros(grid),
                   CellVectorField.zeros(grid), CellScalarField.zeros(grid))

    @property
    def grid(self) -> GridSpec:
        return self.theta.grid

    def copy(self) -> "State":
        return State(self.t, self.step_index, self.u.copy(), self.theta.copy(),
                     NodeScalarField(self.grid, self.p.data.copy()), self.gp.copy(),
                     self.nu_t.copy(), SurfaceState(**vars(self.surface)),
                     None if self.psi is None else self.psi.copy())
