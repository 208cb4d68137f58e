"""Linear solves of a time step: MAC projection, nodal projection, Helmholtz."""
from dataclasses import dataclass


@dataclass
class SolveStats:
    iterations: int = 0
    final_relative_residual: float = 0.0
    converged: bool = True
    wall_time: float = 0.0
    tol: float = 0.0
    history: list = None


class SolverFailure(RuntimeError):
    """A linear solve did not reach its tolerance; ``stats`` holds the last state."""

    def __init__(self, msg, stats: SolveStats):
        super().__init__(msg)
        self.stats = stats


from .cellmg import CellPoissonMG, mac_project, poisson7_apply  # noqa: E402
from .helmholtz import helmholtz_apply, helmholtz_solve, HelmholtzOperator  # noqa: E402
from .nodal import NodalMG, nodal_project, nodal_rhs, nodal_gradient  # noqa: E402

__all__ = [
    "SolveStats", "SolverFailure", "CellPoissonMG", "mac_project", "poisson7_apply",
    "helmholtz_apply", "helmholtz_solve", "HelmholtzOperator",
    "NodalMG", "nodal_project", "nodal_rhs", "nodal_gradient",
]
