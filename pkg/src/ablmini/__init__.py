"""Desk-scale LES mini-app for the GABLS stable boundary layer."""
from .config import CaseConfig, ConfigError
from .gabls import boundary_spec, initialize, weak_scale_domain
from .grid import (BC, BCSpec, CellScalarField, CellVectorField, FaceVelocitySet, GridSpec,
                   NodeScalarField, Profile, build_grid, divergence_mac, fill_ghost,
                   plane_average)
from .state import State
from .timestepper import Simulation, step

__all__ = [
    "CaseConfig", "ConfigError", "boundary_spec", "initialize", "weak_scale_domain",
    "BC", "BCSpec", "CellScalarField", "CellVectorField", "FaceVelocitySet", "GridSpec",
    "NodeScalarField", "Profile", "build_grid", "divergence_mac", "fill_ghost",
    "plane_average", "State", "Simulation", "step",
]
