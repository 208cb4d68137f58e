"""GABLS stable boundary layer: initial state, boundary conditions, weak-scaling domains."""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np

from .config import CaseConfig, ConfigError
from .grid import BC, BCSpec, CellScalarField, plane_average_array
from .state import State


def initial_theta_profile(z: np.ndarray, cfg: CaseConfig) -> np.ndarray:
    ph = cfg.physics
    z = np.asarray(z, dtype=float)
    return ph.theta_surface + ph.lapse_rate * np.maximum(z - ph.inversion_height, 0.0)


def theta_perturbation(cfg: CaseConfig) -> np.ndarray:
    """Uniform noise below the perturbation height, plane mean removed per level.

    Philox is counter based, so the field depends only on the seed and the
    grid size, never on how many workers are running.
    """
    grid = cfg.build_grid()
    ph = cfg.physics
    amp = ph.perturbation_amplitude
    rng = np.random.Generator(np.random.Philox(cfg.run.seed))
    noise = rng.uniform(-amp, amp, size=grid.shape)
    mask = grid.z_centers() <= ph.perturbation_height
    d = np.zeros(grid.shape)
    if not mask.any() or amp == 0:
        return d
    sub = noise[:, :, mask]
    sub = sub - plane_average_array(sub)[None, None, :]
    peak = np.abs(sub).max()
    if peak > amp:
        # recentring can push a sample past the amplitude; shrink to fit
        sub *= amp / peak
    d[:, :, mask] = sub
    return d


def initialize(cfg: CaseConfig) -> State:
    cfg.validate()
    grid = cfg.build_grid()
    ph = cfg.physics
    st = State.zeros(grid)
    st.u.u.interior[...] = ph.U_g
    st.u.v.interior[...] = ph.V_g
    theta = initial_theta_profile(grid.z_centers(), cfg)[None, None, :] + theta_perturbation(cfg)
    st.theta = CellScalarField.from_interior(grid, theta)
    st.surface.theta_wall = ph.theta_surface
    return st


@dataclass
class WallFluxes:
    """Per-cell bottom fluxes and the matching wall-normal gradients, (nx, ny) each."""
    tau13: np.ndarray
    tau23: np.ndarray
    q: np.ndarray
    dudz: np.ndarray
    dvdz: np.ndarray
    dthdz: np.ndarray


@dataclass
class BoundaryBundle:
    velocity: tuple[BCSpec, BCSpec, BCSpec]  # ghost extension
    theta: BCSpec
    velocity_solve: tuple[BCSpec, BCSpec, BCSpec]  # Helmholtz side conditions
    theta_solve: BCSpec
    source: tuple[BCSpec, BCSpec, BCSpec]


EVEN = BC("even")
NO_PENETRATION = BCSpec(BC("odd", 0.0), BC("odd", 0.0))


def boundary_spec(cfg: CaseConfig, fluxes: WallFluxes | None = None) -> BoundaryBundle:
    """Periodic x, y; stress-free rigid lid on top; MOST traction and heat flux below.

    Top theta carries the lapse-rate gradient for the GABLS case.  With
    ``wall.model = free_slip`` the bottom is stress-free and adiabatic.
    """
    top_theta = BC("gradient", cfg.physics.lapse_rate) if cfg.run.case == "gabls" else EVEN
    if cfg.wall.model == "most":
        if fluxes is None:
            grid = cfg.build_grid()
            z = np.zeros((grid.nx, grid.ny))
            fluxes = WallFluxes(z, z, z, z, z, z)
        vel = (BCSpec(BC("gradient", fluxes.dudz), EVEN),
               BCSpec(BC("gradient", fluxes.dvdz), EVEN), NO_PENETRATION)
        theta = BCSpec(BC("gradient", fluxes.dthdz), top_theta)
        vel_solve = (BCSpec(BC("flux", fluxes.tau13), EVEN),
                     BCSpec(BC("flux", fluxes.tau23), EVEN), NO_PENETRATION)
        theta_solve = BCSpec(BC("flux", fluxes.q), top_theta)
    else:
        vel = (BCSpec(EVEN, EVEN), BCSpec(EVEN, EVEN), NO_PENETRATION)
        theta = BCSpec(EVEN, top_theta)
        vel_solve = vel
        theta_solve = theta
    src = (BCSpec(EVEN, EVEN),) * 3
    return BoundaryBundle(vel, theta, vel_solve, theta_solve, src)


def weak_scale_domain(cfg: CaseConfig, target_n: int) -> CaseConfig:
    """Stretch x (then y) by powers of two so the grid holds ``target_n`` cells at fixed spacing."""
    g = cfg.grid
    if g.nx % g.mx or g.ny % g.my:
        raise ConfigError("grid counts must be divisible by the current multipliers")
    nx1, ny1 = g.nx // g.mx, g.ny // g.my
    base = nx1 * ny1 * g.nz
    ratio = target_n / base
    e = round(math.log2(ratio)) if ratio >= 1 else -1
    if e < 0 or 2 ** e * base != target_n:
        raise ConfigError(f"target_n={target_n} is not a power-of-two multiple of {base}")
    mx, my = 2 ** ((e + 1) // 2), 2 ** (e // 2)
    out = copy.deepcopy(cfg)
    out.grid.mx, out.grid.my = mx, my
    out.grid.nx, out.grid.ny = nx1 * mx, ny1 * my
    out.validate()
    return out
