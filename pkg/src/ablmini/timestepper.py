"""One time step of the projection scheme.

Order of work inside :func:`step`:

1. ghost fills
2. wall fluxes at t + dt/2 and SGS viscosities from u^n
3. Godunov face prediction, MAC projection, advective tendencies
4. implicit scalar solve for theta^{n+1}
5. implicit velocity solves for u*, sources at n + 1/2
6. nodal projection giving u^{n+1}, p^{n+1/2}, grad p
7. diagnostics

Diffusion is backward Euler with viscosities lagged at t^n.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import sgs as sgs_mod
from .advection import CFLViolation, advect, predict_face_velocities
from .config import CaseConfig
from .elliptic import CellPoissonMG, NodalMG, mac_project, nodal_project, nodal_rhs
from .elliptic.helmholtz import helmholtz_solve
from .gabls import WallFluxes, boundary_spec
from .grid import CellScalarField, CellVectorField, fill_ghost, plane_average_array
from .perf import StepTimers
from .state import State
from .wall import (friction_velocity, moeng_stress, surface_heat_flux, surface_temperature,
                   wall_velocity_gradient, wind_speed)

log = logging.getLogger(__name__)


@dataclass
class SourceTerms:
    buoyancy: tuple  # (x, y, z) arrays or zeros
    coriolis: tuple
    mean_sgs: tuple


def boussinesq_source(theta_n: CellScalarField, theta_np1: CellScalarField,
                      theta0: float, g: float = 9.81):
    """(0, 0, g (theta_half - theta0) / theta0) with theta_half the time average."""
    th = 0.5 * (theta_n.interior + theta_np1.interior)
    z = np.zeros_like(th)
    return (z, z.copy(), g * (th - theta0) / theta0)


def coriolis_source(u: CellVectorField, ug: float, vg: float, fc: float):
    """f-plane Coriolis with the geostrophic pressure gradient folded in."""
    uu, vv = u.u.interior, u.v.interior
    return (fc * (vv - vg), -fc * (uu - ug), np.zeros_like(uu))


def compute_cfl(state: State, dt: float) -> float:
    g = state.grid
    u, v, w = (c.interior for c in state.u.components)
    return float((np.abs(u) * (dt / g.dx) + np.abs(v) * (dt / g.dy)
                  + np.abs(w) * (dt / g.dz)).max())


def _nodal_div(u: CellVectorField, grid) -> float:
    """RMS of the node-averaged cell divergence, 1/s."""
    b = nodal_rhs(*(c.interior for c in u.components), grid) / grid.cell_volume
    return float(np.sqrt(np.mean(b * b)))


def _zeros3(shape):
    return tuple(np.zeros(shape) for _ in range(3))


class Simulation:
    """Holds a state plus the solver hierarchies reused from step to step."""

    def __init__(self, cfg: CaseConfig, state: State):
        self.cfg = cfg
        self.state = state
        grid = state.grid
        s = cfg.solver
        self.mac_solver = CellPoissonMG(grid, 1.0 / cfg.physics.rho, max_cycles=s.max_vcycles)
        self.nodal_solver = NodalMG(grid, cfg.dt / cfg.physics.rho, max_cycles=s.max_vcycles)

    def step(self) -> StepTimers:
        self.state, timers = step(self.state, self.cfg, self)
        return timers

    def run(self, steps: int, callback=None):
        out = []
        for _ in range(steps):
            t = self.step()
            out.append(t)
            if callback is not None:
                callback(self.state, t)
        return out


def surface_fluxes(state: State, cfg: CaseConfig, t_half: float):
    """SurfaceState and per-cell wall fluxes from the first cell level."""
    p = cfg.most_params()
    grid = state.grid
    u1 = state.u.u.interior[:, :, 0]
    v1 = state.u.v.interior[:, :, 0]
    th1 = state.theta.interior[:, :, 0]
    s = wind_speed(u1, v1)
    sbar = float(s.mean())
    theta_bar = float(th1.mean())
    theta_w = surface_temperature(t_half, cfg.physics.theta_surface, cfg.physics.cooling_rate)
    z1 = 0.5 * grid.dz
    # a momentarily warm surface is treated as neutral; the case family is stable
    surface = friction_velocity(sbar, max(theta_bar - theta_w, 0.0), z1, p, theta_wall=theta_w)
    surface.theta_bar = theta_bar
    tau13, tau23 = moeng_stress(u1, v1, surface)
    q = surface_heat_flux(th1, s, surface, p)
    if surface.u_tau > 0:
        dthdz = q * surface.phi_h / (p.kappa * surface.u_tau * z1)
    else:
        dthdz = np.zeros_like(q)
    fluxes = WallFluxes(tau13, tau23, q, wall_velocity_gradient(tau13, surface, p),
                        wall_velocity_gradient(tau23, surface, p), dthdz)
    return surface, fluxes


def step(state: State, cfg: CaseConfig, sim: Simulation | None = None):
    """Advance ``state`` by one step of cfg.dt; returns (new state, StepTimers)."""
    timers = StepTimers()
    timers.start()
    grid = state.grid
    dt = cfg.dt
    ph, sv, sc = cfg.physics, cfg.solver, cfg.sgs
    nu = cfg.nu
    t_half = state.t + 0.5 * dt
    shape = grid.shape

    with timers.section("diagnostics"):
        cfl = compute_cfl(state, dt)
        timers.diagnostics["cfl"] = cfl
        if cfl > sv.cfl_abort:
            raise CFLViolation(f"CFL {cfl:.3f} exceeds the hard cap {sv.cfl_abort}")
        if cfl > sv.cfl_max:
            log.warning("CFL %.3f above the configured maximum %.3f", cfl, sv.cfl_max)

    u = state.u.copy()
    theta = state.theta.copy()
    surface = state.surface

    with timers.section("sgs_wall"):
        fluxes = None
        if cfg.wall.model == "most":
            surface, fluxes = surface_fluxes(state, cfg, t_half)
        bcs = boundary_spec(cfg, fluxes)

    with timers.section("fillpatch"):
        fill_ghost(u, bcs.velocity)
        fill_ghost(theta, bcs.theta)

    with timers.section("sgs_wall"):
        if sc.model == "none":
            nu_t = np.zeros(shape)
            gamma = np.ones(grid.nz)
            nuT = np.zeros(grid.nz)
            S = None
        else:
            S = sgs_mod.strain_rate(u)
            Sf = sgs_mod.fluctuating_strain(S) if sc.model == "mfev_smagorinsky" else S
            nu_t = sgs_mod.smagorinsky_nut(Sf, sc, grid)
            gamma = sgs_mod.isotropy_gamma(S, sc.gamma_mode, grid).values
            if sc.model == "mfev_smagorinsky" and cfg.wall.model == "most":
                w = cfg.wall
                nuT = sgs_mod.mfev_nuT(grid.z_centers(), surface.u_tau, surface.L_obukhov,
                                       w.kappa, w.beta_m, sc.h_blend)
            else:
                nuT = np.zeros(grid.nz)
        if S is None:
            contrib = sgs_mod.SgsContributions(np.full(shape, nu), np.full(shape, nu / ph.Pr),
                                               _zeros3(grid.nz))
        else:
            contrib = sgs_mod.sgs_contributions(S, nu_t, nuT, gamma, nu, grid.dz,
                                                ph.Pr, sc.Pr_t)

    with timers.section("advection"):
        cor = (coriolis_source(u, ph.U_g, ph.V_g, ph.fc) if ph.coriolis else _zeros3(shape))
        buoy_n = (boussinesq_source(theta, theta, ph.theta0, ph.g) if ph.buoyancy
                  else _zeros3(shape))
        src = CellVectorField.zeros(grid)
        for a, comp in enumerate(src.components):
            val = cor[a] + buoy_n[a]
            if sv.predictor_pressure_source:
                val = val - state.gp.components[a].interior
            comp.interior[...] = val
        fill_ghost(src, bcs.source)
        faces = predict_face_velocities(u, dt, src)

    with timers.section("mac_projection"):
        mac_solver = sim.mac_solver if sim is not None else None
        faces, psi, mac_stats = mac_project(faces, ph.rho, sv.pressure_tol, solver=mac_solver,
                                            psi0=state.psi)
        timers.add_iterations("mac", mac_stats.iterations)

    with timers.section("advection"):
        adv_theta = advect(theta, faces, dt, vel=u)
        adv_u = advect(u, faces, dt, vel=u, src=src)

    with timers.section("scalar_solve"):
        rhs = theta.interior / dt + adv_theta
        th_new, st = helmholtz_solve(1.0 / dt, contrib.kappa_eff, rhs, bcs.theta_solve,
                                     tol=sv.helmholtz_tol, x0=theta.interior, grid=grid)
        timers.add_iterations("scalar", st.iterations)
        theta_new = CellScalarField.from_interior(grid, th_new)

    with timers.section("velocity_solve"):
        buoy = (boussinesq_source(theta, theta_new, ph.theta0, ph.g) if ph.buoyancy
                else _zeros3(shape))
        u_star = CellVectorField.zeros(grid)
        for a, name in enumerate(("velocity_u", "velocity_v", "velocity_w")):
            comp = u.components[a].interior
            rhs = (comp / dt + adv_u[a] - state.gp.components[a].interior + buoy[a] + cor[a]
                   + contrib.mean_tendency[a][None, None, :])
            x, st = helmholtz_solve(1.0 / dt, contrib.nu_eff, rhs, bcs.velocity_solve[a],
                                    tol=sv.helmholtz_tol, x0=comp, grid=grid)
            timers.add_iterations(name, st.iterations)
            u_star.components[a].interior[...] = x

    with timers.section("pressure_solve"):
        nodal_solver = sim.nodal_solver if sim is not None else None
        u_new, p_new, gp_new, pst = nodal_project(u_star, state.gp, ph.rho, dt,
                                                  sv.pressure_tol, solver=nodal_solver,
                                                  phi0=state.p.unique)
        timers.add_iterations("nodal", pst.iterations)

    with timers.section("diagnostics"):
        th = theta_new.interior
        timers.diagnostics.update(
            theta_min=float(th.min()), theta_max=float(th.max()),
            theta_first_level=float(plane_average_array(th[:, :, :1])[0]),
            u_tau=surface.u_tau, q_wall=surface.q_wall, theta_wall=surface.theta_wall,
            divergence_rms=_nodal_div(u_new, grid),
            mac_residual=mac_stats.final_relative_residual,
            nodal_residual=pst.final_relative_residual,
        )
        new = State(state.t + dt, state.step_index + 1, u_new, theta_new, p_new, gp_new,
                    CellScalarField.from_interior(grid, nu_t), surface, psi)
    timers.stop()
    return new, timers
