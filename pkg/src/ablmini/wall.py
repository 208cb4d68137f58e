"""Monin-Obukhov surface-layer fluxes for the stable boundary layer.

Stability functions are the linear stable forms phi = 1 + beta * z / L.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class MOSTParams:
    kappa: float = 0.4
    z0: float = 0.1
    beta_m: float = 4.8
    beta_h: float = 7.8
    g: float = 9.81
    theta0: float = 263.5

    def __post_init__(self):
        if not self.z0 > 0:
            raise ValueError("z0 must be > 0")
        if not 0.3 < self.kappa < 0.45:
            raise ValueError("kappa must lie in (0.3, 0.45)")


@dataclass
class SurfaceState:
    u_tau: float = 0.0
    q_wall: float = 0.0  # upward kinematic heat flux -u_tau theta_*, <= 0 when stable
    L_obukhov: float = math.inf
    theta_wall: float = 0.0
    sbar: float = 0.0
    theta_bar: float = 0.0
    z1: float = 0.0
    theta_star: float = 0.0
    phi_m: float = 1.0
    phi_h: float = 1.0
    iterations: int = 0


class WallModelFailure(RuntimeError):
    def __init__(self, msg, state: SurfaceState):
        super().__init__(msg)
        self.state = state


def surface_temperature(t: float, theta_start: float = 265.0, rate_per_hour: float = 0.25) -> float:
    """GABLS surface temperature; ``t`` in seconds."""
    if t < 0:
        raise ValueError("time must be >= 0")
    return theta_start - rate_per_hour * (t / 3600.0)


def friction_velocity(sbar: float, dtheta: float, z1: float, p: MOSTParams,
                      theta_wall: float = 0.0, tol: float = 1e-10,
                      max_iter: int = 100) -> SurfaceState:
    """Solve the stable MOST relations at height z1 by damped fixed-point iteration.

        u_tau   = kappa sbar   / (ln(z1/z0) + beta_m z1/L)
        theta_* = kappa dtheta / (ln(z1/z0) + beta_h z1/L)
        L       = u_tau^2 theta0 / (kappa g theta_*)
    """
    if dtheta < 0:
        raise ValueError(f"dtheta={dtheta:g} < 0: unstable stratification is not supported")
    if not z1 > p.z0:
        raise ValueError("z1 must exceed z0")
    st = SurfaceState(theta_wall=theta_wall, sbar=sbar, theta_bar=theta_wall + dtheta, z1=z1)
    if sbar <= 0:
        return st
    log = math.log(z1 / p.z0)
    ut = p.kappa * sbar / log
    ts = p.kappa * dtheta / log
    if dtheta == 0:
        st.u_tau = ut
        return st

    def obukhov(ut, ts):
        return ut * ut * p.theta0 / (p.kappa * p.g * ts)

    L = obukhov(ut, ts)
    for it in range(1, max_iter + 1):
        ut_new = p.kappa * sbar / (log + p.beta_m * z1 / L)
        ts_new = p.kappa * dtheta / (log + p.beta_h * z1 / L)
        d_ut = 0.5 * (ut_new - ut)
        ut += d_ut
        ts += 0.5 * (ts_new - ts)
        L = obukhov(ut, ts)
        st.iterations = it
        if abs(d_ut) <= tol and abs(ts_new - ts) <= tol:
            break
    else:
        st.u_tau, st.theta_star, st.L_obukhov = ut, ts, L
        raise WallModelFailure(f"MOST iteration did not converge in {max_iter} steps", st)
    st.u_tau, st.theta_star, st.L_obukhov = ut, ts, L
    st.q_wall = -ut * ts
    st.phi_m = 1.0 + p.beta_m * z1 / L
    st.phi_h = 1.0 + p.beta_h * z1 / L
    return st


def most_residuals(st: SurfaceState, dtheta: float, p: MOSTParams) -> tuple[float, float]:
    """Residuals of the two similarity relations at a converged state."""
    log = math.log(st.z1 / p.z0)
    zl = st.z1 / st.L_obukhov
    r_m = st.u_tau - p.kappa * st.sbar / (log + p.beta_m * zl)
    r_h = st.theta_star - p.kappa * dtheta / (log + p.beta_h * zl)
    return r_m, r_h


def wind_speed(u1: np.ndarray, v1: np.ndarray) -> np.ndarray:
    return np.sqrt(u1 * u1 + v1 * v1)


def moeng_stress(u1: np.ndarray, v1: np.ndarray, surface: SurfaceState):
    """Local wall stresses (tau_13, tau_23) on the first cell plane.

    tau_i3 = [mean(u_i) s + sbar (u_i - mean(u_i))] / sbar^2 * u_tau^2 is the
    wall value of nu du_i/dz; it is positive along the mean wind, so the
    resulting flux decelerates the flow.
    """
    if surface.sbar <= 0 or surface.u_tau <= 0:
        return np.zeros_like(u1), np.zeros_like(v1)
    s = wind_speed(u1, v1)
    sbar = surface.sbar
    scale = surface.u_tau ** 2 / sbar ** 2
    out = []
    for ui in (u1, v1):
        um = ui.mean()
        out.append((um * s + sbar * (ui - um)) * scale)
    return tuple(out)


def surface_heat_flux(theta1: np.ndarray, s1: np.ndarray, surface: SurfaceState,
                      p: MOSTParams) -> np.ndarray:
    """q = [(theta - theta_bar) sbar + (theta_bar - theta_w) s] u_tau kappa / (sbar phi_h).

    Positive for a surface colder than the air; the energy equation applies
    it as a downward (cooling) flux.
    """
    if surface.sbar <= 0:
        return np.zeros_like(theta1)
    tb = surface.theta_bar
    return (((theta1 - tb) * surface.sbar + (tb - surface.theta_wall) * s1)
            * surface.u_tau * p.kappa / (surface.sbar * surface.phi_h))


def wall_velocity_gradient(tau: np.ndarray, surface: SurfaceState, p: MOSTParams) -> np.ndarray:
    """du_i/dz implied by a local wall stress and the surface-layer eddy viscosity at z1."""
    if surface.u_tau <= 0:
        return np.zeros_like(tau)
    nu_most = p.kappa * surface.u_tau * surface.z1 / surface.phi_m
    return tau / nu_most
