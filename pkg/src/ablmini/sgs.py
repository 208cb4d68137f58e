"""Subgrid-scale closure: strain rates, fluctuating Smagorinsky, mean-field eddy viscosity.

The stress model is

    tau_ij = -2 nu_t gamma S_ij - 2 nu_T <S_ij>

where <.> is a horizontal plane average.  nu_t and gamma act through the
implicit diffusion operator; the nu_T term is returned as an explicit,
horizontally uniform tendency.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import CellVectorField, GridSpec, Profile, plane_average_array

SGS_MODELS = ("smagorinsky", "mfev_smagorinsky", "none")
GAMMA_MODES = ("unity", "sullivan")
GAMMA_FLOOR = 1e-12


@dataclass
class SgsConfig:
    model: str = "mfev_smagorinsky"
    Cs: float = 0.135
    Pr_t: float = 0.7
    gamma_mode: str = "unity"
    h_blend: float = 100.0  # metres; <= 0 disables the nu_T taper

    def __post_init__(self):
        if self.model not in SGS_MODELS:
            raise ValueError(f"unknown SGS model {self.model!r}")
        if self.gamma_mode not in GAMMA_MODES:
            raise ValueError(f"unknown gamma mode {self.gamma_mode!r}")
        if not self.Cs > 0:
            raise ValueError("Cs must be > 0")
        if not self.Pr_t > 0:
            raise ValueError("Pr_t must be > 0")

    @staticmethod
    def filter_width(grid: GridSpec) -> float:
        return float(np.cbrt(grid.dx * grid.dy * grid.dz))


@dataclass
class StrainField:
    s11: np.ndarray
    s22: np.ndarray
    s33: np.ndarray
    s12: np.ndarray
    s13: np.ndarray
    s23: np.ndarray

    @property
    def components(self):
        return (self.s11, self.s22, self.s33, self.s12, self.s13, self.s23)

    @property
    def magnitude(self) -> np.ndarray:
        """|S| = sqrt(2 S_ij S_ij)."""
        return np.sqrt(2.0 * (self.s11 ** 2 + self.s22 ** 2 + self.s33 ** 2)
                       + 4.0 * (self.s12 ** 2 + self.s13 ** 2 + self.s23 ** 2))

    @property
    def trace(self) -> np.ndarray:
        return self.s11 + self.s22 + self.s33

    def plane_mean(self) -> "StrainField":
        """Per-level plane averages, as (1, 1, nz) arrays."""
        return StrainField(*(plane_average_array(c)[None, None, :] for c in self.components))


def _central(a, axis, h, g, n):
    lo = [slice(g, g + nn) for nn in n]
    hi = list(lo)
    lo[axis] = slice(g - 1, g - 1 + n[axis])
    hi[axis] = slice(g + 1, g + 1 + n[axis])
    return (a[tuple(hi)] - a[tuple(lo)]) / (2.0 * h)


def velocity_gradient(u: CellVectorField) -> np.ndarray:
    """G[a, b] = d u_a / d x_b at cell centres (central differences, ghosts filled)."""
    grid = u.grid
    h = (grid.dx, grid.dy, grid.dz)
    return np.array([[_central(c.data, b, h[b], grid.ghost, grid.shape) for b in range(3)]
                     for c in u.components])


def strain_rate(u: CellVectorField) -> StrainField:
    G = velocity_gradient(u)
    return StrainField(G[0, 0], G[1, 1], G[2, 2],
                       0.5 * (G[0, 1] + G[1, 0]),
                       0.5 * (G[0, 2] + G[2, 0]),
                       0.5 * (G[1, 2] + G[2, 1]))


def fluctuating_strain(S: StrainField) -> StrainField:
    m = S.plane_mean()
    return StrainField(*(c - cm for c, cm in zip(S.components, m.components)))


def smagorinsky_nut(Sf: StrainField, cfg: SgsConfig, grid: GridSpec) -> np.ndarray:
    delta = cfg.filter_width(grid)
    return (cfg.Cs * delta) ** 2 * Sf.magnitude


def isotropy_gamma(S: StrainField, mode: str = "unity", grid: GridSpec | None = None) -> Profile:
    nz = S.s11.shape[2]
    z = grid.z_centers() if grid is not None else np.arange(nz, dtype=float)
    if mode == "unity":
        return Profile(z, np.ones(nz))
    if mode != "sullivan":
        raise ValueError(f"unknown gamma mode {mode!r}")
    mean = S.plane_mean()
    s_fluct = plane_average_array(fluctuating_strain(S).magnitude)
    s_mean = mean.magnitude[0, 0]
    tot = s_fluct + s_mean
    gamma = np.ones(nz)
    ok = tot > 0
    gamma[ok] = np.clip(s_fluct[ok] / tot[ok], GAMMA_FLOOR, 1.0)
    return Profile(z, gamma)


def mfev_nuT(z: np.ndarray, u_tau: float, L_obukhov: float, kappa: float = 0.4,
             beta_m: float = 4.8, h_blend: float | None = None) -> np.ndarray:
    """Mean-field eddy viscosity kappa u_tau z / phi_m(z/L), tapered to zero at h_blend.

    At the first level nu_T d<u>/dz = u_tau^2 (times the taper) when <u>
    follows the surface-layer profile d<u>/dz = u_tau phi_m / (kappa z).
    """
    z = np.asarray(z, dtype=float)
    if u_tau <= 0:
        return np.zeros_like(z)
    phi_m = 1.0 + beta_m * z / L_obukhov if np.isfinite(L_obukhov) else np.ones_like(z)
    nuT = kappa * u_tau * z / phi_m
    if h_blend is not None and h_blend > 0:
        nuT = nuT * np.maximum(0.0, 1.0 - z / h_blend) ** 2
    return nuT


@dataclass
class SgsContributions:
    nu_eff: np.ndarray  # cell momentum diffusivity
    kappa_eff: np.ndarray  # cell scalar diffusivity
    mean_tendency: tuple[np.ndarray, np.ndarray, np.ndarray]  # (nz,) profiles


def mean_stress_tendency(S: StrainField, nuT: np.ndarray, dz: float):
    """d/dz (2 nu_T <S_i3>) for i = 1, 2, 3 with zero flux through both walls."""
    mean = S.plane_mean()
    out = []
    for comp in (mean.s13, mean.s23, mean.s33):
        prof = comp[0, 0]
        nz = prof.size
        flux = np.zeros(nz + 1)
        flux[1:-1] = 2.0 * 0.5 * (nuT[1:] + nuT[:-1]) * 0.5 * (prof[1:] + prof[:-1])
        out.append((flux[1:] - flux[:-1]) / dz)
    return tuple(out)


def sgs_contributions(S: StrainField, nu_t: np.ndarray, nuT: np.ndarray, gamma: np.ndarray,
                      nu: float, dz: float, Pr: float = 0.7, Pr_t: float = 0.7) -> SgsContributions:
    """Effective diffusivities for the implicit solves plus the explicit mean-stress tendency."""
    gamma = np.asarray(gamma)[None, None, :]
    nu_eff = nu + gamma * nu_t
    kappa_eff = nu / Pr + gamma * nu_t / Pr_t
    if np.any(nuT):
        tend = mean_stress_tendency(S, nuT, dz)
    else:
        nz = nu_t.shape[2]
        tend = (np.zeros(nz), np.zeros(nz), np.zeros(nz))
    return SgsContributions(np.broadcast_to(nu_eff, nu_t.shape).copy(),
                            np.broadcast_to(kappa_eff, nu_t.shape).copy(), tend)
