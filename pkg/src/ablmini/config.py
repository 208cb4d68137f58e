"""Run configuration.  Defaults reproduce the GABLS stable boundary layer case."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

from .grid import GridSpec, build_grid
from .sgs import SgsConfig
from .wall import MOSTParams

GABLS_HEIGHT = 400.0
CASES = ("gabls", "custom")
WALL_MODELS = ("most", "free_slip")
ADVECTION_SCHEMES = ("godunov_plm",)


class ConfigError(ValueError):
    pass


@dataclass
class GridConfig:
    nx: int = 64
    ny: int = 64
    nz: int = 64
    mx: int = 1
    my: int = 1
    base_length: float = GABLS_HEIGHT  # Lz; Lx = mx * base_length, Ly = my * base_length


@dataclass
class PhysicsConfig:
    U_g: float = 8.0
    V_g: float = 0.0
    theta0: float = 263.5
    theta_surface: float = 265.0  # surface and mixed-layer temperature at t = 0
    cooling_rate: float = 0.25  # K/h
    inversion_height: float = 100.0
    lapse_rate: float = 0.01  # K/m above the inversion, also the top gradient
    perturbation_amplitude: float = 0.1
    perturbation_height: float = 50.0
    Re: float = 5e7
    L_b: float = 100.0
    Pr: float = 0.7
    fc: float = 1.39e-4
    g: float = 9.81
    rho: float = 1.0
    buoyancy: bool = True
    coriolis: bool = True


@dataclass
class WallConfig:
    model: str = "most"
    kappa: float = 0.4
    z0: float = 0.1
    beta_m: float = 4.8
    beta_h: float = 7.8


@dataclass
class SolverConfig:
    pressure_tol: float = 1e-4  # MAC and nodal projections
    helmholtz_tol: float = 1e-6
    max_vcycles: int = 50
    max_bicgstab: int = 200
    cfl_max: float = 0.9
    cfl_abort: float = 2.0
    advection: str = "godunov_plm"
    predictor_pressure_source: bool = True


@dataclass
class RunConfig:
    case: str = "gabls"
    dt: float = 0.0  # 0 selects CFL 0.65 at U_g
    steps: int = 200
    seed: int = 20240501
    threads: int = 1
    output_every: int = 0


@dataclass
class CaseConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    sgs: SgsConfig = field(default_factory=SgsConfig)
    wall: WallConfig = field(default_factory=WallConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def __post_init__(self):
        self.validate()

    def validate(self):
        g, ph, r, s, w = self.grid, self.physics, self.run, self.solver, self.wall
        for name in ("nx", "ny", "nz"):
            if getattr(g, name) < 4:
                raise ConfigError(f"grid.{name} = {getattr(g, name)} violates nx, ny, nz >= 4")
        if g.mx < 1 or g.my < 1:
            raise ConfigError("grid.mx and grid.my must be positive integers")
        if not g.base_length > 0:
            raise ConfigError("grid.base_length must be > 0")
        if r.case not in CASES:
            raise ConfigError(f"run.case must be one of {CASES}")
        if r.case == "gabls" and g.base_length != GABLS_HEIGHT:
            raise ConfigError(f"GABLS domain height is fixed at {GABLS_HEIGHT:g} m")
        if w.model not in WALL_MODELS:
            raise ConfigError(f"wall.model must be one of {WALL_MODELS}")
        if s.advection not in ADVECTION_SCHEMES:
            raise ConfigError(f"solver.advection {s.advection!r} is not implemented "
                              f"(available: {ADVECTION_SCHEMES})")
        for name in ("pressure_tol", "helmholtz_tol"):
            v = getattr(s, name)
            if not 0 < v < 1:
                raise ConfigError(f"solver.{name} must lie in (0, 1)")
        if not 0 < s.cfl_max <= s.cfl_abort:
            raise ConfigError("need 0 < solver.cfl_max <= solver.cfl_abort")
        if r.dt < 0 or not math.isfinite(r.dt):
            raise ConfigError("run.dt must be >= 0 (0 selects the default)")
        if r.steps < 0:
            raise ConfigError("run.steps must be >= 0")
        if r.threads < 1:
            raise ConfigError("run.threads must be >= 1")
        for name in ("Re", "L_b", "Pr", "rho", "theta0", "g"):
            if not getattr(ph, name) > 0:
                raise ConfigError(f"physics.{name} must be > 0")
        try:
            self.most_params()
        except ValueError as e:
            raise ConfigError(f"wall: {e}") from None

    # derived quantities -------------------------------------------------
    @property
    def Lx(self) -> float:
        return self.grid.mx * self.grid.base_length

    @property
    def Ly(self) -> float:
        return self.grid.my * self.grid.base_length

    @property
    def Lz(self) -> float:
        return self.grid.base_length

    def build_grid(self) -> GridSpec:
        g = self.grid
        return build_grid(g.nx, g.ny, g.nz, self.Lx, self.Ly, self.Lz)

    @property
    def nu(self) -> float:
        """Molecular viscosity from Re = U L_b / nu."""
        return self.physics.U_g * self.physics.L_b / self.physics.Re

    @property
    def Pe(self) -> float:
        return self.physics.Re * self.physics.Pr

    @property
    def dt(self) -> float:
        if self.run.dt > 0:
            return self.run.dt
        speed = math.hypot(self.physics.U_g, self.physics.V_g) or 1.0
        return 0.65 * self.build_grid().avg_dx / speed

    def most_params(self) -> MOSTParams:
        w, ph = self.wall, self.physics
        return MOSTParams(kappa=w.kappa, z0=w.z0, beta_m=w.beta_m, beta_h=w.beta_h,
                          g=ph.g, theta0=ph.theta0)

    def sections(self):
        """(section name, dataclass instance) pairs in file order."""
        return [(f.name, getattr(self, f.name)) for f in fields(self)]
