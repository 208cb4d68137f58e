"""Config files, checkpoints, profile and slice CSVs, run metadata.

Config format: INI-style ``[section]`` headers with ``key = value`` lines and
``#`` comments.  Outside any section a dotted ``section.key = value`` is also
accepted.  Unknown keys are errors.
"""
from __future__ import annotations

import csv
import dataclasses
import struct
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .config import CaseConfig, ConfigError
from .grid import CellScalarField, CellVectorField, GridSpec, NodeScalarField, build_grid
from .state import State

try:
    from importlib.metadata import version as _pkg_version
    CODE_VERSION = _pkg_version("artifact")
except Exception:  # running from a source tree
    CODE_VERSION = "0.1.0"

MAGIC = b"ABLM"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sIIIIdd")
_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


# --------------------------------------------------------------------------
# config
# --------------------------------------------------------------------------

def _convert(text: str, default, where: str):
    kind = type(default)
    try:
        if kind is bool:
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"{where}: expected {kind.__name__}, got {text!r}") from None


def parse_config_text(text: str, source: str = "<config>") -> CaseConfig:
    cfg = CaseConfig()
    sections = dict(cfg.sections())
    lines_of: dict[str, int] = {}
    values: dict[str, dict] = {name: {} for name in sections}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        where = f"{source}:{lineno}"
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{where}: malformed section header {raw.strip()!r}")
            current = line[1:-1].strip()
            if current not in sections:
                raise ConfigError(f"{where}: unknown section [{current}]")
            continue
        if "=" not in line:
            raise ConfigError(f"{where}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        sec = current
        if "." in key:
            sec, key = key.split(".", 1)
            if current is not None and sec != current:
                raise ConfigError(f"{where}: dotted key {sec}.{key} inside [{current}]")
        if sec is None:
            raise ConfigError(f"{where}: key {key!r} outside any section")
        if sec not in sections:
            raise ConfigError(f"{where}: unknown section {sec!r}")
        names = {f.name: f for f in fields(sections[sec]) if not f.name.startswith("_")}
        if key not in names:
            raise ConfigError(f"{where}: unknown key {sec}.{key}")
        values[sec][key] = _convert(val, getattr(sections[sec], key), where)
        lines_of[f"{sec}.{key}"] = lineno
    try:
        built = {name: dataclasses.replace(obj, **values[name]) for name, obj in sections.items()}
        return CaseConfig(**built)
    except ValueError as e:
        msg = str(e)
        hits = [f"{source}:{n}" for k, n in lines_of.items()
                if k in msg or k.split(".", 1)[1] in msg]
        prefix = hits[0] if hits else source
        raise ConfigError(f"{prefix}: {msg}") from None


def parse_config(path) -> CaseConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text(encoding="ascii"), str(p))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg: CaseConfig) -> str:
    out = []
    for name, obj in cfg.sections():
        out.append(f"[{name}]")
        for f in fields(obj):
            out.append(f"{f.name} = {_fmt(getattr(obj, f.name))}")
        out.append("")
    return "\n".join(out)


def flat_config(cfg: CaseConfig) -> dict:
    return {f"{name}.{f.name}": _fmt(getattr(obj, f.name))
            for name, obj in cfg.sections() for f in fields(obj)}


# --------------------------------------------------------------------------
# run metadata
# --------------------------------------------------------------------------

@dataclass
class RunMetadata:
    config: CaseConfig
    threads: int = 1
    timer_overhead: float = 0.0
    code_version: str = CODE_VERSION
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        c = self.config
        self.flags = {
            "predictor_pressure_source": c.solver.predictor_pressure_source,
            "predictor_tracing": "normal PLM plus transverse and force increments",
            "mean_sgs_tendency": "corrector only",
            "mean_sgs_sign": "+d/dz(2 nu_T <S_i3>)",
            "heat_flux_sign": "MOST q applied as downward (cooling) flux",
            "wall_stress_sign": "Moeng stress decelerates the mean wind",
            "nut_formula": "(Cs*Delta)^2*|S'|" if c.sgs.model == "mfev_smagorinsky"
                           else "(Cs*Delta)^2*|S|",
            "gamma_mode": c.sgs.gamma_mode,
            "nuT_profile": "kappa*u_tau*z/phi_m*max(0,1-z/h_blend)^2",
            "nuT_h_blend": c.sgs.h_blend,
            "sbar": "plane mean of local wind speed",
            "diffusion": "backward Euler, viscosities lagged at t^n",
            "coriolis": "explicit f-plane at u^n",
            "perturbation": "uniform, plane-mean removed, Philox(seed)",
            "z1": "dz/2",
            "stability_functions": f"linear, beta_m={c.wall.beta_m}, beta_h={c.wall.beta_h}",
            **self.flags,
        }

    def as_dict(self) -> dict:
        d = {"code_version": self.code_version, "seed": self.config.run.seed,
             "threads": self.threads, "timer_overhead_s": f"{self.timer_overhead:.3e}"}
        d.update({f"flag.{k}": v for k, v in self.flags.items()})
        d.update({f"config.{k}": v for k, v in flat_config(self.config).items()})
        return d


def _write_meta(fh, meta):
    if meta is None:
        return
    if isinstance(meta, RunMetadata):
        meta = meta.as_dict()
    for k, v in meta.items():
        fh.write(f"# {k}={v}\n")


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------

def _xfast(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a.T, dtype="<f8").tobytes()


def checkpoint_size(nx: int, ny: int, nz: int) -> int:
    return _HEADER.size + 7 * 8 * nx * ny * nz + 8 * (nx + 1) * (ny + 1) * (nz + 1)


def write_checkpoint(state: State, path, dt: float) -> None:
    g = state.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, CHECKPOINT_VERSION, g.nx, g.ny, g.nz,
                              float(state.t), float(dt)))
        for f in (*state.u.components, state.theta, *state.gp.components):
            fh.write(_xfast(f.interior))
        fh.write(_xfast(state.p.data))


class CheckpointError(ValueError):
    pass


def read_checkpoint(path, grid: GridSpec | None = None):
    """Returns (State, dt).  Without ``grid`` the domain is 400 m tall with cubic cells."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, ver, nx, ny, nz, t, dt = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (magic {magic!r})")
    if ver != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: checkpoint version {ver}, this build reads "
                              f"version {CHECKPOINT_VERSION}")
    want = checkpoint_size(nx, ny, nz)
    if len(data) != want:
        raise CheckpointError(f"{path}: size {len(data)} bytes, expected {want} "
                              f"({'truncated' if len(data) < want else 'trailing data'})")
    if grid is None:
        h = 400.0 / nz
        grid = build_grid(nx, ny, nz, nx * h, ny * h, 400.0)
    elif grid.shape != (nx, ny, nz):
        raise CheckpointError(f"{path}: grid {nx}x{ny}x{nz} does not match {grid.shape}")
    off = _HEADER.size
    n = nx * ny * nz

    def take(count, shape):
        nonlocal off
        a = np.frombuffer(data, dtype="<f8", count=count, offset=off)
        off += 8 * count
        return a.reshape(shape[::-1]).T.astype(np.float64)

    cells = [CellScalarField.from_interior(grid, take(n, (nx, ny, nz))) for _ in range(7)]
    p = NodeScalarField(grid, np.ascontiguousarray(take((nx + 1) * (ny + 1) * (nz + 1),
                                                        (nx + 1, ny + 1, nz + 1))))
    step_index = int(round(t / dt)) if dt > 0 else 0
    st = State(t, step_index, CellVectorField(*cells[:3]), cells[3], p,
               CellVectorField(*cells[4:7]), CellScalarField.zeros(grid))
    return st, dt


# --------------------------------------------------------------------------
# profiles and slices
# --------------------------------------------------------------------------

PROFILE_COLUMNS = ("z", "u_mean", "v_mean", "theta_mean", "u_tau", "q_wall", "t")


def profiles(state: State) -> np.ndarray:
    from .grid import plane_average
    g = state.grid
    cols = [g.z_centers(), plane_average(state.u.u).values, plane_average(state.u.v).values,
            plane_average(state.theta).values, np.full(g.nz, state.surface.u_tau),
            np.full(g.nz, state.surface.q_wall), np.full(g.nz, state.t)]
    return np.column_stack(cols)


def write_profiles(state: State, path, meta=None) -> np.ndarray:
    table = profiles(state)
    with open(path, "w", newline="") as fh:
        _write_meta(fh, meta)
        w = csv.writer(fh)
        w.writerow(PROFILE_COLUMNS)
        for row in table:
            w.writerow([repr(float(v)) for v in row])
    return table


def snap_level(grid: GridSpec, z: float) -> int:
    k = int(np.floor(z / grid.dz))
    return min(max(k, 0), grid.nz - 1)


def write_slice(state: State, z: float, path, meta=None):
    """Horizontal theta plane at the cell level nearest ``z``; rows are x-fastest."""
    g = state.grid
    k = snap_level(g, z)
    plane = state.theta.interior[:, :, k]
    xs, ys = g.x_centers(), g.y_centers()
    with open(path, "w", newline="") as fh:
        _write_meta(fh, meta)
        fh.write(f"# z_requested={z!r}\n# z_snapped={float(g.z_centers()[k])!r}\n# k={k}\n")
        w = csv.writer(fh)
        w.writerow(("i", "j", "x", "y", "theta"))
        for j in range(g.ny):
            for i in range(g.nx):
                w.writerow((i, j, repr(float(xs[i])), repr(float(ys[j])),
                            repr(float(plane[i, j]))))
    return k


def read_csv_table(path):
    """(metadata dict, header tuple, float array) of a CSV written here."""
    meta, rows, header = {}, [], None
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k.strip()] = v
            elif header is None:
                header = tuple(line.strip().split(","))
            elif line.strip():
                rows.append([float(x) for x in line.strip().split(",")])
    return meta, header, np.array(rows)
