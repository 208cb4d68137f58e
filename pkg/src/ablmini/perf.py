"""Performance methodology: substep timers, t_step window, P_eff, r_t, scaling sweeps."""
from __future__ import annotations

import csv
import os
import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

CATEGORIES = ("fillpatch", "sgs_wall", "advection", "mac_projection", "scalar_solve",
              "velocity_solve", "pressure_solve", "diagnostics", "other")
WINDOW = (101, 200)  # measured steps, 1-based inclusive
EFFICIENCY_TARGET = 0.8


@dataclass
class StepTimers:
    times: dict = field(default_factory=lambda: {c: 0.0 for c in CATEGORIES})
    iterations: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    total: float = 0.0
    _t0: float | None = None

    @contextmanager
    def section(self, name: str):
        if name not in self.times:
            raise KeyError(f"unknown timer category {name!r}")
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.times[name] += time.perf_counter() - t0

    def start(self):
        self._t0 = time.perf_counter()

    def stop(self):
        self.total = time.perf_counter() - self._t0
        named = sum(v for k, v in self.times.items() if k != "other")
        self.times["other"] = max(self.total - named, 0.0)

    def add_iterations(self, name: str, n: int):
        self.iterations[name] = self.iterations.get(name, 0) + int(n)

    @property
    def unattributed_fraction(self) -> float:
        return self.times["other"] / self.total if self.total > 0 else 0.0


def timer_overhead(samples: int = 2000) -> float:
    """Mean cost of one start/stop pair of the monotonic clock, seconds."""
    t0 = time.perf_counter()
    for _ in range(samples):
        time.perf_counter()
        time.perf_counter()
    return (time.perf_counter() - t0) / samples


def measure_tstep(step_times) -> float:
    """Mean wall time over steps 101-200 (1-based); the first 100 are warm-up."""
    step_times = np.asarray(step_times, dtype=float)
    lo, hi = WINDOW
    if step_times.size < hi:
        raise ValueError(f"need at least {hi} steps, got {step_times.size}")
    return float(step_times[lo - 1:hi].mean())


@dataclass
class ScalingRecord:
    P: int
    n: int
    t_step: float
    dt: float
    P_eff: float = 1.0
    v_i: float = 0.0
    p_i: float = 0.0
    T_i: float = 0.0
    oversubscribed: bool = False

    @property
    def r_t(self) -> float:
        return real_time_ratio(self.t_step, self.dt)

    @property
    def points_per_worker(self) -> float:
        return self.n / self.P


def parallel_efficiency(records: list[ScalingRecord]) -> list[ScalingRecord]:
    """P_eff = t0 P0 / (t_step P), with P0 the smallest worker count present."""
    if not records:
        return records
    ref = min(records, key=lambda r: r.P)
    for r in records:
        r.P_eff = ref.t_step * ref.P / (r.t_step * r.P)
    return records


def real_time_ratio(t_step: float, dt: float) -> float:
    return t_step / dt


def efficiency_crossover(records: list[ScalingRecord], target: float = EFFICIENCY_TARGET):
    """Points per worker where P_eff falls through ``target`` (linear in log n/P), or None."""
    recs = sorted(records, key=lambda r: r.P)
    for a, b in zip(recs, recs[1:]):
        if a.P_eff >= target > b.P_eff:
            la, lb = np.log(a.points_per_worker), np.log(b.points_per_worker)
            s = (a.P_eff - target) / (a.P_eff - b.P_eff)
            return float(np.exp(la + s * (lb - la)))
    return None


SCALING_COLUMNS = ("P", "n", "points_per_worker", "t_step", "dt", "r_t", "P_eff",
                   "v_i", "p_i", "T_i", "oversubscribed")


def write_scaling_csv(records: list[ScalingRecord], path, meta: dict | None = None):
    with open(path, "w", newline="") as fh:
        for k, v in (meta or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh)
        w.writerow(SCALING_COLUMNS)
        for r in records:
            w.writerow([r.P, r.n, f"{r.points_per_worker:.6g}", f"{r.t_step:.9g}", r.dt,
                        f"{r.r_t:.9g}", f"{r.P_eff:.6f}", f"{r.v_i:.3f}", f"{r.p_i:.3f}",
                        f"{r.T_i:.3f}", int(r.oversubscribed)])


def run_measurement(cfg, workers: int, steps: int = WINDOW[1]):
    """Run ``steps`` steps with a fixed pool size; returns (per-step timers, final state)."""
    from .gabls import initialize
    from .parallel import set_workers
    from .timestepper import Simulation

    pool = set_workers(workers)
    sim = Simulation(cfg, initialize(cfg))
    timers = [sim.step() for _ in range(steps)]
    return timers, sim.state, pool.oversubscribed


def record_from_timers(timers: list[StepTimers], workers: int, n: int, dt: float,
                       oversubscribed: bool = False) -> ScalingRecord:
    lo, hi = WINDOW
    window = timers[lo - 1:hi]

    def mean_it(*names):
        return float(np.mean([sum(t.iterations.get(k, 0) for k in names) for t in window]))

    return ScalingRecord(P=workers, n=n, t_step=measure_tstep([t.total for t in timers]),
                         dt=dt, v_i=mean_it("velocity_u", "velocity_v", "velocity_w") / 3.0,
                         p_i=mean_it("nodal"), T_i=mean_it("scalar"),
                         oversubscribed=oversubscribed)


def scaling_sweep(cfg, worker_counts, mode: str = "strong", csv_path=None):
    """Measure t_step at each worker count on the same (strong) or stretched (weak) problem."""
    from .gabls import weak_scale_domain

    if mode not in ("strong", "weak"):
        raise ValueError("mode must be 'strong' or 'weak'")
    counts = [int(c) for c in worker_counts]
    if any(c < 1 for c in counts):
        raise ValueError("worker counts must be >= 1")
    records = []
    p0 = min(counts)
    for P in counts:
        case = cfg
        if mode == "weak":
            g = cfg.grid
            case = weak_scale_domain(cfg, g.nx * g.ny * g.nz * P // p0)
        if P > (os.cpu_count() or 1):
            warnings.warn(f"{P} workers oversubscribe {os.cpu_count()} hardware threads")
        timers, _, over = run_measurement(case, P)
        g = case.grid
        records.append(record_from_timers(timers, P, g.nx * g.ny * g.nz, case.dt, over))
    parallel_efficiency(records)
    if csv_path is not None:
        cross = efficiency_crossover(records)
        write_scaling_csv(records, csv_path, {
            "mode": mode, "window": f"{WINDOW[0]}-{WINDOW[1]}",
            "crossover_points_per_worker_at_80pct": "none" if cross is None else f"{cross:.6g}",
            "network_messaging": "N/A (shared-memory threads)",
        })
    return records
