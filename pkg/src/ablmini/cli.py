"""Command line: ``ablmini run | bench | sweep | post``.

Exit status: 0 success, 1 solver failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import io as abl_io
from .advection import CFLViolation
from .config import ConfigError
from .elliptic import SolverFailure
from .wall import WallModelFailure

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2
SOLVER_ERRORS = (SolverFailure, CFLViolation, WallModelFailure, FloatingPointError)

log = logging.getLogger("ablmini")


def _threads(arg, cfg=None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("ABLMINI_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"ABLMINI_THREADS={env!r} is not an integer") from None
        if n < 1:
            raise ConfigError("ABLMINI_THREADS must be >= 1")
        return n
    return cfg.run.threads if cfg is not None else 1


def cmd_run(args) -> int:
    from .gabls import initialize
    from .parallel import set_workers
    from .perf import WINDOW, measure_tstep, real_time_ratio, timer_overhead
    from .timestepper import Simulation

    cfg = abl_io.parse_config(args.config)
    threads = _threads(args.threads, cfg)
    steps = cfg.run.steps if args.steps is None else args.steps
    if steps < 0:
        raise ConfigError("--steps must be >= 0")
    set_workers(threads)
    meta = abl_io.RunMetadata(cfg, threads=threads, timer_overhead=timer_overhead())
    sim = Simulation(cfg, initialize(cfg))
    every = cfg.run.output_every
    times = []
    for n in range(steps):
        t = sim.step()
        times.append(t.total)
        d = t.diagnostics
        if every and (n + 1) % every == 0:
            print(f"step {n + 1} t={sim.state.t:.2f} u_tau={d.get('u_tau', 0):.4f} "
                  f"theta=[{d['theta_min']:.3f}, {d['theta_max']:.3f}] "
                  f"iters={t.iterations} wall={t.total:.3f}s")
    summary = f"completed {steps} steps, t={sim.state.t:.3f} s"
    if steps >= WINDOW[1]:
        ts = measure_tstep(times)
        summary += f", t_step={ts:.4f} s, r_t={real_time_ratio(ts, cfg.dt):.4f}"
    print(summary)
    if args.checkpoint_out:
        abl_io.write_checkpoint(sim.state, args.checkpoint_out, cfg.dt)
    if args.profiles_out:
        abl_io.write_profiles(sim.state, args.profiles_out, meta)
    return EXIT_OK


def cmd_bench(args) -> int:
    from .se_kernels import KERNELS, bench, write_bench_csv

    kernels = KERNELS if args.kernel == "all" else (args.kernel,)
    if args.order < 1 or args.elements < 1 or args.repetitions < 1:
        raise ConfigError("--order, --elements and --repetitions must be >= 1")
    reports = bench(kernels, args.order, args.elements, args.precision, args.repetitions)
    for r in reports:
        print(f"{r.kernel:4s} N={r.N} E={r.E} fp{r.precision} best={r.seconds:.3e}s "
              f"C={r.C:.4g} C_b={r.C_b:.4g} {r.gflops:.3f} GFLOPS {r.gbs:.3f} GB/s")
    if args.csv:
        write_bench_csv(reports, args.csv)
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .perf import efficiency_crossover, scaling_sweep

    cfg = abl_io.parse_config(args.config)
    try:
        counts = [int(s) for s in args.workers.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--workers {args.workers!r} is not a comma-separated list") from None
    if not counts or min(counts) < 1:
        raise ConfigError("--workers needs positive integers")
    records = scaling_sweep(cfg, counts, args.mode, args.csv)
    for r in records:
        print(f"P={r.P} n={r.n} t_step={r.t_step:.4f}s P_eff={r.P_eff:.3f} r_t={r.r_t:.4f}")
    cross = efficiency_crossover(records)
    print("80% efficiency crossover: "
          + ("not reached" if cross is None else f"{cross:.3g} points/worker"))
    return EXIT_OK


def cmd_post(args) -> int:
    grid = None
    if args.config:
        grid = abl_io.parse_config(args.config).build_grid()
    state, _ = abl_io.read_checkpoint(args.checkpoint, grid)
    abl_io.write_profiles(state, args.profiles, {"checkpoint": args.checkpoint})
    if args.slice_z is not None:
        out = args.slice_out or f"{args.profiles}.slice.csv"
        k = abl_io.write_slice(state, args.slice_z, out, {"checkpoint": args.checkpoint})
        print(f"slice at level {k} written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ablmini", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a case from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--steps", type=int)
    r.add_argument("--threads", type=int)
    r.add_argument("--checkpoint-out")
    r.add_argument("--profiles-out")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="spectral-element kernel benchmark")
    b.add_argument("--kernel", choices=("ax", "adv", "fdm", "all"), default="all")
    b.add_argument("--order", type=int, default=8)
    b.add_argument("--elements", type=int, default=512)
    b.add_argument("--precision", type=int, choices=(32, 64), default=64)
    b.add_argument("--repetitions", type=int, default=50)
    b.add_argument("--csv")
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("sweep", help="scaling sweep over worker counts")
    s.add_argument("--config", required=True)
    s.add_argument("--workers", default="1,2,4")
    s.add_argument("--mode", choices=("strong", "weak"), default="strong")
    s.add_argument("--csv")
    s.set_defaults(func=cmd_sweep)

    p = sub.add_parser("post", help="profiles and slices from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--profiles", required=True)
    p.add_argument("--slice-z", type=float)
    p.add_argument("--slice-out")
    p.add_argument("--config", help="config giving the domain size (default: 400 m cubic cells)")
    p.set_defaults(func=cmd_post)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SOLVER_ERRORS as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except abl_io.CheckpointError as e:
        print(f"checkpoint error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
