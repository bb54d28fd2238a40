"""Command-line front end: ``wcsph run``, ``wcsph bench`` and ``wcsph validate``.

Worker threads come from ``--workers`` or, when absent, the ``SPH_WORKERS``
environment variable; one worker means serial execution. Diagnostics go to
stderr, results to stdout and files.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .core import NeighborMode
from .integrator import SimulationDiverged, StepStats, run
from .parallel import WORKERS_ENV, ExecPolicy
from .scenario_io import (TIMING_HEADER, ConfigError, VTKSnapshotSink, build_dam_break, load_config,
                          particle_count, write_timings_csv)

log = logging.getLogger("wcsph")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3
DEFAULT_MAX_PARTICLES = 2_000_000
BENCH_HEADER = ["particle_count", "spacing", "steps", "total_s", "neighbor_s", "interact_s",
                "update_s", "mean_neighbors"]


def packaged_config(name: str) -> Path:
    """Path of a config shipped with the package (``dam_break.cfg``, ``settling_tank.cfg``)."""
    return Path(str(resources.files("wcsph") / "data" / name))


def _resolve_config(path: str | None) -> Path:
    if path is None:
        return packaged_config("dam_break.cfg")
    p = Path(path)
    if not p.exists() and p.name == path and packaged_config(path).exists():
        # bare names fall back to the shipped scenarios
        return packaged_config(path)
    return p


def _policy(workers: int | None) -> ExecPolicy:
    return ExecPolicy.from_workers(workers)


def _load(args, extra_overrides=()):
    overrides = list(args.set or []) + list(extra_overrides)
    if getattr(args, "output_dir", None):
        overrides.append(f"run.output_dir={args.output_dir}")
    return load_config(_resolve_config(args.config), overrides)


# ---------------------------------------------------------------------------
# run


def _phase_totals(stats: list[StepStats]) -> tuple[float, float, float]:
    return (sum(s.neighbor_s for s in stats), sum(s.interact_s for s in stats),
            sum(s.update_s for s in stats))


def cmd_run(args) -> int:
    config, spec = _load(args)
    policy = _policy(args.workers)
    if config.pair_mode.value == "symmetric" and policy.parallel:
        raise ConfigError("pair_mode 'symmetric' requires --workers 1", key="numerics.pair_mode")
    out = Path(config.output_dir)
    sys_ = build_dam_break(spec, config)
    sink = VTKSnapshotSink(out)
    t0 = time.perf_counter()
    _, stats = run(config, sys_, [sink], policy=policy, max_steps=args.steps)
    wall = time.perf_counter() - t0
    if stats:
        write_timings_csv(stats, out / "timings.csv")
    else:
        # no steps taken: header only keeps the output layout uniform
        with open(out / "timings.csv", "w", encoding="utf-8") as fh:
            fh.write(",".join(TIMING_HEADER) + "\n")
    nb, it, up = _phase_totals(stats)
    if not args.quiet:
        print(f"particles      {sys_.count} ({sys_.fluid_count} fluid)")
        print(f"policy         {policy}")
        print(f"steps          {len(stats)}")
        print(f"simulated      {stats[-1].time if stats else 0.0:.6g} s")
        print(f"wall clock     {wall:.3f} s")
        print(f"neighbor phase {nb:.3f} s")
        print(f"interactions   {it:.3f} s")
        print(f"update phase   {up:.3f} s")
        print(f"snapshots      {len(sink.paths)} in {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


@dataclass(frozen=True)
class BenchRow:
    particle_count: int
    spacing: float
    steps: int
    total_s: float
    neighbor_s: float
    interact_s: float
    update_s: float
    mean_neighbors: float

    def values(self):
        return [self.particle_count, repr(self.spacing), self.steps, repr(self.total_s),
                repr(self.neighbor_s), repr(self.interact_s), repr(self.update_s),
                repr(self.mean_neighbors)]


def parse_spacings(text: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--spacing expects a comma-separated list of numbers, got {text!r}")
    if not values or any(not v > 0 for v in values):
        raise ConfigError("--spacing needs at least one positive spacing")
    return values


def bench(config, spec, spacings, steps: int, policy: ExecPolicy,
          max_particles: int = DEFAULT_MAX_PARTICLES, warmup: bool = True) -> list[BenchRow]:
    """Run ``steps`` steps of the scenario at each spacing; rows sorted by size.

    The wall thickness is fixed from the coarsest spacing so the boundary
    shell keeps its geometry and the particle count scales as 1/d^3.
    """
    coarse = max(spacings)
    h_ratio = config.smoothing_length / config.particle_spacing
    thickness = (spec.wall_thickness
                 or replace(spec, particle_spacing=coarse).layers(h_ratio * coarse) * coarse)
    plans = []
    for d in spacings:
        s = replace(spec, particle_spacing=d, wall_thickness=thickness, boundary_layers=None)
        h = h_ratio * d
        n = particle_count(s, h)
        if n > max_particles:
            raise ConfigError(f"spacing {d} gives {n} particles, above the cap of {max_particles} "
                              f"(raise it with --max-particles)")
        lo, hi = s.domain(h)
        plans.append((n, d, s, config.with_updates(particle_spacing=d, smoothing_length=h,
                                                    domain_min=lo, domain_max=hi,
                                                    end_time=1e9)))
    plans.sort(key=lambda p: p[0])
    if warmup and plans:
        # compile every kernel once so JIT time stays out of the first row
        n, d, s, c = plans[0]
        run(c, build_dam_break(s, c), policy=policy, max_steps=2)
    rows = []
    for n, d, s, c in plans:
        system = build_dam_break(s, c)
        t0 = time.perf_counter()
        _, stats = run(c, system, policy=policy, max_steps=steps)
        wall = time.perf_counter() - t0
        nb, it, up = _phase_totals(stats)
        visits = sum(st.pair_visits for st in stats) / max(1, len(stats))
        rows.append(BenchRow(system.count, d, len(stats), wall, nb, it, up, visits / system.count))
    return rows


def write_bench_csv(rows: list[BenchRow], path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_HEADER)
        for r in rows:
            w.writerow(r.values())
    return path


def format_bench(rows: list[BenchRow], mode: str) -> str:
    lines = [f"neighbor mode: {mode}",
             f"{'particles':>10} {'spacing':>9} {'steps':>6} {'total s':>9} {'neighbor s':>11} "
             f"{'interact s':>11} {'update s':>9} {'nbrs/ptcl':>9} {'ratio':>7}"]
    prev = None
    for r in rows:
        work = r.neighbor_s + r.interact_s
        ratio = f"{work / prev:7.2f}" if prev else f"{'':>7}"
        lines.append(f"{r.particle_count:>10} {r.spacing:>9.5g} {r.steps:>6} {r.total_s:>9.3f} "
                     f"{r.neighbor_s:>11.3f} {r.interact_s:>11.3f} {r.update_s:>9.3f} "
                     f"{r.mean_neighbors:>9.1f} {ratio}")
        prev = work
    lines.append("ratio: (neighbor + interaction time) relative to the previous row")
    return "\n".join(lines)


def cmd_bench(args) -> int:
    extra = []
    if args.neighbor_mode:
        extra.append(f"numerics.neighbor_mode={args.neighbor_mode}")
    config, spec = _load(args, extra)
    spacings = parse_spacings(args.spacing) if args.spacing else [spec.particle_spacing]
    policy = _policy(args.workers)
    rows = bench(config, spec, spacings, args.steps, policy, args.max_particles)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = write_bench_csv(rows, out / "bench.csv")
    if not args.quiet:
        print(format_bench(rows, config.neighbor_mode.value))
        print(f"report written to {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate


def cmd_validate(args) -> int:
    from .validate import run_checks
    report = None if args.quiet else print
    results = run_checks(report=report)
    failed = [r for r in results if not r.passed]
    for r in failed:
        print(f"check failed: {r.name}: {r.detail}", file=sys.stderr)
    if not args.quiet:
        print(f"{len(results) - len(failed)} of {len(results)} checks passed")
    return EXIT_FAILURE if failed else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workers", type=int, default=None,
                        help=f"worker threads (default: ${WORKERS_ENV}, else 1 = serial)")
    common.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")

    scenario = argparse.ArgumentParser(add_help=False)
    scenario.add_argument("--config", default=None,
                          help="scenario file (default: the shipped dam_break.cfg)")
    scenario.add_argument("--output-dir", default=None, help="overrides run.output_dir")
    scenario.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                          help="override a config value; repeatable")

    parser = argparse.ArgumentParser(prog="wcsph", description="Weakly-compressible SPH solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common, scenario], help="run a scenario")
    p.add_argument("--steps", type=int, default=None, help="stop after this many steps")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", parents=[common, scenario], help="resolution sweep")
    p.add_argument("--spacing", default=None, help="comma-separated particle spacings")
    p.add_argument("--steps", type=int, default=20, help="steps per resolution (default 20)")
    p.add_argument("--neighbor-mode", choices=[m.value for m in NeighborMode], default=None)
    p.add_argument("--max-particles", type=int, default=DEFAULT_MAX_PARTICLES)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("validate", parents=[common], help="run the fast self-checks")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    if args.workers is not None and args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationDiverged as exc:
        print(f"simulation diverged: {exc} (step {exc.step})", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
