"""Fast self-checks of kernel, neighbor search, conservation and hydrostatics.

Each check returns a :class:`CheckResult`; :func:`run_checks` runs a list
of them and reports one line per check. The checks are small enough to run
in well under a minute on a single core.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .core import (DensityMode, FluidProperties, SimulationConfig,
                   new_particle_system, total_momentum)
from .dynamics import (Viscosity, compute_interactions, compute_interactions_symmetric,
                       equation_of_state)
from .integrator import run
from .kernels import CubicSplineKernel
from .neighbors import (brute_force_neighbors, build_grid, build_verlet, filter_by_distance,
                        grid_neighbors, is_valid)
from .parallel import SERIAL, ExecPolicy


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<28} {self.detail} ({self.seconds:.1f} s)"


def _timed(name: str, fn: Callable[[], tuple[bool, str]]) -> CheckResult:
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crashing check is a failing check
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return CheckResult(name, bool(ok), detail, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# kernel


def kernel_lattice_integral(h: float = 1.0, per_h: int = 50) -> float:
    """Midpoint-rule integral of W over the cube [-2h, 2h]^3."""
    kernel = CubicSplineKernel(h)
    step = h / per_h
    axis = (np.arange(4 * per_h) + 0.5) * step - 2.0 * h
    total = 0.0
    yy, zz = np.meshgrid(axis, axis, indexing="ij")
    for x in axis:
        r = np.sqrt(x * x + yy * yy + zz * zz)
        total += float(kernel.evaluate(r).sum())
    return total * step ** 3


def check_kernel_normalization() -> CheckResult:
    def body():
        integral = kernel_lattice_integral()
        k = CubicSplineKernel(0.37)
        support_zero = all(k.evaluate(r) == 0.0 for r in (2 * 0.37, 2 * 0.37 * (1 + 1e-15), 5 * 0.37))
        ok = abs(integral - 1.0) <= 1e-3 and support_zero
        return ok, f"integral {integral:.6f}, W(r>=2h)==0: {support_zero}"
    return _timed("kernel normalization", body)


def gradient_fd_error(samples: int = 1000, h: float = 1.0, step: float = 1e-7, seed: int = 0) -> float:
    """Largest relative error of the analytic gradient against central differences."""
    rng = np.random.default_rng(seed)
    kernel = CubicSplineKernel(h)
    direction = rng.normal(size=(samples, 3))
    direction /= np.linalg.norm(direction, axis=1)[:, None]
    radius = rng.uniform(0.05 * h, 1.95 * h, samples)
    points = direction * radius[:, None]
    analytic = kernel.gradient(points)
    fd = np.empty_like(points)
    for a in range(3):
        e = np.zeros(3)
        e[a] = step
        plus = kernel.evaluate(np.linalg.norm(points + e, axis=1))
        minus = kernel.evaluate(np.linalg.norm(points - e, axis=1))
        fd[:, a] = (plus - minus) / (2 * step)
    err = np.linalg.norm(fd - analytic, axis=1) / np.linalg.norm(analytic, axis=1)
    return float(err.max())


def check_kernel_gradient() -> CheckResult:
    def body():
        err = gradient_fd_error()
        return err < 1e-5, f"max relative error vs finite differences {err:.2e}"
    return _timed("kernel gradient", body)


def check_gradient_antisymmetry(gradient: Callable | None = None, samples: int = 1000,
                                seed: int = 1) -> CheckResult:
    """grad W(d) == -grad W(-d) exactly; ``gradient`` may replace the kernel's."""
    def body():
        grad = gradient or CubicSplineKernel(1.0).gradient
        rng = np.random.default_rng(seed)
        d = rng.uniform(-2.0, 2.0, (samples, 3))
        bad = int(np.count_nonzero(np.any(grad(d) != -grad(-d), axis=1)))
        return bad == 0, f"{bad} of {samples} displacements break antisymmetry"
    return _timed("gradient antisymmetry", body)


# ---------------------------------------------------------------------------
# neighbor search


def random_positions(n: int, extent: float, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(0.0, extent, (n, 3))


def neighbor_oracle_mismatches(systems: int = 100, max_n: int = 2000, seed: int = 0,
                               policy: ExecPolicy = SERIAL) -> tuple[int, int]:
    """(grid mismatches, Verlet mismatches) against brute force on random systems."""
    rng = np.random.default_rng(seed)
    grid_bad = verlet_bad = 0
    for s in range(systems):
        n = int(rng.integers(1, max_n + 1))
        pos = rng.uniform(0.0, 1.0, (n, 3))
        radius = float(rng.uniform(0.05, 0.5))
        ref = brute_force_neighbors(pos, radius, policy)
        grid = build_grid(pos, radius, (0, 0, 0), (1, 1, 1))
        if grid_neighbors(grid, pos, radius, policy) != ref:
            grid_bad += 1
        skin = 0.2 * radius
        vgrid = build_grid(pos, radius + skin, (0, 0, 0), (1, 1, 1))
        verlet = build_verlet(pos, radius, skin, vgrid, policy)
        # move everything by less than skin/2 and compare at the new positions
        moved = np.clip(pos + rng.uniform(-1, 1, pos.shape) * (0.49 * skin / math.sqrt(3)), 0, 1)
        if is_valid(verlet, moved):
            fresh = grid_neighbors(build_grid(moved, radius, (0, 0, 0), (1, 1, 1)), moved, radius)
            if filter_by_distance(verlet.lists, moved, radius) != fresh:
                verlet_bad += 1
        else:
            verlet_bad += 1
    return grid_bad, verlet_bad


def check_neighbor_oracle(systems: int = 20, max_n: int = 1000) -> CheckResult:
    def body():
        g, v = neighbor_oracle_mismatches(systems, max_n)
        return g == 0 and v == 0, f"{systems} random systems: grid mismatches {g}, Verlet mismatches {v}"
    return _timed("neighbor oracle", body)


# ---------------------------------------------------------------------------
# conservation


def droplet_config(side: int = 8, spacing: float = 0.01, k: int = 20,
                   gravity=(0.0, 0.0, 0.0), **changes) -> tuple[SimulationConfig, np.ndarray]:
    """A free cubic droplet of ``side**3`` fluid particles in a large empty domain."""
    from .kernels import smoothing_length_from_count
    fluid = FluidProperties(rest_density=1000.0, kinematic_viscosity=1e-6,
                            speed_of_sound=10.0, gamma=7.0, gravity=gravity)
    n = side ** 3
    h = smoothing_length_from_count((side * spacing) ** 3, k, n)
    pts = (np.stack(np.meshgrid(*[np.arange(side)] * 3, indexing="ij"), -1).reshape(-1, 3)
           + 0.5) * spacing
    margin = 20 * side * spacing
    params = dict(fluid=fluid, particle_spacing=spacing, smoothing_length=h,
                  domain_min=(-margin,) * 3, domain_max=(margin,) * 3, end_time=1.0,
                  output_interval=1.0, density_mode=DensityMode.CONTINUITY)
    params.update(changes)
    return SimulationConfig(**params), pts


def momentum_drift(steps: int = 1000, side: int = 8, seed: int = 0,
                   policy: ExecPolicy = SERIAL) -> float:
    """|P(t) - P(0)| / (sum m * c0) for a zero-gravity droplet with random velocities."""
    config, pts = droplet_config(side)
    sys = new_particle_system(pts, np.empty((0, 3)), config)
    rng = np.random.default_rng(seed)
    sys.velocity[:] = rng.normal(scale=0.05, size=sys.velocity.shape)
    p0 = total_momentum(sys)
    run(config.with_updates(end_time=1e9), sys, policy=policy, max_steps=steps)
    scale = float(sys.mass.sum()) * config.fluid.speed_of_sound
    return float(np.linalg.norm(total_momentum(sys) - p0) / scale)


def check_momentum(steps: int = 200) -> CheckResult:
    def body():
        drift = momentum_drift(steps)
        return drift < 1e-9, f"relative momentum drift after {steps} steps {drift:.2e}"
    return _timed("momentum conservation", body)


def symmetric_vs_gather(n: int = 1000, seed: int = 0) -> tuple[float, int, int]:
    """(max relative acceleration difference, gather visits, symmetric visits)."""
    rng = np.random.default_rng(seed)
    extent = 0.1
    side = round(n ** (1 / 3))
    spacing = extent / side
    pos = rng.uniform(0, extent, (n, 3))
    config, _ = droplet_config(side, spacing, gravity=(0.0, 0.0, -9.81),
                               density_mode=DensityMode.SUMMATION)
    a = new_particle_system(pos, np.empty((0, 3)), config)
    a.velocity[:] = rng.normal(scale=0.1, size=a.velocity.shape)
    b = a.copy()
    kernel = CubicSplineKernel(config.smoothing_length)
    nbrs = brute_force_neighbors(a, config.support_radius)
    visc = Viscosity.from_config(config)
    vg = compute_interactions(a, nbrs, kernel, config.fluid, visc, DensityMode.SUMMATION)
    vs = compute_interactions_symmetric(b, nbrs, kernel, config.fluid, visc, DensityMode.SUMMATION)
    scale = np.abs(a.acceleration).max()
    return float(np.abs(a.acceleration - b.acceleration).max() / scale), vg, vs


def check_symmetric_mode() -> CheckResult:
    def body():
        dev, vg, vs = symmetric_vs_gather()
        ok = dev <= 1e-12 and 2 * vs == vg
        return ok, f"max relative deviation {dev:.1e}, visits {vs} of {vg}"
    return _timed("symmetric half pairs", body)


# ---------------------------------------------------------------------------
# hydrostatics


def settling_tank_config(height: float = 0.2, spacing: float = 0.02, end_time: float = 2.0,
                         k: int = 20):
    """Config text of a tank whose floor is fully covered by water at rest."""
    c0 = 10.0 * math.sqrt(2 * 9.81 * height)
    return f"""
[fluid]
rest_density = 1000
viscosity = 1e-6
speed_of_sound = {c0!r}
gamma = 7
gravity = 0, 0, -9.81

[numerics]
cfl = 0.25
end_time = {end_time!r}
output_interval = {end_time!r}
density_mode = continuity
artificial_alpha = 0.1
target_neighbor_count = {k}

[geometry]
tank = 0.2, 0.1, {1.5 * height!r}
water_column = 0.2, 0.1, {height!r}
particle_spacing = {spacing!r}
"""


def hydrostatic_errors(sys, config, tank, height: float) -> tuple[float, float]:
    """(max fluid speed / sqrt(g H), worst relative pressure error in the interior)."""
    g = float(np.linalg.norm(config.fluid.gravity))
    f = sys.fluid_indices
    speed = float(np.linalg.norm(sys.velocity[f], axis=1).max()) / math.sqrt(g * height)
    z = sys.position[f, 2]
    h2 = config.support_radius
    h = config.smoothing_length
    top = float(z.max()) + 0.5 * config.particle_spacing
    xy = sys.position[f, :2]
    # interior: one support radius clear of the free surface and the floor,
    # one smoothing length clear of the side walls (narrow tanks have no
    # particles a full support radius from both side walls)
    tank_xy = np.asarray(tank[:2])
    inner = ((z > h2) & (z < top - h2) & np.all(xy > h, axis=1) & np.all(xy < tank_xy - h, axis=1))
    depth = top - z[inner]
    expected = config.fluid.rest_density * g * depth
    err = np.abs(sys.pressure[f][inner] - expected) / expected
    return speed, float(err.max()) if err.size else math.inf


def check_hydrostatic(end_time: float = 0.25) -> CheckResult:
    from .scenario_io import build_dam_break, parse_config

    def body():
        height = 0.2
        config, spec = parse_config(settling_tank_config(height, 0.02, end_time, k=10))
        sys = build_dam_break(spec, config)
        p_init = equation_of_state(sys.density[sys.fluid_indices], config.fluid)
        run(config, sys)
        speed, err = hydrostatic_errors(sys, config, spec.tank, height)
        ok = speed < 0.01 and err < 0.15 and np.all(p_init >= 0)
        return ok, (f"after {end_time} s: max speed {speed:.2e} sqrt(gH), "
                    f"interior pressure error {100 * err:.1f}%")
    return _timed("hydrostatic tank", body)


FAST_CHECKS: tuple[Callable[[], CheckResult], ...] = (
    check_kernel_normalization,
    check_kernel_gradient,
    check_gradient_antisymmetry,
    check_neighbor_oracle,
    check_momentum,
    check_symmetric_mode,
    check_hydrostatic,
)


def run_checks(checks: Iterable[Callable[[], CheckResult]] = FAST_CHECKS,
               report: Callable[[str], None] | None = print) -> list[CheckResult]:
    results = []
    for check in checks:
        res = check()
        results.append(res)
        if report is not None:
            report(res.line())
    return results
