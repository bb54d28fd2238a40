"""Time stepping and the three-phase simulation loop."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Iterable

import numba as nb
import numpy as np

from .core import DensityMode, Integrator, NeighborMode, PairMode, ParticleSystem, SimulationConfig
from .dynamics import (Viscosity, compute_density_rate, compute_density_rate_symmetric,
                       compute_interactions, compute_interactions_symmetric, update_pressure)
from .kernels import CubicSplineKernel
from .neighbors import (NeighborLists, VerletList, brute_force_neighbors, build_grid,
                        build_verlet, grid_neighbors, is_valid)
from .parallel import SERIAL, ExecPolicy, parallel_for_blocks

log = logging.getLogger(__name__)


class SimulationDiverged(RuntimeError):
    def __init__(self, step: int, quantity: str):
        super().__init__(f"non-finite or invalid {quantity} at step {step}")
        self.step = step
        self.quantity = quantity


@dataclass(frozen=True)
class StepStats:
    step: int
    time: float
    dt: float
    neighbor_s: float
    interact_s: float
    update_s: float
    max_vel: float
    max_rho_dev: float
    clamped: int = 0
    pair_visits: int = 0
    neighbor_rebuilt: bool = True

    @property
    def total_s(self) -> float:
        return self.neighbor_s + self.interact_s + self.update_s


Sink = Callable[[StepStats, ParticleSystem], None]


def compute_dt(sys: ParticleSystem, fluid, h: float, cfl: float) -> float:
    """cfl * min(h / (c0 + max|u|), sqrt(h / max|a|)) over fluid particles."""
    idx = sys.fluid_indices
    if idx.shape[0] == 0:
        return cfl * h / fluid.speed_of_sound
    u = sys.velocity[idx]
    a = sys.acceleration[idx]
    umax = math.sqrt(float(np.einsum("ij,ij->i", u, u).max()))
    amax = math.sqrt(float(np.einsum("ij,ij->i", a, a).max()))
    acoustic = h / (fluid.speed_of_sound + umax)
    force = math.sqrt(h / amax) if amax > 0 else math.inf
    return cfl * min(acoustic, force)


@nb.njit(cache=True, nogil=True, inline="always")
def _clamp(i, pos, vel, lo, hi):
    hit = 0
    for a in range(3):
        if pos[i, a] < lo[a]:
            pos[i, a] = lo[a]
            vel[i, a] = 0.0
            hit = 1
        elif pos[i, a] > hi[a]:
            pos[i, a] = hi[a]
            vel[i, a] = 0.0
            hit = 1
    return hit


@nb.njit(cache=True, nogil=True)
def _euler_block(start, stop, pos, vel, acc, rho, drho, kind, dt, continuity,
                 rho_floor, lo, hi):
    clamped = 0
    for i in range(start, stop):
        if kind[i] != 0:
            if continuity:
                # dynamic boundary: density evolves, kinematics fixed
                r = rho[i] + drho[i] * dt
                rho[i] = r if r > rho_floor else rho_floor
            continue
        for a in range(3):
            vel[i, a] += acc[i, a] * dt
        for a in range(3):
            pos[i, a] += vel[i, a] * dt
        if continuity:
            rho[i] += drho[i] * dt
        clamped += _clamp(i, pos, vel, lo, hi)
    return clamped


@nb.njit(cache=True, nogil=True)
def _kick_block(start, stop, vel, acc, kind, dt):
    for i in range(start, stop):
        if kind[i] == 0:
            for a in range(3):
                vel[i, a] += acc[i, a] * dt
    return 0


@nb.njit(cache=True, nogil=True)
def _advance_block(start, stop, pos, vel, rho, drho, kind, dt, continuity, rho_floor, lo, hi):
    """Density (continuity mode) and positions from the current velocities."""
    clamped = 0
    for i in range(start, stop):
        if kind[i] != 0:
            if continuity:
                r = rho[i] + drho[i] * dt
                rho[i] = r if r > rho_floor else rho_floor
            continue
        if continuity:
            rho[i] += drho[i] * dt
        for a in range(3):
            pos[i, a] += vel[i, a] * dt
        clamped += _clamp(i, pos, vel, lo, hi)
    return clamped


def _domain(domain):
    if domain is None:
        return np.full(3, -np.inf), np.full(3, np.inf)
    lo, hi = domain
    return np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64)


def step_symplectic_euler(sys: ParticleSystem, dt: float, density_mode=DensityMode.SUMMATION,
                          domain=None, rest_density: float = 0.0,
                          policy: ExecPolicy = SERIAL) -> int:
    """u += a dt, then r += u dt for fluid particles.

    In continuity mode density is integrated too; boundary densities are
    floored at ``rest_density``. Returns the number of particles clamped
    back into ``domain``.
    """
    lo, hi = _domain(domain)
    continuity = DensityMode(density_mode) is DensityMode.CONTINUITY
    hits = parallel_for_blocks(sys.count, policy, _euler_block, sys.position, sys.velocity,
                               sys.acceleration, sys.density, sys.density_rate, sys.kind,
                               float(dt), continuity, float(rest_density), lo, hi)
    return int(sum(hits))


def kick(sys: ParticleSystem, dt: float, policy: ExecPolicy = SERIAL) -> None:
    """u += a dt for fluid particles."""
    parallel_for_blocks(sys.count, policy, _kick_block, sys.velocity, sys.acceleration,
                        sys.kind, float(dt))


def advance(sys: ParticleSystem, dt: float, density_mode=DensityMode.SUMMATION, domain=None,
            rest_density: float = 0.0, policy: ExecPolicy = SERIAL) -> int:
    """r += u dt for fluid particles, plus rho += rho_dot dt in continuity mode.

    Boundary particles keep their position; in continuity mode their density
    is integrated and floored at ``rest_density``. Returns the clamp count.
    """
    lo, hi = _domain(domain)
    continuity = DensityMode(density_mode) is DensityMode.CONTINUITY
    hits = parallel_for_blocks(sys.count, policy, _advance_block, sys.position, sys.velocity,
                               sys.density, sys.density_rate, sys.kind, float(dt), continuity,
                               float(rest_density), lo, hi)
    return int(sum(hits))


class _NeighborPhase:
    """Produces interaction lists per the configured neighbor mode."""

    def __init__(self, config: SimulationConfig, policy: ExecPolicy):
        self.mode = config.neighbor_mode
        self.support = config.support_radius
        self.skin = config.verlet_skin_factor * config.smoothing_length
        self.subdivision = config.cell_subdivision
        self.domain = (config.domain_min, config.domain_max)
        self.policy = policy
        self.verlet: VerletList | None = None

    def __call__(self, sys: ParticleSystem) -> tuple[NeighborLists, bool]:
        s = self.subdivision
        if self.mode is NeighborMode.BRUTE_FORCE:
            return brute_force_neighbors(sys, self.support, self.policy), True
        if self.mode is NeighborMode.CELL_LIST:
            grid = build_grid(sys, self.support / s, *self.domain, reach=s)
            return grid_neighbors(grid, sys, self.support, self.policy), True
        # Verlet: interaction kernels skip entries beyond the support radius,
        # so the cached lists are used directly without a filtering pass
        if self.verlet is not None and is_valid(self.verlet, sys):
            return self.verlet.lists, False
        radius = self.support + self.skin
        grid = build_grid(sys, radius / s, *self.domain, reach=s)
        self.verlet = build_verlet(sys, self.support, self.skin, grid, self.policy)
        return self.verlet.lists, True


def _check_finite(sys: ParticleSystem, step: int) -> None:
    for name in ("position", "velocity", "density", "pressure", "acceleration"):
        if not np.isfinite(getattr(sys, name)).all():
            raise SimulationDiverged(step, name)
    if not (sys.density > 0).all():
        raise SimulationDiverged(step, "density")


def _max_speed(sys: ParticleSystem) -> float:
    idx = sys.fluid_indices
    if idx.shape[0] == 0:
        return 0.0
    u = sys.velocity[idx]
    return math.sqrt(float(np.einsum("ij,ij->i", u, u).max()))


def _max_rho_dev(sys: ParticleSystem, rho0: float) -> float:
    idx = sys.fluid_indices
    if idx.shape[0] == 0:
        return 0.0
    return float(np.abs(sys.density[idx] / rho0 - 1.0).max())


def run(config: SimulationConfig, sys: ParticleSystem, sinks: Iterable[Sink] = (),
        policy: ExecPolicy = SERIAL, max_steps: int | None = None
        ) -> tuple[ParticleSystem, list[StepStats]]:
    """Advance ``sys`` in place until ``config.end_time``.

    Each step runs the neighbor, interaction and update phases and records
    their wall-clock time. Sinks receive the initial state, every state that
    crosses an ``output_interval`` boundary, and the final state.
    ``max_steps`` stops early (benchmarks); the final state is still emitted.

    In continuity mode the density rate is evaluated after the velocity
    kick, so density and velocity are updated in symplectic order; using
    the pre-kick velocities amplifies acoustic modes every step. That pass
    is pairwise work and is timed with the interaction phase.
    """
    symmetric = config.pair_mode is PairMode.SYMMETRIC
    if symmetric and policy.parallel:
        raise ValueError("pair_mode 'symmetric' requires serial execution")
    sinks = list(sinks)
    fluid = config.fluid
    kernel = CubicSplineKernel(config.smoothing_length)
    viscosity = Viscosity.from_config(config)
    domain = (config.domain_min, config.domain_max)
    mode = config.density_mode
    continuity = mode is DensityMode.CONTINUITY
    rho0 = fluid.rest_density
    leapfrog = config.integrator is Integrator.LEAPFROG
    interact_fn = compute_interactions_symmetric if symmetric else compute_interactions
    rate_fn = compute_density_rate_symmetric if symmetric else compute_density_rate
    neighbors_of = _NeighborPhase(config, policy)
    clock = time.perf_counter

    def interact(nbrs):
        return interact_fn(sys, nbrs, kernel, fluid, viscosity, mode,
                           config.clamp_negative_pressure, policy)

    def move(nbrs, dt):
        """Density rate at the kicked velocities, then density and positions."""
        t0 = clock()
        if continuity:
            rate_fn(sys, nbrs, kernel, policy)
        t1 = clock()
        hits = advance(sys, dt, mode, domain, rho0, policy)
        if continuity:
            update_pressure(sys, fluid, config.clamp_negative_pressure, policy)
        return hits, t1 - t0, clock() - t1

    def emit(stats):
        if sinks:
            snap = sys.snapshot()
            for sink in sinks:
                sink(stats, snap)

    _check_finite(sys, 0)
    t = 0.0
    step = 0
    stats: list[StepStats] = []
    emit(StepStats(0, 0.0, 0.0, 0.0, 0.0, 0.0, _max_speed(sys), _max_rho_dev(sys, rho0)))
    next_output = config.output_interval
    end = config.end_time

    nbrs = None
    if leapfrog and end > 0:
        nbrs, _ = neighbors_of(sys)
        interact(nbrs)

    while t < end and (max_steps is None or step < max_steps):
        step += 1
        if leapfrog:
            # half kick, drift on the lists of the current positions,
            # new lists and forces, half kick
            t0 = clock()
            dt = min(compute_dt(sys, fluid, kernel.smoothing_length, config.cfl), end - t)
            kick(sys, 0.5 * dt, policy)
            t1 = clock()
            clamped, rate_s, adv_s = move(nbrs, dt)
            t2 = clock()
            nbrs, rebuilt = neighbors_of(sys)
            t3 = clock()
            visits = interact(nbrs)
            t4 = clock()
            kick(sys, 0.5 * dt, policy)
            t5 = clock()
            neighbor_s = t3 - t2
            interact_s = (t4 - t3) + rate_s
            update_s = (t1 - t0) + adv_s + (t5 - t4)
        else:
            t0 = clock()
            nbrs, rebuilt = neighbors_of(sys)
            t1 = clock()
            visits = interact(nbrs)
            t2 = clock()
            dt = min(compute_dt(sys, fluid, kernel.smoothing_length, config.cfl), end - t)
            kick(sys, dt, policy)
            t3 = clock()
            clamped, rate_s, adv_s = move(nbrs, dt)
            neighbor_s = t1 - t0
            interact_s = (t2 - t1) + rate_s
            update_s = (t3 - t2) + adv_s
        if clamped:
            log.warning("step %d: %d particle(s) clamped back into the domain", step, clamped)
        t = t + dt if end - t > dt else end
        _check_finite(sys, step)
        st = StepStats(step, t, dt, neighbor_s, interact_s, update_s, _max_speed(sys),
                       _max_rho_dev(sys, rho0), clamped, visits, rebuilt)
        stats.append(st)
        if t >= end or (max_steps is not None and step >= max_steps):
            emit(st)
        elif t >= next_output:
            emit(st)
            while next_output <= t:
                next_output += config.output_interval
    return sys, stats
