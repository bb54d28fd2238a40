"""Particle interactions: density, equation of state and accelerations.

Gather kernels compute one particle's sums from its own neighbor list and
write only that particle, so they run under any :class:`ExecPolicy`. The
symmetric kernels visit each unordered pair once and scatter to both
particles; they are serial only.

Pair terms are computed so that the (i, j) and (j, i) contributions are
exact negatives of each other, which gives momentum conservation to
rounding and lets both modes agree bit for bit in practice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .core import DensityMode, FluidProperties, ParticleSystem, ViscosityModel
from .kernels import _INV_PI, CubicSplineKernel, gradient_factor_core, value_core
from .neighbors import NeighborLists
from .parallel import SERIAL, ExecPolicy, parallel_for_blocks

class ParallelPairModeError(RuntimeError):
    """The symmetric pair loop scatters to both particles and cannot run in parallel."""


@dataclass(frozen=True)
class Viscosity:
    """Viscous term used in the momentum equation.

    ``artificial``: Monaghan's Pi_ij = -alpha c0 h mu_ij / rho_bar, only for
    approaching pairs. ``laminar``: Morris' discretization of nu * lap(u).
    """

    model: ViscosityModel = ViscosityModel.ARTIFICIAL
    alpha: float = 0.02
    nu: float = 0.0

    @classmethod
    def from_config(cls, config) -> "Viscosity":
        return cls(config.viscosity_model, config.artificial_alpha,
                   config.fluid.kinematic_viscosity)

    @property
    def code(self) -> int:
        return 0 if ViscosityModel(self.model) is ViscosityModel.ARTIFICIAL else 1


# ---------------------------------------------------------------------------
# density


@nb.njit(cache=True, nogil=True)
def _density_block(start, stop, pos, mass, offsets, nbr, h, rho):
    r2max = 4.0 * h * h
    inv_h = 1.0 / h
    sigma = _INV_PI * inv_h * inv_h * inv_h
    w0 = value_core(0.0, inv_h, sigma)
    for i in range(start, stop):
        s = mass[i] * w0
        for p in range(offsets[i], offsets[i + 1]):
            j = nbr[p]
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 < r2max:
                s += mass[j] * value_core(math.sqrt(r2), inv_h, sigma)
        rho[i] = s
    return 0


def compute_density_summation(sys: ParticleSystem, neighbors: NeighborLists,
                              kernel: CubicSplineKernel, policy: ExecPolicy = SERIAL) -> None:
    """rho_i = m_i W(0) + sum_j m_j W(r_ij), for fluid and boundary alike."""
    parallel_for_blocks(sys.count, policy, _density_block, sys.position, sys.mass,
                        neighbors.offsets, neighbors.indices, kernel.smoothing_length,
                        sys.density)


@nb.njit(cache=True, nogil=True)
def _density_rate_block(start, stop, pos, vel, mass, offsets, nbr, h, drho):
    r2max = 4.0 * h * h
    inv_h = 1.0 / h
    sigma = _INV_PI * inv_h * inv_h * inv_h
    for i in range(start, stop):
        s = 0.0
        for p in range(offsets[i], offsets[i + 1]):
            j = nbr[p]
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 < r2max:
                f = gradient_factor_core(math.sqrt(r2), inv_h, sigma)
                du = ((vel[i, 0] - vel[j, 0]) * dx + (vel[i, 1] - vel[j, 1]) * dy
                      + (vel[i, 2] - vel[j, 2]) * dz)
                s += mass[j] * du * f
        drho[i] = s
    return 0


def compute_density_rate(sys: ParticleSystem, neighbors: NeighborLists,
                         kernel: CubicSplineKernel, policy: ExecPolicy = SERIAL) -> None:
    """d(rho_i)/dt = sum_j m_j (u_i - u_j) . grad W_ij."""
    parallel_for_blocks(sys.count, policy, _density_rate_block, sys.position, sys.velocity,
                        sys.mass, neighbors.offsets, neighbors.indices,
                        kernel.smoothing_length, sys.density_rate)


# ---------------------------------------------------------------------------
# equation of state


def equation_of_state(density, fluid: FluidProperties, clamp_negative: bool = False):
    """Tait pressure B((rho/rho0)^gamma - 1), B = c0^2 rho0 / gamma."""
    rho = np.asarray(density, dtype=np.float64)
    if np.any(~(rho > 0)):
        raise ValueError("density must be positive")
    p = fluid.stiffness * ((rho / fluid.rest_density) ** fluid.gamma - 1.0)
    if clamp_negative:
        p = np.maximum(p, 0.0)
    return float(p) if p.ndim == 0 else p


@nb.njit(cache=True, nogil=True)
def _eos_block(start, stop, rho, rho0, b, gamma, clamp, out):
    for i in range(start, stop):
        p = b * ((rho[i] / rho0) ** gamma - 1.0)
        if clamp and p < 0.0:
            p = 0.0
        out[i] = p
    return 0


def update_pressure(sys: ParticleSystem, fluid: FluidProperties, clamp_negative: bool = False,
                    policy: ExecPolicy = SERIAL) -> None:
    parallel_for_blocks(sys.count, policy, _eos_block, sys.density, fluid.rest_density,
                        fluid.stiffness, float(fluid.gamma), bool(clamp_negative), sys.pressure)


def hydrostatic_density(depth, fluid: FluidProperties):
    """Density whose Tait pressure equals rho0 * |g| * depth (depth < 0 -> rho0)."""
    g = float(np.linalg.norm(fluid.gravity))
    p = fluid.rest_density * g * np.maximum(np.asarray(depth, dtype=np.float64), 0.0)
    return fluid.rest_density * (1.0 + p / fluid.stiffness) ** (1.0 / fluid.gamma)


# ---------------------------------------------------------------------------
# momentum equation


@nb.njit(cache=True, nogil=True, inline="always")
def _pair_coefficient(pr2_i, pr2_j, rho_i, rho_j, vr, r2, h, visc, alpha_c0, eps):
    """P_i/rho_i^2 + P_j/rho_j^2 plus Monaghan's Pi_ij for approaching pairs.

    Symmetric in (i, j): swapping the pair returns the identical value.
    """
    c = pr2_i + pr2_j
    if visc == 0 and vr < 0.0:
        c += -alpha_c0 * h * vr / ((r2 + eps) * (0.5 * (rho_i + rho_j)))
    return c


@nb.njit(cache=True, nogil=True, inline="always")
def _laminar_coefficient(rho_i, rho_j, f, r2, nu, eps):
    """Morris viscous weight; multiplies m_j (u_i - u_j)."""
    return nu * (rho_i + rho_j) / (rho_i * rho_j) * f * r2 / (r2 + eps)


@nb.njit(cache=True, nogil=True)
def _pressure_ratio_block(start, stop, rho, prs, out):
    for i in range(start, stop):
        out[i] = prs[i] / (rho[i] * rho[i])
    return 0


@nb.njit(cache=True, nogil=True)
def _forces_block(start, stop, pos, vel, rho, pr2, mass, kind, offsets, nbr, h,
                  visc, alpha_c0, nu, gx, gy, gz, want_rate, acc, drho):
    r2max = 4.0 * h * h
    inv_h = 1.0 / h
    sigma = _INV_PI * inv_h * inv_h * inv_h
    eps = 0.01 * h * h
    visits = 0
    for i in range(start, stop):
        ax = 0.0
        ay = 0.0
        az = 0.0
        dr = 0.0
        fluid_i = kind[i] == 0
        xi = pos[i, 0]
        yi = pos[i, 1]
        zi = pos[i, 2]
        if not fluid_i and not want_rate:
            # boundary rows carry no force; only count their visits
            for p in range(offsets[i], offsets[i + 1]):
                j = nbr[p]
                dx = xi - pos[j, 0]
                dy = yi - pos[j, 1]
                dz = zi - pos[j, 2]
                if dx * dx + dy * dy + dz * dz < r2max:
                    visits += 1
            acc[i, 0] = 0.0
            acc[i, 1] = 0.0
            acc[i, 2] = 0.0
            continue
        for p in range(offsets[i], offsets[i + 1]):
            j = nbr[p]
            dx = xi - pos[j, 0]
            dy = yi - pos[j, 1]
            dz = zi - pos[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 >= r2max:
                continue
            visits += 1
            f = gradient_factor_core(math.sqrt(r2), inv_h, sigma)
            vr = ((vel[i, 0] - vel[j, 0]) * dx + (vel[i, 1] - vel[j, 1]) * dy
                  + (vel[i, 2] - vel[j, 2]) * dz)
            if want_rate:
                dr += mass[j] * vr * f
            if fluid_i:
                c = _pair_coefficient(pr2[i], pr2[j], rho[i], rho[j], vr, r2, h, visc,
                                      alpha_c0, eps)
                s = -mass[j] * c * f
                ax += s * dx
                ay += s * dy
                az += s * dz
                if visc == 1:
                    t = mass[j] * _laminar_coefficient(rho[i], rho[j], f, r2, nu, eps)
                    ax += t * (vel[i, 0] - vel[j, 0])
                    ay += t * (vel[i, 1] - vel[j, 1])
                    az += t * (vel[i, 2] - vel[j, 2])
        if fluid_i:
            acc[i, 0] = ax + gx
            acc[i, 1] = ay + gy
            acc[i, 2] = az + gz
        else:
            acc[i, 0] = 0.0
            acc[i, 1] = 0.0
            acc[i, 2] = 0.0
        if want_rate:
            drho[i] = dr
    return visits


def _force_args(sys, neighbors, kernel, fluid, viscosity, policy):
    pr2 = np.empty(sys.count)
    parallel_for_blocks(sys.count, policy, _pressure_ratio_block, sys.density, sys.pressure, pr2)
    g = fluid.gravity
    return (sys.position, sys.velocity, sys.density, pr2, sys.mass, sys.kind,
            neighbors.offsets, neighbors.indices, kernel.smoothing_length, viscosity.code,
            float(viscosity.alpha) * float(fluid.speed_of_sound), float(viscosity.nu),
            g[0], g[1], g[2])


def compute_accelerations(sys: ParticleSystem, neighbors: NeighborLists, kernel: CubicSplineKernel,
                          fluid: FluidProperties, viscosity: Viscosity = Viscosity(),
                          policy: ExecPolicy = SERIAL, with_density_rate: bool = False) -> int:
    """Momentum-equation right-hand side for fluid particles; boundary gets 0.

    a_i = -sum_j m_j (P_i/rho_i^2 + P_j/rho_j^2 + Pi_ij) grad W_ij + g

    With ``with_density_rate`` the continuity rate is accumulated in the same
    pass. Returns the number of directed pair visits.
    """
    visits = parallel_for_blocks(sys.count, policy, _forces_block,
                                 *_force_args(sys, neighbors, kernel, fluid, viscosity, policy),
                                 bool(with_density_rate), sys.acceleration, sys.density_rate)
    return int(sum(visits))


# ---------------------------------------------------------------------------
# symmetric half-pair variants


@nb.njit(cache=True, nogil=True, inline="always")
def _upper_start(offsets, nbr, i):
    """First slot of row ``i`` holding a neighbor index above ``i`` (rows are sorted)."""
    lo = offsets[i]
    hi = offsets[i + 1]
    while lo < hi:
        mid = (lo + hi) >> 1
        if nbr[mid] <= i:
            lo = mid + 1
        else:
            hi = mid
    return lo


@nb.njit(cache=True, nogil=True)
def _density_symmetric(pos, mass, offsets, nbr, h, rho):
    n = pos.shape[0]
    r2max = 4.0 * h * h
    inv_h = 1.0 / h
    sigma = _INV_PI * inv_h * inv_h * inv_h
    w0 = value_core(0.0, inv_h, sigma)
    for i in range(n):
        rho[i] = mass[i] * w0
    for i in range(n):
        xi = pos[i, 0]
        yi = pos[i, 1]
        zi = pos[i, 2]
        mi = mass[i]
        s = 0.0
        for p in range(_upper_start(offsets, nbr, i), offsets[i + 1]):
            j = nbr[p]
            dx = xi - pos[j, 0]
            dy = yi - pos[j, 1]
            dz = zi - pos[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 < r2max:
                w = value_core(math.sqrt(r2), inv_h, sigma)
                s += mass[j] * w
                rho[j] += mi * w
        rho[i] += s
    return 0


@nb.njit(cache=True, nogil=True)
def _forces_symmetric(pos, vel, rho, pr2, mass, kind, offsets, nbr, h,
                      visc, alpha_c0, nu, gx, gy, gz, want_rate, acc, drho):
    n = pos.shape[0]
    r2max = 4.0 * h * h
    inv_h = 1.0 / h
    sigma = _INV_PI * inv_h * inv_h * inv_h
    eps = 0.01 * h * h
    visits = 0
    for i in range(n):
        acc[i, 0] = 0.0
        acc[i, 1] = 0.0
        acc[i, 2] = 0.0
        if want_rate:
            drho[i] = 0.0
    for i in range(n):
        fluid_i = kind[i] == 0
        xi = pos[i, 0]
        yi = pos[i, 1]
        zi = pos[i, 2]
        ui = vel[i, 0]
        vi = vel[i, 1]
        wi = vel[i, 2]
        rho_i = rho[i]
        pr2_i = pr2[i]
        mi = mass[i]
        ax = 0.0
        ay = 0.0
        az = 0.0
        dr = 0.0
        for p in range(_upper_start(offsets, nbr, i), offsets[i + 1]):
            j = nbr[p]
            dx = xi - pos[j, 0]
            dy = yi - pos[j, 1]
            dz = zi - pos[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 >= r2max:
                continue
            visits += 1
            fluid_j = kind[j] == 0
            if not fluid_i and not fluid_j and not want_rate:
                continue
            f = gradient_factor_core(math.sqrt(r2), inv_h, sigma)
            dux = ui - vel[j, 0]
            duy = vi - vel[j, 1]
            duz = wi - vel[j, 2]
            vr = dux * dx + duy * dy + duz * dz
            c = _pair_coefficient(pr2_i, pr2[j], rho_i, rho[j], vr, r2, h, visc,
                                  alpha_c0, eps)
            mj = mass[j]
            if want_rate:
                dr += mj * vr * f
                drho[j] += mi * vr * f
            # grad W_ji = -grad W_ij, so j receives the mirrored term
            if fluid_i:
                s = -mj * c * f
                ax += s * dx
                ay += s * dy
                az += s * dz
            if fluid_j:
                s = -mi * c * f
                acc[j, 0] -= s * dx
                acc[j, 1] -= s * dy
                acc[j, 2] -= s * dz
            if visc == 1:
                lam = _laminar_coefficient(rho_i, rho[j], f, r2, nu, eps)
                if fluid_i:
                    t = mj * lam
                    ax += t * dux
                    ay += t * duy
                    az += t * duz
                if fluid_j:
                    t = mi * lam
                    acc[j, 0] -= t * dux
                    acc[j, 1] -= t * duy
                    acc[j, 2] -= t * duz
        if fluid_i:
            acc[i, 0] += ax + gx
            acc[i, 1] += ay + gy
            acc[i, 2] += az + gz
        if want_rate:
            drho[i] += dr
    return visits


def compute_interactions(sys: ParticleSystem, neighbors: NeighborLists, kernel: CubicSplineKernel,
                         fluid: FluidProperties, viscosity: Viscosity = Viscosity(),
                         density_mode: DensityMode = DensityMode.SUMMATION,
                         clamp_negative_pressure: bool = False,
                         policy: ExecPolicy = SERIAL) -> int:
    """Gather-mode interaction phase.

    Summation mode: density, pressure, accelerations. Continuity mode:
    accelerations from the current density and pressure; the density rate
    is evaluated separately once velocities have been updated.
    Returns the number of directed pair visits in the force pass.
    """
    if DensityMode(density_mode) is DensityMode.SUMMATION:
        compute_density_summation(sys, neighbors, kernel, policy)
        update_pressure(sys, fluid, clamp_negative_pressure, policy)
    return compute_accelerations(sys, neighbors, kernel, fluid, viscosity, policy)


def compute_interactions_symmetric(sys: ParticleSystem, neighbors: NeighborLists,
                                   kernel: CubicSplineKernel, fluid: FluidProperties,
                                   viscosity: Viscosity = Viscosity(),
                                   density_mode: DensityMode = DensityMode.SUMMATION,
                                   clamp_negative_pressure: bool = False,
                                   policy: ExecPolicy = SERIAL) -> int:
    """Same results as :func:`compute_interactions`, visiting each pair once.

    Returns the number of undirected pair visits in the force pass, which is
    half the gather-mode count.
    """
    if policy.parallel:
        raise ParallelPairModeError(
            "symmetric half-pair interactions write to both particles of a pair "
            "and race under parallel execution; use gather mode"
        )
    if DensityMode(density_mode) is DensityMode.SUMMATION:
        _density_symmetric(sys.position, sys.mass, neighbors.offsets, neighbors.indices,
                           kernel.smoothing_length, sys.density)
        update_pressure(sys, fluid, clamp_negative_pressure)
    return int(_forces_symmetric(*_force_args(sys, neighbors, kernel, fluid, viscosity, SERIAL),
                                 False, sys.acceleration, sys.density_rate))


@nb.njit(cache=True, nogil=True)
def _rate_symmetric(pos, vel, mass, offsets, nbr, h, drho):
    n = pos.shape[0]
    r2max = 4.0 * h * h
    inv_h = 1.0 / h
    sigma = _INV_PI * inv_h * inv_h * inv_h
    for i in range(n):
        drho[i] = 0.0
    for i in range(n):
        xi = pos[i, 0]
        yi = pos[i, 1]
        zi = pos[i, 2]
        ui = vel[i, 0]
        vi = vel[i, 1]
        wi = vel[i, 2]
        mi = mass[i]
        s = 0.0
        for p in range(_upper_start(offsets, nbr, i), offsets[i + 1]):
            j = nbr[p]
            dx = xi - pos[j, 0]
            dy = yi - pos[j, 1]
            dz = zi - pos[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 < r2max:
                f = gradient_factor_core(math.sqrt(r2), inv_h, sigma)
                du = (ui - vel[j, 0]) * dx + (vi - vel[j, 1]) * dy + (wi - vel[j, 2]) * dz
                s += mass[j] * du * f
                drho[j] += mi * du * f
        drho[i] += s
    return 0


def compute_density_rate_symmetric(sys: ParticleSystem, neighbors: NeighborLists,
                                   kernel: CubicSplineKernel, policy: ExecPolicy = SERIAL) -> None:
    """Half-pair version of :func:`compute_density_rate`; serial only."""
    if policy.parallel:
        raise ParallelPairModeError("symmetric half-pair loops require serial execution")
    _rate_symmetric(sys.position, sys.velocity, sys.mass, neighbors.offsets, neighbors.indices,
                    kernel.smoothing_length, sys.density_rate)
