"""Dam-break (and settling-tank) particle layouts.

The tank interior is ``[0, tank]`` on each axis with an open top. Fluid
particles sit on a cubic lattice at ``(i + 1/2) d`` from the tank corner.
Wall particles continue that lattice outward: layer ``k`` sits at
``-(k + 1/2) d`` below/behind a wall plane and at ``tank + (k + 1/2) d``
beyond the far walls, so the fluid sees an unbroken lattice at the walls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import ParticleSystem, SimulationConfig, new_particle_system, _vec3
from ..dynamics import equation_of_state, hydrostatic_density

Vec3 = tuple[float, float, float]

_EPS = 1e-9


def lattice_count(extent: float, spacing: float) -> int:
    """Points per axis: extent/d when d divides extent, floor(extent/d) + 1 otherwise."""
    return max(0, int(math.ceil(extent / spacing - _EPS)))


@dataclass(frozen=True)
class DamBreakSpec:
    tank: Vec3
    water_column: Vec3
    particle_spacing: float
    obstacle_min: Vec3 | None = None
    obstacle_max: Vec3 | None = None
    boundary_layers: int | None = None
    wall_thickness: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "tank", _vec3(self.tank))
        object.__setattr__(self, "water_column", _vec3(self.water_column))
        if (self.obstacle_min is None) != (self.obstacle_max is None):
            raise ValueError("obstacle needs both min and max corners")
        if self.obstacle_min is not None:
            object.__setattr__(self, "obstacle_min", _vec3(self.obstacle_min))
            object.__setattr__(self, "obstacle_max", _vec3(self.obstacle_max))
        self.validate()

    @property
    def has_obstacle(self) -> bool:
        return self.obstacle_min is not None

    def validate(self) -> None:
        d = self.particle_spacing
        if not d > 0:
            raise ValueError("particle_spacing must be positive")
        if any(t <= 0 for t in self.tank):
            raise ValueError("tank extents must be positive")
        if any(w <= 0 for w in self.water_column):
            raise ValueError("water column extents must be positive")
        if any(w > t * (1 + _EPS) for w, t in zip(self.water_column, self.tank)):
            raise ValueError("water column must fit inside the tank")
        if any(w < d for w in self.water_column):
            raise ValueError(
                f"particle spacing {d} exceeds a water column dimension {self.water_column}"
            )
        if self.has_obstacle:
            lo, hi = self.obstacle_min, self.obstacle_max
            if any(a >= b for a, b in zip(lo, hi)):
                raise ValueError("obstacle_min must be < obstacle_max")
            if any(a < 0 or b > t * (1 + _EPS) for a, b, t in zip(lo, hi, self.tank)):
                raise ValueError("obstacle must lie inside the tank")
            if all(a < w for a, w in zip(lo, self.water_column)):
                raise ValueError("obstacle overlaps the initial water column")
        if self.boundary_layers is not None and self.boundary_layers < 2:
            raise ValueError("at least two boundary layers are required")
        if self.wall_thickness is not None and not self.wall_thickness > 0:
            raise ValueError("wall_thickness must be positive")

    def fluid_counts(self) -> tuple[int, int, int]:
        return tuple(lattice_count(w, self.particle_spacing) for w in self.water_column)

    @property
    def fluid_count(self) -> int:
        nx, ny, nz = self.fluid_counts()
        return nx * ny * nz

    @property
    def water_volume(self) -> float:
        return float(np.prod(self.water_column))

    def layers(self, smoothing_length: float) -> int:
        """Wall layers: explicit count, explicit thickness, or enough to cover 2h."""
        d = self.particle_spacing
        if self.boundary_layers is not None:
            return int(self.boundary_layers)
        if self.wall_thickness is not None:
            return max(2, lattice_count(self.wall_thickness, d))
        return max(2, lattice_count(2.0 * smoothing_length, d))

    def domain(self, smoothing_length: float) -> tuple[Vec3, Vec3]:
        """Bounds holding every particle, with headroom above the tank for splashes."""
        wall = self.layers(smoothing_length) * self.particle_spacing
        tx, ty, tz = self.tank
        return (-wall, -wall, -wall), (tx + wall, ty + wall, tz + max(tz, self.water_column[2]))

    def with_spacing(self, spacing: float) -> "DamBreakSpec":
        from dataclasses import replace
        return replace(self, particle_spacing=spacing)


def fluid_positions(spec: DamBreakSpec) -> np.ndarray:
    d = spec.particle_spacing
    axes = [(np.arange(n) + 0.5) * d for n in spec.fluid_counts()]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def _axis_coords(extent: float, d: float, layers: int, far_wall: bool):
    near = -(np.arange(layers)[::-1] + 0.5) * d
    inner = (np.arange(lattice_count(extent, d)) + 0.5) * d
    inner = inner[inner < extent]
    far = extent + (np.arange(layers) + 0.5) * d if far_wall else np.empty(0)
    coords = np.concatenate([near, inner, far])
    is_wall = np.concatenate([np.ones(near.size, bool), np.zeros(inner.size, bool),
                              np.ones(far.size, bool)])
    return coords, is_wall


def boundary_positions(spec: DamBreakSpec, layers: int) -> np.ndarray:
    d = spec.particle_spacing
    tx, ty, tz = spec.tank
    xs, wx = _axis_coords(tx, d, layers, True)
    ys, wy = _axis_coords(ty, d, layers, True)
    zs, wz = _axis_coords(tz, d, layers, False)
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    mx, my, mz = np.meshgrid(wx, wy, wz, indexing="ij")
    keep = (mx | my | mz).ravel()
    walls = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)[keep]
    if not spec.has_obstacle:
        return walls
    return np.vstack([walls, obstacle_positions(spec, layers)])


def obstacle_positions(spec: DamBreakSpec, layers: int) -> np.ndarray:
    """Lattice points inside the obstacle within ``layers`` spacings of a face."""
    d = spec.particle_spacing
    lo = np.asarray(spec.obstacle_min)
    hi = np.asarray(spec.obstacle_max)
    axes = []
    for a in range(3):
        i0 = math.ceil(lo[a] / d - 0.5 - _EPS)
        i1 = math.floor(hi[a] / d - 0.5 + _EPS)
        axes.append((np.arange(i0, i1 + 1) + 0.5) * d)
    grid = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grid], axis=1)
    if pts.size == 0:
        raise ValueError("obstacle is thinner than the particle spacing")
    depth = np.minimum(pts - lo, hi - pts).min(axis=1)
    return pts[depth < layers * d]


def build_dam_break(spec: DamBreakSpec, config: SimulationConfig) -> ParticleSystem:
    """Fluid column in the tank corner, wall and obstacle particles around it.

    Densities start hydrostatic below the column top; boundary particles
    outside the column footprint (plus one support radius) start at rest
    density.
    """
    spec.validate()
    layers = spec.layers(config.smoothing_length)
    fluid = fluid_positions(spec)
    walls = boundary_positions(spec, layers)
    sys = new_particle_system(fluid, walls, config)

    top = spec.water_column[2]
    reach = config.support_radius
    depth = top - sys.position[:, 2]
    under = ((sys.position[:, 0] <= spec.water_column[0] + reach)
             & (sys.position[:, 1] <= spec.water_column[1] + reach))
    depth = np.where(under, depth, 0.0)
    sys.density[:] = hydrostatic_density(depth, config.fluid)
    sys.pressure[:] = equation_of_state(sys.density, config.fluid, config.clamp_negative_pressure)
    return sys


def particle_count(spec: DamBreakSpec, smoothing_length: float) -> int:
    """Total particles :func:`build_dam_break` would create."""
    layers = spec.layers(smoothing_length)
    n = spec.fluid_count + boundary_positions(spec, layers).shape[0]
    return int(n)
