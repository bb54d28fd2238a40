"""Particle state, fluid constants and run configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum

import numpy as np

Vec3 = tuple[float, float, float]


class Kind(IntEnum):
    FLUID = 0
    BOUNDARY = 1


class DensityMode(str, Enum):
    SUMMATION = "summation"
    CONTINUITY = "continuity"


class PairMode(str, Enum):
    GATHER = "gather"
    SYMMETRIC = "symmetric"


class NeighborMode(str, Enum):
    BRUTE_FORCE = "brute_force"
    CELL_LIST = "cell_list"
    VERLET = "verlet"


class ViscosityModel(str, Enum):
    ARTIFICIAL = "artificial"
    LAMINAR = "laminar"


class Integrator(str, Enum):
    SYMPLECTIC_EULER = "symplectic_euler"
    LEAPFROG = "leapfrog"


class InvalidParticleError(ValueError):
    """Raised when an input position is rejected; ``index`` names the particle."""

    def __init__(self, index: int, message: str):
        super().__init__(f"particle {index}: {message}")
        self.index = index


def _vec3(value) -> Vec3:
    v = tuple(float(x) for x in value)
    if len(v) != 3:
        raise ValueError(f"expected a 3-vector, got {value!r}")
    return v  # type: ignore[return-value]


@dataclass(frozen=True)
class FluidProperties:
    rest_density: float = 1000.0
    kinematic_viscosity: float = 1.0e-6
    speed_of_sound: float = 20.0
    gamma: float = 7.0
    gravity: Vec3 = (0.0, 0.0, -9.81)

    def __post_init__(self):
        object.__setattr__(self, "gravity", _vec3(self.gravity))
        if not self.rest_density > 0:
            raise ValueError("rest_density must be > 0")
        if not self.speed_of_sound > 0:
            raise ValueError("speed_of_sound must be > 0")
        if not self.gamma >= 1:
            raise ValueError("gamma must be >= 1")
        if not self.kinematic_viscosity >= 0:
            raise ValueError("kinematic_viscosity must be >= 0")

    @property
    def stiffness(self) -> float:
        """Tait constant B = c0^2 rho0 / gamma."""
        return self.speed_of_sound**2 * self.rest_density / self.gamma


@dataclass(frozen=True)
class SimulationConfig:
    fluid: FluidProperties
    particle_spacing: float
    smoothing_length: float
    domain_min: Vec3
    domain_max: Vec3
    end_time: float
    output_interval: float
    target_neighbor_count: int = 20
    cfl: float = 0.25
    density_mode: DensityMode = DensityMode.SUMMATION
    pair_mode: PairMode = PairMode.GATHER
    neighbor_mode: NeighborMode = NeighborMode.CELL_LIST
    verlet_skin_factor: float = 0.2
    cell_subdivision: int = 1
    viscosity_model: ViscosityModel = ViscosityModel.ARTIFICIAL
    artificial_alpha: float = 0.02
    clamp_negative_pressure: bool = False
    integrator: Integrator = Integrator.SYMPLECTIC_EULER
    seed: int = 0
    output_dir: str = "output"

    def __post_init__(self):
        object.__setattr__(self, "domain_min", _vec3(self.domain_min))
        object.__setattr__(self, "domain_max", _vec3(self.domain_max))
        for name, enum in (
            ("density_mode", DensityMode),
            ("pair_mode", PairMode),
            ("neighbor_mode", NeighborMode),
            ("viscosity_model", ViscosityModel),
            ("integrator", Integrator),
        ):
            object.__setattr__(self, name, enum(getattr(self, name)))
        if any(lo >= hi for lo, hi in zip(self.domain_min, self.domain_max)):
            raise ValueError("domain_min must be < domain_max componentwise")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        # end_time = 0 is a legal "dump initial state only" run
        if not self.end_time >= 0:
            raise ValueError("end_time must be >= 0")
        if not self.output_interval > 0:
            raise ValueError("output_interval must be > 0")
        if not self.particle_spacing > 0:
            raise ValueError("particle_spacing must be > 0")
        if not self.smoothing_length > 0:
            raise ValueError("smoothing_length must be > 0")
        if self.target_neighbor_count < 1:
            raise ValueError("target_neighbor_count must be >= 1")
        if self.verlet_skin_factor < 0:
            raise ValueError("verlet_skin_factor must be >= 0")
        if self.cell_subdivision < 1:
            raise ValueError("cell_subdivision must be >= 1")
        if self.artificial_alpha < 0:
            raise ValueError("artificial_alpha must be >= 0")

    @property
    def support_radius(self) -> float:
        return 2.0 * self.smoothing_length

    @property
    def particle_mass(self) -> float:
        return self.fluid.rest_density * self.particle_spacing**3

    def with_updates(self, **changes) -> "SimulationConfig":
        return replace(self, **changes)


@dataclass
class ParticleSystem:
    """Structure-of-arrays particle state.

    Arrays are indexed by particle; vectors have shape ``(n, 3)``. The mass
    array is made read-only at construction so it cannot drift.
    """

    position: np.ndarray
    velocity: np.ndarray
    density: np.ndarray
    pressure: np.ndarray
    mass: np.ndarray
    acceleration: np.ndarray
    density_rate: np.ndarray
    kind: np.ndarray
    _fluid_idx: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.validate()
        self.mass.flags.writeable = False
        self._fluid_idx = np.flatnonzero(self.kind == Kind.FLUID)

    @property
    def count(self) -> int:
        return int(self.mass.shape[0])

    @property
    def fluid_indices(self) -> np.ndarray:
        return self._fluid_idx

    @property
    def boundary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.kind == Kind.BOUNDARY)

    @property
    def fluid_count(self) -> int:
        return int(self._fluid_idx.shape[0])

    def validate(self) -> None:
        n = self.mass.shape[0]
        for name, shape in (
            ("position", (n, 3)),
            ("velocity", (n, 3)),
            ("acceleration", (n, 3)),
            ("density", (n,)),
            ("pressure", (n,)),
            ("density_rate", (n,)),
            ("kind", (n,)),
        ):
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")

    def copy(self) -> "ParticleSystem":
        return ParticleSystem(
            position=self.position.copy(),
            velocity=self.velocity.copy(),
            density=self.density.copy(),
            pressure=self.pressure.copy(),
            mass=self.mass.copy(),
            acceleration=self.acceleration.copy(),
            density_rate=self.density_rate.copy(),
            kind=self.kind.copy(),
        )

    def snapshot(self) -> "ParticleSystem":
        """Read-only copy handed to output sinks."""
        snap = self.copy()
        for name in ("position", "velocity", "density", "pressure",
                     "acceleration", "density_rate", "kind"):
            getattr(snap, name).flags.writeable = False
        return snap


def _check_positions(points: np.ndarray, lo: np.ndarray, hi: np.ndarray, offset: int) -> None:
    finite = np.isfinite(points).all(axis=1)
    if not finite.all():
        bad = int(np.flatnonzero(~finite)[0])
        raise InvalidParticleError(offset + bad, "non-finite coordinate")
    inside = ((points >= lo) & (points <= hi)).all(axis=1)
    if not inside.all():
        bad = int(np.flatnonzero(~inside)[0])
        raise InvalidParticleError(
            offset + bad, f"position {points[bad].tolist()} outside domain"
        )


def new_particle_system(fluid_positions, boundary_positions, config: SimulationConfig) -> ParticleSystem:
    """Build a particle system at rest, fluid particles first.

    Every particle gets mass ``rho0 * d**3`` and density ``rho0``.
    """
    fluid = np.asarray(fluid_positions, dtype=np.float64).reshape(-1, 3)
    boundary = np.asarray(boundary_positions, dtype=np.float64).reshape(-1, 3)
    if fluid.shape[0] == 0 and boundary.shape[0] == 0:
        raise ValueError("at least one particle is required")
    lo = np.asarray(config.domain_min)
    hi = np.asarray(config.domain_max)
    _check_positions(fluid, lo, hi, 0)
    _check_positions(boundary, lo, hi, fluid.shape[0])

    n = fluid.shape[0] + boundary.shape[0]
    rho0 = config.fluid.rest_density
    kind = np.empty(n, dtype=np.int8)
    kind[: fluid.shape[0]] = Kind.FLUID
    kind[fluid.shape[0]:] = Kind.BOUNDARY
    return ParticleSystem(
        position=np.ascontiguousarray(np.vstack([fluid, boundary])),
        velocity=np.zeros((n, 3)),
        density=np.full(n, rho0),
        pressure=np.zeros(n),
        mass=np.full(n, config.particle_mass),
        acceleration=np.zeros((n, 3)),
        density_rate=np.zeros(n),
        kind=kind,
    )


def total_momentum(sys: ParticleSystem) -> np.ndarray:
    """Sum of m*u over fluid particles."""
    idx = sys.fluid_indices
    return (sys.mass[idx, None] * sys.velocity[idx]).sum(axis=0)


def total_mass(sys: ParticleSystem) -> float:
    return float(math.fsum(sys.mass))
