"""Scenario configuration files.

The format is a flat list of ``[section]`` headers followed by
``key = value`` lines. ``#`` starts a comment. Vectors are written as
three comma- or space-separated numbers. Example::

    [fluid]
    rest_density = 1000
    viscosity = 1e-6
    speed_of_sound = 25
    gamma = 7
    gravity = 0, 0, -9.81

    [numerics]
    cfl = 0.25
    end_time = 1.5
    output_interval = 0.05

    [geometry]
    tank = 0.8, 0.2, 0.4
    water_column = 0.25, 0.2, 0.25
    particle_spacing = 0.0125

    [run]
    seed = 0
    output_dir = output
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..core import (DensityMode, FluidProperties, Integrator, NeighborMode, PairMode,
                    SimulationConfig, ViscosityModel)
from ..kernels import smoothing_length_from_count
from .dambreak import DamBreakSpec


class ConfigError(ValueError):
    """Configuration problem; carries the ``section.key`` path and source line."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if key:
            where.append(key)
        if line:
            where.append(f"line {line}")
        super().__init__(f"{': '.join([', '.join(where), message]) if where else message}")
        self.key = key
        self.line = line


@dataclass(frozen=True)
class _Entry:
    value: str
    line: int | None


_FLOAT, _INT, _VEC, _STR, _BOOL = "float", "int", "vec", "str", "bool"

# (section, key) -> (type, required)
SCHEMA: dict[tuple[str, str], tuple[str, bool]] = {
    ("fluid", "rest_density"): (_FLOAT, True),
    ("fluid", "viscosity"): (_FLOAT, True),
    ("fluid", "speed_of_sound"): (_FLOAT, True),
    ("fluid", "gamma"): (_FLOAT, True),
    ("fluid", "gravity"): (_VEC, True),
    ("numerics", "cfl"): (_FLOAT, True),
    ("numerics", "end_time"): (_FLOAT, True),
    ("numerics", "output_interval"): (_FLOAT, True),
    ("numerics", "density_mode"): (_STR, False),
    ("numerics", "pair_mode"): (_STR, False),
    ("numerics", "neighbor_mode"): (_STR, False),
    ("numerics", "verlet_skin_factor"): (_FLOAT, False),
    ("numerics", "target_neighbor_count"): (_INT, False),
    ("numerics", "smoothing_length"): (_FLOAT, False),
    ("numerics", "cell_subdivision"): (_INT, False),
    ("numerics", "viscosity_model"): (_STR, False),
    ("numerics", "artificial_alpha"): (_FLOAT, False),
    ("numerics", "clamp_negative_pressure"): (_BOOL, False),
    ("numerics", "integrator"): (_STR, False),
    ("geometry", "tank"): (_VEC, True),
    ("geometry", "water_column"): (_VEC, True),
    ("geometry", "obstacle_min"): (_VEC, False),
    ("geometry", "obstacle_max"): (_VEC, False),
    ("geometry", "particle_spacing"): (_FLOAT, True),
    ("geometry", "boundary_layers"): (_INT, False),
    ("geometry", "wall_thickness"): (_FLOAT, False),
    ("geometry", "domain_min"): (_VEC, False),
    ("geometry", "domain_max"): (_VEC, False),
    ("run", "seed"): (_INT, False),
    ("run", "output_dir"): (_STR, False),
}

_CHOICES = {
    "density_mode": DensityMode,
    "pair_mode": PairMode,
    "neighbor_mode": NeighborMode,
    "viscosity_model": ViscosityModel,
    "integrator": Integrator,
}


def read_document(text: str) -> dict[str, dict[str, _Entry]]:
    """Split a config document into sections without interpreting values."""
    doc: dict[str, dict[str, _Entry]] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", line=lineno)
            section = line[1:-1].strip()
            if section in doc:
                raise ConfigError(f"duplicate section [{section}]", key=section, line=lineno)
            doc[section] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        if section is None:
            raise ConfigError("key outside of any [section]", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        path = f"{section}.{key}"
        if key in doc[section]:
            raise ConfigError(f"duplicate key {path!r}", key=path, line=lineno)
        doc[section][key] = _Entry(value, lineno)
    return doc


def apply_overrides(doc: dict[str, dict[str, _Entry]], overrides) -> None:
    """Apply ``section.key=value`` strings in order; later ones win."""
    for item in overrides or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        path, value = item.split("=", 1)
        section, key = path.strip().split(".", 1)
        doc.setdefault(section, {})[key.strip()] = _Entry(value.strip(), None)


def _convert(kind: str, entry: _Entry, path: str):
    v = entry.value
    try:
        if kind == _FLOAT:
            x = float(v)
            if not math.isfinite(x):
                raise ValueError
            return x
        if kind == _INT:
            return int(v)
        if kind == _BOOL:
            low = v.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError
        if kind == _VEC:
            parts = v.replace(",", " ").split()
            vec = tuple(float(p) for p in parts)
            if len(vec) != 3 or not all(math.isfinite(x) for x in vec):
                raise ValueError
            return vec
    except ValueError:
        raise ConfigError(f"cannot parse {v!r} as {kind}", key=path, line=entry.line) from None
    return v


def _values(doc) -> dict[str, object]:
    out: dict[str, object] = {}
    for section, entries in doc.items():
        for key, entry in entries.items():
            path = f"{section}.{key}"
            if (section, key) not in SCHEMA:
                raise ConfigError("unknown key", key=path, line=entry.line)
            kind, _ = SCHEMA[(section, key)]
            value = _convert(kind, entry, path)
            if key in _CHOICES:
                try:
                    value = _CHOICES[key](value)
                except ValueError:
                    allowed = ", ".join(m.value for m in _CHOICES[key])
                    raise ConfigError(f"{value!r} is not one of: {allowed}",
                                      key=path, line=entry.line) from None
            out[path] = value
    for (section, key), (_, required) in SCHEMA.items():
        if required and f"{section}.{key}" not in out:
            raise ConfigError("missing required key", key=f"{section}.{key}")
    return out


def _line_of(doc, path):
    if "." not in path:
        return None
    section, key = path.split(".", 1)
    entry = doc.get(section, {}).get(key)
    return entry.line if entry else None


def _blame(doc, hint: str, message: str) -> str:
    """Narrow a section hint to the key an error message mentions, if any."""
    if "." in hint:
        return hint
    for key in doc.get(hint, {}):
        if key in message or key.replace("_", " ") in message:
            return f"{hint}.{key}"
    return hint


def parse_config(text: str, overrides=None) -> tuple[SimulationConfig, DamBreakSpec]:
    """Parse a document (plus ``section.key=value`` overrides) into config + geometry."""
    doc = read_document(text)
    apply_overrides(doc, overrides)
    v = _values(doc)

    def build(path_hint, factory):
        try:
            return factory()
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            path = _blame(doc, path_hint, str(exc))
            raise ConfigError(str(exc), key=path, line=_line_of(doc, path)) from None

    fluid = build("fluid", lambda: FluidProperties(
        rest_density=v["fluid.rest_density"],
        kinematic_viscosity=v["fluid.viscosity"],
        speed_of_sound=v["fluid.speed_of_sound"],
        gamma=v["fluid.gamma"],
        gravity=v["fluid.gravity"],
    ))
    spec = build("geometry", lambda: DamBreakSpec(
        tank=v["geometry.tank"],
        water_column=v["geometry.water_column"],
        particle_spacing=v["geometry.particle_spacing"],
        obstacle_min=v.get("geometry.obstacle_min"),
        obstacle_max=v.get("geometry.obstacle_max"),
        boundary_layers=v.get("geometry.boundary_layers"),
        wall_thickness=v.get("geometry.wall_thickness"),
    ))
    k = v.get("numerics.target_neighbor_count", 20)
    h = v.get("numerics.smoothing_length")
    if h is None:
        h = build("numerics.target_neighbor_count",
                  lambda: smoothing_length_from_count(spec.water_volume, k, spec.fluid_count))
    lo, hi = spec.domain(h)
    lo = v.get("geometry.domain_min", lo)
    hi = v.get("geometry.domain_max", hi)

    config = build("numerics", lambda: SimulationConfig(
        fluid=fluid,
        particle_spacing=spec.particle_spacing,
        smoothing_length=h,
        domain_min=lo,
        domain_max=hi,
        end_time=v["numerics.end_time"],
        output_interval=v["numerics.output_interval"],
        target_neighbor_count=k,
        cfl=v["numerics.cfl"],
        density_mode=v.get("numerics.density_mode", DensityMode.SUMMATION),
        pair_mode=v.get("numerics.pair_mode", PairMode.GATHER),
        neighbor_mode=v.get("numerics.neighbor_mode", NeighborMode.CELL_LIST),
        verlet_skin_factor=v.get("numerics.verlet_skin_factor", 0.2),
        cell_subdivision=v.get("numerics.cell_subdivision", 1),
        viscosity_model=v.get("numerics.viscosity_model", ViscosityModel.ARTIFICIAL),
        artificial_alpha=v.get("numerics.artificial_alpha", 0.02),
        clamp_negative_pressure=v.get("numerics.clamp_negative_pressure", False),
        integrator=v.get("numerics.integrator", Integrator.SYMPLECTIC_EULER),
        seed=v.get("run.seed", 0),
        output_dir=v.get("run.output_dir", "output"),
    ))
    return config, spec


def load_config(path, overrides=None) -> tuple[SimulationConfig, DamBreakSpec]:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, overrides)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, tuple):
        return ", ".join(_fmt(float(c)) for c in x)
    if hasattr(x, "value"):
        return str(x.value)
    return str(x)


def serialize_config(config: SimulationConfig, spec: DamBreakSpec) -> str:
    """Write every field explicitly, so reparsing gives back equal objects."""
    f = config.fluid
    sections = {
        "fluid": {
            "rest_density": f.rest_density,
            "viscosity": f.kinematic_viscosity,
            "speed_of_sound": f.speed_of_sound,
            "gamma": f.gamma,
            "gravity": f.gravity,
        },
        "numerics": {
            "cfl": config.cfl,
            "end_time": config.end_time,
            "output_interval": config.output_interval,
            "density_mode": config.density_mode,
            "pair_mode": config.pair_mode,
            "neighbor_mode": config.neighbor_mode,
            "verlet_skin_factor": config.verlet_skin_factor,
            "target_neighbor_count": config.target_neighbor_count,
            "smoothing_length": config.smoothing_length,
            "cell_subdivision": config.cell_subdivision,
            "viscosity_model": config.viscosity_model,
            "artificial_alpha": config.artificial_alpha,
            "clamp_negative_pressure": config.clamp_negative_pressure,
            "integrator": config.integrator,
        },
        "geometry": {
            "tank": spec.tank,
            "water_column": spec.water_column,
            "particle_spacing": spec.particle_spacing,
            "obstacle_min": spec.obstacle_min,
            "obstacle_max": spec.obstacle_max,
            "boundary_layers": spec.boundary_layers,
            "wall_thickness": spec.wall_thickness,
            "domain_min": config.domain_min,
            "domain_max": config.domain_max,
        },
        "run": {"seed": config.seed, "output_dir": config.output_dir},
    }
    lines = []
    for name, entries in sections.items():
        lines.append(f"[{name}]")
        for key, value in entries.items():
            if value is not None:
                lines.append(f"{key} = {_fmt(value)}")
        lines.append("")
    return "\n".join(lines)
