import numpy as np
import pytest

from wcsph.core import FluidProperties, SimulationConfig, new_particle_system


def make_config(spacing=0.1, h=None, lo=(-10.0, -10.0, -10.0), hi=(10.0, 10.0, 10.0), **changes):
    fluid = changes.pop("fluid", FluidProperties(rest_density=1000.0, speed_of_sound=20.0,
                                                 gravity=changes.pop("gravity", (0.0, 0.0, -9.81))))
    params = dict(fluid=fluid, particle_spacing=spacing,
                  smoothing_length=h if h is not None else 1.3 * spacing,
                  domain_min=lo, domain_max=hi, end_time=1.0, output_interval=0.1)
    params.update(changes)
    return SimulationConfig(**params)


def lattice(side, spacing, origin=(0.0, 0.0, 0.0)):
    idx = np.stack(np.meshgrid(*[np.arange(side)] * 3, indexing="ij"), -1).reshape(-1, 3)
    return (idx + 0.5) * spacing + np.asarray(origin)


def random_fluid(n, extent, seed, config, speed=0.1):
    rng = np.random.default_rng(seed)
    sys = new_particle_system(rng.uniform(0, extent, (n, 3)), np.empty((0, 3)), config)
    sys.velocity[:] = rng.normal(scale=speed, size=(n, 3))
    sys.density[:] = config.fluid.rest_density * rng.uniform(0.99, 1.02, n)
    return sys


@pytest.fixture
def config():
    return make_config()


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines at the end of the run."""
    import sys
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
