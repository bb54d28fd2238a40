import numpy as np
import pytest

from wcsph.core import DensityMode, Integrator, new_particle_system, total_mass
from wcsph.integrator import (SimulationDiverged, StepStats, advance, compute_dt, kick, run,
                              step_symplectic_euler)
from wcsph.parallel import ExecPolicy
from wcsph.scenario_io import build_dam_break, parse_config

from conftest import make_config, random_fluid


def test_dt_example():
    cfg = make_config(spacing=0.01, h=0.01)
    sys = new_particle_system([[0, 0, 0]], np.empty((0, 3)), cfg)
    sys.acceleration[0] = (0, 0, -9.81)
    assert compute_dt(sys, cfg.fluid, 0.01, 0.3) == pytest.approx(1.5e-4, rel=1e-12)


def test_dt_acoustic_only_and_linear_in_cfl():
    cfg = make_config(spacing=0.01, h=0.01, gravity=(0, 0, 0))
    sys = new_particle_system([[0, 0, 0]], np.empty((0, 3)), cfg)
    assert compute_dt(sys, cfg.fluid, 0.01, 0.3) == pytest.approx(0.3 * 0.01 / 20.0, rel=1e-14)
    sys.velocity[0] = (3, 0, 0)
    sys.acceleration[0] = (0, 40, 0)
    assert compute_dt(sys, cfg.fluid, 0.01, 0.4) == pytest.approx(
        2 * compute_dt(sys, cfg.fluid, 0.01, 0.2), rel=1e-14)


def test_euler_gravity_example():
    cfg = make_config()
    sys = new_particle_system([[0, 0, 1.0]], np.empty((0, 3)), cfg)
    sys.acceleration[0] = (0, 0, -9.81)
    step_symplectic_euler(sys, 0.1)
    assert np.allclose(sys.velocity[0], [0, 0, -0.981], rtol=0, atol=1e-15)
    assert np.allclose(sys.position[0], [0, 0, 1.0 - 0.0981], rtol=0, atol=1e-15)


def test_euler_pure_advection():
    cfg = make_config()
    sys = random_fluid(20, 0.5, 1, cfg)
    r0 = sys.position.copy()
    sys.acceleration[:] = 0
    step_symplectic_euler(sys, 0.01)
    assert np.array_equal(sys.position, r0 + sys.velocity * 0.01)


@pytest.mark.parametrize("mode", list(DensityMode))
def test_zero_dt_is_identity(mode):
    cfg = make_config()
    sys = random_fluid(30, 0.5, 2, cfg)
    sys.acceleration[:] = np.random.default_rng(0).normal(size=(30, 3))
    sys.density_rate[:] = 5.0
    before = sys.copy()
    step_symplectic_euler(sys, 0.0, mode)
    for name in ("position", "velocity", "density"):
        assert np.array_equal(getattr(sys, name), getattr(before, name))


def test_euler_leaves_boundary_untouched():
    cfg = make_config()
    sys = new_particle_system([[0, 0, 0]], [[0.1, 0, 0]], cfg)
    sys.acceleration[:] = (1, 2, 3)
    sys.velocity[1] = 0
    step_symplectic_euler(sys, 0.1)
    assert np.array_equal(sys.position[1], [0.1, 0, 0])
    assert np.array_equal(sys.velocity[1], [0, 0, 0])


def test_continuity_density_update_and_boundary_floor():
    cfg = make_config()
    sys = new_particle_system([[0, 0, 0]], [[0.1, 0, 0]], cfg)
    sys.density_rate[:] = (200.0, -200.0)
    step_symplectic_euler(sys, 0.1, DensityMode.CONTINUITY, rest_density=1000.0)
    assert sys.density[0] == pytest.approx(1020.0)
    assert sys.density[1] == 1000.0  # floored


def test_domain_clamp_zeroes_velocity_and_counts():
    cfg = make_config(lo=(0, 0, 0), hi=(1, 1, 1))
    sys = new_particle_system([[0.5, 0.5, 0.05]], np.empty((0, 3)), cfg)
    sys.velocity[0] = (0.1, 0, -1.0)
    hits = step_symplectic_euler(sys, 0.1, domain=((0, 0, 0), (1, 1, 1)))
    assert hits == 1
    assert sys.position[0, 2] == 0.0
    assert sys.velocity[0, 2] == 0.0
    assert sys.velocity[0, 0] == pytest.approx(0.1)


def test_kick_advance_equals_euler():
    cfg = make_config()
    a = random_fluid(40, 0.5, 3, cfg)
    a.acceleration[:] = np.random.default_rng(1).normal(size=(40, 3))
    a.density_rate[:] = np.random.default_rng(2).normal(size=40)
    b = a.copy()
    step_symplectic_euler(a, 1e-3, DensityMode.CONTINUITY)
    kick(b, 1e-3)
    advance(b, 1e-3, DensityMode.CONTINUITY)
    assert np.array_equal(a.position, b.position)
    assert np.array_equal(a.density, b.density)


def test_update_parallel_bitwise():
    cfg = make_config()
    a = random_fluid(5000, 0.5, 4, cfg)
    a.acceleration[:] = 1.0
    b = a.copy()
    step_symplectic_euler(a, 1e-3)
    step_symplectic_euler(b, 1e-3, policy=ExecPolicy.threads(8))
    assert np.array_equal(a.position, b.position)


def single_particle_config(end_time, **kw):
    kw.setdefault("output_interval", end_time or 1.0)
    return make_config(spacing=0.01, h=0.013, lo=(-1, -1, -100), hi=(1, 1, 1),
                       end_time=end_time, neighbor_mode="brute_force", **kw)


def test_end_time_zero_emits_once():
    cfg = single_particle_config(0.0)
    sys = new_particle_system([[0, 0, 0]], np.empty((0, 3)), cfg)
    seen = []
    _, stats = run(cfg, sys, [lambda st, snap: seen.append(st.step)])
    assert stats == [] and seen == [0]


@pytest.mark.parametrize("integrator", list(Integrator))
def test_free_fall(integrator):
    cfg = single_particle_config(0.5, integrator=integrator)
    sys = new_particle_system([[0, 0, 0]], np.empty((0, 3)), cfg)
    _, stats = run(cfg, sys)
    t = stats[-1].time
    assert t == pytest.approx(0.5, abs=1e-15)
    dt = max(s.dt for s in stats)
    exact = -0.5 * 9.81 * t**2
    assert abs(sys.position[0, 2] - exact) < 2 * 9.81 * 0.5 * dt
    assert sys.velocity[0, 2] == pytest.approx(-9.81 * t, rel=1e-9)


def test_sink_cadence_and_stats():
    cfg = single_particle_config(0.1, output_interval=0.02)
    sys = new_particle_system([[0, 0, 0]], np.empty((0, 3)), cfg)
    times = []
    _, stats = run(cfg, sys, [lambda st, snap: times.append(st.time)])
    assert times[0] == 0.0 and times[-1] == pytest.approx(0.1)
    assert len(times) == 6  # t = 0, four interior crossings, end
    ts = [s.time for s in stats]
    assert all(b > a for a, b in zip(ts, ts[1:]))
    for s in stats:
        assert isinstance(s, StepStats)
        assert min(s.neighbor_s, s.interact_s, s.update_s) >= 0


def test_sink_snapshot_is_read_only():
    cfg = single_particle_config(0.01)
    sys = new_particle_system([[0, 0, 0]], np.empty((0, 3)), cfg)
    snaps = []
    run(cfg, sys, [lambda st, snap: snaps.append(snap)])
    with pytest.raises(ValueError):
        snaps[0].position[0, 0] = 1.0
    assert snaps[0].position[0, 2] == 0.0


def test_max_steps():
    cfg = single_particle_config(1.0)
    sys = new_particle_system([[0, 0, 0]], np.empty((0, 3)), cfg)
    _, stats = run(cfg, sys, max_steps=7)
    assert len(stats) == 7


TANK = """
[fluid]
rest_density = 1000
viscosity = 1e-6
speed_of_sound = 15
gamma = 7
gravity = 0, 0, -9.81
[numerics]
cfl = 0.25
end_time = {end}
output_interval = 0.05
density_mode = continuity
neighbor_mode = {mode}
target_neighbor_count = 10
artificial_alpha = 0.1
[geometry]
tank = 0.2, 0.1, 0.2
water_column = 0.2, 0.1, 0.1
particle_spacing = 0.025
"""


def tank(end=0.1, mode="cell_list", **over):
    cfg, spec = parse_config(TANK.format(end=end, mode=mode),
                             [f"{k}={v}" for k, v in over.items()])
    return cfg, build_dam_break(spec, cfg)


def test_serial_runs_bitwise_identical():
    cfg, a = tank()
    _, b = tank()
    run(cfg, a)
    run(cfg, b)
    assert np.array_equal(a.position, b.position)
    assert np.array_equal(a.density, b.density)


def test_parallel_run_bitwise_identical_to_serial():
    cfg, a = tank()
    _, b = tank()
    run(cfg, a)
    run(cfg, b, policy=ExecPolicy.threads(8))
    assert np.array_equal(a.position, b.position)
    assert np.array_equal(a.velocity, b.velocity)


@pytest.mark.parametrize("integrator", list(Integrator))
def test_verlet_matches_cell_list(integrator):
    over = {"numerics.integrator": integrator.value}
    cfg_c, c = tank(0.2, "cell_list", **over)
    cfg_v, v = tank(0.2, "verlet", **over)
    _, sc = run(cfg_c, c)
    _, sv = run(cfg_v, v)
    assert [s.dt for s in sc] == [s.dt for s in sv]
    assert np.abs(c.position - v.position).max() < 1e-9
    assert not all(s.neighbor_rebuilt for s in sv)  # lists were reused


def test_symmetric_run_matches_gather():
    cfg_g, g = tank(0.05)
    cfg_s, s = tank(0.05, **{"numerics.pair_mode": "symmetric"})
    run(cfg_g, g)
    run(cfg_s, s)
    assert np.abs(g.position - s.position).max() < 1e-9


def test_symmetric_refuses_parallel():
    cfg, s = tank(0.05, **{"numerics.pair_mode": "symmetric"})
    with pytest.raises(ValueError):
        run(cfg, s, policy=ExecPolicy.threads(2))


def fluid_energy(sys, g=9.81):
    f = sys.fluid_indices
    m = sys.mass[f]
    return float((0.5 * m * (sys.velocity[f] ** 2).sum(axis=1)).sum() + (m * g * sys.position[f, 2]).sum())


def test_mass_conserved_boundary_fixed_energy_dissipates():
    cfg, sys = tank(0.3)
    m0 = sys.mass.copy()
    walls = sys.position[sys.boundary_indices].copy()
    e0 = fluid_energy(sys)
    run(cfg, sys)
    assert np.array_equal(sys.mass, m0)
    assert total_mass(sys) == float(m0.sum())
    assert np.array_equal(sys.position[sys.boundary_indices], walls)
    assert fluid_energy(sys) < e0


def test_nan_guard_names_step_and_quantity():
    cfg, sys = tank(0.1)
    sys.velocity[0, 0] = np.nan
    with pytest.raises(SimulationDiverged) as info:
        run(cfg, sys)
    assert info.value.step == 0 and info.value.quantity == "velocity"


def test_nan_during_run_aborts():
    cfg, sys = tank(0.1)

    # corrupt the live state from a sink once the run is under way
    calls = []

    def sink(stats, snap):
        calls.append(stats.step)
        if len(calls) == 2:
            sys.pressure[3] = np.inf

    with pytest.raises(SimulationDiverged) as info:
        run(cfg.with_updates(output_interval=1e-4), sys, [sink])
    assert info.value.step > 0
