import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lwrdnl import (ConfigurationError, NumericalFault, PathFlowProfile,
                    SimulationConfig, Simulator, origin_update, run)
from lwrdnl.simulator import LinkInitial, OriginState, exit_times, godunov_line

from helpers import diverge_network, line_network, merge_network, standard_fd


def zero_profiles(net):
    return {p.id: PathFlowProfile() for p in net.paths}


# -- departure profiles -----------------------------------------------------------


def test_profile_rate_and_cumulative():
    p = PathFlowProfile(((0.0, 2.0), (1.0, 0.0)))
    assert p.rate(-1) == 0 and p.rate(0.5) == 2 and p.rate(1.0) == 0
    assert np.allclose(p.cumulative([0.5, 1.0, 3.0]), [1.0, 2.0, 2.0])
    assert p.total_variation() == 4.0


def test_step_rates_are_exact_averages():
    p = PathFlowProfile.constant(1.0, 0.25, 0.75)
    assert np.allclose(p.step_rates(0.5, 2), [0.5, 0.5])
    assert p.step_rates(0.5, 2).sum() * 0.5 == pytest.approx(0.5)


def test_profile_bounds_and_sum():
    p = PathFlowProfile.constant(0.3, 0, 2) + PathFlowProfile.constant(0.2, 1, 3)
    assert p.rate(1.5) == pytest.approx(0.5)
    assert p.within_bounds(0.1, 1.0)
    assert not PathFlowProfile.constant(0.05).within_bounds(0.1, 1.0)
    assert not PathFlowProfile.constant(1.5).within_bounds(0.1, 1.0)


# -- origin queue ---------------------------------------------------------------------


def test_origin_queue_grows_at_excess_rate():
    state, out = origin_update(OriginState(), [1.5, 0.5], 1.0, 0.1)
    assert out.sum() == pytest.approx(1.0)
    assert state.queue == pytest.approx(0.1)  # dq/dt = 2 - 1
    assert np.allclose(out, [0.75, 0.25])


def test_origin_passes_through_when_supply_suffices():
    state, out = origin_update(OriginState(), [0.5], 1.0, 0.1)
    assert out[0] == pytest.approx(0.5) and state.queue == 0


def test_origin_drains_queue():
    state = OriginState()
    state, _ = origin_update(state, [4.0], 1.0, 0.1)  # queue 0.3
    assert state.queue == pytest.approx(0.3)
    state, out = origin_update(state, [0.0], 1.0, 0.1)
    assert state.queue == pytest.approx(0.2) and out.sum() == pytest.approx(1.0)


def test_origin_fifo_composition():
    state, _ = origin_update(OriginState(), [1.0, 0.0], 0.0, 1.0)
    state, _ = origin_update(state, [0.0, 1.0], 0.0, 1.0)
    state, out = origin_update(state, [0.0, 0.0], 1.0, 1.0)
    assert np.allclose(out, [1.0, 0.0])  # earlier path-0 batch leaves first
    state, out = origin_update(state, [0.0, 0.0], 1.0, 1.0)
    assert np.allclose(out, [0.0, 1.0])


def test_origin_rejects_negative():
    with pytest.raises(ValueError):
        origin_update(OriginState(), [-1.0], 1.0, 0.1)


def test_queue_exit_time_under_congestion():
    net = line_network((1.0,), supply=float("inf"))
    pid = net.paths[0].id
    res = run(net, {pid: PathFlowProfile.constant(2.0, 0.0, 1.0)},
              SimulationConfig(dt=0.05, horizon=6.0))
    assert res.queue_exit_time("o", 1.0).item() == pytest.approx(2.0, abs=1e-9)
    assert res.queue_exit_time("o", 0.0).item() == pytest.approx(0.0, abs=1e-9)


def test_queue_exit_time_without_queue():
    net = line_network((1.0,))
    pid = net.paths[0].id
    res = run(net, {pid: PathFlowProfile.constant(0.5, 0.0, 1.0)},
              SimulationConfig(dt=0.05, horizon=4.0))
    t = np.array([0.2, 0.5, 0.9])
    assert np.allclose(res.queue_exit_time("o", t), t)


# -- configuration ------------------------------------------------------------------


def test_cfl_violation():
    net = line_network((1.0,))
    with pytest.raises(ConfigurationError, match="CFL"):
        Simulator(net, zero_profiles(net), SimulationConfig(dt=0.5, horizon=2.0, cells_per_link=4))


def test_config_validation():
    with pytest.raises(ConfigurationError):
        SimulationConfig(dt=0, horizon=1)
    with pytest.raises(ConfigurationError):
        SimulationConfig(dt=0.1, horizon=1, cfl=1.5)
    with pytest.raises(ConfigurationError):
        SimulationConfig(dt=0.1, horizon=1, initial={"l0": LinkInitial(1.0)})


def test_unknown_or_missing_profiles():
    net = line_network()
    with pytest.raises(ConfigurationError):
        Simulator(net, {"nope": PathFlowProfile()}, SimulationConfig(dt=0.1, horizon=1))


def test_cells_for_resolution():
    net = line_network((1.0, 2.0))
    cfg = SimulationConfig(dt=0.1, horizon=1)
    assert cfg.cells_for(net.links["l0"]) == 10 and cfg.cells_for(net.links["l1"]) == 20
    cfg = SimulationConfig(dt=0.1, horizon=1, cells_per_link={"l0": 3})
    assert cfg.cells_for(net.links["l0"]) == 3
    assert cfg.refined(2).cells_for(net.links["l0"]) == 6


# -- dynamics -----------------------------------------------------------------------------


def test_empty_network_stays_empty():
    net = diverge_network()
    res = run(net, zero_profiles(net), SimulationConfig(dt=0.1, horizon=5, record_densities=True))
    assert np.all(res.densities == 0)
    assert all(np.all(q == 0) for q in res.queue.values())


def test_free_flow_delay():
    net = line_network((1.0, 2.0))
    pid = net.paths[0].id
    res = run(net, {pid: PathFlowProfile.constant(0.2, 0.0, 2.0)}, SimulationConfig(dt=0.05, horizon=10))
    arrival, tt = res.path_delay(pid, np.array([0.5, 1.0, 1.5]))
    fft = res.free_flow_time(pid)
    assert fft == pytest.approx(1.0 + 2.0 + 2 * 1.0)  # two virtual links of length 1
    assert np.allclose(tt, fft, atol=1e-9)
    assert np.allclose(arrival, [0.5 + fft, 1.0 + fft, 1.5 + fft], atol=1e-9)


def test_turning_ratios_follow_path_shares():
    net = diverge_network()
    p2, p3 = (p.id for p in net.paths)
    profiles = {p2: PathFlowProfile.constant(0.1, 0, 10), p3: PathFlowProfile.constant(0.3, 0, 10)}
    sim = Simulator(net, profiles, SimulationConfig(dt=0.1, horizon=10))
    state = sim.initial_state()
    for _ in range(60):
        state, _ = sim.step(state)
    alpha = sim.turning_ratios(state, net.junctions[0])
    assert alpha["2"] == pytest.approx(0.25) and alpha["3"] == pytest.approx(0.75)


def test_turning_ratios_retained_when_cell_empties():
    net = diverge_network()
    p2, p3 = (p.id for p in net.paths)
    profiles = {p2: PathFlowProfile.constant(0.4, 0, 1), p3: PathFlowProfile.constant(0.6, 0, 1)}
    sim = Simulator(net, profiles, SimulationConfig(dt=0.1, horizon=20))
    state = sim.initial_state()
    for _ in range(200):
        state, _ = sim.step(state)
    assert state.rho.sum() < 1e-12
    alpha = sim.turning_ratios(state, net.junctions[0])
    assert alpha["2"] == pytest.approx(0.4) and alpha["3"] == pytest.approx(0.6)


def test_merge_priority_split():
    net = merge_network(priority=0.3, supply=0.5)
    profiles = {p.id: PathFlowProfile.constant(0.8, 0, 40) for p in net.paths}
    res = run(net, profiles, SimulationConfig(dt=0.1, horizon=40))
    f4, f5, f6 = res.junction_fluxes["M"][-1]
    assert f6 == pytest.approx(0.5, abs=1e-9)
    assert f4 == pytest.approx(0.15, abs=1e-9) and f5 == pytest.approx(0.35, abs=1e-9)


def test_counterexample_data_is_stationary():
    fd = standard_fd()
    eps = 0.25
    rho1 = 1.4
    rho2 = fd.inverse_congested(eps * 0.8)
    rho3 = fd.inverse_free((1 - eps) * 0.8)
    net = diverge_network(supplies=(fd.flow(rho2), math.inf))
    net.links["o:out"] = net.links["o:out"]
    p2, p3 = (p.id for p in net.paths)
    initial = {
        "o:out": LinkInitial(rho1, {p2: eps, p3: 1 - eps}),
        "1": LinkInitial(rho1, {p2: eps, p3: 1 - eps}),
        "2": LinkInitial(rho2, {p2: 1.0}),
        "d2:in": LinkInitial(rho2, {p2: 1.0}),
        "3": LinkInitial(rho3, {p3: 1.0}),
        "d3:in": LinkInitial(rho3, {p3: 1.0}),
    }
    # the origin feeds exactly the stationary flux, already queued so it enters congested
    profiles = {p2: PathFlowProfile.constant(eps * 0.8), p3: PathFlowProfile.constant((1 - eps) * 0.8)}
    cfg = SimulationConfig(dt=0.1, horizon=10, record_densities=True, allow_nonempty_start=True,
                           initial=initial)
    res = run(net, profiles, cfg)
    assert np.max(np.abs(res.densities - res.densities[0])) < 1e-12
    assert res.nonempty_start


def test_little_law_free_flow_link():
    fd = standard_fd()
    net = line_network((4.0,), supply=0.5)
    pid = net.paths[0].id
    res = run(net, {pid: PathFlowProfile.constant(0.5)}, SimulationConfig(dt=0.05, horizon=80))
    t = 60.0
    # steady free-flow state with flux 0.5 upstream of a supply of exactly 0.5
    n_on_link = 4.0 * fd.inverse_free(0.5)
    assert res.link_exit_time("l0", t).item() - t == pytest.approx(n_on_link / 0.5, abs=1e-6)


def test_little_law_congested_link():
    # a bottleneck destination spills back until the link sits at the congested state
    fd = standard_fd()
    net = line_network((4.0,), supply=0.25)
    pid = net.paths[0].id
    res = run(net, {pid: PathFlowProfile.constant(0.5)}, SimulationConfig(dt=0.05, horizon=140))
    n_on_link = 4.0 * fd.inverse_congested(0.25)
    assert res.link_exit_time("l0", 80.0).item() - 80.0 == pytest.approx(n_on_link / 0.25, abs=1e-6)


def test_numerical_fault_reports_location():
    net = line_network((1.0,))
    pid = net.paths[0].id
    sim = Simulator(net, {pid: PathFlowProfile.constant(0.5)}, SimulationConfig(dt=0.1, horizon=1))
    state = sim.initial_state()
    state.rho_p[0, 3] = -1.0
    with pytest.raises(NumericalFault, match="cell"):
        sim.step(state)


def test_mass_is_conserved_in_congestion():
    net = diverge_network(supplies=(0.1, 0.2))
    profiles = {p.id: PathFlowProfile.constant(0.5, 0, 20) for p in net.paths}
    res = run(net, profiles, SimulationConfig(dt=0.1, horizon=60))
    assert np.max(np.abs(res.mass_error)) < 1e-12
    assert np.max(res.commodity_gap) < 1e-12
    assert np.max(res.junction_imbalance) < 1e-12


def test_exit_times_inverse():
    dt = 1.0
    entry = np.array([0.0, 1.0, 2.0, 2.0, 2.0])
    exit_ = np.array([0.0, 0.0, 1.0, 2.0, 2.0])
    assert np.allclose(exit_times(entry, exit_, dt, np.array([0.5, 1.0])), [1.5, 2.0])
    assert exit_times(entry, exit_, dt, np.array([3.0]), 0.5)[0] == pytest.approx(3.5)


def test_godunov_line_conserves():
    fd = standard_fd()
    rho0 = np.where(np.arange(100) < 50, 0.2, 2.5)
    out = godunov_line(fd, rho0, 0.01, 0.01, 20)
    assert out.sum() == pytest.approx(rho0.sum(), rel=0, abs=1e-9 * rho0.sum() + 1)
    assert np.all(out >= 0) and np.all(out <= 3)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 1.5), st.floats(0.05, 1.5), st.floats(0.05, 2.0))
def test_fifo_exit_times_monotone(r2, r3, s):
    net = diverge_network(supplies=(s, math.inf))
    p2, p3 = (p.id for p in net.paths)
    profiles = {p2: PathFlowProfile.constant(r2, 0, 5), p3: PathFlowProfile.constant(r3, 0, 5)}
    res = run(net, profiles, SimulationConfig(dt=0.1, horizon=30))
    t = res.times
    for lid in ("1", "2", "3"):
        e = res.link_exit_time(lid, t)
        e = e[np.isfinite(e)]
        assert np.all(np.diff(e) >= -1e-9)


def test_merge_spillback_takes_a_window_to_travel():
    net = merge_network(priority=0.5, supply=0.5)
    profiles = {p.id: PathFlowProfile.constant(0.3) for p in net.paths}
    res = run(net, profiles, SimulationConfig(dt=0.1, horizon=300))
    f4, f5, _ = res.junction_fluxes["M"].T
    flowing = np.nonzero(f4 + f5 >= 0.6 - 1e-9)[0][0]
    constrained = flowing + np.nonzero(f4[flowing:] + f5[flowing:] < 0.6 - 1e-9)[0]
    assert constrained.size  # spillback does reach the merge
    first_arrival = 2.0 + 2.0 + 2.0 + 2.0  # origin link, link 4, link 6, destination link
    window = (2.0 + 2.0) / 0.5  # link 6 and the destination link at the backward wave speed
    assert res.times[constrained[0]] >= first_arrival + window
    assert np.all(np.diff(res.queue["o4"][constrained[0]:]) >= -1e-12)
    assert res.queue["o4"][-1] > 0 and res.queue["o5"][-1] > 0
