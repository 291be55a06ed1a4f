"""Experiment drivers: supply lower bound, gridlock monitor, continuity probe,
diverge ill-posedness replication, path-share monitoring, random networks."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .fundamental_diagram import DomainError, FundamentalDiagram
from .junctions import solve_diverge
from .network import (Junction, Link, Network, NetworkConstants, attach_destination,
                      attach_origin, enumerate_paths, network_constants, supply_lower_bound)
from .simulator import PathFlowProfile, RunResult, SimulationConfig, run

# -- supply bound ---------------------------------------------------------------------


@dataclass(frozen=True)
class SupplyWindow:
    index: int
    start: float
    end: float
    observed: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class SupplyBoundReport:
    windows: tuple[SupplyWindow, ...]
    tolerance: float
    window_length: float

    @property
    def passed(self) -> bool:
        return all(w.passed for w in self.windows)

    @property
    def worst_margin(self) -> float:
        return min(w.observed - w.bound for w in self.windows)


def cell_flux_quantum(result: RunResult, constants: NetworkConstants) -> float:
    """``C_min * dt / dx_min``: one interface update measured against the smallest cell."""
    sim_dx = min(result.network.links[l].length / n for l, n in _cell_counts(result).items())
    return constants.min_capacity * result.dt / sim_dx


def _cell_counts(result: RunResult) -> dict[str, int]:
    counts = np.bincount(result.cell_link, minlength=len(result.link_ids))
    return {l: int(c) for l, c in zip(result.link_ids, counts)}


def verify_supply_bound(result: RunResult, constants: NetworkConstants | None = None,
                        tolerance: float | None = None) -> SupplyBoundReport:
    """Compare the minimum supply in each window ``[kL/lambda, (k+1)L/lambda)``
    with ``p^k * min(delta_D, p * C_min)``."""
    constants = constants or network_constants(result.network)
    if tolerance is None:
        tolerance = cell_flux_quantum(result, constants)
    width = constants.window
    k_of = np.floor(result.times / width * (1 + 1e-12)).astype(int)
    windows = []
    for k in np.unique(k_of):
        obs = float(result.min_supply[k_of == k].min())
        bound = supply_lower_bound(constants, int(k))
        windows.append(SupplyWindow(int(k), k * width, (k + 1) * width, obs, bound,
                                    obs >= bound - tolerance))
    return SupplyBoundReport(tuple(windows), tolerance, width)


@dataclass(frozen=True)
class GridlockReport:
    min_supply: float
    time: float
    link: str
    cell: int
    outside_hypotheses: bool

    @property
    def gridlocked(self) -> bool:
        return self.min_supply <= 0


def gridlock_monitor(result: RunResult) -> GridlockReport:
    """Smallest supply seen anywhere, with its location.

    Runs started from non-empty data are flagged: the no-gridlock guarantee
    only covers networks that start empty.
    """
    n = int(np.argmin(result.min_supply))
    cell = int(result.min_supply_cell[n])
    return GridlockReport(float(result.min_supply[n]), float(result.times[n]),
                          result.link_ids[result.cell_link[cell]], int(result.cell_local[cell]),
                          result.nonempty_start)


# -- continuity probe -----------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeRow:
    size: float
    deviation: float


@dataclass(frozen=True)
class ContinuityProbeReport:
    rows: tuple[ProbeRow, ...]
    floor: float
    threshold: float
    noise_tolerance: float
    samples: int
    excluded_samples: int

    @property
    def monotone(self) -> bool:
        devs = [r.deviation for r in self.rows]
        return all(b <= a + self.noise_tolerance for a, b in zip(devs, devs[1:]))

    @property
    def consistent(self) -> bool:
        last = self.rows[-1].deviation
        # a zero floor leaves only round-off to compare against
        return self.monotone and (last < self.threshold or last <= self.noise_tolerance)

    @property
    def verdict(self) -> str:
        return "consistent with continuity" if self.consistent else "not consistent with continuity"


def bump(profile: PathFlowProfile, start: float, width: float, volume: float) -> PathFlowProfile:
    """Add ``volume`` vehicles spread evenly over ``[start, start + width]``."""
    if volume == 0:
        return profile
    return profile + PathFlowProfile.constant(volume / width, start, start + width)


def _delays(args):
    network, profiles, config, times = args
    res = run(network, profiles, config)
    return {p: res.path_delay(p, t)[1] for p, t in times.items()}


def _deviation(base: dict, other: dict) -> tuple[float, int, int]:
    worst, used, excluded = 0.0, 0, 0
    for p, d0 in base.items():
        d1 = other[p]
        ok = np.isfinite(d0) & np.isfinite(d1)
        excluded += int((~ok).sum())
        used += int(ok.sum())
        if ok.any():
            worst = max(worst, float(np.max(np.abs(d1[ok] - d0[ok]))))
    return worst, used, excluded


def probe_continuity(network: Network, profiles: Mapping[str, PathFlowProfile],
                     config: SimulationConfig, path: str, sizes: Sequence[float],
                     bump_start: float, bump_width: float, sample_times=None,
                     noise_tolerance: float = 1e-12, threshold_factor: float = 10.0,
                     max_workers: int = 1) -> ContinuityProbeReport:
    """Delay response to shrinking departure-rate perturbations on one path.

    Each row runs the loading with ``volume = size`` vehicles added as a bump on
    ``path``; the deviation is the largest change in any path's travel time over
    ``sample_times``. The default samples every step in the first half of the
    horizon at which that path's base departure rate is positive: the last
    vehicle of a platoon exits along the scheme's diffusive tail, so its exit
    time is not a stable quantity to compare.
    The discretization floor is the delay change between the base run and a run
    with ``dt`` halved and cells doubled; the verdict requires monotone shrinking
    and a final deviation below ``threshold_factor`` times that floor.
    """
    sizes = [float(s) for s in sizes]
    if any(b >= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be strictly decreasing")
    grid = np.arange(0.0, 0.5 * config.horizon + 1e-12, config.dt)
    times = {}
    for p in network.paths:
        if sample_times is not None:
            times[p.id] = np.asarray(sample_times, dtype=float)
        else:
            prof = profiles.get(p.id, PathFlowProfile())
            times[p.id] = np.array([t for t in grid if prof.rate(t) > 0])
    jobs = [(network, dict(profiles), config, times)]
    for s in sizes:
        perturbed = dict(profiles)
        perturbed[path] = bump(profiles.get(path, PathFlowProfile()), bump_start, bump_width, s)
        jobs.append((network, perturbed, config, times))
    jobs.append((network, dict(profiles), _refined(network, config), times))
    if max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            outs = list(pool.map(_delays, jobs))
    else:
        outs = [_delays(j) for j in jobs]
    base = outs[0]
    rows, used, excluded = [], 0, 0
    for s, o in zip(sizes, outs[1:-1]):
        dev, u, e = _deviation(base, o)
        rows.append(ProbeRow(s, dev))
        used, excluded = used + u, excluded + e
    floor = _deviation(base, outs[-1])[0]
    return ContinuityProbeReport(tuple(rows), floor, threshold_factor * floor,
                                 noise_tolerance, used, excluded)


def _refined(network: Network, config: SimulationConfig) -> SimulationConfig:
    # resolve the cell counts of the base run so the control run doubles them exactly
    counts = {lid: config.cells_for(link) * 2 for lid, link in network.links.items()}
    return SimulationConfig(config.dt / 2, config.horizon, counts, config.cfl,
                            False, config.allow_nonempty_start, config.initial)


# -- ill-posedness -------------------------------------------------------------------------


@dataclass(frozen=True)
class IllPosednessRow:
    epsilon: object
    rho2: object
    rho3: object
    f1_out: object
    f2_in: object
    f3_in: object


@dataclass(frozen=True)
class IllPosednessReport:
    rho1: object
    capacity: object
    rows: tuple[IllPosednessRow, ...]
    gap: object

    @property
    def conserved(self) -> bool:
        return all(r.f1_out == r.f2_in + r.f3_in for r in self.rows)


def replicate_illposedness(fd: FundamentalDiagram, rho1, eps_list) -> IllPosednessReport:
    """Diverge data parameterised by ``eps`` that is stationary for ``eps > 0``
    but releases capacity flow at ``eps = 0``.

    Link 1 holds ``rho1`` (congested), link 2 the congested density carrying
    ``eps * f(rho1)`` and link 3 the free-flow density carrying
    ``(1 - eps) * f(rho1)``; the turning ratios equal the path shares
    ``(eps, 1 - eps)``. With ``Fraction`` inputs every value is exact.
    """
    if not (fd.critical_density < rho1 < fd.jam_density):
        raise DomainError("rho1 must lie strictly on the congested branch")
    q1 = fd.flow(rho1)
    rows = []
    for eps in eps_list:
        if not (0 <= eps < 1):
            raise DomainError(f"epsilon must lie in [0, 1), got {eps}")
        rho2 = fd.inverse_congested(eps * q1)
        rho3 = fd.inverse_free((1 - eps) * q1)
        f1, f2, f3 = solve_diverge(fd.demand(rho1), fd.supply(rho2), fd.supply(rho3), eps, 1 - eps)
        rows.append(IllPosednessRow(eps, rho2, rho3, f1, f2, f3))
    positive = [r for r in rows if r.epsilon > 0]
    zero = [r for r in rows if r.epsilon == 0]
    gap = None
    if positive and zero:
        gap = zero[0].f1_out - min(positive, key=lambda r: r.epsilon).f1_out
    return IllPosednessReport(rho1, fd.capacity, tuple(rows), gap)


# -- path shares -------------------------------------------------------------------------------


@dataclass(frozen=True)
class PdvReport:
    total_variation: dict[str, dict[str, float]]
    min_nonzero_share: float
    eps_prime: float

    @property
    def flagged(self) -> bool:
        return self.min_nonzero_share < self.eps_prime


def pdv_tv_monitor(result: RunResult, eps_prime: float, zero_tol: float = 1e-12) -> PdvReport:
    """Time total variation of each path share at every link exit, and the
    smallest nonzero share seen (flagged when below ``eps_prime``).

    Samples where the exit cell is empty carry no share and are skipped.
    """
    tv: dict[str, dict[str, float]] = {}
    smallest = math.inf
    for lid in result.link_ids:
        occupied = result.rho_exit[lid] > zero_tol
        mu = result.mu_exit[lid][occupied]
        tv[lid] = {p: float(np.abs(np.diff(mu[:, i])).sum()) if len(mu) > 1 else 0.0
                   for i, p in enumerate(result.mu_exit_paths[lid])}
        nz = mu[mu > zero_tol]
        if nz.size:
            smallest = min(smallest, float(nz.min()))
    return PdvReport(tv, smallest, eps_prime)


# -- fixtures ------------------------------------------------------------------------------------


def two_path_diverge_fixture(dt: float = 0.5, congested_supply: float = 0.2, rate: float = 0.45,
                             demand_end: float = 60.0, horizon: float = 200.0):
    """One origin, a diverge, and a short branch whose destination accepts only
    ``congested_supply``; its queue spills back through the diverge onto the
    shared link. Supplies stay at or above ``congested_supply``."""
    fd = FundamentalDiagram.triangular(1.0, 0.5, 3.0)
    net = Network()
    for lid, length in (("a", 10.0), ("b", 10.0), ("c", 4.0)):
        net.links[lid] = Link(lid, length, fd)
    net.junctions.append(Junction("J", ("a",), ("b", "c")))
    attach_origin(net, "o", "a", length=2.0)
    attach_destination(net, "free", "b", length=2.0)
    attach_destination(net, "tight", "c", supply=congested_supply, length=2.0)
    net.paths = enumerate_paths(net)
    profiles = {p.id: PathFlowProfile.constant(rate, 0.0, demand_end) for p in net.paths}
    return net, profiles, SimulationConfig(dt=dt, horizon=horizon)


def random_network(rng: np.random.Generator, max_junctions: int = 10, max_cells: int = 1000,
                   dt: float = 1.0, horizon_windows: float = 20.0):
    """Random acyclic merge/diverge network with random piecewise-constant demand.

    Every link has free-flow speed 1 and a whole number of cells of width
    ``dt``. Returns ``(network, profiles, config)``; the horizon is
    ``horizon_windows * L / lambda``.
    """
    while True:
        net = Network()
        counter = iter(range(10_000))

        def new_link():
            lid = f"l{next(counter)}"
            fd = FundamentalDiagram.triangular(1.0, float(rng.uniform(0.3, 1.0)),
                                               float(rng.uniform(2.0, 4.0)))
            net.links[lid] = Link(lid, float(rng.integers(2, 9)) * dt, fd)
            return lid

        n_origins = int(rng.integers(1, 4))
        heads = [new_link() for _ in range(n_origins)]
        open_ends = list(heads)
        n_junctions = int(rng.integers(1, max_junctions + 1))
        made = 0
        while made < n_junctions:
            if len(open_ends) >= 2 and rng.random() < 0.5:
                i, j = rng.choice(len(open_ends), 2, replace=False)
                a, b = open_ends[i], open_ends[j]
                c = new_link()
                net.junctions.append(Junction(f"J{made}", (a, b), (c,),
                                              float(rng.uniform(0.1, 0.9))))
                open_ends = [e for e in open_ends if e not in (a, b)] + [c]
            else:
                a = open_ends.pop(int(rng.integers(len(open_ends))))
                b, c = new_link(), new_link()
                net.junctions.append(Junction(f"J{made}", (a,), (b, c)))
                open_ends += [b, c]
            made += 1
        for k, h in enumerate(heads):
            attach_origin(net, f"o{k}", h)
        for k, e in enumerate(open_ends):
            cap = net.links[e].fd.capacity
            supply = math.inf if rng.random() < 0.4 else float(rng.uniform(0.2, 1.0) * cap)
            attach_destination(net, f"d{k}", e, supply=supply)
        net.paths = enumerate_paths(net)
        cells = sum(int(round(l.length / dt)) for l in net.links.values())
        if cells <= max_cells and net.paths:
            break
    consts = network_constants(net)
    horizon = math.floor(horizon_windows * consts.window / dt) * dt
    profiles = {}
    for p in net.paths:
        n_pieces = int(rng.integers(1, 4))
        cuts = np.sort(rng.uniform(0.0, 0.6 * horizon, n_pieces))
        cuts[0] = 0.0
        rates = rng.uniform(0.0, 1.2, n_pieces)
        bps = [(float(t), float(r)) for t, r in zip(cuts, rates)]
        bps.append((float(0.6 * horizon), 0.0))
        bps = [bp for k, bp in enumerate(bps) if k == 0 or bp[0] > bps[k - 1][0]]
        profiles[p.id] = PathFlowProfile(tuple(bps))
    return net, profiles, SimulationConfig(dt=dt, horizon=horizon)


# -- Godunov against wave-front tracking -------------------------------------------------------

RIEMANN_FIXTURES = {
    "shock": ((0.1, 0.6), (0.5,)),
    "fan": ((0.8, 0.2), (0.5,)),
    "shock-fan": ((0.1, 0.7, 0.2), (0.4, 0.55)),
    "fan-shock": ((0.9, 0.3, 0.8), (0.4, 0.6)),
    "transonic": ((0.9, 0.1), (0.5,)),
}


@dataclass(frozen=True)
class ConvergenceReport:
    fixture: str
    cells: tuple[int, ...]
    errors: tuple[float, ...]
    order: float


def convergence_study(fixture: str, levels: int = 4, base_cells: int = 100, segments: int = 1000,
                      length: float = 1.0, cfl: float = 1.0) -> ConvergenceReport:
    """L1 error of the Godunov link kernel against the exact front-tracking
    solution at ``t = length / (2 v_f)`` on a ladder of doubling resolutions.

    The flux is a Greenshields parabola (``v_f = 1``, ``rho_jam = 1``)
    interpolated with ``segments`` pieces, used by both solvers. The order is the
    least-squares slope of ``log error`` against ``log cells``.
    """
    from .simulator import godunov_line
    from .wavefront import Scenario, wft_run

    if fixture not in RIEMANN_FIXTURES:
        raise ValueError(f"unknown fixture {fixture!r}; choose from {sorted(RIEMANN_FIXTURES)}")
    if levels < 2:
        raise ValueError("need at least two refinement levels")
    states, jumps = RIEMANN_FIXTURES[fixture]
    smooth = FundamentalDiagram.greenshields(1.0, 1.0)
    fd = smooth.to_piecewise_linear(segments)
    # nominal speed of the parabola; the interpolant's first slope is slightly lower
    t_end = 0.5 * length / smooth.free_flow_speed
    exact = wft_run(Scenario.line(fd, states, tuple(j * length for j in jumps)), t_end)
    cells, errors = [], []
    for lvl in range(levels):
        n = base_cells * 2 ** lvl
        dx = length / n
        steps = int(math.ceil(t_end * fd.max_wave_speed / (cfl * dx) - 1e-9))
        dt = t_end / steps
        pad = steps + 1
        edges = np.arange(-pad, n + pad + 1) * dx
        rho = godunov_line(fd, exact.cell_averages(0.0, edges), dx, dt, steps)
        cells.append(n)
        errors.append(exact.l1_to_cells(t_end, edges[pad:pad + n + 1], rho[pad:pad + n]))
    order = -float(np.polyfit(np.log(cells), np.log(errors), 1)[0])
    return ConvergenceReport(fixture, tuple(cells), tuple(errors), order)
