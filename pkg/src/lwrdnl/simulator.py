"""Godunov time stepping of the network loading system.

Densities are advanced with demand/supply interface fluxes. Each path is a
separate conserved commodity (``rho_p``), so path shares ``mu = rho_p / rho``
and the total ``rho = sum_p rho_p`` stay consistent by construction. Origins
hold FIFO point queues; cumulative curves are recorded at both ends of every
link and inverted to obtain exit times and path travel times.
"""

from __future__ import annotations

import bisect
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .fundamental_diagram import FundamentalDiagram
from .junctions import solve_diverge, solve_merge
from .network import DIVERGE, MERGE, SERIES, Junction, Network, check

DENSITY_TOL = 1e-12


class ConfigurationError(ValueError):
    pass


class NumericalFault(RuntimeError):
    pass


# -- inputs -----------------------------------------------------------------


@dataclass(frozen=True)
class PathFlowProfile:
    """Piecewise-constant departure rate: ``rate`` holds from each start time on.

    Before the first breakpoint the rate is zero.
    """

    breakpoints: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        bps = tuple((float(t), float(r)) for t, r in self.breakpoints)
        if any(r < 0 for _, r in bps):
            raise ValueError("departure rates must be nonnegative")
        if any(b[0] <= a[0] for a, b in zip(bps, bps[1:])):
            raise ValueError("breakpoint times must be strictly increasing")
        object.__setattr__(self, "breakpoints", bps)

    @classmethod
    def constant(cls, rate: float, start: float = 0.0, end: float | None = None):
        bps = [(start, rate)]
        if end is not None:
            bps.append((end, 0.0))
        return cls(tuple(bps))

    def rate(self, t: float) -> float:
        i = bisect.bisect_right([b[0] for b in self.breakpoints], t) - 1
        return self.breakpoints[i][1] if i >= 0 else 0.0

    def cumulative(self, t) -> np.ndarray:
        """Vehicles departed on ``[0, t]`` (vectorised in ``t``)."""
        t = np.asarray(t, dtype=float)
        total = np.zeros_like(t)
        for i, (start, r) in enumerate(self.breakpoints):
            end = self.breakpoints[i + 1][0] if i + 1 < len(self.breakpoints) else math.inf
            lo = max(start, 0.0)
            total += r * np.clip(np.minimum(t, end) - lo, 0.0, None)
        return total

    def step_rates(self, dt: float, n_steps: int) -> np.ndarray:
        """Average rate over each step ``[k dt, (k+1) dt]``."""
        edges = self.cumulative(np.arange(n_steps + 1) * dt)
        return np.diff(edges) / dt

    def total_variation(self) -> float:
        rates = [0.0] + [r for _, r in self.breakpoints]
        return float(sum(abs(b - a) for a, b in zip(rates, rates[1:])))

    def within_bounds(self, eps: float, upper: float) -> bool:
        """Rates lie in ``{0} U [eps, upper]`` (the bounded-away-from-zero condition)."""
        return all(r == 0 or eps <= r <= upper for _, r in self.breakpoints)

    def __add__(self, other: "PathFlowProfile") -> "PathFlowProfile":
        times = sorted({t for t, _ in self.breakpoints} | {t for t, _ in other.breakpoints})
        return PathFlowProfile(tuple((t, self.rate(t) + other.rate(t)) for t in times))


@dataclass(frozen=True)
class LinkInitial:
    """Uniform initial density on a link, split over paths by ``shares``."""

    density: float
    shares: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class SimulationConfig:
    dt: float
    horizon: float
    cells_per_link: int | Mapping[str, int] | None = None
    cfl: float = 1.0
    record_densities: bool = False
    allow_nonempty_start: bool = False
    initial: Mapping[str, LinkInitial] | None = None

    def __post_init__(self):
        if not self.dt > 0 or not self.horizon > 0:
            raise ConfigurationError("dt and horizon must be positive")
        if not (0 < self.cfl <= 1):
            raise ConfigurationError("CFL factor must lie in (0, 1]")
        if self.initial and not self.allow_nonempty_start:
            raise ConfigurationError("non-empty initial data requires allow_nonempty_start=True")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.horizon / self.dt - 1e-9))

    def cells_for(self, link) -> int:
        cpl = self.cells_per_link
        if isinstance(cpl, Mapping) and link.id in cpl:
            return int(cpl[link.id])
        if link.cell_count is not None:
            return int(link.cell_count)
        if isinstance(cpl, int):
            return cpl
        return max(1, int(math.floor(self.cfl * link.length / (link.fd.max_wave_speed * self.dt) + 1e-9)))

    def refined(self, factor: int = 2) -> "SimulationConfig":
        """Same run with ``dt`` divided and every link's cell count multiplied by ``factor``."""
        base = {}
        # cell counts are resolved lazily, so only explicit settings are scaled here
        cpl = self.cells_per_link
        if isinstance(cpl, Mapping):
            base = {k: v * factor for k, v in cpl.items()}
        elif isinstance(cpl, int):
            base = cpl * factor
        else:
            base = None
        return SimulationConfig(self.dt / factor, self.horizon, base, self.cfl,
                                self.record_densities, self.allow_nonempty_start, self.initial)


# -- origin queue ---------------------------------------------------------------


@dataclass
class OriginState:
    """Point queue with FIFO composition, plus cumulative entry/exit counts."""

    batches: deque = field(default_factory=deque)
    entered: float = 0.0
    exited: float = 0.0

    @property
    def queue(self) -> float:
        return float(sum(b.sum() for b in self.batches))

    def copy(self) -> "OriginState":
        return OriginState(deque(b.copy() for b in self.batches), self.entered, self.exited)


def origin_update(state: OriginState, rates, supply: float, dt: float):
    """Advance an origin queue by one step.

    ``rates`` are the per-path departure rates over the step and ``supply``
    the receiving capacity of the origin's virtual link. Returns the new state
    and the per-path discharge rates. The discharge is ``min(S, q/dt + sum h)``,
    i.e. ``S`` while a queue persists through the step, else everything.
    """
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    if np.any(rates < 0) or supply < 0:
        raise ValueError("rates and supply must be nonnegative")
    new = state.copy()
    total = float(rates.sum())
    if total > 0:
        arriving = rates * dt
        last = new.batches[-1] if new.batches else None
        if last is not None and np.array_equal(last / last.sum(), arriving / arriving.sum()):
            new.batches[-1] = last + arriving
        else:
            new.batches.append(arriving)
        new.entered += total * dt
    want = min(supply * dt, state.queue + total * dt)
    out = np.zeros_like(rates)
    remaining = want
    while remaining > 0 and new.batches:
        head = new.batches[0]
        vol = head.sum()
        if vol <= remaining * (1 + 1e-12):
            out += head
            remaining -= vol
            new.batches.popleft()
        else:
            part = head * (remaining / vol)
            out += part
            new.batches[0] = head - part
            remaining = 0.0
    new.exited += float(out.sum())
    return new, out / dt


# -- state ------------------------------------------------------------------------


@dataclass
class SimulationState:
    t: float
    step: int
    rho_p: np.ndarray
    origins: dict[str, OriginState]
    alpha: dict[str, dict[str, float]]

    @property
    def rho(self) -> np.ndarray:
        return self.rho_p.sum(axis=0)


@dataclass
class StepRecord:
    """Fluxes of one step (rates, per link or junction)."""

    link_inflow: np.ndarray
    link_outflow: np.ndarray
    junction_fluxes: dict[str, tuple]
    junction_imbalance: float
    commodity_gap: float


@dataclass
class RunResult:
    network: Network
    config: SimulationConfig
    times: np.ndarray
    link_ids: list[str]
    path_ids: list[str]
    cell_link: np.ndarray
    cell_local: np.ndarray
    cum_in: dict[str, np.ndarray]
    cum_out: dict[str, np.ndarray]
    origin_entered: dict[str, np.ndarray]
    origin_exited: dict[str, np.ndarray]
    queue: dict[str, np.ndarray]
    min_supply: np.ndarray
    min_supply_cell: np.ndarray
    link_min_supply: dict[str, np.ndarray]
    mu_exit: dict[str, np.ndarray]
    mu_exit_paths: dict[str, list[str]]
    rho_exit: dict[str, np.ndarray]
    junction_fluxes: dict[str, np.ndarray]
    mass_error: np.ndarray
    junction_imbalance: np.ndarray
    commodity_gap: np.ndarray
    densities: np.ndarray | None
    final_state: SimulationState
    nonempty_start: bool = False

    @property
    def dt(self) -> float:
        return self.config.dt

    def link_exit_time(self, link_id: str, t) -> np.ndarray:
        link = self.network.links[link_id]
        return exit_times(self.cum_in[link_id], self.cum_out[link_id], self.dt, t,
                          min_traversal=link.length / link.fd.free_flow_speed)

    def queue_exit_time(self, origin_id: str, t) -> np.ndarray:
        return exit_times(self.origin_entered[origin_id], self.origin_exited[origin_id],
                          self.dt, t, min_traversal=0.0)

    def path_delay(self, path_id: str, t):
        """Arrival time and travel time for departures at ``t`` (vectorised).

        The origin queue exit time is applied first, then link exit times in
        path order. ``inf`` marks arrivals beyond the horizon.
        """
        path = next(p for p in self.network.paths if p.id == path_id)
        t = np.asarray(t, dtype=float)
        arrival = self.queue_exit_time(path.origin, t)
        for lid in path.links:
            arrival = self.link_exit_time(lid, arrival)
        return arrival, arrival - t

    def delay_table(self, departure_times=None) -> "DelayTable":
        if departure_times is None:
            departure_times = self.times
        dep = np.asarray(departure_times, dtype=float)
        rows = {}
        for pid in self.path_ids:
            arr, tt = self.path_delay(pid, dep)
            rows[pid] = (arr, tt)
        return DelayTable(dep, rows)

    def free_flow_time(self, path_id: str) -> float:
        path = next(p for p in self.network.paths if p.id == path_id)
        return sum(self.network.links[l].length / self.network.links[l].fd.free_flow_speed
                   for l in path.links)


@dataclass
class DelayTable:
    departure: np.ndarray
    rows: dict[str, tuple[np.ndarray, np.ndarray]]

    def arrival(self, path_id: str) -> np.ndarray:
        return self.rows[path_id][0]

    def travel_time(self, path_id: str) -> np.ndarray:
        return self.rows[path_id][1]

    def beyond_horizon(self, path_id: str) -> np.ndarray:
        return ~np.isfinite(self.rows[path_id][0])


# -- exit-time inversion -----------------------------------------------------------


def exit_times(entry_cum, exit_cum, dt: float, t, min_traversal: float = 0.0) -> np.ndarray:
    """Invert cumulative curves sampled every ``dt``: the time the vehicle
    counted at ``entry_cum(t)`` passes the exit.

    While vehicles are entering at ``t`` the vehicle is the next one to exit
    after count ``entry_cum(t)``. When nothing is entering, a test vehicle
    leaves after everyone ahead of it and no sooner than ``t + min_traversal``.
    ``inf`` is returned when the exit count is not reached within the record.
    """
    entry = np.asarray(entry_cum, dtype=float)
    exit_ = np.asarray(exit_cum, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    k_max = len(entry) - 1
    out = np.full(t.shape, np.inf)
    ok = np.isfinite(t) & (t <= k_max * dt * (1 + 1e-12))
    tt = np.clip(t[ok], 0.0, k_max * dt)
    k = np.minimum(np.floor(tt / dt + 1e-9).astype(int), k_max - 1)
    frac = np.clip(tt / dt - k, 0.0, 1.0)
    y = entry[k] + frac * (entry[k + 1] - entry[k])
    flowing = entry[k + 1] > entry[k]
    flowing &= ~((frac >= 1.0) & (k == k_max - 1))
    tol = 1e-10 * max(1.0, float(entry[-1]))

    def interp(idx, level):
        idx = np.asarray(idx)
        res = np.full(level.shape, np.inf)
        inside = idx <= k_max
        lo = np.clip(idx - 1, 0, k_max)
        hi = np.clip(idx, 0, k_max)
        e0, e1 = exit_[lo], exit_[hi]
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(e1 > e0, (level - e0) / (e1 - e0), 0.0)
        res[inside] = (lo[inside] + np.clip(w[inside], 0.0, 1.0)) * dt
        res[inside & (idx == 0)] = 0.0
        return res

    gt = interp(np.searchsorted(exit_, y, side="right"), y)
    level = np.maximum(y - tol, 0.0)
    ge = interp(np.searchsorted(exit_, level, side="left"), level)
    ge = np.maximum(ge, tt + min_traversal)
    res = np.where(flowing, gt, ge)
    res[res > k_max * dt * (1 + 1e-12)] = np.inf
    out[ok] = res
    return out


# -- simulator -----------------------------------------------------------------------


class Simulator:
    """Holds the cell layout for a network and advances states in time."""

    def __init__(self, network: Network, profiles: Mapping[str, PathFlowProfile],
                 config: SimulationConfig):
        check(network)
        self.net = network
        self.config = config
        unknown = set(profiles) - {p.id for p in network.paths}
        if unknown:
            raise ConfigurationError(f"demand for unknown path(s): {sorted(unknown)}")
        self.profiles = dict(profiles)
        dt = config.dt

        self.link_ids = list(network.links)
        self.path_ids = [p.id for p in network.paths]
        self.path_index = {pid: i for i, pid in enumerate(self.path_ids)}
        n_paths = len(self.path_ids)

        first, last, dx, cell_link, cell_local = {}, {}, [], [], []
        offset = 0
        for li, lid in enumerate(self.link_ids):
            link = network.links[lid]
            n = config.cells_for(link)
            if n < 1:
                raise ConfigurationError(f"link {lid}: needs at least one cell")
            width = link.length / n
            if dt * link.fd.max_wave_speed > config.cfl * width * (1 + 1e-9):
                raise ConfigurationError(
                    f"CFL violated on link {lid}: dt*{link.fd.max_wave_speed} > "
                    f"{config.cfl}*{width}")
            first[lid], last[lid] = offset, offset + n - 1
            dx.extend([width] * n)
            cell_link.extend([li] * n)
            cell_local.extend(range(n))
            offset += n
        self.n_cells = offset
        self.first, self.last = first, last
        self.dx = np.array(dx)
        self.cell_link = np.array(cell_link)
        self.cell_local = np.array(cell_local)

        left, right = [], []
        for lid in self.link_ids:
            for c in range(first[lid], last[lid]):
                left.append(c)
                right.append(c + 1)
        self.left = np.array(left, dtype=int)
        self.right = np.array(right, dtype=int)

        groups: dict[FundamentalDiagram, list[int]] = {}
        for lid in self.link_ids:
            groups.setdefault(network.links[lid].fd, []).extend(range(first[lid], last[lid] + 1))
        self.fd_groups = [(fd, np.array(cells)) for fd, cells in groups.items()]
        self.jam = np.zeros(self.n_cells)
        for fd, cells in self.fd_groups:
            self.jam[cells] = float(fd.jam_density)

        # paths on each link and the branch each path takes at a junction
        self.on_link = {lid: np.zeros(n_paths, dtype=bool) for lid in self.link_ids}
        self.next_of: dict[tuple[int, str], str | None] = {}
        for p in network.paths:
            pi = self.path_index[p.id]
            for a, b in zip(p.links, list(p.links[1:]) + [None]):
                self.on_link[a][pi] = True
                self.next_of[(pi, a)] = b
        self.branch_mask = {}
        for j in network.junctions:
            if j.kind == DIVERGE:
                (a,) = j.incoming
                for b in j.outgoing:
                    self.branch_mask[(j.id, b)] = np.array(
                        [self.next_of.get((pi, a)) == b for pi in range(n_paths)])
        self.origin_paths = {
            o.id: np.array([p.origin == o.id for p in network.paths]) for o in network.origins}
        self.n_steps = config.n_steps
        self.rates = np.zeros((n_paths, self.n_steps))
        for pid, prof in self.profiles.items():
            self.rates[self.path_index[pid]] = prof.step_rates(dt, self.n_steps)

    # -- helpers ------------------------------------------------------------------

    def demand(self, rho: np.ndarray) -> np.ndarray:
        out = np.empty_like(rho)
        for fd, cells in self.fd_groups:
            out[cells] = fd.demand_array(rho[cells])
        return out

    def supply(self, rho: np.ndarray) -> np.ndarray:
        out = np.empty_like(rho)
        for fd, cells in self.fd_groups:
            out[cells] = fd.supply_array(rho[cells])
        return out

    @staticmethod
    def shares(rho_p: np.ndarray, rho: np.ndarray) -> np.ndarray:
        mu = np.zeros_like(rho_p)
        np.divide(rho_p, rho, out=mu, where=rho > 0)
        return mu

    def initial_state(self) -> SimulationState:
        rho_p = np.zeros((len(self.path_ids), self.n_cells))
        for lid, init in (self.config.initial or {}).items():
            if lid not in self.first:
                raise ConfigurationError(f"initial data for unknown link {lid!r}")
            fd = self.net.links[lid].fd
            if not (0 <= init.density <= fd.jam_density):
                raise ConfigurationError(f"initial density on {lid} outside [0, jam]")
            cells = slice(self.first[lid], self.last[lid] + 1)
            shares = dict(init.shares)
            if init.density > 0 and not shares:
                raise ConfigurationError(f"initial data on {lid} needs path shares")
            for pid, share in shares.items():
                pi = self.path_index[pid]
                if not self.on_link[lid][pi]:
                    raise ConfigurationError(f"path {pid} does not use link {lid}")
                rho_p[pi, cells] = init.density * share
        alpha = {}
        for j in self.net.junctions:
            if j.kind == DIVERGE:
                alpha[j.id] = {b: 1.0 / len(j.outgoing) for b in j.outgoing}
        state = SimulationState(0.0, 0, rho_p, {o.id: OriginState() for o in self.net.origins}, alpha)
        for j in self.net.junctions:
            if j.kind == DIVERGE:
                state.alpha[j.id] = self.turning_ratios(state, j)
        return state

    def turning_ratios(self, state: SimulationState, junction: Junction) -> dict[str, float]:
        """Share of the incoming link's exit flow bound for each outgoing link.

        Computed from path shares in the incoming link's last cell; when that
        cell is empty the previous ratios are kept.
        """
        if junction.kind != DIVERGE:
            return {b: 1.0 for b in junction.outgoing}
        (a,) = junction.incoming
        c = self.last[a]
        col = state.rho_p[:, c]
        rho = col.sum()
        if rho <= 0:
            return dict(state.alpha[junction.id])
        mu = col / rho
        return {b: float(mu[self.branch_mask[(junction.id, b)]].sum()) for b in junction.outgoing}

    # -- one step --------------------------------------------------------------------

    def step(self, state: SimulationState) -> tuple[SimulationState, StepRecord]:
        dt = self.config.dt
        k = state.step
        if k >= self.n_steps:
            raise ConfigurationError("horizon already reached")
        rho_p = state.rho_p
        rho = rho_p.sum(axis=0)
        mu = self.shares(rho_p, rho)
        D = self.demand(rho)
        S = self.supply(rho)

        inn = np.zeros_like(rho_p)
        out = np.zeros_like(rho_p)
        tot_in = np.zeros(self.n_cells)
        tot_out = np.zeros(self.n_cells)

        F = godunov_flux(D[self.left], S[self.right])
        Fp = F * mu[:, self.left]
        out[:, self.left] += Fp
        inn[:, self.right] += Fp
        tot_out[self.left] += F
        tot_in[self.right] += F

        origins = {}
        for o in self.net.origins:
            c = self.first[o.link]
            mask = self.origin_paths[o.id]
            new_o, discharge = origin_update(state.origins[o.id], self.rates[mask, k], S[c], dt)
            origins[o.id] = new_o
            inn[mask, c] += discharge
            tot_in[c] += discharge.sum()

        alpha = {jid: dict(a) for jid, a in state.alpha.items()}
        jfl: dict[str, tuple] = {}
        imbalance = 0.0
        for j in self.net.junctions:
            if j.kind == SERIES:
                (a,), (b,) = j.incoming, j.outgoing
                ca, cb = self.last[a], self.first[b]
                q = min(D[ca], S[cb])
                pf = q * mu[:, ca]
                out[:, ca] += pf
                inn[:, cb] += pf
                tot_out[ca] += q
                tot_in[cb] += q
                jfl[j.id] = (q, q)
                imbalance = max(imbalance, abs(pf.sum() - q))
            elif j.kind == DIVERGE:
                (a,), (b, c2) = j.incoming, j.outgoing
                ca, cb, cc = self.last[a], self.first[b], self.first[c2]
                ratios = self.turning_ratios(state, j)
                alpha[j.id] = ratios
                f1, f2, f3 = solve_diverge(D[ca], S[cb], S[cc], ratios[b], ratios[c2])
                pf = f1 * mu[:, ca]
                mb = self.branch_mask[(j.id, b)]
                mc = self.branch_mask[(j.id, c2)]
                out[:, ca] += pf
                inn[mb, cb] += pf[mb]
                inn[mc, cc] += pf[mc]
                tot_out[ca] += f1
                tot_in[cb] += f2
                tot_in[cc] += f3
                jfl[j.id] = (f1, f2, f3)
                imbalance = max(imbalance, abs(f1 - f2 - f3),
                                abs(pf.sum() - pf[mb].sum() - pf[mc].sum()))
            elif j.kind == MERGE:
                (a, b), (c2,) = j.incoming, j.outgoing
                ca, cb, cc = self.last[a], self.last[b], self.first[c2]
                f4, f5 = solve_merge(D[ca], D[cb], S[cc], j.priority)
                pa, pb = f4 * mu[:, ca], f5 * mu[:, cb]
                out[:, ca] += pa
                out[:, cb] += pb
                inn[:, cc] += pa + pb
                tot_out[ca] += f4
                tot_out[cb] += f5
                tot_in[cc] += f4 + f5
                jfl[j.id] = (f4, f5, f4 + f5)
                imbalance = max(imbalance, abs(pa.sum() + pb.sum() - (pa + pb).sum()))

        for d in self.net.destinations:
            c = self.last[d.link]
            q = min(D[c], d.supply)
            out[:, c] += q * mu[:, c]
            tot_out[c] += q

        coef = dt / self.dx
        new_rho_p = rho_p + coef * (inn - out)
        shadow = rho + coef * (tot_in - tot_out)
        self._check(new_rho_p, k)
        np.maximum(new_rho_p, 0.0, out=new_rho_p)
        gap = float(np.max(np.abs(new_rho_p.sum(axis=0) - shadow), initial=0.0))

        rec = StepRecord(
            link_inflow=np.array([inn[:, self.first[l]].sum() for l in self.link_ids]),
            link_outflow=np.array([out[:, self.last[l]].sum() for l in self.link_ids]),
            junction_fluxes=jfl,
            junction_imbalance=imbalance,
            commodity_gap=gap,
        )
        new = SimulationState(state.t + dt, k + 1, new_rho_p, origins, alpha)
        return new, rec

    def _check(self, rho_p: np.ndarray, k: int):
        if not np.all(np.isfinite(rho_p)):
            bad = np.argwhere(~np.isfinite(rho_p))[0]
            raise NumericalFault(f"non-finite density at step {k}, path {bad[0]}, {self._where(bad[1])}")
        if np.any(rho_p < -DENSITY_TOL):
            bad = np.argwhere(rho_p < -DENSITY_TOL)[0]
            raise NumericalFault(f"negative density {rho_p[tuple(bad)]} at step {k}, {self._where(bad[1])}")
        rho = rho_p.sum(axis=0)
        over = rho > self.jam * (1 + 1e-9) + DENSITY_TOL
        if np.any(over):
            c = int(np.argmax(over))
            raise NumericalFault(f"density {rho[c]} above jam at step {k}, {self._where(c)}")

    def _where(self, cell: int) -> str:
        return f"link {self.link_ids[self.cell_link[cell]]} cell {self.cell_local[cell]}"

    # -- full run ----------------------------------------------------------------------

    def run(self, state: SimulationState | None = None) -> RunResult:
        cfg = self.config
        dt = cfg.dt
        K = self.n_steps
        state = state or self.initial_state()
        L = len(self.link_ids)
        cum_in = np.zeros((K + 1, L))
        cum_out = np.zeros((K + 1, L))
        o_ids = [o.id for o in self.net.origins]
        o_in = np.zeros((K + 1, len(o_ids)))
        o_out = np.zeros((K + 1, len(o_ids)))
        queue = np.zeros((K + 1, len(o_ids)))
        min_s = np.zeros(K + 1)
        min_cell = np.zeros(K + 1, dtype=int)
        link_min = np.zeros((K + 1, L))
        mass_err = np.zeros(K + 1)
        imb = np.zeros(K)
        gap = np.zeros(K)
        dens = np.zeros((K + 1, self.n_cells)) if cfg.record_densities else None
        exit_cells = np.array([self.last[l] for l in self.link_ids])
        mu_tr = {l: np.zeros((K + 1, int(self.on_link[l].sum()))) for l in self.link_ids}
        rho_tr = np.zeros((K + 1, L))
        jf = {j.id: np.zeros((K, 2 if j.kind == SERIES else 3)) for j in self.net.junctions}
        mass0 = float((state.rho * self.dx).sum())
        absorbed = 0.0
        dest_links = [self.link_ids.index(d.link) for d in self.net.destinations]
        starts = np.array([self.first[l] for l in self.link_ids])

        def record(n, st):
            rho = st.rho
            s = self.supply(rho)
            c = int(np.argmin(s))
            min_s[n], min_cell[n] = s[c], c
            link_min[n] = np.minimum.reduceat(s, starts)
            mu = self.shares(st.rho_p[:, exit_cells], rho[exit_cells])
            for li, l in enumerate(self.link_ids):
                mu_tr[l][n] = mu[self.on_link[l], li]
            rho_tr[n] = rho[exit_cells]
            for oi, oid in enumerate(o_ids):
                queue[n, oi] = st.origins[oid].queue
            if dens is not None:
                dens[n] = rho
            departed = float(o_in[n].sum())
            held = float((rho * self.dx).sum()) + float(queue[n].sum()) + absorbed
            mass_err[n] = abs(mass0 + departed - held) / max(1.0, mass0 + departed)

        record(0, state)
        for n in range(K):
            state, rec = self.step(state)
            cum_in[n + 1] = cum_in[n] + dt * rec.link_inflow
            cum_out[n + 1] = cum_out[n] + dt * rec.link_outflow
            absorbed += dt * float(rec.link_outflow[dest_links].sum())
            for oi, oid in enumerate(o_ids):
                o_in[n + 1, oi] = state.origins[oid].entered
                o_out[n + 1, oi] = state.origins[oid].exited
            for jid, fl in rec.junction_fluxes.items():
                jf[jid][n] = fl
            imb[n] = rec.junction_imbalance
            gap[n] = rec.commodity_gap
            record(n + 1, state)

        return RunResult(
            network=self.net,
            config=cfg,
            times=np.arange(K + 1) * dt,
            link_ids=list(self.link_ids),
            path_ids=list(self.path_ids),
            cell_link=self.cell_link,
            cell_local=self.cell_local,
            cum_in={l: cum_in[:, i].copy() for i, l in enumerate(self.link_ids)},
            cum_out={l: cum_out[:, i].copy() for i, l in enumerate(self.link_ids)},
            origin_entered={o: o_in[:, i].copy() for i, o in enumerate(o_ids)},
            origin_exited={o: o_out[:, i].copy() for i, o in enumerate(o_ids)},
            queue={o: queue[:, i].copy() for i, o in enumerate(o_ids)},
            min_supply=min_s,
            min_supply_cell=min_cell,
            link_min_supply={l: link_min[:, i].copy() for i, l in enumerate(self.link_ids)},
            mu_exit=mu_tr,
            mu_exit_paths={l: [p for p, on in zip(self.path_ids, self.on_link[l]) if on]
                           for l in self.link_ids},
            rho_exit={l: rho_tr[:, i].copy() for i, l in enumerate(self.link_ids)},
            junction_fluxes=jf,
            mass_error=mass_err,
            junction_imbalance=imb,
            commodity_gap=gap,
            densities=dens,
            final_state=state,
            nonempty_start=mass0 > 0,
        )


def run(network: Network, profiles: Mapping[str, PathFlowProfile], config: SimulationConfig) -> RunResult:
    return Simulator(network, profiles, config).run()


def godunov_flux(demand_left: np.ndarray, supply_right: np.ndarray) -> np.ndarray:
    """Interface flux of the Godunov scheme for concave fluxes."""
    return np.minimum(demand_left, supply_right)


def godunov_line(fd: FundamentalDiagram, rho0, dx: float, dt: float, n_steps: int) -> np.ndarray:
    """Advance cell averages on an isolated link with zero-gradient ends.

    Callers pad the domain with at least ``n_steps`` cells on each side when
    they need the result free of boundary effects (at Courant number <= 1 the
    boundary is felt by at most one extra cell per step).
    """
    if dt * fd.max_wave_speed > dx * (1 + 1e-9):
        raise ConfigurationError("CFL violated")
    rho = np.array(rho0, dtype=float)
    coef = dt / dx
    for _ in range(n_steps):
        ext = np.concatenate([rho[:1], rho, rho[-1:]])
        F = godunov_flux(fd.demand_array(ext[:-1]), fd.supply_array(ext[1:]))
        rho = rho - coef * np.diff(F)
    return rho


def resample_profiles(profiles: Mapping[str, PathFlowProfile], dt: float, n_steps: int,
                      order: Sequence[str]) -> np.ndarray:
    return np.array([profiles[p].step_rates(dt, n_steps) if p in profiles else np.zeros(n_steps)
                     for p in order])
