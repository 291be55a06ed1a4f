"""Exact wave-front tracking for piecewise-linear fluxes.

Covers a single infinite link and a single junction (series, merge or
diverge) with semi-infinite links: incoming links occupy ``(-inf, 0]`` and
outgoing links ``[0, inf)``. With a piecewise-linear flux and piecewise-constant
data every Riemann problem resolves into finitely many straight fronts, so the
solution is exact up to floating point. Also holds the tangent-vector helpers
(shift norms and the diverge multiplication factors).
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .fundamental_diagram import DomainError, FundamentalDiagram
from .junctions import (diverge_boundary_densities, merge_boundary_densities,
                        series_boundary_densities)
from .network import DIVERGE, MERGE, SERIES

log = logging.getLogger(__name__)

LINE = "line"
INCOMING = "in"
OUTGOING = "out"


class EventCapExceeded(RuntimeError):
    pass


class WaveOrderError(RuntimeError):
    """A junction produced a wave travelling back into the junction."""


@dataclass
class Front:
    link: int
    x0: float
    t0: float
    speed: float
    rho_l: float
    rho_r: float
    t_end: float = math.inf

    def position(self, t: float) -> float:
        return self.x0 + self.speed * (t - self.t0)

    @property
    def jump(self) -> float:
        return self.rho_r - self.rho_l

    def alive_at(self, t: float) -> bool:
        return self.t0 <= t < self.t_end


def solve_riemann_pwa(fd: FundamentalDiagram, rho_l, rho_r, x0=0.0, t0=0.0, link=0) -> list[Front]:
    """Fronts (left to right) solving the Riemann problem for a piecewise-linear flux.

    ``rho_l < rho_r`` gives one shock at the Rankine-Hugoniot speed. ``rho_l > rho_r``
    gives a fan of contacts, one per breakpoint strictly between the states,
    each travelling at the slope of its segment.
    """
    if not fd.is_piecewise_linear:
        raise DomainError("wave-front tracking needs a piecewise-linear diagram")
    for r in (rho_l, rho_r):
        if not (0 <= r <= fd.jam_density):
            raise DomainError(f"density {r} outside [0, {fd.jam_density}]")
    if rho_l == rho_r:
        return []
    if rho_l < rho_r:
        speed = (fd.flow(rho_r) - fd.flow(rho_l)) / (rho_r - rho_l)
        return [Front(link, x0, t0, speed, rho_l, rho_r)]
    inner = [r for r, _ in fd.breakpoints if rho_r < r < rho_l]
    states = [rho_l] + inner[::-1] + [rho_r]
    fronts = []
    for a, b in zip(states, states[1:]):
        speed = (fd.flow(a) - fd.flow(b)) / (a - b)
        fronts.append(Front(link, x0, t0, speed, a, b))
    return fronts


# -- scenarios ------------------------------------------------------------------------


@dataclass(frozen=True)
class LinkData:
    """Piecewise-constant data: ``states[k]`` holds between ``jumps[k-1]`` and ``jumps[k]``."""

    fd: FundamentalDiagram
    states: tuple
    jumps: tuple = ()

    def __post_init__(self):
        if len(self.states) != len(self.jumps) + 1:
            raise ValueError("need exactly one more state than jump positions")
        if any(b <= a for a, b in zip(self.jumps, self.jumps[1:])):
            raise ValueError("jump positions must be strictly increasing")


@dataclass(frozen=True)
class Scenario:
    links: tuple[LinkData, ...]
    junction: str | None = None
    alpha: tuple | None = None
    priority: float | None = None

    @classmethod
    def line(cls, fd, states, jumps=()):
        return cls((LinkData(fd, tuple(states), tuple(jumps)),))

    @classmethod
    def series(cls, upstream: LinkData, downstream: LinkData):
        return cls((upstream, downstream), SERIES)

    @classmethod
    def diverge(cls, incoming: LinkData, out2: LinkData, out3: LinkData, a12):
        return cls((incoming, out2, out3), DIVERGE, alpha=(a12, 1 - a12))

    @classmethod
    def merge(cls, in4: LinkData, in5: LinkData, out6: LinkData, priority):
        return cls((in4, in5, out6), MERGE, priority=priority)

    @property
    def roles(self) -> tuple[str, ...]:
        if self.junction is None:
            return (LINE,)
        if self.junction == SERIES:
            return (INCOMING, OUTGOING)
        if self.junction == DIVERGE:
            return (INCOMING, OUTGOING, OUTGOING)
        if self.junction == MERGE:
            return (INCOMING, INCOMING, OUTGOING)
        raise ValueError(f"unknown junction kind {self.junction!r}")

    def validate(self):
        roles = self.roles
        if len(roles) != len(self.links):
            raise ValueError(f"{self.junction or 'line'} scenario needs {len(roles)} links")
        for role, ld in zip(roles, self.links):
            if role == INCOMING and ld.jumps and ld.jumps[-1] >= 0:
                raise ValueError("incoming-link jumps must lie at x < 0")
            if role == OUTGOING and ld.jumps and ld.jumps[0] <= 0:
                raise ValueError("outgoing-link jumps must lie at x > 0")

    def junction_traces(self, states):
        fds = tuple(ld.fd for ld in self.links)
        if self.junction == DIVERGE:
            return diverge_boundary_densities(fds, *states, *self.alpha)
        if self.junction == MERGE:
            return merge_boundary_densities(fds, *states, self.priority)
        return series_boundary_densities(fds, *states)


@dataclass
class JunctionInteraction:
    """One junction event: data seen at the junction, resulting traces and waves."""

    time: float
    hit_links: tuple[int, ...]
    absorbed: dict[int, list[Front]]
    before: tuple
    traces: tuple
    emitted: dict[int, list[Front]]


@dataclass
class Event:
    time: float
    position: float
    link: int | tuple
    kind: str
    detail: str = ""


@dataclass
class WaveFrontSolution:
    scenario: Scenario
    horizon: float
    fronts: list[Front]
    events: list[Event]
    interactions: list[JunctionInteraction]
    warnings: list[str] = field(default_factory=list)

    def fronts_at(self, t: float, link: int = 0) -> list[Front]:
        alive = [f for f in self.fronts if f.link == link and f.alive_at(t)]
        alive.sort(key=lambda f: (f.position(t), f.speed))
        return alive

    def profile(self, t: float, link: int = 0):
        """``(positions, states)`` with ``len(states) == len(positions) + 1``."""
        if t > self.horizon * (1 + 1e-12):
            raise ValueError("t beyond the computed horizon")
        fronts = self.fronts_at(t, link)
        ld = self.scenario.links[link]
        if self.scenario.roles[link] == OUTGOING:
            states = [f.rho_l for f in fronts] + [ld.states[-1]]
        else:
            states = [ld.states[0]] + [f.rho_r for f in fronts]
        return [f.position(t) for f in fronts], states

    def sample(self, t: float, x: float, link: int = 0):
        pos, states = self.profile(t, link)
        return states[bisect.bisect_right(pos, x)]

    def integral(self, t: float, a: float, b: float, link: int = 0) -> float:
        """Exact integral of the density over ``[a, b]``."""
        pos, states = self.profile(t, link)
        return _pwc_integral(pos, states, a, b)

    def cell_averages(self, t: float, edges, link: int = 0) -> np.ndarray:
        edges = np.asarray(edges, dtype=float)
        pos, states = self.profile(t, link)
        cum = _pwc_antiderivative(pos, states, edges)
        return np.diff(cum) / np.diff(edges)

    def l1_to_cells(self, t: float, edges, values, link: int = 0) -> float:
        """Exact L1 distance to a piecewise-constant field given on cells."""
        edges = np.asarray(edges, dtype=float)
        pos, states = self.profile(t, link)
        total = 0.0
        for k in range(len(edges) - 1):
            a, b = edges[k], edges[k + 1]
            pts = [a] + [p for p in pos if a < p < b] + [b]
            for lo, hi in zip(pts, pts[1:]):
                rho = states[bisect.bisect_right(pos, 0.5 * (lo + hi))]
                total += abs(float(rho) - values[k]) * (hi - lo)
        return total


def _pwc_integral(pos, states, a, b):
    lo, hi = _pwc_antiderivative(pos, states, np.array([a, b], dtype=float))
    return float(hi - lo)


def _pwc_antiderivative(pos, states, xs):
    # integral from an arbitrary reference point; only differences are meaningful
    pos = np.asarray(pos, dtype=float)
    st = np.asarray(states, dtype=float)
    if len(pos) == 0:
        return st[0] * xs
    base = np.concatenate([[0.0], np.cumsum(st[1:-1] * np.diff(pos))]) if len(pos) > 1 else np.array([0.0])
    idx = np.searchsorted(pos, xs, side="right")
    out = np.empty_like(xs, dtype=float)
    left = idx == 0
    out[left] = st[0] * (xs[left] - pos[0])
    k = idx[~left] - 1
    out[~left] = base[k] + st[k + 1] * (xs[~left] - pos[k])
    return out


def l1_distance(sol_a: WaveFrontSolution, sol_b: WaveFrontSolution, t: float, link: int = 0,
                bounds: tuple | None = None) -> float:
    """Exact L1 distance between two solutions on one link at time ``t``.

    Without ``bounds`` the integral runs over the whole link; it is infinite if
    the far-field states differ.
    """
    pa, sa = sol_a.profile(t, link)
    pb, sb = sol_b.profile(t, link)
    pts = sorted(set(pa) | set(pb))
    if bounds is None:
        if not pts:
            return 0.0 if sa[0] == sb[0] else math.inf
        if sa[0] != sb[0] or sa[-1] != sb[-1]:
            return math.inf
        lo, hi = pts[0], pts[-1]
    else:
        lo, hi = bounds
    pts = [lo] + [p for p in pts if lo < p < hi] + [hi]
    total = 0.0
    for a, b in zip(pts, pts[1:]):
        m = 0.5 * (a + b)
        ra = sa[bisect.bisect_right(pa, m)]
        rb = sb[bisect.bisect_right(pb, m)]
        total += abs(float(ra) - float(rb)) * (b - a)
    return total


# -- event loop -------------------------------------------------------------------------


def wft_run(scenario: Scenario, horizon: float, max_events: int = 100_000) -> WaveFrontSolution:
    """Track all fronts up to ``horizon``, logging every interaction."""
    scenario.validate()
    roles = scenario.roles
    n_links = len(scenario.links)
    scale = max([1.0] + [abs(x) for ld in scenario.links for x in ld.jumps])
    tol_x = 1e-9 * scale
    all_fronts: list[Front] = []
    alive: list[list[Front]] = [[] for _ in range(n_links)]
    events: list[Event] = []
    interactions: list[JunctionInteraction] = []
    warnings: list[str] = []

    for li, ld in enumerate(scenario.links):
        for x, a, b in zip(ld.jumps, ld.states, ld.states[1:]):
            new = solve_riemann_pwa(ld.fd, a, b, x, 0.0, li)
            alive[li].extend(new)
            all_fronts.extend(new)
            if new:
                events.append(Event(0.0, x, li, "initial", f"{len(new)} front(s)"))

    def adjacent(li):
        fr = alive[li]
        ld = scenario.links[li]
        if roles[li] == INCOMING:
            return fr[-1].rho_r if fr else ld.states[0]
        return fr[0].rho_l if fr else ld.states[-1]

    def junction_event(t, hit):
        absorbed = {}
        for li in hit:
            if roles[li] == INCOMING:
                k = len(alive[li])
                while k > 0 and alive[li][k - 1].speed > 0 and alive[li][k - 1].position(t) >= -tol_x:
                    k -= 1
                absorbed[li] = alive[li][k:]
                del alive[li][k:]
            else:
                k = 0
                while k < len(alive[li]) and alive[li][k].speed < 0 and alive[li][k].position(t) <= tol_x:
                    k += 1
                absorbed[li] = alive[li][:k]
                del alive[li][:k]
            for f in absorbed[li]:
                f.t_end = t
        before = tuple(adjacent(li) for li in range(n_links))
        traces = scenario.junction_traces(before)
        emitted = {}
        for li in range(n_links):
            fd = scenario.links[li].fd
            if roles[li] == INCOMING:
                new = solve_riemann_pwa(fd, before[li], traces[li], 0.0, t, li)
                if any(f.speed > 0 for f in new):
                    raise WaveOrderError(f"link {li}: wave leaving the junction with positive speed at t={t}")
                alive[li].extend(new)
            else:
                new = solve_riemann_pwa(fd, traces[li], before[li], 0.0, t, li)
                if any(f.speed < 0 for f in new):
                    raise WaveOrderError(f"link {li}: wave leaving the junction with negative speed at t={t}")
                alive[li][:0] = new
            all_fronts.extend(new)
            if new:
                emitted[li] = new
        interactions.append(JunctionInteraction(t, tuple(hit), absorbed, before, tuple(traces), emitted))
        events.append(Event(t, 0.0, tuple(hit), "junction",
                            f"traces {tuple(float(r) for r in traces)}"))

    if scenario.junction is not None:
        junction_event(0.0, ())
        if not interactions[-1].emitted:
            events.pop()
            interactions.pop()

    t = 0.0
    n_events = 0
    last_junction_time = None
    while True:
        best = math.inf
        candidates = []
        for li in range(n_links):
            fr = alive[li]
            for k in range(len(fr) - 1):
                a, b = fr[k], fr[k + 1]
                if a.speed > b.speed:
                    gap = max(b.position(t) - a.position(t), 0.0)
                    tc = t + gap / (a.speed - b.speed)
                    candidates.append((tc, 1, li, a.position(tc), k))
            if roles[li] == INCOMING and fr and fr[-1].speed > 0:
                th = t + max(-fr[-1].position(t), 0.0) / fr[-1].speed
                candidates.append((th, 0, li, 0.0, -1))
            if roles[li] == OUTGOING and fr and fr[0].speed < 0:
                th = t + max(fr[0].position(t), 0.0) / -fr[0].speed
                candidates.append((th, 0, li, 0.0, -1))
        if candidates:
            best = min(c[0] for c in candidates)
        if best > horizon:
            break
        n_events += 1
        if n_events > max_events:
            raise EventCapExceeded(
                f"more than {max_events} interactions before t={best}; "
                f"{sum(len(a) for a in alive)} live fronts")
        tol_t = 1e-12 * max(1.0, abs(best))
        tied = sorted((c for c in candidates if c[0] <= best + tol_t), key=lambda c: (c[1], c[2], c[3]))
        t = best
        hits = [c[2] for c in tied if c[1] == 0]
        if hits:
            if len(hits) > 1 or last_junction_time == t:
                msg = f"simultaneous junction hits from links {sorted(set(hits))} at t={t}; resolved together"
                warnings.append(msg)
                log.warning(msg)
            junction_event(t, sorted(set(hits)))
            last_junction_time = t
            continue
        _, _, li, x, k = tied[0]
        fr = alive[li]
        lo, hi = k, k + 1
        while lo > 0 and abs(fr[lo - 1].position(t) - x) <= tol_x:
            lo -= 1
        while hi + 1 < len(fr) and abs(fr[hi + 1].position(t) - x) <= tol_x:
            hi += 1
        merged = fr[lo:hi + 1]
        for f in merged:
            f.t_end = t
        new = solve_riemann_pwa(scenario.links[li].fd, merged[0].rho_l, merged[-1].rho_r, x, t, li)
        fr[lo:hi + 1] = new
        all_fronts.extend(new)
        events.append(Event(t, x, li, "collision", f"{len(merged)} in, {len(new)} out"))

    return WaveFrontSolution(scenario, horizon, all_fronts, events, interactions, warnings)


# -- tangent vectors ------------------------------------------------------------------------


@dataclass(frozen=True)
class TangentVector:
    """Shifts of a profile's jumps; ``jumps[k]`` is the density jump the shift acts on."""

    shifts: tuple = ()
    jumps: tuple = ()

    def __post_init__(self):
        if len(self.shifts) != len(self.jumps):
            raise ValueError("shifts and jumps must align")


def tangent_norm(tv: TangentVector):
    return sum((abs(s) * abs(j) for s, j in zip(tv.shifts, tv.jumps)), 0)


def diverge_multiplication_matrix(a12, a13):
    """Ratios of flux changes across a fixed-ratio diverge, 0-based.

    ``Q[i][j] = |dq_j| / |dq_i|`` with the flux changes on (incoming, out-2, out-3)
    proportional to ``(1, a12, a13)``. Exact when given ``Fraction`` inputs.
    """
    if a12 <= 0 or a13 <= 0:
        raise DomainError("turning ratios must be positive")
    total = a12 + a13
    exact = isinstance(a12, Fraction) and isinstance(a13, Fraction)
    if (total != 1) if exact else abs(total - 1) > 1e-12:
        raise DomainError(f"turning ratios must sum to 1, got {total}")
    weights = (a12 ** 0 if exact else 1.0, a12, a13)
    return [[w_j / w_i for w_j in weights] for w_i in weights]


def tangent_shift_across_junction(source_jump, shift, dq_source, dq_recipient, recipient_jump):
    """Shift of a recipient wave produced when a shifted wave crosses a junction.

    Solves ``xi_j * recipient_jump = (dq_recipient / dq_source) * shift * source_jump``.
    Returns ``None`` when ``dq_source`` is zero (the incoming wave transmits no
    flux change, so no recipient wave exists) and ``0`` when the recipient sees no
    flux change.
    """
    if dq_source == 0:
        return None
    if dq_recipient == 0 or recipient_jump == 0:
        return 0 * shift
    return dq_recipient / dq_source * shift * source_jump / recipient_jump


def interaction_shifts(interaction: JunctionInteraction, shift) -> dict[int, list]:
    """Predicted shifts of every emitted front for a shift of the absorbed front.

    Expects a single absorbed front. ``dq`` for a wave is its flux jump
    ``f(rho_r) - f(rho_l)`` on its own link.
    """
    (src_link, src), = [(li, fr) for li, fr in interaction.absorbed.items() if fr]
    if len(src) != 1:
        raise ValueError("expected exactly one absorbed front")
    src = src[0]
    return {li: [tangent_shift_across_junction(src.jump, shift, _dq(src), _dq(f), f.jump) for f in fronts]
            for li, fronts in interaction.emitted.items()}


def _dq(front: Front):
    # flux jump across a front; speed * density jump by Rankine-Hugoniot
    return front.speed * front.jump


def norm_factor(interaction: JunctionInteraction, link: int) -> float:
    """Ratio of recipient to source tangent-norm contribution for a unit source shift."""
    (src,), = [fr for fr in interaction.absorbed.values() if fr]
    shifts = interaction_shifts(interaction, 1.0)[link]
    recv = sum(abs(s) * abs(f.jump) for s, f in zip(shifts, interaction.emitted[link]))
    return recv / abs(src.jump)
