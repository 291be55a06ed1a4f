"""Network data model: links, merge/diverge junctions, origins, destinations, paths."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable

from .fundamental_diagram import FundamentalDiagram

MERGE = "merge"
DIVERGE = "diverge"
SERIES = "series"


@dataclass(frozen=True)
class Link:
    id: str
    length: float
    fd: FundamentalDiagram
    is_virtual: bool = False
    cell_count: int | None = None


@dataclass(frozen=True)
class Junction:
    """A node joining incoming and outgoing links.

    Supported shapes are 2->1 (merge, needs ``priority``), 1->2 (diverge) and
    1->1 (series, used to hang virtual links onto real ones). Anything else is
    reported by :func:`validate`.
    """

    id: str
    incoming: tuple[str, ...]
    outgoing: tuple[str, ...]
    priority: float | None = None

    @property
    def kind(self) -> str | None:
        shape = (len(self.incoming), len(self.outgoing))
        return {(2, 1): MERGE, (1, 2): DIVERGE, (1, 1): SERIES}.get(shape)


@dataclass(frozen=True)
class Origin:
    id: str
    link: str


@dataclass(frozen=True)
class Destination:
    id: str
    link: str
    supply: float = math.inf


@dataclass(frozen=True)
class Path:
    id: str
    origin: str
    links: tuple[str, ...]


@dataclass
class Network:
    links: dict[str, Link] = field(default_factory=dict)
    junctions: list[Junction] = field(default_factory=list)
    origins: list[Origin] = field(default_factory=list)
    destinations: list[Destination] = field(default_factory=list)
    paths: list[Path] = field(default_factory=list)

    def link_ids(self) -> list[str]:
        return list(self.links)

    def origin(self, origin_id: str) -> Origin:
        for o in self.origins:
            if o.id == origin_id:
                return o
        raise KeyError(origin_id)

    def paths_from(self, origin_id: str) -> list[Path]:
        return [p for p in self.paths if p.origin == origin_id]

    def upstream_junction(self, link_id: str) -> Junction | None:
        for j in self.junctions:
            if link_id in j.outgoing:
                return j
        return None

    def downstream_junction(self, link_id: str) -> Junction | None:
        for j in self.junctions:
            if link_id in j.incoming:
                return j
        return None


class NetworkError(ValueError):
    """Invalid network; ``violations`` lists every problem found."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


def validate(net: Network) -> list[str]:
    """Return a list of human-readable violations (empty when valid)."""
    v: list[str] = []
    if not net.links:
        v.append("network has no links")
    for lid, link in net.links.items():
        if lid != link.id:
            v.append(f"link key {lid!r} does not match id {link.id!r}")
        if not link.length > 0:
            v.append(f"link {lid}: length must be positive")
        if link.cell_count is not None and link.cell_count < 1:
            v.append(f"link {lid}: cell_count must be a positive integer")

    upstream: dict[str, list[str]] = {lid: [] for lid in net.links}
    downstream: dict[str, list[str]] = {lid: [] for lid in net.links}

    def ref(lid, where):
        if lid not in net.links:
            v.append(f"{where}: unknown link id {lid!r}")
            return False
        return True

    for j in net.junctions:
        if j.kind is None:
            v.append(f"junction {j.id}: unsupported junction arity "
                     f"{len(j.incoming)} in / {len(j.outgoing)} out")
        if j.kind == MERGE:
            if j.priority is None or not (0 < j.priority < 1):
                v.append(f"junction {j.id}: priority out of (0,1)")
        elif j.priority is not None and not (0 < j.priority < 1):
            v.append(f"junction {j.id}: priority out of (0,1)")
        if len(set(j.incoming) | set(j.outgoing)) != len(j.incoming) + len(j.outgoing):
            v.append(f"junction {j.id}: link listed twice")
        for lid in j.incoming:
            if ref(lid, f"junction {j.id}"):
                downstream[lid].append(f"junction {j.id}")
        for lid in j.outgoing:
            if ref(lid, f"junction {j.id}"):
                upstream[lid].append(f"junction {j.id}")

    seen = set()
    for o in net.origins:
        if o.id in seen:
            v.append(f"duplicate origin id {o.id!r}")
        seen.add(o.id)
        if ref(o.link, f"origin {o.id}"):
            upstream[o.link].append(f"origin {o.id}")
    for d in net.destinations:
        if not d.supply > 0:
            v.append(f"destination {d.id}: supply must be positive")
        if ref(d.link, f"destination {d.id}"):
            downstream[d.link].append(f"destination {d.id}")

    for lid in net.links:
        if len(upstream[lid]) != 1:
            v.append(f"link {lid}: expected exactly one upstream attachment, found {upstream[lid] or 'none'}")
        if len(downstream[lid]) != 1:
            v.append(f"link {lid}: expected exactly one downstream attachment, found {downstream[lid] or 'none'}")

    origin_links = {o.id: o.link for o in net.origins}
    dest_links = {d.link for d in net.destinations}
    path_ids = set()
    for p in net.paths:
        if p.id in path_ids:
            v.append(f"duplicate path id {p.id!r}")
        path_ids.add(p.id)
        if not p.links:
            v.append(f"path {p.id}: empty")
            continue
        if not all(ref(lid, f"path {p.id}") for lid in p.links):
            continue
        if p.origin not in origin_links:
            v.append(f"path {p.id}: unknown origin {p.origin!r}")
        elif origin_links[p.origin] != p.links[0]:
            v.append(f"path {p.id}: does not start at the virtual link of origin {p.origin}")
        if p.links[-1] not in dest_links:
            v.append(f"path {p.id}: does not end at a destination link")
        for a, b in zip(p.links, p.links[1:]):
            if not any(a in j.incoming and b in j.outgoing for j in net.junctions):
                v.append(f"path {p.id}: disconnected path between {a} and {b}")
    return v


def check(net: Network) -> Network:
    problems = validate(net)
    if problems:
        raise NetworkError(problems)
    return net


# -- augmentation helpers ---------------------------------------------------


def shortest_real_length(net: Network) -> float:
    real = [l.length for l in net.links.values() if not l.is_virtual]
    return min(real) if real else min(l.length for l in net.links.values())


def attach_origin(net: Network, origin_id: str, feeds: str, length: float | None = None,
                  fd: FundamentalDiagram | None = None) -> str:
    """Add an origin whose virtual link feeds the upstream end of ``feeds``.

    Defaults: length of the shortest real link, diagram copied from ``feeds``.
    Returns the id of the new virtual link.
    """
    lid = f"{origin_id}:out"
    net.links[lid] = Link(lid, length if length is not None else shortest_real_length(net),
                          fd if fd is not None else net.links[feeds].fd, is_virtual=True)
    net.junctions.append(Junction(f"{origin_id}:J", (lid,), (feeds,)))
    net.origins.append(Origin(origin_id, lid))
    return lid


def attach_destination(net: Network, dest_id: str, drains: str, supply: float = math.inf,
                       length: float | None = None, fd: FundamentalDiagram | None = None) -> str:
    """Add a destination whose virtual link drains the downstream end of ``drains``."""
    lid = f"{dest_id}:in"
    net.links[lid] = Link(lid, length if length is not None else shortest_real_length(net),
                          fd if fd is not None else net.links[drains].fd, is_virtual=True)
    net.junctions.append(Junction(f"{dest_id}:J", (drains,), (lid,)))
    net.destinations.append(Destination(dest_id, lid, supply))
    return lid


def enumerate_paths(net: Network) -> list[Path]:
    """All origin-to-destination link sequences (the graph must be acyclic)."""
    out_of = {}
    for j in net.junctions:
        for a in j.incoming:
            out_of[a] = list(j.outgoing)
    dest_links = {d.link for d in net.destinations}
    paths: list[Path] = []
    for o in net.origins:
        stack = [(o.link,)]
        while stack:
            seq = stack.pop()
            last = seq[-1]
            if last in dest_links:
                paths.append(Path(f"{o.id}>{len(paths)}", o.id, seq))
                continue
            for nxt in reversed(out_of.get(last, [])):
                if nxt in seq:
                    raise NetworkError([f"cycle through link {nxt}"])
                stack.append(seq + (nxt,))
    return [replace(p, id=f"p{i}") for i, p in enumerate(paths)]


# -- network constants ----------------------------------------------------------


@dataclass(frozen=True)
class NetworkConstants:
    min_length: float
    min_capacity: float
    max_backward_speed: float
    priority_floor: float
    min_destination_supply: float
    notes: tuple[str, ...] = ()

    @property
    def window(self) -> float:
        """Length of one supply-bound window, ``L / lambda``."""
        return self.min_length / self.max_backward_speed


def network_constants(net: Network) -> NetworkConstants:
    if not net.links:
        raise NetworkError(["network has no links"])
    links: Iterable[Link] = net.links.values()
    notes = []
    merges = [j for j in net.junctions if j.kind == MERGE]
    if merges:
        p_bar = min(min(j.priority, 1 - j.priority) for j in merges)
    else:
        p_bar = 1.0
        notes.append("no merge junctions: priority floor taken as 1")
    if net.destinations:
        delta_d = min(d.supply for d in net.destinations)
    else:
        delta_d = math.inf
        notes.append("no destinations: destination supply taken as infinite")
    return NetworkConstants(
        min_length=min(l.length for l in links),
        min_capacity=min(l.fd.capacity for l in net.links.values()),
        max_backward_speed=max(l.fd.backward_wave_speed for l in net.links.values()),
        priority_floor=p_bar,
        min_destination_supply=delta_d,
        notes=tuple(notes),
    )


def supply_lower_bound(constants: NetworkConstants, k: int) -> float:
    """``p^k * min(delta_D, p * C_min)``: guaranteed minimum supply in window ``k``."""
    if k < 0:
        raise ValueError("window index must be nonnegative")
    p = constants.priority_floor
    return p ** k * min(constants.min_destination_supply, p * constants.min_capacity)
