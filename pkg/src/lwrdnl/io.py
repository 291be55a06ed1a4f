"""JSON network/demand files and CSV result writers.

Network file::

    {
      "units": {...},                      # optional, ignored
      "links": [{"id": "a", "length": 10, "virtual": false, "cells": 20,
                 "fd": {"kind": "triangular", "free_flow_speed": 1,
                        "backward_wave_speed": 0.5, "jam_density": 3}}],
      "junctions": [{"id": "J", "incoming": ["a"], "outgoing": ["b", "c"],
                     "priority": 0.5}],
      "origins": [{"id": "o", "link": "o:out"}  |  {"id": "o", "feeds": "a"}],
      "destinations": [{"id": "d", "link": "d:in", "supply": "inf"}
                       |  {"id": "d", "drains": "b", "supply": 0.3}],
      "paths": [{"id": "p0", "origin": "o", "links": ["o:out", "a", "b", "d:in"]}]
    }

``feeds``/``drains`` entries create the virtual links on load; paths may then
list real links only, and the virtual ends are added. Without ``paths`` every
origin-destination route is enumerated.

Demand file: ``{"paths": {"p0": [[start_time, rate], ...]}}``.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path as FilePath
from typing import Mapping

import numpy as np

from . import __version__
from .fundamental_diagram import FundamentalDiagram
from .network import (Destination, NetworkError, Junction, Link, Network, Origin, Path, attach_destination,
                      attach_origin, check, enumerate_paths, validate)
from .simulator import PathFlowProfile

HEADER = f"# lwrdnl {__version__}"


class InputError(ValueError):
    """Unreadable or malformed input file."""


def _read_json(path) -> object:
    try:
        text = FilePath(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from exc
    if not text.strip():
        return {}
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _num(x):
    if x == "inf" or x == "Infinity":
        return math.inf
    return float(x)


def _field(obj, key, where):
    try:
        return obj[key]
    except (KeyError, TypeError):
        raise InputError(f"{where}: missing field {key!r}") from None


def network_from_dict(data: Mapping) -> Network:
    net = Network()
    for i, ld in enumerate(data.get("links", [])):
        where = f"links[{i}]"
        lid = str(_field(ld, "id", where))
        try:
            fd = FundamentalDiagram.from_dict(_field(ld, "fd", where))
        except (KeyError, TypeError) as exc:
            raise InputError(f"{where}.fd: missing or invalid field {exc}") from None
        except ValueError as exc:
            raise InputError(f"{where}.fd: {exc}") from None
        cells = ld.get("cells")
        net.links[lid] = Link(lid, float(_field(ld, "length", where)), fd,
                              bool(ld.get("virtual", False)), None if cells is None else int(cells))
    for i, jd in enumerate(data.get("junctions", [])):
        where = f"junctions[{i}]"
        pr = jd.get("priority")
        net.junctions.append(Junction(str(_field(jd, "id", where)),
                                      tuple(_field(jd, "incoming", where)),
                                      tuple(_field(jd, "outgoing", where)),
                                      None if pr is None else float(pr)))
    for i, od in enumerate(data.get("origins", [])):
        where = f"origins[{i}]"
        oid = str(_field(od, "id", where))
        if "feeds" in od:
            attach_origin(net, oid, od["feeds"])
        else:
            net.origins.append(Origin(oid, str(_field(od, "link", where))))
    for i, dd in enumerate(data.get("destinations", [])):
        where = f"destinations[{i}]"
        did = str(_field(dd, "id", where))
        supply = _num(dd.get("supply", math.inf))
        if "drains" in dd:
            attach_destination(net, did, dd["drains"], supply=supply)
        else:
            net.destinations.append(Destination(did, str(_field(dd, "link", where)), supply))
    if "paths" in data:
        o_link = {o.id: o.link for o in net.origins}
        d_of = {}
        for j in net.junctions:
            if len(j.outgoing) == 1 and j.outgoing[0] in {d.link for d in net.destinations}:
                d_of[j.incoming[0]] = j.outgoing[0]
        for i, pd in enumerate(data["paths"]):
            where = f"paths[{i}]"
            links = [str(l) for l in _field(pd, "links", where)]
            origin = str(_field(pd, "origin", where))
            if links and origin in o_link and links[0] != o_link[origin]:
                links.insert(0, o_link[origin])
            if links and links[-1] in d_of:
                links.append(d_of[links[-1]])
            net.paths.append(Path(str(_field(pd, "id", where)), origin, tuple(links)))
    else:
        # structural errors first, so they are not masked by a failed route search
        problems = validate(net)
        if problems:
            raise NetworkError(problems)
        net.paths = enumerate_paths(net)
    return net


def network_to_dict(net: Network) -> dict:
    def links():
        for l in net.links.values():
            d = {"id": l.id, "length": l.length, "fd": l.fd.to_dict(), "virtual": l.is_virtual}
            if l.cell_count is not None:
                d["cells"] = l.cell_count
            yield d

    def junction(j):
        d = {"id": j.id, "incoming": list(j.incoming), "outgoing": list(j.outgoing)}
        if j.priority is not None:
            d["priority"] = j.priority
        return d

    return {
        "links": list(links()),
        "junctions": [junction(j) for j in net.junctions],
        "origins": [{"id": o.id, "link": o.link} for o in net.origins],
        "destinations": [{"id": d.id, "link": d.link,
                          "supply": "inf" if math.isinf(d.supply) else d.supply}
                         for d in net.destinations],
        "paths": [{"id": p.id, "origin": p.origin, "links": list(p.links)} for p in net.paths],
    }


def load_network(path) -> Network:
    """Parse and validate a network file (raises ``InputError`` or ``NetworkError``)."""
    data = _read_json(path)
    if not isinstance(data, dict):
        raise InputError(f"{path}: top level must be an object")
    return check(network_from_dict(data))


def save_network(net: Network, path) -> None:
    FilePath(path).write_text(json.dumps(network_to_dict(net), indent=2) + "\n")


def demand_from_dict(data: Mapping, network: Network) -> dict[str, PathFlowProfile]:
    known = {p.id for p in network.paths}
    raw = data.get("paths", {}) if data else {}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise InputError(f"demand for unknown path id(s): {unknown}")
    profiles = {pid: PathFlowProfile() for pid in known}
    for pid, bps in raw.items():
        try:
            pts = tuple((float(t), float(r)) for t, r in bps)
        except (TypeError, ValueError):
            raise InputError(f"path {pid}: breakpoints must be [time, rate] pairs") from None
        if any(r < 0 for _, r in pts):
            raise InputError(f"path {pid}: negative departure rate")
        try:
            profiles[pid] = PathFlowProfile(pts)
        except ValueError as exc:
            raise InputError(f"path {pid}: {exc}") from None
    return profiles


def demand_to_dict(profiles: Mapping[str, PathFlowProfile]) -> dict:
    return {"paths": {pid: [list(bp) for bp in prof.breakpoints]
                      for pid, prof in profiles.items()}}


def load_demand(path, network: Network) -> dict[str, PathFlowProfile]:
    data = _read_json(path)
    if not isinstance(data, dict):
        raise InputError(f"{path}: top level must be an object")
    return demand_from_dict(data, network)


def save_demand(profiles: Mapping[str, PathFlowProfile], path) -> None:
    FilePath(path).write_text(json.dumps(demand_to_dict(profiles), indent=2) + "\n")


# -- CSV output ----------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows) -> None:
    """CSV with a version comment line, fixed header and ``repr`` floats."""
    with open(path, "w", newline="") as fh:
        fh.write(HEADER + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        lines = [l for l in fh if not l.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def write_delays(path, table) -> None:
    rows = []
    for pid, (arr, tt) in table.rows.items():
        for t, a, d in zip(table.departure, arr, tt):
            rows.append((pid, float(t), float(a), float(d)))
    write_csv(path, ["path", "departure", "arrival", "travel_time"], rows)


def write_queues(path, result) -> None:
    rows = []
    for oid, q in result.queue.items():
        for t, v, e, x in zip(result.times, q, result.origin_entered[oid], result.origin_exited[oid]):
            rows.append((oid, float(t), float(v), float(e), float(x)))
    write_csv(path, ["origin", "time", "queue", "entered", "exited"], rows)


def write_densities(path, result) -> None:
    if result.densities is None:
        raise ValueError("run was made without density recording")
    rows = []
    for n, t in enumerate(result.times):
        for c, rho in enumerate(result.densities[n]):
            rows.append((float(t), result.link_ids[result.cell_link[c]], int(result.cell_local[c]),
                         float(rho)))
    write_csv(path, ["time", "link", "cell", "density"], rows)


def write_supply_report(path, report) -> None:
    write_csv(path, ["window", "start", "end", "observed_min_supply", "bound", "passed"],
              [(w.index, float(w.start), float(w.end), w.observed, float(w.bound), w.passed)
               for w in report.windows])


def write_probe_report(path, report) -> None:
    write_csv(path, ["size", "deviation"], [(r.size, r.deviation) for r in report.rows])


def write_illposedness(path, report) -> None:
    write_csv(path, ["epsilon", "rho2", "rho3", "f1_out", "f2_in", "f3_in"],
              [(str(r.epsilon), str(r.rho2), str(r.rho3), str(r.f1_out), str(r.f2_in), str(r.f3_in))
               for r in report.rows])


def write_convergence(path, report) -> None:
    write_csv(path, ["cells", "l1_error"], list(zip(report.cells, map(float, report.errors))))
