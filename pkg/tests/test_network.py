import math

import pytest

from lwrdnl import (Junction, Link, Network, NetworkError, attach_destination,
                    attach_origin, enumerate_paths, network_constants, supply_lower_bound, validate)
from lwrdnl.network import Path, check


def diverge_net(fd):
    net = Network()
    for lid in ("1", "2", "3"):
        net.links[lid] = Link(lid, 2.0, fd)
    net.junctions.append(Junction("J", ("1",), ("2", "3")))
    attach_origin(net, "o", "1")
    attach_destination(net, "d2", "2")
    attach_destination(net, "d3", "3")
    net.paths = enumerate_paths(net)
    return net


def test_diverge_is_valid(tri):
    net = diverge_net(tri)
    assert validate(net) == []
    assert [p.links for p in net.paths] == [("o:out", "1", "2", "d2:in"), ("o:out", "1", "3", "d3:in")]
    assert sum(l.is_virtual for l in net.links.values()) == 3


def test_unsupported_arity(tri):
    net = diverge_net(tri)
    net.links["4"] = Link("4", 1.0, tri)
    net.junctions[0] = Junction("J", ("1", "4"), ("2", "3"))
    assert any("unsupported junction arity" in v for v in validate(net))


def test_disconnected_path(tri):
    net = diverge_net(tri)
    net.paths.append(Path("bad", "o", ("o:out", "2", "d2:in")))
    assert any("disconnected path" in v for v in validate(net))


def test_priority_range(tri):
    net = Network()
    for lid in ("a", "b", "c"):
        net.links[lid] = Link(lid, 1.0, tri)
    net.junctions.append(Junction("M", ("a", "b"), ("c",), priority=1.2))
    msgs = validate(net)
    assert any("priority out of (0,1)" in m for m in msgs)


def test_unknown_link_named(tri):
    net = diverge_net(tri)
    net.junctions.append(Junction("X", ("ghost",), ("2",)))
    with pytest.raises(NetworkError) as exc:
        check(net)
    assert any("ghost" in v for v in exc.value.violations)


def test_network_constants_example(tri):
    net = Network()
    net.links["a"] = Link("a", 1.0, tri)
    net.links["b"] = Link("b", 2.0, tri)
    net.links["c"] = Link("c", 2.0, tri)
    net.junctions.append(Junction("M", ("a", "b"), ("c",), priority=0.4))
    net.destinations.append(__import__("lwrdnl").Destination("d", "c", 0.3))
    c = network_constants(net)
    assert (c.min_length, c.min_capacity, c.max_backward_speed, c.priority_floor,
            c.min_destination_supply) == (1.0, 1.0, 0.5, 0.4, 0.3)
    assert c.window == 2.0


def test_constants_defaults(tri):
    net = diverge_net(tri)
    c = network_constants(net)
    assert c.priority_floor == 1.0 and c.notes
    assert c.min_destination_supply == math.inf
    with pytest.raises(NetworkError):
        network_constants(Network())


def test_supply_lower_bound_examples():
    from lwrdnl.network import NetworkConstants
    c = NetworkConstants(1.0, 1.0, 0.5, 0.4, 2.0)
    assert supply_lower_bound(c, 2) == pytest.approx(0.064)
    c = NetworkConstants(1.0, 1.0, 0.5, 0.5, 0.2)
    assert supply_lower_bound(c, 0) == 0.2
    c = NetworkConstants(1.0, 1.0, 0.5, 1.0, math.inf)
    assert all(supply_lower_bound(c, k) == 1.0 for k in range(5))


def test_cycle_detected(tri):
    net = Network()
    for lid in ("a", "b", "c"):
        net.links[lid] = Link(lid, 1.0, tri)
    net.junctions.append(Junction("M", ("a", "c"), ("b",), 0.5))
    net.junctions.append(Junction("D", ("b",), ("c", "x")))
    net.links["x"] = Link("x", 1.0, tri)
    net.origins.append(__import__("lwrdnl").Origin("o", "a"))
    net.destinations.append(__import__("lwrdnl").Destination("d", "x"))
    with pytest.raises(NetworkError):
        enumerate_paths(net)
