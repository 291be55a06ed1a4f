"""Small network builders shared by the test modules."""

from lwrdnl import (FundamentalDiagram, Junction, Link, Network, attach_destination, attach_origin,
                    enumerate_paths)


def standard_fd():
    return FundamentalDiagram.triangular(1.0, 0.5, 3.0)


def line_network(lengths=(1.0, 2.0), fd=None, supply=float("inf")):
    fd = fd or standard_fd()
    net = Network()
    ids = [f"l{i}" for i in range(len(lengths))]
    for lid, length in zip(ids, lengths):
        net.links[lid] = Link(lid, length, fd)
    for a, b in zip(ids, ids[1:]):
        net.junctions.append(Junction(f"{a}-{b}", (a,), (b,)))
    attach_origin(net, "o", ids[0])
    attach_destination(net, "d", ids[-1], supply=supply)
    net.paths = enumerate_paths(net)
    return net


def diverge_network(lengths=(2.0, 2.0, 2.0), fd=None, supplies=(float("inf"),) * 2):
    fd = fd or standard_fd()
    net = Network()
    for lid, length in zip(("1", "2", "3"), lengths):
        net.links[lid] = Link(lid, length, fd)
    net.junctions.append(Junction("J", ("1",), ("2", "3")))
    attach_origin(net, "o", "1")
    attach_destination(net, "d2", "2", supply=supplies[0])
    attach_destination(net, "d3", "3", supply=supplies[1])
    net.paths = enumerate_paths(net)
    return net


def merge_network(priority=0.5, fd=None, supply=float("inf")):
    fd = fd or standard_fd()
    net = Network()
    for lid in ("4", "5", "6"):
        net.links[lid] = Link(lid, 2.0, fd)
    net.junctions.append(Junction("M", ("4", "5"), ("6",), priority))
    attach_origin(net, "o4", "4")
    attach_origin(net, "o5", "5")
    attach_destination(net, "d", "6", supply=supply)
    net.paths = enumerate_paths(net)
    return net
