from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lwrdnl import DomainError, FundamentalDiagram, check_share_regularity


@pytest.mark.parametrize("rho,q", [(0, 0), (1, 1), (2, 0.5)])
def test_flow(tri, rho, q):
    assert tri.flow(rho) == q


@pytest.mark.parametrize("rho,d", [(0.5, 0.5), (2, 1), (3, 1)])
def test_demand(tri, rho, d):
    assert tri.demand(rho) == d


@pytest.mark.parametrize("rho,s", [(0.5, 1), (2, 0.5), (3, 0)])
def test_supply(tri, rho, s):
    assert tri.supply(rho) == s


@pytest.mark.parametrize("rho,v", [(0, 1), (0.5, 1), (2, 0.25)])
def test_velocity(tri, rho, v):
    assert tri.velocity(rho) == v


@pytest.mark.parametrize("q,rho", [(1, 1), (0, 3), (0.5, 2)])
def test_inverse_congested(tri, q, rho):
    assert tri.inverse_congested(q) == rho


def test_inverse_free(tri):
    assert tri.inverse_free(0.25) == 0.25
    assert tri.inverse_free(1.0) == 1.0


@pytest.mark.parametrize("bad", [-0.1, 3.01])
def test_domain_errors(tri, bad):
    for fn in (tri.flow, tri.demand, tri.supply, tri.velocity):
        with pytest.raises(DomainError):
            fn(bad)


def test_inverse_rejects_flow_above_capacity(tri):
    with pytest.raises(DomainError):
        tri.inverse_congested(1.2)
    with pytest.raises(DomainError):
        tri.inverse_free(-0.1)


def test_triangular_parameters(tri):
    assert tri.critical_density == 1.0
    assert tri.capacity == 1.0
    assert tri.backward_wave_speed == 0.5
    assert tri.max_wave_speed == 1.0
    assert tri.slopes == (1.0, -0.5)


def test_fraction_arithmetic_is_exact():
    fd = FundamentalDiagram.triangular(Fraction(1), Fraction(1, 2), Fraction(3))
    assert fd.flow(Fraction(7, 5)) == Fraction(4, 5)
    assert fd.inverse_congested(Fraction(1, 5)) == Fraction(13, 5)
    assert fd.inverse_free(Fraction(3, 5)) == Fraction(3, 5)


def test_piecewise_linear_validation():
    with pytest.raises(ValueError):
        FundamentalDiagram.piecewise_linear([(0, 0), (1, 0.5), (2, 1.5), (3, 0)])  # convex kink
    with pytest.raises(ValueError):
        FundamentalDiagram.piecewise_linear([(0, 0), (2, 1), (1, 0)])
    with pytest.raises(ValueError):
        FundamentalDiagram.piecewise_linear([(0, 0), (1, 1)])
    fd = FundamentalDiagram.piecewise_linear([(0, 0), (1, 1), (2, 1.2), (4, 0)])
    assert fd.critical_density == 2 and fd.capacity == 1.2
    assert fd.free_flow_speed == 1 and fd.backward_wave_speed == 0.6


def test_greenshields_and_interpolation():
    g = FundamentalDiagram.greenshields(1.0, 1.0)
    assert g.capacity == 0.25 and g.critical_density == 0.5
    assert g.flow(0.25) == pytest.approx(0.1875)
    pwl = g.to_piecewise_linear(8)
    assert pwl.is_piecewise_linear and pwl.capacity == pytest.approx(0.25)
    with pytest.raises(ValueError):
        g.to_piecewise_linear(7)
    assert g.inverse_congested(0.1875) == pytest.approx(0.75)
    assert g.inverse_free(0.1875) == pytest.approx(0.25)


def test_share_regularity_checks(tri):
    assert check_share_regularity(tri, 0.4).passed
    rep = check_share_regularity(tri, 0.7)
    assert not rep.passed and not rep.slopes_bounded and rep.linear_near_zero
    assert not check_share_regularity(FundamentalDiagram.greenshields(1.0, 1.0), 0.1).passed
    assert not check_share_regularity(tri, 1.5).linear_near_zero


def test_dict_round_trip(tri):
    for fd in (tri, FundamentalDiagram.greenshields(1.0, 2.0),
               FundamentalDiagram.piecewise_linear([(0, 0), (1, 1), (2, 1.2), (4, 0)]),
               FundamentalDiagram.triangular(1.0, 0.3, 2.7)):
        assert FundamentalDiagram.from_dict(fd.to_dict()) == fd


@given(st.floats(0, 3))
def test_array_versions_match_scalar(rho):
    fd = FundamentalDiagram.triangular(1.0, 0.5, 3.0)
    arr = np.array([rho])
    assert fd.flow_array(arr)[0] == pytest.approx(fd.flow(rho), abs=1e-15)
    assert fd.demand_array(arr)[0] == pytest.approx(fd.demand(rho), abs=1e-15)
    assert fd.supply_array(arr)[0] == pytest.approx(fd.supply(rho), abs=1e-15)


@given(st.floats(0, 3), st.floats(0, 3))
def test_demand_supply_monotone(a, b):
    fd = FundamentalDiagram.triangular(1.0, 0.5, 3.0)
    lo, hi = min(a, b), max(a, b)
    assert fd.demand(lo) <= fd.demand(hi)
    assert fd.supply(lo) >= fd.supply(hi)
    assert min(fd.demand(lo), fd.supply(lo)) == fd.flow(lo)
