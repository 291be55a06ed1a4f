"""Closed-form Riemann solvers for the 1->2 diverge and 2->1 merge junctions.

All functions use plain arithmetic (``min``/``max``/division), so they run on
floats or, for exact results, on ``fractions.Fraction``.
"""

from __future__ import annotations

import math
import sys
from fractions import Fraction

from .fundamental_diagram import DomainError, FundamentalDiagram


def _nonneg(**kw):
    for name, val in kw.items():
        if val < 0:
            raise DomainError(f"{name} must be nonnegative, got {val}")


def _ratio(s, a):
    # an unused branch (alpha = 0) imposes no constraint
    return math.inf if a == 0 else s / a


def solve_diverge(d1, s2, s3, a12, a13):
    """Fluxes ``(f1_out, f2_in, f3_in)`` for a diverge with turning ratios ``a12, a13``.

    ``f1_out = min(D1, S2/a12, S3/a13)``. When a branch constraint is the active
    one its inflow is set to that supply exactly, so a branch running at supply
    keeps the supply value bit-for-bit.
    """
    _nonneg(d1=d1, s2=s2, s3=s3, a12=a12, a13=a13)
    r2, r3 = _ratio(s2, a12), _ratio(s3, a13)
    f1 = min(d1, r2, r3)
    if f1 == 0:
        zero = f1 * 0
        return zero, zero, zero
    f2 = s2 if (f1 == r2 and f1 != d1) else a12 * f1
    f3 = s3 if (f1 == r3 and f1 != d1) else a13 * f1
    return f1, f2, f3


def solve_merge(d4, d5, s6, p):
    """Exit fluxes ``(f4, f5)`` maximising throughput, closest to the priority ray.

    If both demands fit, they pass unchanged. Otherwise the flux sits on
    ``f4 + f5 = S6`` and ``f4`` is the median of ``S6 - D5``, ``p*S6`` and ``D4``.
    """
    _nonneg(d4=d4, d5=d5, s6=s6)
    if not (0 < p < 1):
        raise DomainError(f"priority must lie in (0, 1), got {p}")
    if d4 + d5 <= s6:
        return d4, d5
    spare = s6 - d5
    f4 = sorted((spare, p * s6, d4))[1]
    if f4 == spare:
        # link 5 is fully served; s6 - (s6 - d5) may round below d5
        return f4, d5
    return f4, min(d5, s6 - f4)


# flows this many ulps of capacity apart count as equal when choosing a trace
_FLOW_ULPS = 8


def _same_flow(fd: FundamentalDiagram, rho, q) -> bool:
    f = fd.flow(rho)
    if isinstance(f, Fraction) and isinstance(q, Fraction):
        return f == q
    return abs(f - q) <= _FLOW_ULPS * sys.float_info.epsilon * fd.capacity


def _incoming_trace(fd: FundamentalDiagram, rho_hat, f_out):
    if _same_flow(fd, rho_hat, f_out) and rho_hat <= fd.critical_density:
        return rho_hat
    return fd.inverse_congested(_clip(f_out, fd.capacity))


def _outgoing_trace(fd: FundamentalDiagram, rho_hat, f_in):
    if _same_flow(fd, rho_hat, f_in) and rho_hat >= fd.critical_density:
        return rho_hat
    return fd.inverse_free(_clip(f_in, fd.capacity))


def _clip(q, cap):
    # guards against a last-bit overshoot of the capacity in float arithmetic
    return cap if q > cap else q


def diverge_boundary_densities(fds, rho1, rho2, rho3, a12, a13):
    """Boundary traces ``(rb1, rb2, rb3)`` for Riemann data on a diverge.

    ``fds`` is a triple of diagrams for the incoming link and the two outgoing
    links. Upstream traces take the congested branch, downstream traces the
    free-flow branch, whenever the junction flux differs from the initial one.
    """
    f1d, f2d, f3d = fds
    f1, f2, f3 = solve_diverge(f1d.demand(rho1), f2d.supply(rho2), f3d.supply(rho3), a12, a13)
    return (_incoming_trace(f1d, rho1, f1),
            _outgoing_trace(f2d, rho2, f2),
            _outgoing_trace(f3d, rho3, f3))


def merge_boundary_densities(fds, rho4, rho5, rho6, p):
    """Boundary traces ``(rb4, rb5, rb6)`` for Riemann data on a merge."""
    f4d, f5d, f6d = fds
    f4, f5 = solve_merge(f4d.demand(rho4), f5d.demand(rho5), f6d.supply(rho6), p)
    return (_incoming_trace(f4d, rho4, f4),
            _incoming_trace(f5d, rho5, f5),
            _outgoing_trace(f6d, rho6, f4 + f5))


def series_boundary_densities(fds, rho_in, rho_out):
    """Boundary traces for a 1->1 junction (``min(D, S)`` passes)."""
    fa, fb = fds
    q = min(fa.demand(rho_in), fb.supply(rho_out))
    return _incoming_trace(fa, rho_in, q), _outgoing_trace(fb, rho_out, q)
