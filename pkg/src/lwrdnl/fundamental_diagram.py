"""Flow-density relations and their demand/supply decomposition.

Scalar methods use plain arithmetic, so they accept ``fractions.Fraction``
inputs and then return exact rationals. The ``*_array`` variants are the
vectorised, unchecked versions used inside the time-stepping loop.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TRIANGULAR = "triangular"
PIECEWISE_LINEAR = "piecewise_linear"
GREENSHIELDS = "greenshields"


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a flux function."""


@dataclass(frozen=True)
class FundamentalDiagram:
    """Concave flux ``f`` on ``[0, jam_density]``.

    ``triangular`` and ``piecewise_linear`` diagrams are stored as breakpoint
    lists. ``greenshields`` is the smooth parabola ``v_f * rho * (1 - rho/rho_jam)``
    and is mainly there to exercise the assumption checks; use
    :meth:`to_piecewise_linear` before feeding it to the wave-front tracker.
    """

    kind: str
    jam_density: float
    critical_density: float
    capacity: float
    free_flow_speed: float
    breakpoints: tuple = field(default=(), repr=False)
    # kept as given for triangular diagrams so files round-trip bit-for-bit
    congested_speed: float | None = None

    # -- construction -----------------------------------------------------

    @classmethod
    def triangular(cls, free_flow_speed, backward_wave_speed, jam_density):
        if free_flow_speed <= 0 or backward_wave_speed <= 0 or jam_density <= 0:
            raise ValueError("triangular diagram needs positive speeds and jam density")
        rho_c = backward_wave_speed * jam_density / (free_flow_speed + backward_wave_speed)
        cap = free_flow_speed * rho_c
        zero = jam_density - jam_density
        return cls(
            kind=TRIANGULAR,
            jam_density=jam_density,
            critical_density=rho_c,
            capacity=cap,
            free_flow_speed=free_flow_speed,
            breakpoints=((zero, zero), (rho_c, cap), (jam_density, zero)),
            congested_speed=backward_wave_speed,
        )

    @classmethod
    def piecewise_linear(cls, breakpoints: Sequence[Sequence[float]]):
        pts = tuple((p[0], p[1]) for p in breakpoints)
        if len(pts) < 3:
            raise ValueError("piecewise-linear diagram needs at least 3 breakpoints")
        if pts[0][0] != 0 or pts[0][1] != 0:
            raise ValueError("first breakpoint must be (0, 0)")
        if pts[-1][1] != 0:
            raise ValueError("last breakpoint must have zero flow")
        slopes = []
        for (r0, q0), (r1, q1) in zip(pts, pts[1:]):
            if not r1 > r0:
                raise ValueError("breakpoint densities must be strictly increasing")
            if q1 < 0:
                raise ValueError("flows must be nonnegative")
            slopes.append((q1 - q0) / (r1 - r0))
        if any(not b < a for a, b in zip(slopes, slopes[1:])):
            raise ValueError("slopes must be strictly decreasing (concave diagram)")
        if not slopes[0] > 0 or not slopes[-1] < 0:
            raise ValueError("diagram must increase from 0 and decrease to jam density")
        k = max(range(len(pts)), key=lambda i: pts[i][1])
        return cls(
            kind=TRIANGULAR if len(pts) == 3 else PIECEWISE_LINEAR,
            jam_density=pts[-1][0],
            critical_density=pts[k][0],
            capacity=pts[k][1],
            free_flow_speed=slopes[0],
            breakpoints=pts,
        )

    @classmethod
    def greenshields(cls, free_flow_speed, jam_density):
        if free_flow_speed <= 0 or jam_density <= 0:
            raise ValueError("greenshields diagram needs positive parameters")
        return cls(
            kind=GREENSHIELDS,
            jam_density=jam_density,
            critical_density=jam_density / 2,
            capacity=free_flow_speed * jam_density / 4,
            free_flow_speed=free_flow_speed,
        )

    def to_piecewise_linear(self, n_segments: int = 64) -> "FundamentalDiagram":
        """Interpolate on a uniform density grid (identity for PWL kinds)."""
        if self.kind != GREENSHIELDS:
            return self
        if n_segments < 2 or n_segments % 2:
            raise ValueError("n_segments must be an even integer >= 2")
        grid = [self.jam_density * i / n_segments for i in range(n_segments + 1)]
        pts = [(r, self.flow(r)) for r in grid]
        pts[-1] = (self.jam_density, 0.0 * self.jam_density)
        return FundamentalDiagram.piecewise_linear(pts)

    # -- derived properties -------------------------------------------------

    @property
    def is_piecewise_linear(self) -> bool:
        return self.kind in (TRIANGULAR, PIECEWISE_LINEAR)

    @property
    def slopes(self) -> tuple:
        if not self.is_piecewise_linear:
            raise DomainError("slopes are only defined for piecewise-linear diagrams")
        pts = self.breakpoints
        return tuple((q1 - q0) / (r1 - r0) for (r0, q0), (r1, q1) in zip(pts, pts[1:]))

    @property
    def backward_wave_speed(self):
        """``|f'(rho_jam-)|``."""
        if self.congested_speed is not None:
            return self.congested_speed
        if self.is_piecewise_linear:
            return -self.slopes[-1]
        return self.free_flow_speed

    @property
    def max_wave_speed(self):
        """Largest characteristic speed magnitude; enters the CFL bound."""
        return max(self.free_flow_speed, self.backward_wave_speed)

    def to_dict(self) -> dict:
        if self.kind == GREENSHIELDS:
            return {"kind": GREENSHIELDS, "free_flow_speed": self.free_flow_speed,
                    "jam_density": self.jam_density}
        if self.kind == TRIANGULAR:
            return {"kind": TRIANGULAR, "free_flow_speed": self.free_flow_speed,
                    "backward_wave_speed": self.backward_wave_speed,
                    "jam_density": self.jam_density}
        return {"kind": PIECEWISE_LINEAR,
                "breakpoints": [[r, q] for r, q in self.breakpoints]}

    @classmethod
    def from_dict(cls, d: dict) -> "FundamentalDiagram":
        kind = d.get("kind", TRIANGULAR)
        if kind == TRIANGULAR:
            return cls.triangular(d["free_flow_speed"], d["backward_wave_speed"], d["jam_density"])
        if kind == PIECEWISE_LINEAR:
            return cls.piecewise_linear(d["breakpoints"])
        if kind == GREENSHIELDS:
            return cls.greenshields(d["free_flow_speed"], d["jam_density"])
        raise ValueError(f"unknown fundamental diagram kind {kind!r}")

    # -- scalar evaluation ----------------------------------------------------

    def _check(self, rho):
        if not (0 <= rho <= self.jam_density):
            raise DomainError(f"density {rho} outside [0, {self.jam_density}]")

    def _f(self, rho):
        if self.kind == GREENSHIELDS:
            return self.free_flow_speed * rho * (1 - rho / self.jam_density)
        pts = self.breakpoints
        i = bisect.bisect_right([p[0] for p in pts], rho) - 1
        i = min(max(i, 0), len(pts) - 2)
        (r0, q0), (r1, q1) = pts[i], pts[i + 1]
        if rho == r0:
            return q0
        if rho == r1:
            return q1
        return q0 + (q1 - q0) * (rho - r0) / (r1 - r0)

    def flow(self, rho):
        self._check(rho)
        return self._f(rho)

    def demand(self, rho):
        self._check(rho)
        return self.capacity if rho >= self.critical_density else self._f(rho)

    def supply(self, rho):
        self._check(rho)
        return self.capacity if rho <= self.critical_density else self._f(rho)

    def velocity(self, rho):
        self._check(rho)
        if rho == 0:
            return self.free_flow_speed
        return self._f(rho) / rho

    def inverse_congested(self, q):
        """Density on ``[rho_c, rho_jam]`` carrying flow ``q``."""
        if not (0 <= q <= self.capacity):
            raise DomainError(f"flow {q} outside [0, {self.capacity}]")
        if self.kind == GREENSHIELDS:
            disc = max(1 - 4 * q / (self.free_flow_speed * self.jam_density), 0)
            return self.jam_density * (1 + _sqrt(disc)) / 2
        pts = [p for p in self.breakpoints if p[0] >= self.critical_density]
        return _invert_monotone(pts[::-1], q)

    def inverse_free(self, q):
        """Density on ``[0, rho_c]`` carrying flow ``q``."""
        if not (0 <= q <= self.capacity):
            raise DomainError(f"flow {q} outside [0, {self.capacity}]")
        if self.kind == GREENSHIELDS:
            disc = max(1 - 4 * q / (self.free_flow_speed * self.jam_density), 0)
            return self.jam_density * (1 - _sqrt(disc)) / 2
        pts = [p for p in self.breakpoints if p[0] <= self.critical_density]
        return _invert_monotone(pts, q)

    # -- vectorised (unchecked) -------------------------------------------

    def flow_array(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        if self.kind == GREENSHIELDS:
            return self.free_flow_speed * rho * (1.0 - rho / self.jam_density)
        r = np.array([p[0] for p in self.breakpoints], dtype=float)
        q = np.array([p[1] for p in self.breakpoints], dtype=float)
        return np.interp(rho, r, q)

    def demand_array(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return np.where(rho >= self.critical_density, float(self.capacity), self.flow_array(rho))

    def supply_array(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return np.where(rho <= self.critical_density, float(self.capacity), self.flow_array(rho))


def _sqrt(x):
    try:
        return math.sqrt(x)
    except TypeError:  # pragma: no cover - exotic numeric types
        return x ** 0.5


def _invert_monotone(pts, q):
    # pts ordered so that flow is nondecreasing along the list
    for (r0, q0), (r1, q1) in zip(pts, pts[1:]):
        if q0 <= q <= q1:
            if q == q0:
                return r0
            if q == q1:
                return r1
            return r0 + (r1 - r0) * (q - q0) / (q1 - q0)
    raise DomainError(f"flow {q} not attained on the requested branch")


@dataclass(frozen=True)
class ShareRegularityReport:
    """Outcome of the linear-near-zero and non-vanishing-slope checks."""

    epsilon: float
    linear_near_zero: bool
    slopes_bounded: bool
    min_abs_slope: float
    details: str = ""

    @property
    def passed(self) -> bool:
        return self.linear_near_zero and self.slopes_bounded


def check_share_regularity(fd: FundamentalDiagram, epsilon) -> ShareRegularityReport:
    """Check ``f`` is affine on ``[0, epsilon]`` and ``|f'| >= epsilon`` everywhere.

    These are the diagram conditions under which path shares at link exits
    stay bounded away from zero with bounded total variation.
    For piecewise-linear diagrams the kinks are excluded from the slope check
    (one-sided slopes are used). A smooth concave diagram fails both tests
    since its derivative varies near zero and vanishes at the critical density.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not fd.is_piecewise_linear:
        return ShareRegularityReport(epsilon, False, False, 0.0,
                            "smooth diagram: derivative varies near 0 and vanishes at rho_c")
    first_kink = fd.breakpoints[1][0]
    linear = first_kink >= epsilon
    min_abs = min(abs(s) for s in fd.slopes)
    bounded = min_abs >= epsilon
    notes = []
    if not linear:
        notes.append(f"first kink at {first_kink} < {epsilon}")
    if not bounded:
        notes.append(f"min |slope| {min_abs} < {epsilon}")
    return ShareRegularityReport(epsilon, linear, bounded, min_abs, "; ".join(notes))
