"""Orlicz-space arithmetic on weighted samples.

A :class:`WeightedSample` is a finite measure sum_i m_i delta_{h_i}; every
continuous measure (P x L-bar, a kernel, ...) enters through a quadrature
rule that produces one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .entropy_core import theta, theta_star
from .jumps import _cells

YOUNG = {"theta": theta, "theta_star": theta_star}
BISECTION_STEPS = 200
MAX_DOUBLINGS = 2000


@dataclass(frozen=True)
class WeightedSample:
    values: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        m = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if v.shape != m.shape or v.ndim != 1:
            raise ValueError("values and masses must be matching 1-d arrays")
        if np.any(m < 0) or not np.isfinite(m.sum()):
            raise ValueError("masses must be nonnegative with finite total")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "masses", m)

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def with_values(self, values) -> "WeightedSample":
        return WeightedSample(values, self.masses)

    def integral(self, fn: Callable | None = None) -> float:
        v = self.values if fn is None else fn(self.values)
        return float(np.sum(np.where(self.masses > 0, v, 0.0) * self.masses))

    @classmethod
    def from_kernel(cls, h: Callable, spec, grid) -> "WeightedSample":
        """Values h(t, q) at the time-midpoint x kernel-node quadrature of r(t) dt L(dq)."""

        tt, qq, w = _cells(spec, grid)
        return cls(np.asarray(h(tt, qq), dtype=float).ravel(), w.ravel())


@dataclass(frozen=True)
class NormResult:
    value: float
    finite: bool

    def __float__(self):
        return self.value


def young_integral(h: WeightedSample, a: float, young: str = "theta") -> float:
    phi = YOUNG[young]
    with np.errstate(over="ignore"):
        return h.integral(lambda v: phi(np.abs(v) / a))


def luxemburg_norm(h: WeightedSample, young: str = "theta") -> NormResult:
    """inf{a > 0 : sum phi(|h_i| / a) m_i <= 1} by bisection.

    The upper end starts at max|h| and doubles until feasible; the search
    gives up (``finite=False``) after a bounded number of doublings.
    """
    if young not in YOUNG:
        raise ValueError(f"young must be one of {sorted(YOUNG)}")
    support = h.masses > 0
    top = float(np.max(np.abs(h.values[support]), initial=0.0))
    if top == 0.0:
        return NormResult(0.0, True)
    if not np.isfinite(top):
        return NormResult(np.inf, False)
    hi = top
    for _ in range(MAX_DOUBLINGS):
        if young_integral(h, hi, young) <= 1.0:
            break
        hi *= 2.0
    else:
        return NormResult(np.inf, False)
    lo = 0.0
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if young_integral(h, mid, young) <= 1.0:
            hi = mid
        else:
            lo = mid
    return NormResult(hi, True)


@dataclass(frozen=True)
class HolderCheck:
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-12) + 1e-300


def orlicz_holder_check(z: WeightedSample, u: WeightedSample) -> HolderCheck:
    """sum z u m  versus  2 ||z||_theta* ||u||_theta on a shared atom set."""
    if not np.array_equal(z.masses, u.masses):
        raise ValueError("z and u must share the base measure")
    lhs = z.with_values(z.values * u.values).integral()
    rhs = 2.0 * luxemburg_norm(z, "theta_star").value * luxemburg_norm(u, "theta").value
    return HolderCheck(lhs, rhs)


def energy_estimate(ell: WeightedSample) -> float:
    """sum theta*(|ell - 1|) m: finite exactly when the tilt has finite energy."""
    if np.any(ell.values < 0):
        raise ValueError("tilt must be nonnegative")
    return ell.integral(lambda v: theta_star(np.abs(v - 1.0)))


def energy_split(ell: WeightedSample) -> tuple[float, float]:
    """(sum 1{ell<=2}(ell-1)^2 m, sum 1{ell>2} ell log ell m).

    Their sum is within constant factors of :func:`energy_estimate`.
    """
    v = ell.values
    low = np.where(v <= 2, (v - 1.0) ** 2, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        high = np.where(v > 2, v * np.log(np.where(v > 2, v, 1.0)), 0.0)
    return ell.with_values(low).integral(), ell.with_values(high).integral()


@dataclass(frozen=True)
class HprMembership:
    small_moment: float
    large_moment: float

    @property
    def small_finite(self) -> bool:
        return bool(np.isfinite(self.small_moment))

    @property
    def large_finite(self) -> bool:
        return bool(np.isfinite(self.large_moment))

    @property
    def member(self) -> bool:
        return self.small_finite and self.large_finite


def hpr_membership(h: Callable, spec, grid, p: float, r: float) -> HprMembership:
    """Moments int 1{|q|<=1}|h|^p dL-bar and int 1{|q|>1}|h|^r dL-bar by quadrature.

    Non-finite contributions make the corresponding moment +inf.
    """

    tt, qq, w = _cells(spec, grid)
    vals = np.abs(np.asarray(h(tt, qq), dtype=float))
    small = np.sqrt(np.sum(qq * qq, axis=-1)) <= 1.0
    live = w > 0
    with np.errstate(over="ignore", invalid="ignore"):
        pw = np.where(small & live, vals ** p, 0.0)
        pr = np.where(~small & live, vals ** r, 0.0)
    return HprMembership(float(np.sum(pw * w)), float(np.sum(pr * w)))
