"""Scalar convex duality and relative entropy on finite spaces.

The Young pair used throughout the package is

    theta(a)      = exp(a) - a - 1
    theta_star(b) = (b + 1) log(b + 1) - b,   theta_star(-1) = 1,
                    theta_star(b) = inf for b < -1

i.e. the log-Laplace transform of a centred Poisson(1) variable and its
convex conjugate.  Both are evaluated by a truncated Taylor series close to
the origin, where the closed forms lose all their digits to cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import xlogy

SERIES_CUTOFF = 1e-4


def _as_float(x, like):
    return float(x) if np.ndim(like) == 0 else x


def theta(a):
    """exp(a) - a - 1, elementwise; nonnegative and convex."""
    a = np.asarray(a, dtype=float)
    small = np.abs(a) < SERIES_CUTOFF
    with np.errstate(over="ignore"):
        direct = np.expm1(a) - a
    s = np.where(small, a, 0.0)
    series = s * s * (0.5 + s * (1 / 6 + s * (1 / 24 + s / 120)))
    return _as_float(np.where(small, series, direct), a)


def theta_star(b):
    """Convex conjugate of :func:`theta`, with values in [0, inf]."""
    b = np.asarray(b, dtype=float)
    small = np.abs(b) < SERIES_CUTOFF
    inside = b > -1
    with np.errstate(divide="ignore", invalid="ignore"):
        bb = np.where(inside, b, 0.0)
        direct = (bb + 1.0) * np.log1p(bb) - bb
    s = np.where(small, b, 0.0)
    series = s * s * (0.5 + s * (-1 / 6 + s * (1 / 12 + s * (-1 / 20 + s / 30))))
    out = np.where(small, series, direct)
    out = np.where(b == -1, 1.0, out)
    out = np.where(b < -1, np.inf, out)
    return _as_float(out, b)


def entropy_integrand(ell):
    """ell log ell - ell + 1 with the value 1 at ell = 0.

    Equals ``theta_star(ell - 1)``; this form keeps full relative accuracy
    for tiny ell.
    """
    ell = np.asarray(ell, dtype=float)
    if np.any(ell < 0):
        raise ValueError("entropy integrand needs ell >= 0")
    return _as_float(xlogy(ell, ell) - ell + 1.0, ell)


def fenchel_gap(a, b):
    """Slack in  a*b <= (a log a - a + 1) + (exp(b) - 1).

    Conventions 0 log 0 = 0, exp(-inf) = 0 and -inf * 0 = 0.  For a > 0 the
    slack is rewritten as ``a * theta(b - log a)``, which is exactly
    nonnegative in floating point and vanishes iff a = exp(b).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 0):
        raise ValueError("fenchel_gap needs a >= 0")
    a, b = np.broadcast_arrays(a, b)
    pos = a > 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        y = np.where(pos, b - np.log(np.where(pos, a, 1.0)), 0.0)
        gap_pos = a * theta(y)
    gap_zero = np.exp(b)
    out = np.where(pos, gap_pos, gap_zero)
    # a > 0 with b = -inf: the left side is -inf, the slack infinite
    out = np.where(pos & np.isneginf(b), np.inf, out)
    return _as_float(out, a)


@dataclass(frozen=True)
class DiscreteDist:
    """Probability vector on a finite labelled set."""

    labels: tuple
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        labels = tuple(self.labels)
        if probs.ndim != 1 or len(labels) != probs.size:
            raise ValueError("labels and probabilities must have equal length")
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate labels")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ValueError("probabilities must be finite and nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_mapping(cls, m: Mapping) -> "DiscreteDist":
        return cls(tuple(m), np.array(list(m.values()), dtype=float))

    @classmethod
    def from_weights(cls, weights: Sequence[float], labels=None) -> "DiscreteDist":
        """Normalise nonnegative weights; labels default to 0..n-1."""
        w = np.asarray(weights, dtype=float)
        if labels is None:
            labels = tuple(range(w.size))
        p = w / w.sum()
        # push the residual rounding onto the largest atom
        p[np.argmax(p)] += 1.0 - p.sum()
        return cls(tuple(labels), p)

    def aligned(self, labels: Sequence) -> np.ndarray:
        index = {lab: i for i, lab in enumerate(self.labels)}
        return self.probs[[index[lab] for lab in labels]]


def _align(p: DiscreteDist, r: DiscreteDist):
    if set(p.labels) != set(r.labels):
        raise ValueError("distributions live on different label sets")
    return p.probs, r.aligned(p.labels)


def kl_divergence(p: DiscreteDist, r: DiscreteDist) -> float:
    """sum_i p_i log(p_i / r_i); +inf unless p << r."""
    pv, rv = _align(p, r)
    if np.any((pv > 0) & (rv == 0)):
        return np.inf
    mask = pv > 0
    return float(np.sum(pv[mask] * np.log(pv[mask] / rv[mask])))


def _logsumexp(x, b=None):
    # log sum b_i exp(x_i) for tiny vectors; scipy's version dominates the cost here
    if b is not None:
        with np.errstate(divide="ignore"):
            x = x + np.log(b)
    m = np.max(x)
    if not np.isfinite(m):
        return m
    return m + np.log(np.sum(np.exp(x - m)))


def _u_vector(u, labels) -> np.ndarray:
    if isinstance(u, Mapping):
        return np.array([u[lab] for lab in labels], dtype=float)
    u = np.asarray(u, dtype=float)
    if u.shape != (len(labels),):
        raise ValueError("u must have one value per atom")
    return u


def _dv_value(u, pv, rv):
    with np.errstate(invalid="ignore"):
        terms = np.where(pv > 0, pv * u, 0.0)
    lin = terms.sum()
    if np.isneginf(lin):
        return -np.inf
    with np.errstate(divide="ignore"):
        lse = _logsumexp(u, rv)
    return float(lin - lse)


def dv_objective(u, p: DiscreteDist, r: DiscreteDist) -> float:
    """int u dP - log int exp(u) dR  (u may take the value -inf)."""
    pv, rv = _align(p, r)
    return _dv_value(_u_vector(u, p.labels), pv, rv)


def optimal_potential(p: DiscreteDist, r: DiscreteDist) -> np.ndarray:
    """log(dp/dr) on {p > 0}, -inf elsewhere, aligned with ``p.labels``."""
    pv, rv = _align(p, r)
    with np.errstate(divide="ignore"):
        return np.where(pv > 0, np.log(pv) - np.log(rv), -np.inf)


@dataclass(frozen=True)
class SearchConfig:
    max_iter: int = 500
    grad_tol: float = 1e-14
    divergence_cap: float = 1e3


@dataclass(frozen=True)
class DVSearchResult:
    value: float
    u: np.ndarray = field(repr=False)
    iterations: int
    converged: bool
    diverged: bool


def dv_supremum(p: DiscreteDist, r: DiscreteDist, search: SearchConfig = SearchConfig()) -> DVSearchResult:
    """Maximise the Donsker-Varadhan objective over potentials u, from u = 0.

    Damped Newton ascent.  With q = softmax_r(u) the gradient is p - q and the
    Hessian -(diag(q) - q q^T) is inverted on the non-constant directions by
    the step p/q - 1.  Coordinates with q = 0 but p > 0 (mass where r has
    none) get an unbounded step and make the objective pass
    ``divergence_cap``, which is reported as ``diverged``.
    """
    pv, rv = _align(p, r)
    u = np.zeros(pv.size)
    value = _dv_value(u, pv, rv)
    log_r = np.log(np.where(rv > 0, rv, 1.0))
    log_r[rv == 0] = -np.inf
    it = 0
    for it in range(1, search.max_iter + 1):
        log_q = log_r + u - _logsumexp(log_r + u)
        q = np.exp(log_q)
        grad = pv - q
        if np.max(np.abs(grad)) <= search.grad_tol:
            return DVSearchResult(value, u, it - 1, True, False)
        with np.errstate(divide="ignore"):
            step = np.where(q > 0, pv / np.where(q > 0, q, 1.0) - 1.0, np.inf)
        step_max = 1.0 + np.max(np.abs(u))
        step = np.clip(step, -step_max, step_max)
        slope = float(grad @ step)
        t = 1.0
        while True:
            trial = u + t * step
            trial_value = _dv_value(trial, pv, rv)
            if trial_value >= value + 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        if trial_value < value:
            # no ascent left at machine precision
            return DVSearchResult(value, u, it, True, False)
        u, value = trial, trial_value
        if value > search.divergence_cap:
            return DVSearchResult(value, u, it, False, True)
    return DVSearchResult(value, u, it, False, False)
