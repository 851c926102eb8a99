"""Jump case: finite-activity processes with Levy kernel r(t) dt L(dq).

Under the reference law R the canonical decomposition is

    X_t = X_0 + B_t + sum_{s<=t} dX_s - int_0^t int 1{|q|<=1} q L(dq) r(s) ds

and a tilt ell(t, q) >= 0 gives the law P with kernel ell r L and drift
B + int 1{|q|<=1} (ell - 1) q dL.  On a path with jumps (t_j, q_j):

    log Z+ = sum_{ell_j >= alpha} log ell_j - int_{ell >= alpha} (ell - 1) dL
             (compensated sum of log ell minus int theta(log ell))
    log Z- = sum_{0 < ell_j < alpha} log ell_j - int_{ell < alpha} (ell - 1) dL
    dP/dR  = dP0/dR0(X_0) Z+ Z-,  and 0 once a jump lands where ell = 0.

Space integrals use the kernel's quadrature rule (exact for atoms), time
integrals the midpoint rule on the grid cells.

Field callables ``f(t, q)`` receive ``t`` of some shape S and ``q`` of shape
S + (d,) and return an array of shape S.  Tilts depend on (t, q) only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _rng
from ._parallel import block_ranges, map_blocks
from .diffusion import ISResult, importance_summary
from .entropy_core import entropy_integrand, theta
from .estimates import DECOMPOSITION, PLUGIN, EntropyEstimate, mean_stderr
from .laws import PointMass, log_initial_ratio
from .path_model import CadlagPath, Ensemble, JumpEnsemble, TimeGrid, iter_blocks

DEFAULT_BLOCK = 8192
GAUSS_LEGENDRE_NODES = 16


# kernels ----------------------------------------------------------------------


class DiscreteKernel:
    """L = sum_k m_k delta_{a_k}; the quadrature is exact."""

    def __init__(self, atoms, masses):
        atoms = np.asarray(atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        masses = np.asarray(masses, dtype=float).ravel()
        if masses.size != atoms.shape[0]:
            raise ValueError("one mass per atom required")
        if np.any(masses < 0) or not np.all(np.isfinite(masses)):
            raise ValueError("masses must be finite and nonnegative")
        if np.any(np.all(atoms == 0, axis=1)):
            raise ValueError("the kernel lives on nonzero jumps")
        self.atoms = atoms
        self.masses = masses
        self.total_mass = float(masses.sum())
        self._cum = np.cumsum(masses) / self.total_mass if self.total_mass > 0 else None

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        idx = np.minimum(np.searchsorted(self._cum, u, side="right"), self.masses.size - 1)
        return self.atoms[idx]

    def quadrature(self):
        return self.atoms, self.masses

    def support_points(self) -> np.ndarray:
        return self.atoms[self.masses > 0]

    def __repr__(self):
        return f"DiscreteKernel(atoms={self.atoms.ravel().tolist()}, masses={self.masses.tolist()})"


def _gauss_legendre(a, b, n=GAUSS_LEGENDRE_NODES):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


class UniformKernel:
    """Total mass ``mass`` spread uniformly on [low, high] (one dimension).

    Quadrature: 16-point Gauss-Legendre on each piece of [low, high] cut at
    -1, 0 and 1, so integrands truncated at |q| = 1 are integrated exactly
    when polynomial on each piece.
    """

    def __init__(self, low: float, high: float, mass: float = 1.0):
        if not high > low:
            raise ValueError("need low < high")
        if mass < 0:
            raise ValueError("mass must be nonnegative")
        self.low, self.high, self.total_mass = float(low), float(high), float(mass)
        cuts = [c for c in (-1.0, 0.0, 1.0) if self.low < c < self.high]
        edges = [self.low, *cuts, self.high]
        nodes, weights = zip(*(_gauss_legendre(a, b) for a, b in zip(edges[:-1], edges[1:])))
        density = self.total_mass / (self.high - self.low)
        self._nodes = np.concatenate(nodes)[:, None]
        self._weights = np.concatenate(weights) * density

    dim = 1

    def sample(self, rng, size):
        return (self.low + (self.high - self.low) * rng.random(size))[:, None]

    def quadrature(self):
        return self._nodes, self._weights

    def support_points(self):
        return np.linspace(self.low, self.high, 1025)[:, None]

    def __repr__(self):
        return f"UniformKernel({self.low}, {self.high}, mass={self.total_mass})"


class TruncatedPowerKernel:
    """Symmetric c |q|^(-1-alpha) dq restricted to eps <= |q| <= q_max.

    A finite-activity stand-in for an infinite-activity stable-like kernel;
    ``truncation`` records the small-jump cutoff eps.
    """

    def __init__(self, alpha: float, eps: float, q_max: float, c: float = 1.0, nodes: int = 64):
        if not (0 < alpha < 2 and 0 < eps < q_max):
            raise ValueError("need 0 < alpha < 2 and 0 < eps < q_max")
        self.alpha, self.c, self.truncation, self.q_max = float(alpha), float(c), float(eps), float(q_max)
        # per sign: int_eps^qmax c q^(-1-alpha) dq
        self._half = c * (eps ** -alpha - q_max ** -alpha) / alpha
        self.total_mass = 2 * self._half
        # Gauss-Legendre in log q, split at 1
        pieces = [(np.log(eps), min(0.0, np.log(q_max)))] if eps < 1 else []
        if q_max > 1:
            pieces.append((max(0.0, np.log(eps)), np.log(q_max)))
        xs, ws = zip(*(_gauss_legendre(a, b, nodes) for a, b in pieces))
        s, w = np.exp(np.concatenate(xs)), np.concatenate(ws)
        w = w * c * s ** -alpha
        self._nodes = np.concatenate([s, -s])[:, None]
        self._weights = np.concatenate([w, w])

    dim = 1

    def sample(self, rng, size):
        u = rng.random(size)
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        a = self.alpha
        mag = (self.truncation ** -a - u * (self.truncation ** -a - self.q_max ** -a)) ** (-1 / a)
        return (sign * mag)[:, None]

    def quadrature(self):
        return self._nodes, self._weights

    def support_points(self):
        s = np.geomspace(self.truncation, self.q_max, 513)
        return np.concatenate([s, -s])[:, None]


# model ------------------------------------------------------------------------


@dataclass
class JumpSpec:
    """Reference jump law: kernel L, time intensity r(t), continuous drift B(t).

    ``rate`` is a number or a callable r(t); a callable needs ``rate_bound``
    (its supremum on [0, 1]) for thinning.  ``drift`` maps a time array of
    shape (m,) to (m, d) and must vanish at 0.
    """

    kernel: object
    rate: float | Callable = 1.0
    rate_bound: float | None = None
    drift: Callable | None = None
    initial_law: object = None
    name: str = "jumps"

    def __post_init__(self):
        if self.initial_law is None:
            self.initial_law = PointMass(np.zeros(self.kernel.dim))
        if self.initial_law.dim != self.kernel.dim:
            raise ValueError("initial law dimension mismatch")
        if callable(self.rate):
            if self.rate_bound is None:
                raise ValueError("a time-dependent rate needs rate_bound")
        else:
            if self.rate < 0:
                raise ValueError("rate must be nonnegative")
            self.rate_bound = float(self.rate) if self.rate_bound is None else self.rate_bound

    @property
    def dim(self) -> int:
        return self.kernel.dim

    @property
    def truncation(self):
        return getattr(self.kernel, "truncation", None)

    def r(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if callable(self.rate):
            out = np.broadcast_to(np.asarray(self.rate(t), dtype=float), t.shape)
        else:
            out = np.full(t.shape, float(self.rate))
        if np.any(out < 0):
            raise ValueError("negative jump intensity")
        return out

    def B(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.drift is None:
            return np.zeros(t.shape + (self.dim,))
        return np.broadcast_to(np.asarray(self.drift(t), dtype=float), t.shape + (self.dim,))

    def square_moment(self, grid: TimeGrid) -> float:
        """int (|q|^2 ^ 1) L(dq) r(t) dt; finite for every finite-activity kernel."""
        val = kernel_integral(self, grid, lambda t, q: np.minimum(np.sum(q * q, axis=-1), 1.0))
        if not np.isfinite(val):
            raise ValueError("square-moment integrability fails")
        return val


@dataclass
class TiltField:
    """Nonnegative tilt ell(t, q) of the reference Levy kernel.

    ``bound`` is an upper bound of ell on the kernel support, used as the
    thinning envelope; when omitted it is estimated on the support points
    and grid times.  ``initial_law`` is P0 (None: same as R0).
    """

    ell: Callable
    bound: float | None = None
    initial_law: object = None
    name: str = "ell"

    def __call__(self, t, q) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.broadcast_to(np.asarray(self.ell(t, q), dtype=float), t.shape)
        if np.any(out < 0) or np.any(np.isnan(out)):
            raise ValueError("tilt must be nonnegative")
        return out

    @classmethod
    def constant(cls, c: float, initial_law=None):
        c = float(c)
        return cls(lambda t, q: np.full(np.shape(t), c), bound=c, initial_law=initial_law, name=f"ell={c}")

    @classmethod
    def per_atom(cls, atoms, values, initial_law=None):
        """Piecewise-constant tilt taking ``values[k]`` at ``atoms[k]`` (1 elsewhere)."""
        atoms = np.asarray(atoms, dtype=float).reshape(len(values), -1)
        values = np.asarray(values, dtype=float)

        def ell(t, q):
            q = np.asarray(q, dtype=float)
            out = np.ones(q.shape[:-1])
            for a, v in zip(atoms, values):
                out = np.where(np.all(q == a, axis=-1), v, out)
            return out

        return cls(ell, bound=float(max(values.max(), 1.0)), initial_law=initial_law, name="ell=per-atom")

    def envelope(self, spec: JumpSpec, grid: TimeGrid) -> float:
        if self.bound is not None:
            return float(self.bound)
        pts = spec.kernel.support_points()
        times = np.union1d(grid.points, grid.midpoints)
        tt = np.broadcast_to(times[:, None], (times.size, pts.shape[0]))
        qq = np.broadcast_to(pts[None], tt.shape + (spec.dim,))
        m = float(np.max(self(tt, qq)))
        if not np.isfinite(m):
            raise ValueError("tilt is unbounded on the kernel support; pass TiltField(bound=...)")
        return m


# quadrature ---------------------------------------------------------------------


def _cells(spec, grid):
    nodes, w = spec.kernel.quadrature()
    tm = grid.midpoints
    tt = np.broadcast_to(tm[:, None], (tm.size, w.size))
    qq = np.broadcast_to(nodes[None], tt.shape + (spec.dim,))
    cell_w = (grid.dt * spec.r(tm))[:, None] * w[None, :]
    return tt, qq, cell_w


def kernel_integral(spec: JumpSpec, grid: TimeGrid, fn: Callable) -> float:
    """int_0^1 int fn(t, q) L(dq) r(t) dt by midpoint-in-time quadrature.

    Raises ValueError naming the first cell where the integrand is not
    finite (cells of zero weight are skipped).
    """
    tt, qq, cell_w = _cells(spec, grid)
    with np.errstate(all="ignore"):
        vals = np.asarray(fn(tt, qq), dtype=float)
    bad = ~np.isfinite(vals) & (cell_w > 0)
    if np.any(bad):
        i, k = np.argwhere(bad)[0]
        raise ValueError(f"non-finite integrand in cell t={tt[i, k]!r}, q={qq[i, k].tolist()}")
    return float(np.sum(np.where(cell_w > 0, vals, 0.0) * cell_w))


def _cumulative(spec, grid, fn, times) -> np.ndarray:
    """int_0^t int fn(s, q) L(dq) r(s) ds at each t in ``times``; fn returns (.., d)."""
    nodes, w = spec.kernel.quadrature()

    def density(s):
        ss = np.broadcast_to(s[:, None], (s.size, w.size))
        qq = np.broadcast_to(nodes[None], ss.shape + (spec.dim,))
        return np.einsum("mkd,k->md", fn(ss, qq), w) * spec.r(s)[:, None]

    pts = grid.points
    base = np.zeros((pts.size, spec.dim))
    np.cumsum(grid.dt[:, None] * density(grid.midpoints), axis=0, out=base[1:])
    times = np.asarray(times, dtype=float)
    j = np.clip(np.searchsorted(pts, times, side="right") - 1, 0, grid.n_intervals - 1)
    partial = (times - pts[j])[:, None] * density(0.5 * (pts[j] + times))
    return base[j] + partial


def _small(q):
    return np.sqrt(np.sum(q * q, axis=-1)) <= 1.0


class _DriftPart:
    """Continuous part t -> B(t) + Bhat(t) - small-jump compensator of ell L."""

    def __init__(self, spec, grid, tilt=None):
        self.spec, self.grid, self.tilt = spec, grid, tilt

    def __call__(self, times):
        spec, grid, tilt = self.spec, self.grid, self.tilt
        times = np.asarray(times, dtype=float)
        ell = (lambda t, q: 1.0) if tilt is None else tilt
        comp = _cumulative(spec, grid, lambda t, q: (_small(q) * ell(t, q))[..., None] * q, times)
        if tilt is None:
            return spec.B(times) - comp
        bhat = _cumulative(spec, grid, lambda t, q: (_small(q) * (tilt(t, q) - 1.0))[..., None] * q, times)
        return spec.B(times) + bhat - comp


# simulation ---------------------------------------------------------------------


def _thinning_block(spec: JumpSpec, tilt: TiltField | None, grid: TimeGrid, ids: range, seed: int,
                    law_tag: str, envelope: float) -> JumpEnsemble:
    n, d = len(ids), spec.dim
    kernel = spec.kernel
    dominating = spec.rate_bound * kernel.total_mass * envelope
    law = spec.initial_law
    if tilt is not None and tilt.initial_law is not None:
        law = tilt.initial_law
    x0 = np.empty((n, d))
    cand_t, cand_q, cand_u, counts = [], [], [], np.zeros(n, dtype=np.int64)
    for k, pid in enumerate(ids):
        x0[k] = law.sample(_rng.path_rng(seed, pid, _rng.INIT))
        if dominating <= 0:
            continue
        g_times = _rng.path_rng(seed, pid, _rng.TIMES)
        m = int(g_times.poisson(dominating))
        if m == 0:
            continue
        counts[k] = m
        cand_t.append(np.sort(g_times.random(m)))
        cand_q.append(kernel.sample(_rng.path_rng(seed, pid, _rng.MARKS), m))
        cand_u.append(_rng.path_rng(seed, pid, _rng.THINNING).random(m))
    if cand_t:
        t = np.concatenate(cand_t)
        q = np.concatenate(cand_q)
        u = np.concatenate(cand_u)
        ell = np.ones(t.size) if tilt is None else tilt(t, q)
        ratio = spec.r(t) * ell / (spec.rate_bound * envelope)
        if np.any(ratio > 1.0):
            i = int(np.argmax(ratio > 1.0))
            raise ValueError(f"thinning ratio {ratio[i]!r} > 1 at t={t[i]!r}: the dominating rate is too small")
        keep = (u < ratio) & (t > 0)
    else:
        t, q, keep = np.empty(0), np.empty((0, d)), np.empty(0, dtype=bool)
    owner = np.repeat(np.arange(n), counts)
    kept_per_path = np.bincount(owner[keep], minlength=n)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(kept_per_path, out=offsets[1:])
    meta = {"dominating_rate": dominating, "candidates": int(counts.sum()), "accepted": int(keep.sum()),
            "truncation": spec.truncation}
    return JumpEnsemble(grid, np.asarray(ids, dtype=np.int64), seed, law_tag,
                        x0=x0, jump_times=t[keep], jump_sizes=q[keep], jump_offsets=offsets,
                        drift_part=_DriftPart(spec, grid, tilt), metadata=meta)


def _concat(blocks: list[JumpEnsemble]) -> JumpEnsemble:
    first = blocks[0]
    if len(blocks) == 1:
        return first
    offsets = [np.zeros(1, dtype=np.int64)]
    total = 0
    for b in blocks:
        offsets.append(b.jump_offsets[1:] + total)
        total += b.jump_offsets[-1]
    meta = dict(first.metadata)
    meta["candidates"] = sum(b.metadata["candidates"] for b in blocks)
    meta["accepted"] = sum(b.metadata["accepted"] for b in blocks)
    return JumpEnsemble(first.grid, np.concatenate([b.path_ids for b in blocks]), first.seed, first.law_tag,
                        x0=np.concatenate([b.x0 for b in blocks]),
                        jump_times=np.concatenate([b.jump_times for b in blocks]),
                        jump_sizes=np.concatenate([b.jump_sizes for b in blocks]),
                        jump_offsets=np.concatenate(offsets), drift_part=first.drift_part, metadata=meta)


def iter_reference_jumps(spec, grid, n_paths, seed, *, block_size=DEFAULT_BLOCK, workers=1):
    fn = lambda ids: _thinning_block(spec, None, grid, ids, seed, "R", 1.0)  # noqa: E731
    return map_blocks(fn, block_ranges(n_paths, block_size), workers)


def iter_tilted_jumps(spec, tilt, grid, n_paths, seed, *, block_size=DEFAULT_BLOCK, workers=1):
    envelope = tilt.envelope(spec, grid)
    fn = lambda ids: _thinning_block(spec, tilt, grid, ids, seed, "P", envelope)  # noqa: E731
    return map_blocks(fn, block_ranges(n_paths, block_size), workers)


def simulate_reference_jumps(spec: JumpSpec, grid: TimeGrid, n_paths: int, seed: int, *,
                             block_size=DEFAULT_BLOCK, workers=1) -> JumpEnsemble:
    """Reference paths by thinning a homogeneous Poisson process of rate sup r * |L|."""
    return _concat(list(iter_reference_jumps(spec, grid, n_paths, seed, block_size=block_size, workers=workers)))


def simulate_tilted_jumps(spec: JumpSpec, tilt: TiltField, grid: TimeGrid, n_paths: int, seed: int, *,
                          block_size=DEFAULT_BLOCK, workers=1) -> JumpEnsemble:
    """Paths with kernel ell r L: candidates are accepted with probability r ell / (sup r * sup ell)."""
    return _concat(list(iter_tilted_jumps(spec, tilt, grid, n_paths, seed, block_size=block_size, workers=workers)))


# densities ----------------------------------------------------------------------


def compensated_integral(h: Callable, path: CadlagPath, spec: JumpSpec) -> float:
    """sum over jumps of h(t, dX_t) minus int h dL on the path's grid."""
    if path.jumps:
        t = np.array([j.time for j in path.jumps])
        q = np.array([j.size for j in path.jumps])
        s = float(np.sum(h(t, q)))
    else:
        s = 0.0
    return s - kernel_integral(spec, path.grid, h)


def compensated_integrals(h: Callable, ensemble: JumpEnsemble, spec: JumpSpec) -> np.ndarray:
    """:func:`compensated_integral` for every path of an ensemble (grid = ensemble grid)."""
    sums = np.bincount(ensemble.owner, weights=h(ensemble.jump_times, ensemble.jump_sizes), minlength=len(ensemble))
    return sums - kernel_integral(spec, ensemble.grid, h)


@dataclass(frozen=True)
class JumpWeight:
    log_z_plus: float
    log_z_minus: float
    tau_minus_hit: bool
    log_init: float

    @property
    def log_z(self) -> float:
        if self.tau_minus_hit or self.log_init == -np.inf:
            return -np.inf
        return self.log_init + self.log_z_plus + self.log_z_minus


@dataclass
class JumpWeights:
    path_ids: np.ndarray
    n_jumps: np.ndarray
    log_z_plus: np.ndarray
    log_z_minus: np.ndarray
    tau_minus_hit: np.ndarray
    log_init: np.ndarray

    @property
    def log_z(self) -> np.ndarray:
        z = self.log_init + self.log_z_plus + self.log_z_minus
        return np.where(self.tau_minus_hit | (self.log_init == -np.inf), -np.inf, z)

    def __getitem__(self, i) -> JumpWeight:
        return JumpWeight(float(self.log_z_plus[i]), float(self.log_z_minus[i]), bool(self.tau_minus_hit[i]),
                          float(self.log_init[i]))

    def __len__(self):
        return self.path_ids.size

    @classmethod
    def concat(cls, parts):
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in
                     ("path_ids", "n_jumps", "log_z_plus", "log_z_minus", "tau_minus_hit", "log_init")))


def _safe_log(x):
    with np.errstate(divide="ignore"):
        return np.log(np.where(x > 0, x, 1.0))


def ledger_integrals(tilt: TiltField, spec: JumpSpec, grid: TimeGrid, alpha: float = 0.5):
    """Deterministic parts of the two ledgers (state-free tilt).

    Returns (compensator of 1{ell>=alpha} log ell, int 1{ell>=alpha} theta(log ell),
    int 1{ell<alpha} (ell - 1)).
    """
    def upper_log(t, q):
        ell = tilt(t, q)
        return np.where(ell >= alpha, _safe_log(ell), 0.0)

    def upper_theta(t, q):
        ell = tilt(t, q)
        return np.where(ell >= alpha, theta(_safe_log(ell)), 0.0)

    def lower(t, q):
        ell = tilt(t, q)
        return np.where(ell < alpha, ell - 1.0, 0.0)

    return (kernel_integral(spec, grid, upper_log), kernel_integral(spec, grid, upper_theta),
            kernel_integral(spec, grid, lower))


def _jump_weights_block(ens: JumpEnsemble, tilt: TiltField, spec: JumpSpec, alpha: float) -> JumpWeights:
    if not 0 < alpha < 1:
        raise ValueError("ledger threshold must lie in (0, 1)")
    n = len(ens)
    ell = tilt(ens.jump_times, ens.jump_sizes)
    owner = ens.owner
    log_ell = _safe_log(ell)
    upper = ell >= alpha
    lower = (ell > 0) & ~upper
    comp_log, int_theta, int_lower = ledger_integrals(tilt, spec, ens.grid, alpha)
    plus = np.bincount(owner, weights=np.where(upper, log_ell, 0.0), minlength=n) - comp_log - int_theta
    minus = np.bincount(owner, weights=np.where(lower, log_ell, 0.0), minlength=n) - int_lower
    hit = np.bincount(owner, weights=(ell == 0).astype(float), minlength=n) > 0
    log_init = log_initial_ratio(tilt.initial_law, spec.initial_law, ens.x0)
    return JumpWeights(ens.path_ids, ens.n_jumps, plus, minus, hit, log_init)


def jump_weights(ensembles, tilt: TiltField, spec: JumpSpec, alpha: float = 0.5) -> JumpWeights:
    """Z+/Z- ledgers of every path, over an ensemble or an iterable of blocks."""
    return JumpWeights.concat([_jump_weights_block(e, tilt, spec, alpha) for e in iter_blocks(ensembles)])


def log_density_jump(path: CadlagPath, tilt: TiltField, spec: JumpSpec, alpha: float = 0.5) -> JumpWeight:
    """Z+/Z- ledgers of one path; quadrature on the path's own grid."""
    if path.jumps:
        t = np.array([j.time for j in path.jumps])
        q = np.array([j.size for j in path.jumps])
        ell = tilt(t, q)
    else:
        ell = np.empty(0)
    log_ell = _safe_log(ell)
    comp_log, int_theta, int_lower = ledger_integrals(tilt, spec, path.grid, alpha)
    plus = float(np.sum(log_ell[ell >= alpha])) - comp_log - int_theta
    minus = float(np.sum(log_ell[(ell > 0) & (ell < alpha)])) - int_lower
    log_init = float(log_initial_ratio(tilt.initial_law, spec.initial_law, path.values[:1])[0])
    return JumpWeight(plus, minus, bool(np.any(ell == 0)), log_init)


def _check_product_form(tilt, spec, grid):
    pts = spec.kernel.support_points()
    times = np.union1d(grid.points, grid.midpoints)
    tt = np.broadcast_to(times[:, None], (times.size, pts.shape[0]))
    qq = np.broadcast_to(pts[None], tt.shape + (spec.dim,))
    if np.min(tilt(tt, qq)) <= 0:
        raise ValueError("product form refused: ell vanishes on the kernel support")

    def upper_abs_log(t, q):
        ell = tilt(t, q)
        return np.where(ell >= 0.5, np.abs(_safe_log(ell)), 0.0)

    kernel_integral(spec, grid, upper_abs_log)


def alt_product_densities(ensemble: JumpEnsemble, tilt: TiltField, spec: JumpSpec) -> np.ndarray:
    """dP0/dR0(X_0) exp(-int (ell - 1) dL) prod_j ell(t_j, q_j) for every path.

    Only meaningful when ell is bounded away from 0 on the kernel support;
    otherwise raises ValueError.
    """
    _check_product_form(tilt, spec, ensemble.grid)
    compensator = kernel_integral(spec, ensemble.grid, lambda t, q: tilt(t, q) - 1.0)
    prod = np.ones(len(ensemble))
    np.multiply.at(prod, ensemble.owner, tilt(ensemble.jump_times, ensemble.jump_sizes))
    ratio = np.exp(log_initial_ratio(tilt.initial_law, spec.initial_law, ensemble.x0))
    return ratio * np.exp(-compensator) * prod


def alt_product_density(path: CadlagPath, tilt: TiltField, spec: JumpSpec) -> float:
    _check_product_form(tilt, spec, path.grid)
    compensator = kernel_integral(spec, path.grid, lambda t, q: tilt(t, q) - 1.0)
    prod = 1.0
    for j in path.jumps:
        prod *= float(tilt(np.array([j.time]), j.size[None])[0])
    ratio = float(np.exp(log_initial_ratio(tilt.initial_law, spec.initial_law, path.values[:1])[0]))
    return ratio * np.exp(-compensator) * prod


# martingale check ------------------------------------------------------------------


@dataclass(frozen=True)
class JumpMartingaleReport:
    mean: float
    stderr: float
    n: int
    killed_fraction: float
    sigmas: float

    @property
    def flagged(self) -> bool:
        return abs(self.mean - 1.0) > self.sigmas * self.stderr

    @property
    def supermartingale_ok(self) -> bool:
        return self.mean <= 1.0 + self.sigmas * self.stderr


def exponential_martingale_values(h: Callable, ensemble: JumpEnsemble, spec: JumpSpec) -> np.ndarray:
    """Z^h_1 per path for an extended-valued integrand h (may be -inf).

    Split at h = -1: the part h >= -1 enters exp(h . compensated - int theta(h)),
    the part h < -1 enters exp(sum h - int (e^h - 1)), and a jump with
    h = -inf sets Z to 0.
    """
    n = len(ensemble)
    hj = np.asarray(h(ensemble.jump_times, ensemble.jump_sizes), dtype=float)
    owner = ensemble.owner

    def h_plus(t, q):
        v = np.asarray(h(t, q), dtype=float)
        return np.where(v >= -1.0, v, 0.0)

    def h_minus_exp(t, q):
        v = np.asarray(h(t, q), dtype=float)
        with np.errstate(over="ignore"):
            return np.where(v < -1.0, np.exp(v) - 1.0, 0.0)

    up = hj >= -1.0
    killed = np.bincount(owner, weights=np.isneginf(hj).astype(float), minlength=n) > 0
    low_finite = (~up) & np.isfinite(hj)
    log_plus = (np.bincount(owner, weights=np.where(up, hj, 0.0), minlength=n)
                - kernel_integral(spec, ensemble.grid, h_plus)
                - kernel_integral(spec, ensemble.grid, lambda t, q: theta(h_plus(t, q))))
    log_minus = (np.bincount(owner, weights=np.where(low_finite, hj, 0.0), minlength=n)
                 - kernel_integral(spec, ensemble.grid, h_minus_exp))
    return np.where(killed, 0.0, np.exp(log_plus + log_minus))


def exp_martingale_jump_check(h: Callable, spec: JumpSpec, grid: TimeGrid, n_paths: int, seed: int, *,
                              sigmas: float = 4.0, block_size=DEFAULT_BLOCK, workers=1) -> JumpMartingaleReport:
    """Monte Carlo mean of Z^h_1 under the reference law; flagged beyond ``sigmas`` stderr of 1."""
    z, killed = [], 0
    for ens in iter_reference_jumps(spec, grid, n_paths, seed, block_size=block_size, workers=workers):
        zb = exponential_martingale_values(h, ens, spec)
        z.append(zb)
    z = np.concatenate(z)
    killed = int(np.sum(z == 0.0))
    mean, se = mean_stderr(z)
    return JumpMartingaleReport(mean, se, z.size, killed / z.size, sigmas)


# entropy ---------------------------------------------------------------------------


def decomposition_integral(tilt: TiltField, spec: JumpSpec, grid: TimeGrid) -> float:
    """int (ell log ell - ell + 1) dL, the integrand being 1 where ell = 0."""
    return kernel_integral(spec, grid, lambda t, q: entropy_integrand(tilt(t, q)))


def entropy_decomposition_jump(ensemble_P, tilt: TiltField, spec: JumpSpec, h0: float) -> EntropyEstimate:
    """h0 + E_P int (ell log ell - ell + 1) dL.

    The tilt is state-free, so the pathwise integral is the same on every
    path and the estimate carries no Monte Carlo error.
    """
    n = sum(len(e) for e in iter_blocks(ensemble_P))
    grid = ensemble_P.grid if isinstance(ensemble_P, Ensemble) else None
    if grid is None:
        raise TypeError("pass a materialised ensemble")
    value = decomposition_integral(tilt, spec, grid)
    return EntropyEstimate(h0 + value, 0.0, n, DECOMPOSITION)


def plugin_estimate_jump(w: JumpWeights) -> EntropyEstimate:
    ok = np.isfinite(w.log_z)
    return EntropyEstimate.from_samples(w.log_z[ok], PLUGIN, n_excluded=int((~ok).sum()))


def entropy_plugin_jump(ensemble_P, tilt: TiltField, spec: JumpSpec) -> EntropyEstimate:
    """Mean of log dP/dR over tilted paths; paths that hit tau- are excluded and counted."""
    return plugin_estimate_jump(jump_weights(ensemble_P, tilt, spec))


def importance_sample_jump(ensemble_R, tilt: TiltField, spec: JumpSpec, f: Callable, ess_floor=0.01) -> ISResult:
    logs, fs = [], []
    for ens in iter_blocks(ensemble_R):
        logs.append(_jump_weights_block(ens, tilt, spec, 0.5).log_z)
        fs.append(np.asarray(f(ens), dtype=float))
    return importance_summary(np.concatenate(logs), np.concatenate(fs), ess_floor)


# tau- ---------------------------------------------------------------------------


def tau_minus_census(ensemble: JumpEnsemble, tilt: TiltField, levels=(2, 4, 8, 16)) -> dict[int, int]:
    """Number of paths with a jump where ell < 1/n, for each n in ``levels``."""
    ell = tilt(ensemble.jump_times, ensemble.jump_sizes)
    out = {}
    for lev in levels:
        hits = np.bincount(ensemble.owner, weights=(ell < 1.0 / lev).astype(float), minlength=len(ensemble))
        out[int(lev)] = int(np.sum(hits > 0))
    return out


@dataclass(frozen=True)
class TauChainLink:
    """P(some jump has ell <= e^-j) and the chain of upper bounds on it."""

    j: int
    hit_probability: float
    stderr: float
    expected_count: float
    level_bound: float
    half_bound: float
    sigmas: float

    @property
    def holds(self) -> bool:
        tol = 1e-12 * (1 + abs(self.half_bound))
        return (self.hit_probability <= self.expected_count + self.sigmas * self.stderr
                and self.expected_count <= self.level_bound + tol
                and self.level_bound <= self.half_bound + tol)


def tau_minus_bound_chain(ensemble: JumpEnsemble, tilt: TiltField, spec: JumpSpec, js=(1, 2, 3),
                          sigmas: float = 3.0) -> list[TauChainLink]:
    """Check P(hit) <= E_P int 1{ell<=e^-j} ell dL <= e^-j L(ell<=e^-j) <= e^-j L(ell<=1/2).

    The hit probability is taken under P: directly on a tilted ensemble, or
    through the density weights Z on a reference ensemble.
    """
    ell = tilt(ensemble.jump_times, ensemble.jump_sizes)
    if ensemble.law_tag == "R":
        weight = np.exp(jump_weights(ensemble, tilt, spec).log_z)
    else:
        weight = np.ones(len(ensemble))
    grid = ensemble.grid
    half_mass = kernel_integral(spec, grid, lambda t, q: (tilt(t, q) <= 0.5).astype(float))
    links = []
    for j in js:
        level = np.exp(-j)
        hit = np.bincount(ensemble.owner, weights=(ell <= level).astype(float), minlength=len(ensemble)) > 0
        p, se = mean_stderr(weight * hit)
        count = kernel_integral(spec, grid, lambda t, q: np.where(tilt(t, q) <= level, tilt(t, q), 0.0))
        level_mass = kernel_integral(spec, grid, lambda t, q: (tilt(t, q) <= level).astype(float))
        links.append(TauChainLink(int(j), p, se, count, level * level_mass, level * half_mass, sigmas))
    return links
