"""Continuous case: Euler-Maruyama reference and drift-tilted laws, Girsanov
log-densities, the exponential supermartingale, and entropy estimators.

The reference law solves  dX = b(t, X) dt + sigma(t, X) dW  with bracket
A(dt) = a(t, X) dt, a = sigma sigma^T.  A perturbation beta changes the
drift to b + a beta, and on the grid

    log dP/dR = log dP0/dR0(X_0) + sum_i beta_i . dM^R_i - 1/2 sum_i beta_i . a_i beta_i dt_i

with beta_i, a_i read at the left end of each step and dM^R = dX - b dt the
reference martingale increment.

Coefficient callables take ``(t, x)`` with ``x`` of shape (n, d) and may
return anything that broadcasts: the drift and beta to (n, d), sigma and a
to (n, d, d).  A scalar sigma or a means a multiple of the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import _rng
from ._parallel import block_ranges, map_blocks
from .estimates import DECOMPOSITION, PLUGIN, EntropyEstimate, mean_stderr
from .laws import log_initial_ratio
from .path_model import MAX_DIM, CadlagPath, DiffusionEnsemble, Ensemble, TimeGrid, iter_blocks

DEFAULT_BLOCK = 2048


def _vector_field(val, n, d):
    return np.broadcast_to(np.asarray(val, dtype=float), (n, d))


def _matrix_field(val, n, d):
    arr = np.asarray(val, dtype=float)
    if arr.ndim == 0:
        return arr * np.eye(d)
    if d == 1 and arr.shape in ((n,), (n, 1)):
        return arr.reshape(n, 1, 1)
    if arr.shape == (d, d) or arr.shape == (n, d, d):
        return arr
    raise ValueError(f"matrix field of shape {arr.shape} does not fit (n={n}, d={d})")


def _matvec(m, v):
    if m.ndim == 2:
        return v @ m.T
    return np.einsum("nij,nj->ni", m, v)


@dataclass
class DiffusionSpec:
    """Reference SDE  dX = drift dt + sigma dW  with X_0 ~ initial_law."""

    dim: int
    drift: Callable
    sigma: Callable
    initial_law: object
    diffusion_matrix: Callable | None = None
    name: str = "diffusion"

    def __post_init__(self):
        if not 1 <= self.dim <= MAX_DIM:
            raise ValueError(f"dimension must be in 1..{MAX_DIM}")
        if self.initial_law.dim != self.dim:
            raise ValueError("initial law dimension mismatch")

    def b(self, t, x):
        return _vector_field(self.drift(t, x), x.shape[0], self.dim)

    def s(self, t, x):
        return _matrix_field(self.sigma(t, x), x.shape[0], self.dim)

    def a(self, t, x):
        if self.diffusion_matrix is not None:
            return _matrix_field(self.diffusion_matrix(t, x), x.shape[0], self.dim)
        s = self.s(t, x)
        if s.ndim == 2:
            return s @ s.T
        return np.einsum("nik,njk->nij", s, s)

    def check(self, times, states, tol: float = 1e-10) -> None:
        """Verify a = sigma sigma^T, symmetric PSD, at the given (t, x) samples."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        for t in np.atleast_1d(times):
            s = np.broadcast_to(self.s(t, states), (states.shape[0], self.dim, self.dim))
            a = np.broadcast_to(self.a(t, states), s.shape)
            ss = np.einsum("nik,njk->nij", s, s)
            if np.max(np.abs(ss - a)) > tol:
                raise ValueError(f"sigma sigma^T differs from a at t={t}")
            if np.max(np.abs(a - np.swapaxes(a, 1, 2))) > tol:
                raise ValueError(f"a is not symmetric at t={t}")
            if np.min(np.linalg.eigvalsh(a)) < -tol:
                raise ValueError(f"a is not positive semi-definite at t={t}")

    @classmethod
    def brownian(cls, initial_law, drift=0.0, scale=1.0, name="brownian"):
        """Constant-coefficient model; ``drift`` a vector, ``scale`` scalar or matrix."""
        d = initial_law.dim
        b = np.broadcast_to(np.asarray(drift, dtype=float), (d,)).copy()
        s = np.asarray(scale, dtype=float)
        s = s * np.eye(d) if s.ndim == 0 else s
        return cls(d, lambda t, x: b, lambda t, x: s, initial_law, name=name)


@dataclass
class DriftPerturbation:
    """Field beta(t, x) tilting the drift by a beta; optional target initial law."""

    beta: Callable
    initial_law: object = None
    name: str = "beta"

    def __call__(self, t, x):
        return _vector_field(self.beta(t, x), x.shape[0], x.shape[1])

    @classmethod
    def constant(cls, c, dim=1, initial_law=None):
        v = np.broadcast_to(np.asarray(c, dtype=float), (dim,)).copy()
        return cls(lambda t, x: v, initial_law, name=f"beta={v.tolist()}")


@dataclass(frozen=True)
class ContinuousWeight:
    stoch_integral: float
    energy: float
    log_init: float

    @property
    def log_z(self) -> float:
        if self.log_init == -np.inf:
            return -np.inf
        return self.stoch_integral - 0.5 * self.energy + self.log_init


@dataclass
class ContinuousWeights:
    """Per-path weight ledgers of an ensemble (arrays of length n)."""

    path_ids: np.ndarray
    stoch_integral: np.ndarray
    energy: np.ndarray
    log_init: np.ndarray
    exploded: np.ndarray

    @property
    def log_z(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            z = self.stoch_integral - 0.5 * self.energy + self.log_init
        return np.where(self.log_init == -np.inf, -np.inf, z)

    def __getitem__(self, i) -> ContinuousWeight:
        return ContinuousWeight(float(self.stoch_integral[i]), float(self.energy[i]), float(self.log_init[i]))

    def __len__(self):
        return self.path_ids.size

    @classmethod
    def concat(cls, parts: list["ContinuousWeights"]) -> "ContinuousWeights":
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in
                     ("path_ids", "stoch_integral", "energy", "log_init", "exploded")))


# simulation ---------------------------------------------------------------


def _euler_block(spec: DiffusionSpec, beta: DriftPerturbation | None, grid: TimeGrid,
                 ids: range, seed: int, law_tag: str) -> DiffusionEnsemble:
    n, d, steps = len(ids), spec.dim, grid.n_intervals
    law = spec.initial_law
    if beta is not None and beta.initial_law is not None:
        law = beta.initial_law
    x = np.empty((n, d))
    noise = np.empty((n, steps * d))
    for k, pid in enumerate(ids):
        x[k] = law.sample(_rng.path_rng(seed, pid, _rng.INIT))
        _rng.path_rng(seed, pid, _rng.NOISE).standard_normal(out=noise[k])
    noise = np.ascontiguousarray(noise.reshape(n, steps, d).transpose(1, 0, 2))
    values = np.empty((steps + 1, n, d))
    dm = np.empty((steps, n, d))
    values[0] = x
    t, dt = grid.left, grid.dt
    sq = np.sqrt(dt)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(steps):
            drift = spec.b(t[i], x)
            eps = _matvec(spec.s(t[i], x), noise[i]) * sq[i]
            if beta is None:
                dm[i] = eps
            else:
                shift = _matvec(spec.a(t[i], x), beta(t[i], x))
                drift = drift + shift
                dm[i] = shift * dt[i] + eps
            x = x + drift * dt[i] + eps
            values[i + 1] = x
    return DiffusionEnsemble(grid, np.asarray(ids, dtype=np.int64), seed, law_tag,
                             values=values, martingale_increments=dm)


def iter_reference(spec, grid, n_paths, seed, *, block_size=DEFAULT_BLOCK, workers=1):
    """Yield the reference ensemble in blocks of ``block_size`` paths."""
    fn = lambda ids: _euler_block(spec, None, grid, ids, seed, "R")  # noqa: E731
    return map_blocks(fn, block_ranges(n_paths, block_size), workers)


def iter_tilted(spec, beta, grid, n_paths, seed, *, block_size=DEFAULT_BLOCK, workers=1):
    fn = lambda ids: _euler_block(spec, beta, grid, ids, seed, "P")  # noqa: E731
    return map_blocks(fn, block_ranges(n_paths, block_size), workers)


def _concat(blocks: list[DiffusionEnsemble]) -> DiffusionEnsemble:
    first = blocks[0]
    if len(blocks) == 1:
        return first
    return DiffusionEnsemble(first.grid, np.concatenate([b.path_ids for b in blocks]), first.seed, first.law_tag,
                             values=np.concatenate([b.values for b in blocks], axis=1),
                             martingale_increments=np.concatenate([b.martingale_increments for b in blocks], axis=1))


def simulate_reference(spec: DiffusionSpec, grid: TimeGrid, n_paths: int, seed: int, *,
                       block_size=DEFAULT_BLOCK, workers=1) -> DiffusionEnsemble:
    """Euler-Maruyama paths of the reference law, held in memory."""
    return _concat(list(iter_reference(spec, grid, n_paths, seed, block_size=block_size, workers=workers)))


def simulate_tilted(spec: DiffusionSpec, beta: DriftPerturbation, grid: TimeGrid, n_paths: int, seed: int, *,
                    block_size=DEFAULT_BLOCK, workers=1) -> DiffusionEnsemble:
    """Euler-Maruyama paths with drift b + a beta (and X_0 from beta's initial law, if any)."""
    return _concat(list(iter_tilted(spec, beta, grid, n_paths, seed, block_size=block_size, workers=workers)))


# densities ----------------------------------------------------------------


def _reference_increments(spec, grid, values):
    """dX - b dt along time-major (N + 1, n, d) values."""
    dx = np.diff(values, axis=0)
    t, dt = grid.left, grid.dt
    for i in range(grid.n_intervals):
        dx[i] -= spec.b(t[i], values[i]) * dt[i]
    return dx


def _ledgers(spec, beta, grid, values, dm, checkpoints=()):
    n = values.shape[1]
    stoch = np.zeros(n)
    energy = np.zeros(n)
    snaps = {}
    t, dt = grid.left, grid.dt
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(grid.n_intervals):
            if i in checkpoints:
                snaps[i] = (stoch.copy(), energy.copy())
            x = values[i]
            bi = beta(t[i], x)
            stoch += np.sum(bi * dm[i], axis=1)
            energy += np.sum(bi * _matvec(spec.a(t[i], x), bi), axis=1) * dt[i]
    snaps[grid.n_intervals] = (stoch, energy)
    return snaps


def ensemble_weights(ensemble: DiffusionEnsemble, beta: DriftPerturbation, spec: DiffusionSpec,
                     recorded: bool = True) -> ContinuousWeights:
    """Girsanov ledgers for every path of one ensemble block.

    ``recorded=False`` rebuilds the reference martingale increments as
    dX - b dt instead of using the ones stored at simulation time.
    """
    dm = ensemble.martingale_increments if recorded else _reference_increments(spec, ensemble.grid, ensemble.values)
    stoch, energy = _ledgers(spec, beta, ensemble.grid, ensemble.values, dm)[ensemble.grid.n_intervals]
    log_init = log_initial_ratio(beta.initial_law, spec.initial_law, ensemble.initial)
    return ContinuousWeights(ensemble.path_ids, stoch, energy, log_init, ensemble.exploded)


def weights(ensembles, beta, spec, recorded=True) -> ContinuousWeights:
    """:func:`ensemble_weights` over an ensemble or an iterable of blocks."""
    return ContinuousWeights.concat([ensemble_weights(e, beta, spec, recorded) for e in iter_blocks(ensembles)])


def log_density(path: CadlagPath, beta: DriftPerturbation, spec: DiffusionSpec) -> ContinuousWeight:
    """log dP/dR of one path against the reference martingale part.

    Uses the path's recorded martingale increments when present, otherwise
    rebuilds them as dX - b dt.  A zero initial density ratio gives
    ``log_init = -inf`` and hence ``log_z = -inf``.
    """
    values = path.values[:, None]
    if path.martingale_increments is not None:
        dm = path.martingale_increments[:, None]
    else:
        dm = _reference_increments(spec, path.grid, values)
    stoch, energy = _ledgers(spec, beta, path.grid, values, dm)[path.grid.n_intervals]
    log_init = log_initial_ratio(beta.initial_law, spec.initial_law, path.values[:1])
    return ContinuousWeight(float(stoch[0]), float(energy[0]), float(log_init[0]))


# checks and estimators ------------------------------------------------------


@dataclass(frozen=True)
class CheckpointStat:
    time: float
    mean: float
    stderr: float
    n: int
    flagged: bool


@dataclass
class MartingaleReport:
    checkpoints: list[CheckpointStat]
    sigmas: float
    n_exploded: int = 0

    @property
    def passed(self) -> bool:
        return not any(c.flagged for c in self.checkpoints)


def exp_supermartingale_check(spec: DiffusionSpec, beta: DriftPerturbation, grid: TimeGrid, n_paths: int, seed: int,
                              checkpoints: Iterable[float] = (1.0,), *, sigmas: float = 4.0,
                              block_size=DEFAULT_BLOCK, workers=1) -> MartingaleReport:
    """Monte Carlo mean of Z_t = exp(int_0^t beta dM - 1/2 int_0^t beta.a beta dt) under R.

    Checkpoints are snapped to the last grid point at or before them.  A
    checkpoint is flagged when its mean is more than ``sigmas`` standard
    errors away from 1.
    """
    checkpoints = list(checkpoints)
    idx = [grid.index_at_or_before(c) for c in checkpoints]
    z_parts: dict[int, list] = {i: [] for i in idx}
    n_exploded = 0
    for ens in iter_reference(spec, grid, n_paths, seed, block_size=block_size, workers=workers):
        snaps = _ledgers(spec, beta, grid, ens.values, ens.martingale_increments, set(idx))
        keep = ~ens.exploded
        n_exploded += int(ens.exploded.sum())
        for i in idx:
            if i == 0:
                z_parts[i].append(np.ones(int(keep.sum())))
                continue
            stoch, energy = snaps[i]
            z_parts[i].append(np.exp(stoch[keep] - 0.5 * energy[keep]))
    stats = []
    for c, i in zip(checkpoints, idx):
        z = np.concatenate(z_parts[i])
        mean, se = mean_stderr(z)
        stats.append(CheckpointStat(float(grid.points[i]), mean, se, z.size, abs(mean - 1.0) > sigmas * se))
    return MartingaleReport(stats, sigmas, n_exploded)


def _usable(w: ContinuousWeights):
    lz = w.log_z
    return ~w.exploded & np.isfinite(lz)


def plugin_estimate(w: ContinuousWeights) -> EntropyEstimate:
    ok = _usable(w)
    return EntropyEstimate.from_samples(w.log_z[ok], PLUGIN, n_excluded=int((~ok).sum()))


def decomposition_estimate(w: ContinuousWeights, h0: float) -> EntropyEstimate:
    ok = ~w.exploded
    return EntropyEstimate.from_samples(w.energy[ok], DECOMPOSITION, n_excluded=int((~ok).sum()),
                                        offset=h0, scale=0.5)


def entropy_plugin(ensemble_P, beta: DriftPerturbation, spec: DiffusionSpec) -> EntropyEstimate:
    """Mean of log dP/dR over paths drawn from P.

    Exploded paths and paths with a zero initial density ratio are left out
    and counted in ``n_excluded``.
    """
    return plugin_estimate(weights(ensemble_P, beta, spec))


def entropy_decomposition(ensemble_P, beta: DriftPerturbation, spec: DiffusionSpec, h0: float) -> EntropyEstimate:
    """h0 + 1/2 E_P int beta.a beta dt, with h0 = H(P0|R0)."""
    return decomposition_estimate(weights(ensemble_P, beta, spec), h0)


@dataclass(frozen=True)
class ISResult:
    estimate: float
    stderr: float
    self_normalized: float
    self_normalized_stderr: float
    ess: float
    n: int
    low_ess: bool


def importance_summary(log_w: np.ndarray, fvals: np.ndarray, ess_floor: float = 0.01) -> ISResult:
    """Plain and self-normalised importance-sampling means of f under weights exp(log_w).

    ``low_ess`` is set when the effective sample size is below
    ``ess_floor`` times the number of samples.
    """
    w = np.exp(log_w)
    wf = w * fvals
    est, se = mean_stderr(wf)
    sw = w.sum()
    sn = float(wf.sum() / sw)
    sn_se = float(np.sqrt(np.sum(w**2 * (fvals - sn) ** 2)) / sw)
    ess = float(sw**2 / np.sum(w**2))
    return ISResult(est, se, sn, sn_se, ess, w.size, ess < ess_floor * w.size)


def importance_sample(ensemble_R, beta: DriftPerturbation, spec: DiffusionSpec,
                      f: Callable[[Ensemble], np.ndarray], ess_floor: float = 0.01) -> ISResult:
    """Estimate E_P f from reference paths as E_R[Z f].

    ``f`` maps an ensemble block to one value per path, e.g.
    ``lambda e: e.terminal[:, 0]``.
    """
    logs, fs = [], []
    for ens in iter_blocks(ensemble_R):
        w = ensemble_weights(ens, beta, spec)
        ok = ~w.exploded
        logs.append(w.log_z[ok])
        fs.append(np.asarray(f(ens), dtype=float)[ok])
    return importance_summary(np.concatenate(logs), np.concatenate(fs), ess_floor)
