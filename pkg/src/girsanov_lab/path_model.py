"""Time grids, cadlag paths, ensembles and grid-level integrators.

All paths live on [0, 1].  Stochastic integrals are evaluated with the
integrand at the left end of each interval (the predictable convention).
Jump times are inserted into the grid exactly instead of being rounded.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

MAX_DIM = 16
CSV_SCHEMA = 1


class JumpCollisionWarning(UserWarning):
    """Two jump times fell on the same instant and one was moved by an ulp."""


class TimeGrid:
    """Strictly increasing points 0 = t_0 < ... < t_N = 1."""

    __slots__ = ("points",)

    def __init__(self, points):
        pts = np.array(points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("a grid needs at least two points")
        if pts[0] != 0.0 or pts[-1] != 1.0:
            raise ValueError("grid must start at 0 and end at 1")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        pts.flags.writeable = False
        self.points = pts

    @classmethod
    def uniform(cls, n: int) -> "TimeGrid":
        if n < 1:
            raise ValueError("need at least one interval")
        pts = np.arange(n + 1, dtype=float) / n
        return cls(pts)

    @property
    def n_intervals(self) -> int:
        return self.points.size - 1

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def left(self) -> np.ndarray:
        return self.points[:-1]

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.points[:-1] + self.points[1:])

    def index_at_or_before(self, t: float) -> int:
        """Index of the last grid point <= t."""
        return int(np.searchsorted(self.points, t, side="right") - 1)

    def __len__(self):
        return self.points.size

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())

    def __repr__(self):
        return f"TimeGrid(n_intervals={self.n_intervals})"


def refine_with_jumps(grid: TimeGrid, jump_times: Sequence[float]) -> TimeGrid:
    """Merge jump times into a grid.

    Jump times already on the grid are absorbed, so the operation is
    idempotent.  Two jump times within 1e-15 of each other (a null event for
    an atomless intensity) are separated by moving the later one up by one
    ulp, with a :class:`JumpCollisionWarning`.
    """
    jt = np.sort(np.asarray(jump_times, dtype=float).ravel())
    if jt.size == 0:
        return grid
    if jt[0] <= 0.0 or jt[-1] > 1.0:
        raise ValueError("jump times must lie in (0, 1]")
    on_grid = np.isin(jt, grid.points)
    fresh = jt[~on_grid]
    for i in range(1, fresh.size):
        if fresh[i] - fresh[i - 1] <= 1e-15:
            moved = np.nextafter(fresh[i - 1], np.inf)
            warnings.warn(
                f"jump times {fresh[i - 1]!r} and {fresh[i]!r} collide; second moved to {moved!r}",
                JumpCollisionWarning,
                stacklevel=2,
            )
            fresh[i] = moved
    return TimeGrid(np.union1d(grid.points, fresh))


@dataclass(frozen=True)
class JumpMark:
    time: float
    size: np.ndarray

    def __post_init__(self):
        size = np.atleast_1d(np.asarray(self.size, dtype=float))
        if not 0.0 < self.time <= 1.0:
            raise ValueError("jump time must lie in (0, 1]")
        if not np.any(size != 0):
            raise ValueError("a jump must be nonzero")
        object.__setattr__(self, "size", size)


@dataclass(frozen=True)
class CadlagPath:
    """A sampled trajectory, with optional recorded martingale increments.

    ``values[i]`` is the state at ``grid.points[i]``; at a jump time it is
    the post-jump value.  ``martingale_increments[i]`` is the reference
    martingale increment over ``(t_i, t_{i+1}]`` when the simulator kept it.
    """

    grid: TimeGrid
    values: np.ndarray
    jumps: tuple = ()
    martingale_increments: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != len(self.grid):
            raise ValueError("one state per grid point required")
        if values.shape[1] > MAX_DIM:
            raise ValueError(f"state dimension capped at {MAX_DIM}")
        if not np.all(np.isfinite(values)):
            raise ValueError("path values must be finite")
        jumps = tuple(sorted(self.jumps, key=lambda j: j.time))
        times = [j.time for j in jumps]
        if len(set(times)) != len(times):
            raise ValueError("jump times must be distinct")
        if times and not np.all(np.isin(times, self.grid.points)):
            raise ValueError("jump times must be grid points")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "jumps", jumps)
        if self.martingale_increments is not None:
            inc = np.asarray(self.martingale_increments, dtype=float)
            if inc.ndim == 1:
                inc = inc[:, None]
            if inc.shape != (self.grid.n_intervals, values.shape[1]):
                raise ValueError("one martingale increment per interval required")
            object.__setattr__(self, "martingale_increments", inc)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def jump_increments(self) -> np.ndarray:
        """Per-interval jump contribution, zero on intervals without a jump."""
        out = np.zeros((self.grid.n_intervals, self.dim))
        if self.jumps:
            idx = np.searchsorted(self.grid.points, [j.time for j in self.jumps]) - 1
            out[idx] = np.array([j.size for j in self.jumps])
        return out


def stieltjes_integral(integrand, increments) -> float:
    """sum_i <integrand_i, increment_i>, integrand read at left endpoints."""
    f = np.asarray(integrand, dtype=float)
    dx = np.asarray(increments, dtype=float)
    if f.shape[0] != dx.shape[0]:
        raise ValueError(f"length mismatch: {f.shape[0]} integrand values, {dx.shape[0]} increments")
    if f.ndim == 1:
        f = f[:, None]
    if dx.ndim == 1:
        dx = dx[:, None]
    return float(np.sum(f * dx))


def realized_qv(path: CadlagPath, continuous_part_only: bool = False) -> np.ndarray:
    """Cumulative sum of dX dX^T over the grid, shape (N + 1, d, d).

    With ``continuous_part_only`` the recorded jumps are removed from the
    increments first, so the result targets the bracket of the continuous
    martingale part.
    """
    dx = path.increments
    if continuous_part_only:
        dx = dx - path.jump_increments()
    outer = dx[:, :, None] * dx[:, None, :]
    out = np.zeros((len(path.grid), path.dim, path.dim))
    np.cumsum(outer, axis=0, out=out[1:])
    return out


@dataclass
class Ensemble:
    """Common bookkeeping of a batch of simulated paths.

    ``path_ids`` are global indices: a block of a larger simulation keeps the
    indices its paths have in the full run.
    """

    grid: TimeGrid
    path_ids: np.ndarray
    seed: int
    law_tag: str

    def __len__(self):
        return int(self.path_ids.size)

    @property
    def paths(self) -> list[CadlagPath]:
        return [self.path(i) for i in range(len(self))]

    def path(self, i: int) -> CadlagPath:
        raise NotImplementedError


@dataclass
class DiffusionEnsemble(Ensemble):
    """Euler paths on a shared grid, stored time-major.

    values: (N + 1, n, d); martingale_increments: (N, n, d), the reference
    martingale part dX - b dt of each step as generated.  Time-major layout
    keeps every per-step slice contiguous.
    """

    values: np.ndarray = field(default=None, repr=False)
    martingale_increments: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        with np.errstate(invalid="ignore"):
            self.exploded = ~np.all(np.isfinite(self.values), axis=(0, 2))

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    @property
    def initial(self) -> np.ndarray:
        return self.values[0]

    @property
    def terminal(self) -> np.ndarray:
        return self.values[-1]

    def path(self, i: int) -> CadlagPath:
        return CadlagPath(self.grid, self.values[:, i], (), self.martingale_increments[:, i])


@dataclass
class JumpEnsemble(Ensemble):
    """Finite-activity jump paths stored sparsely.

    Jumps are kept in CSR form (``jump_offsets`` delimits each path's slice
    of ``jump_times``/``jump_sizes``).  The continuous part is the same for
    every path, ``x0 + drift_part(t)``, so a path is materialised only on
    request, on the base grid refined with its own jump times.
    """

    x0: np.ndarray = field(default=None, repr=False)
    jump_times: np.ndarray = field(default=None, repr=False)
    jump_sizes: np.ndarray = field(default=None, repr=False)
    jump_offsets: np.ndarray = field(default=None, repr=False)
    drift_part: Callable[[np.ndarray], np.ndarray] = field(default=None, repr=False)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.exploded = np.zeros(len(self), dtype=bool)

    @property
    def dim(self) -> int:
        return self.x0.shape[1]

    @property
    def n_jumps(self) -> np.ndarray:
        return np.diff(self.jump_offsets)

    @property
    def owner(self) -> np.ndarray:
        """Local path index of every stored jump."""
        return np.repeat(np.arange(len(self)), self.n_jumps)

    def jump_slice(self, i: int):
        a, b = self.jump_offsets[i], self.jump_offsets[i + 1]
        return self.jump_times[a:b], self.jump_sizes[a:b]

    @property
    def terminal(self) -> np.ndarray:
        total = np.zeros_like(self.x0)
        np.add.at(total, self.owner, self.jump_sizes)
        return self.x0 + self.drift_part(np.array([1.0]))[0] + total

    def path(self, i: int) -> CadlagPath:
        times, sizes = self.jump_slice(i)
        grid = refine_with_jumps(self.grid, times)
        t = grid.points
        values = self.x0[i] + self.drift_part(t)
        if times.size:
            idx = np.searchsorted(t, times)
            step = np.zeros((t.size, self.dim))
            step[idx] = sizes
            values = values + np.cumsum(step, axis=0)
        marks = tuple(JumpMark(float(s), z) for s, z in zip(times, sizes))
        return CadlagPath(grid, values, marks)


def iter_blocks(ensembles) -> Iterator[Ensemble]:
    """Yield ensemble blocks from an ensemble or an iterable of them."""
    if isinstance(ensembles, Ensemble):
        yield ensembles
    else:
        yield from ensembles


def csv_header_comment(version: str) -> str:
    return f"# girsanov-lab v{version} schema={CSV_SCHEMA}"


def fmt(x) -> str:
    """Round-trip float formatting used by every CSV writer."""
    return repr(float(x))


def write_ensemble_csv(ensembles: Ensemble | Iterable[Ensemble], fh, version: str, max_paths: int | None = None) -> int:
    """One row per (path, grid point): path_id, t, x_1..x_d, is_jump.

    Returns the number of paths written.
    """
    writer = csv.writer(fh, lineterminator="\n")
    fh.write(csv_header_comment(version) + "\n")
    written = 0
    header_done = False
    for ens in iter_blocks(ensembles):
        if not header_done:
            writer.writerow(["path_id", "t"] + [f"x{k + 1}" for k in range(ens.dim)] + ["is_jump"])
            header_done = True
        for i in range(len(ens)):
            if max_paths is not None and written >= max_paths:
                return written
            if ens.exploded[i]:
                continue
            p = ens.path(i)
            jt = {j.time for j in p.jumps}
            pid = int(ens.path_ids[i])
            for t, x in zip(p.grid.points, p.values):
                writer.writerow([pid, fmt(t), *map(fmt, x), int(t in jt)])
            written += 1
    return written
