"""Initial laws: samplers plus log-densities for dP0/dR0."""

from __future__ import annotations

import numpy as np


class PointMass:
    """Dirac mass; its density is taken against counting measure at the atom."""

    def __init__(self, x0):
        self.x0 = np.atleast_1d(np.asarray(x0, dtype=float))

    @property
    def dim(self) -> int:
        return self.x0.size

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.x0.copy()

    def logpdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        return np.where(np.all(x == self.x0, axis=1), 0.0, -np.inf)

    def __repr__(self):
        return f"PointMass({self.x0.tolist()})"


class Gaussian:
    def __init__(self, mean, cov):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.asarray(cov, dtype=float)
        if cov.ndim == 0:
            cov = cov * np.eye(self.mean.size)
        self.cov = cov
        self._chol = np.linalg.cholesky(cov)
        self._logdet = 2.0 * np.sum(np.log(np.diag(self._chol)))

    @property
    def dim(self) -> int:
        return self.mean.size

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.mean + self._chol @ rng.standard_normal(self.dim)

    def logpdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        z = np.linalg.solve(self._chol, (x - self.mean).T)
        return -0.5 * (np.sum(z * z, axis=0) + self._logdet + self.dim * np.log(2 * np.pi))

    def __repr__(self):
        return f"Gaussian(mean={self.mean.tolist()}, cov={self.cov.tolist()})"


def log_initial_ratio(p0, r0, x) -> np.ndarray:
    """log dP0/dR0 at the rows of x; zero everywhere when ``p0`` is None."""
    x = np.asarray(x, dtype=float)
    n = x.reshape(-1, x.shape[-1]).shape[0]
    if p0 is None or p0 is r0:
        return np.zeros(n)
    if type(p0) is not type(r0):
        raise TypeError("initial laws must be of the same family to form a density ratio")
    with np.errstate(invalid="ignore"):
        out = p0.logpdf(x) - r0.logpdf(x)
    # both atoms missed: the point is R0-null, ratio set to 0
    return np.where(np.isnan(out), -np.inf, out)


def gaussian_kl(p: Gaussian, r: Gaussian) -> float:
    """Closed-form KL(N(m_p, S_p) | N(m_r, S_r))."""
    d = p.dim
    sr_inv = np.linalg.inv(r.cov)
    dm = r.mean - p.mean
    return float(0.5 * (np.trace(sr_inv @ p.cov) + dm @ sr_inv @ dm - d + r._logdet - p._logdet))
