from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PLUGIN = "plug-in"
DECOMPOSITION = "decomposition"
VARIATIONAL = "variational"


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    stderr: float
    n: int
    estimator_tag: str
    n_excluded: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("an estimate needs at least one sample")
        if not self.stderr >= 0:
            raise ValueError("stderr must be nonnegative")

    @classmethod
    def from_samples(cls, samples, tag: str, n_excluded: int = 0, offset: float = 0.0, scale: float = 1.0):
        """offset + scale * mean(samples), with the matching standard error."""
        mean, se = mean_stderr(samples)
        return cls(offset + scale * mean, abs(scale) * se, int(np.size(samples)), tag, n_excluded)


def mean_stderr(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("no samples")
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
    return mean, se
