"""Counter-based per-path random streams.

Every path gets its own Philox stream keyed by ``(seed, path_index)``; the
high counter word selects the stream purpose.  A path's draws therefore do
not depend on how paths are batched or which worker simulates them.
"""

import numpy as np

_MASK64 = (1 << 64) - 1

# stream purposes (high counter word)
INIT = 0
NOISE = 1
TIMES = 2
THINNING = 3
MARKS = 4


def path_rng(seed: int, path_index: int, purpose: int = NOISE) -> np.random.Generator:
    key = [int(seed) & _MASK64, int(path_index) & _MASK64]
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, purpose]))


def derive_seed(seed: int, stream: int) -> int:
    """A 64-bit seed for an independent sub-experiment ``stream`` of ``seed``."""
    ss = np.random.SeedSequence([int(seed) & _MASK64, int(stream)])
    return int(ss.generate_state(1, np.uint64)[0])
