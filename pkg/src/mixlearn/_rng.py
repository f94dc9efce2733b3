"""Counter-based random streams.

Every stochastic routine in the package takes a master seed plus a tuple of
integers naming its position in the call tree (iteration, candidate index,
restart, ...) and derives an independent generator from them.  Results are
therefore reproducible no matter how work is scheduled across threads.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream"]


def stream(master_seed: int, *path: int) -> np.random.Generator:
    """Return the generator for a (seed, path) pair.

    The same pair always yields the same stream; distinct paths yield
    statistically independent streams.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(p) for p in path))
    return np.random.default_rng(ss)
