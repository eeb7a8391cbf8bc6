import os

import numpy as np


def n_workers():
    """Worker cap from CLASSTAB_THREADS (default: all cores)."""
    env = os.environ.get("CLASSTAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def child_rng(seed, *keys):
    """RNG stream that depends only on (seed, keys), never on scheduling."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))
