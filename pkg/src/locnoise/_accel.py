"""Backend selection for the hot kernels.

Set ``LOCNOISE_DISABLE_NUMBA=1`` to force the pure-numpy path.  The numba
path is used whenever numba imports cleanly and the flag is unset.
"""
import os

import numpy as np

ENV_FLAG = "LOCNOISE_DISABLE_NUMBA"


def _flag_set():
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _flag_set()

# status codes shared by both kernel backends
CONVERGED = 0
MAX_ITERATIONS = 1
SEPARATION = 2
SINGULAR = 3
STALLED = 4

STATUS_NAMES = {
    CONVERGED: "converged",
    MAX_ITERATIONS: "max_iterations",
    SEPARATION: "separation",
    SINGULAR: "singular",
    STALLED: "stalled",
}


def seed_sequence(seed):
    """Accept an int, None or an existing SeedSequence."""
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
