"""Counter-based random streams keyed by (seed, replication, stream).

Every random draw in the package goes through :func:`stream`, so a
replication's output depends only on its key and never on scheduling.
"""
import numpy as np

# stream ids used by the simulators
SHOCKS = 0
IDIO_LOADINGS = 1
IDIO_COMMON = 2
IDIO_SPECIFIC = 3
EXTRA = 4

_MASK64 = (1 << 64) - 1


def stream(seed, replication=0, stream_id=0):
    """Return a Philox generator for one (seed, replication, stream) key."""
    if replication < 0 or not 0 <= stream_id < (1 << 16):
        raise ValueError("replication must be >= 0 and stream_id in [0, 65536)")
    key = np.array(
        [int(seed) & _MASK64, ((int(replication) << 16) | int(stream_id)) & _MASK64],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))
