"""Counter-based random streams for reproducible (and parallelizable) runs.

Every particle owns a Philox stream keyed by (seed, stream index), so the
sequence of variates a particle consumes does not depend on how many other
particles exist, on chunking of the draws, or on the number of worker
threads.  Respawn decisions use a dedicated extra stream.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream", "particle_streams", "RESPAWN_STREAM_TAG"]

# stream ids >= 2**32 are reserved for non-particle streams
RESPAWN_STREAM_TAG = 1 << 32


def stream(seed: int, stream_id: int) -> np.random.Generator:
    """Return the deterministic generator for (seed, stream_id)."""
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must fit in 64 bits, got {seed}")
    if not 0 <= stream_id < 2**64:
        raise ValueError(f"stream_id must fit in 64 bits, got {stream_id}")
    key = np.array([seed, stream_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def particle_streams(seed: int, n: int) -> list[np.random.Generator]:
    """One independent stream per particle, streams 0..n-1 of `seed`."""
    return [stream(seed, i) for i in range(n)]
