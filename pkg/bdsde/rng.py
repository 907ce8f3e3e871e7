"""Counter-based random substreams.

Every random draw in the package comes from a Philox generator whose key is
derived from ``(seed, stream, *keys)``. Two calls with the same key produce the
same numbers regardless of call order, thread or worker count, and prefixes of
a stream are stable: drawing 100 numbers and then 200 from a fresh generator
with the same key yields the same first 100.
"""

import numpy as np

__all__ = ["FORWARD", "BACKWARD", "CLOUD", "PROBE", "substream", "normal_block"]

# Stream identifiers, the first element of every spawn key.
FORWARD = 0
BACKWARD = 1
CLOUD = 2
PROBE = 3


def substream(seed, stream, *keys):
    """Return a Philox-backed Generator for the substream ``(seed, stream, *keys)``."""
    if seed is None:
        raise ValueError("seed must be an integer, got None")
    key = tuple(int(k) for k in (stream,) + keys)
    if any(k < 0 for k in key):
        raise ValueError("substream keys must be non-negative, got {}".format(key))
    sequence = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(sequence))


def normal_block(seed, stream, keys, size, scale=1.0):
    """Standard normals from one substream, multiplied by `scale`."""
    return scale * substream(seed, stream, *keys).standard_normal(size)
