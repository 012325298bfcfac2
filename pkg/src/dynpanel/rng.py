"""Counter-keyed random streams.

A stream is addressed by ``(seed, stream, replication)`` and backed by the
Philox counter-based generator, so replication ``r`` draws the same numbers no
matter how many replications run or which worker runs it.
"""
import numpy as np

ORACLE_STREAM = 0
REPLICATION_STREAM = 1
SIMULATE_STREAM = 2

_MASK64 = (1 << 64) - 1


def stream(seed: int, stream_id: int = SIMULATE_STREAM, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=(int(stream_id), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(int(seed))
