"""Deterministic random-number substreams.

All randomness in the package flows from a single 64-bit seed. Independent
work units (bootstrap replicates, simulated columns, study replications,
backtest months) each get their own counter-based stream derived from
``(seed, *path)``, so results are bit-identical regardless of execution
order or worker count.
"""

import numpy as np

# Stream namespaces; keeps unrelated consumers of the same seed apart.
RESAMPLE = 1
SIMULATE = 2
REPLICATION = 3
MONTH = 4
BLOCKSEL = 5
SOLVER = 6


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return a Philox generator for the stream ``(seed, *path)``.

    Philox is counter-based: streams with distinct paths are independent
    and cheap to create, which is what makes parallel replicate generation
    reproducible.
    """
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    key = tuple(int(x) for x in path)
    seq = np.random.SeedSequence(entropy=seed, spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))
