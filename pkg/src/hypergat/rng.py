"""Seeded random streams.

All randomness goes through Philox4x64-10 (a counter-based generator,
Salmon et al. 2011) as shipped with numpy. A stream is identified by a
``(seed, stream)`` pair which forms the 128-bit Philox key, so independent
consumers (initialisation, shuffling, dropout, LDA, splits) never share
state even when they share a seed.
"""

import numpy as np

STREAM_SPLIT = 1
STREAM_INIT = 2
STREAM_SHUFFLE = 3
STREAM_DROPOUT = 4
STREAM_LDA = 5
STREAM_SYNTH = 6


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    key = (int(stream) << 64) | (int(seed) & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key))
