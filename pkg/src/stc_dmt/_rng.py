"""Counter-based random number plumbing for reproducible trial farms.

All Monte Carlo loops in this package draw their randomness per *block* of
trials from a Philox counter generator keyed by (master seed, stream id) and
advanced to a block-specific offset.  Blocks have a fixed size, so the draws
belonging to trial t are a pure function of (seed, stream, t // BLOCK_TRIALS)
no matter how many workers process the blocks or in which order.
"""

from __future__ import annotations

import os

import numpy as np

# Trials per RNG block.  Fixed: changing it changes which draws a given trial
# sees, so it is part of the reproducibility contract, not a tuning knob.
BLOCK_TRIALS = 4096

# Counter budget reserved per block (Philox has a 256-bit counter; each draw
# consumes one 256-bit state increment per 4 outputs, so 2**72 is far more
# than any block can use).
_BLOCK_STRIDE = 1 << 72

# Stream ids keep independent purposes (channel draws, message picks, ...)
# from colliding on the same counters.
STREAM_CHANNEL = 1
STREAM_MESSAGE = 2
STREAM_OUTAGE = 3


def philox_key(seed: int, stream: int) -> int:
    """128-bit Philox key from a 64-bit seed and a small stream id."""
    return ((stream & 0xFFFFFFFFFFFFFFFF) << 64) | (seed & 0xFFFFFFFFFFFFFFFF)


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    """Generator for one block of trials; pure function of its arguments."""
    bits = np.random.Philox(key=philox_key(seed, stream))
    bits.advance(block * _BLOCK_STRIDE)
    return np.random.Generator(bits)


def block_ranges(trials: int) -> list[tuple[int, int, int]]:
    """Split `trials` into the fixed block partition: (block, start, stop)."""
    out = []
    for block, start in enumerate(range(0, trials, BLOCK_TRIALS)):
        out.append((block, start, min(start + BLOCK_TRIALS, trials)))
    return out


def worker_count(explicit: int | None = None) -> int:
    """Worker count for trial farms: argument wins, then STC_DMT_WORKERS, then 1."""
    if explicit is not None:
        return max(1, int(explicit))
    env = os.environ.get("STC_DMT_WORKERS")
    if env:
        return max(1, int(env))
    return 1
