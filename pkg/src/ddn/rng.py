"""Seeded random streams.

All randomness goes through numpy's PCG64 generator.  A stream is identified
by the user seed plus a tuple of integer keys, e.g. ``(instance_index,)`` for
per-instance inference or ``(instance_index, restart)`` for a local-search
restart.  The keys become the SeedSequence spawn key, so every stream is
reproducible on its own, whatever order or process it runs in.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))
