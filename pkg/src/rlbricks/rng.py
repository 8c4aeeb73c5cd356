"""Seedable random streams.

All randomness in a run derives from one root seed. Independent concerns
get separate streams at fixed, documented offsets so that adding draws to
one stream never perturbs another (see ``split_streams``).
"""

from __future__ import annotations

from typing import Dict, Optional, Tuple

import numpy as np

# Fixed offsets from the root seed, one per concern.
STREAM_OFFSETS: Dict[str, int] = {
    "env": 0,
    "nets": 1,
    "sampling": 2,
    "eval": 3,
    "bonus": 4,
}


class Rng:
    """A named 64-bit-seeded pseudorandom generator (PCG64)."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def normal(self, shape: Optional[Tuple[int, ...]] = None) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def uniform(self, low: float, high: float, shape: Optional[Tuple[int, ...]] = None) -> np.ndarray:
        return self._gen.uniform(low, high, shape)

    def integers(self, low: int, high: Optional[int] = None, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def split_streams(root_seed: int) -> Dict[str, Rng]:
    """Derive one independent stream per concern from the root seed."""
    return {name: Rng(root_seed + off) for name, off in STREAM_OFFSETS.items()}
