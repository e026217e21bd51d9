"""SplitMix64 sample generator.

The sequence is pinned so that sample points are reproducible across
implementations: state advances by 0x9E3779B97F4A7C15, outputs are mixed
with the standard SplitMix64 finalizer, and doubles take the top 53 bits.
"""
from __future__ import annotations

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Double in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniforms(self, n: int) -> np.ndarray:
        return np.array([self.uniform() for _ in range(n)])


def sample_box(box, n: int, seed: int, margin: float = 0.1) -> np.ndarray:
    """``n`` points drawn uniformly from ``box`` shrunk by ``margin`` of each
    width on both sides. Coordinates are drawn point by point, x then y then z."""
    rng = SplitMix64(seed)
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    width = hi - lo
    u = rng.uniforms(3 * n).reshape(n, 3)
    return lo + width * (margin + (1.0 - 2.0 * margin) * u)
