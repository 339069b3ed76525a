"""Small shared numerics: deterministic Monte Carlo streams and Wilson CIs."""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox

# Philox emits 4x64-bit words per counter increment, and numpy's
# Generator.uniform consumes one word per double. Generating on a fixed
# grid of _GRID-sample chunks keeps every chunk boundary block-aligned
# (_GRID * dims is divisible by 4), so sample i's coordinates depend only
# on (seed, i), never on how a caller slices the stream.
_GRID = 8192

_Z95 = 1.959963984540054  # two-sided 95% normal quantile


def stream_uniform(seed: int, start: int, count: int, dims: int,
                   low: float, high: float) -> np.ndarray:
    """Samples [start, start+count) of an endless uniform stream.

    Returns a (count, dims) array. The stream is a pure function of
    (seed, sample index, dims), so disjoint requests tile together exactly.
    """
    if count <= 0:
        return np.empty((0, dims))
    out = np.empty((count, dims))
    filled = 0
    grid_lo = start // _GRID
    grid_hi = (start + count - 1) // _GRID
    for g in range(grid_lo, grid_hi + 1):
        bg = Philox(key=seed)
        bg.advance(g * _GRID * dims // 4)
        block = Generator(bg).uniform(low, high, size=(_GRID, dims))
        lo = max(start - g * _GRID, 0)
        hi = min(start + count - g * _GRID, _GRID)
        out[filled:filled + hi - lo] = block[lo:hi]
        filled += hi - lo
    return out


def wilson_interval(hits: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("wilson_interval needs at least one trial")
    if not 0 <= hits <= trials:
        raise ValueError(f"hits {hits} outside [0, {trials}]")
    p = hits / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)
