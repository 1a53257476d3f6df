"""Rotary position embedding."""

import numpy as np

ROPE_BASE = 10000.0


def rope_frequencies(dim, base=ROPE_BASE):
    return base ** (-np.arange(0, dim, 2, dtype=np.float64) / dim)


def rope_apply(x, positions, base=ROPE_BASE):
    """Rotate each pair ``(x[:, 2j], x[:, 2j+1])`` by ``position * base**(-2j/D)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("x must be [T, D]")
    T, D = x.shape
    if D % 2:
        raise ValueError(f"feature dim must be even, got {D}")
    positions = np.asarray(positions, dtype=np.float64)
    if positions.shape != (T,):
        raise ValueError("need one position per frame")
    angles = positions[:, None] * rope_frequencies(D, base)[None, :]
    cos, sin = np.cos(angles), np.sin(angles)
    even, odd = x[:, 0::2], x[:, 1::2]
    out = np.empty_like(x)
    out[:, 0::2] = even * cos - odd * sin
    out[:, 1::2] = even * sin + odd * cos
    return out
