"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""

import numbers

import numpy as np


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value <= 0:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_finite_array(x, name="array", ndim=None, dtype=np.float64):
    """Convert ``x`` to a float ndarray and reject NaN/inf or a wrong rank."""
    arr = np.asarray(x)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(dtype)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_same_shape(a, b, names=("a", "b")):
    if np.shape(a) != np.shape(b):
        raise ValueError(
            f"{names[0]} and {names[1]} must have equal shapes, "
            f"got {np.shape(a)} and {np.shape(b)}"
        )


def check_fusion_pair(z_cross, z_self):
    """Validate a (z_cross, z_self) pair of [T, D] feature matrices."""
    z_cross = check_finite_array(z_cross, "z_cross", ndim=2)
    z_self = check_finite_array(z_self, "z_self", ndim=2)
    check_same_shape(z_cross, z_self, ("z_cross", "z_self"))
    if z_cross.shape[0] < 1:
        raise ValueError("fusion inputs need at least one frame")
    return z_cross, z_self


def check_random_state(seed):
    """Turn ``seed`` into a :class:`numpy.random.Generator`."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
