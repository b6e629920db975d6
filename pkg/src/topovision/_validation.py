"""Input validation helpers.

Images are plain 2-D float64 numpy arrays with intensities in [0, 1];
these helpers are the single place that contract is checked.
"""

import numbers

import numpy as np


def check_image(img, name="image"):
    """Validate a grayscale image array and return it as float64.

    The array must be 2-D, non-empty, finite, and inside [0, 1].
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(
            f"{name} intensities must lie in [0, 1], "
            f"got range [{arr.min():g}, {arr.max():g}]"
        )
    return arr


def check_binary_mask(mask, name="mask"):
    """Validate a boolean mask array (any 2-D 0/1 or bool input accepted)."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.dtype != bool:
        vals = np.unique(arr)
        if not np.all(np.isin(vals, (0, 1))):
            raise ValueError(f"{name} must be binary")
        arr = arr.astype(bool)
    return arr


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def as_rng(seed):
    """Return a deterministic numpy Generator for ``seed``.

    Accepts an int seed or an existing Generator (passed through).  PCG64
    guarantees an identical stream for an identical seed on every platform.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(int(seed)))
