"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""
import numbers

import numpy as np

from .exceptions import DimensionError


def check_vector(v, size=None, name="vector"):
    """Return ``v`` as a finite 1-D float array, optionally of length ``size``."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if size is not None and arr.shape[0] != size:
        raise DimensionError(f"{name} must have length {size}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_matrix(M, shape=None, name="matrix"):
    arr = np.asarray(M, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if shape is not None:
        for want, got in zip(shape, arr.shape):
            if want is not None and want != got:
                raise DimensionError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_scalar(value, name, *, min_val=None, max_val=None, strict_min=False):
    """Validate a real scalar and return it as ``float``."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite")
    if min_val is not None:
        if strict_min and value <= min_val:
            raise ValueError(f"{name} must be > {min_val}, got {value}")
        if not strict_min and value < min_val:
            raise ValueError(f"{name} must be >= {min_val}, got {value}")
    if max_val is not None and value > max_val:
        raise ValueError(f"{name} must be <= {max_val}, got {value}")
    return value


def check_random_state(seed):
    """Turn ``seed`` into a ``numpy.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("an explicit seed or Generator is required")
    return np.random.default_rng(seed)


def check_y_blocks(y_blocks, dims):
    if len(y_blocks) != len(dims):
        raise DimensionError(f"expected {len(dims)} y blocks, got {len(y_blocks)}")
    return [check_vector(y, size=n, name=f"y[{j}]") for j, (y, n) in enumerate(zip(y_blocks, dims))]
