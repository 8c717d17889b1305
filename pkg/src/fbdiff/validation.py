"""Input checks shared by the solvers and the estimator."""
import numpy as np


def check_image(u, name="image", *, positive=False, ndim=2, min_size=2):
    """Return ``u`` as a finite float array of the given dimension.

    Raises ``ValueError`` on wrong dimension, tiny extent, non-finite
    entries, or (with ``positive=True``) nonpositive entries.
    """
    arr = np.asarray(u, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if any(n < min_size for n in arr.shape):
        raise ValueError(f"{name} must be at least {min_size} cells along every axis, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if positive and np.any(arr <= 0):
        raise ValueError(f"{name} must be strictly positive")
    return arr


def check_same_shape(*arrays, names=None):
    shapes = [np.shape(a) for a in arrays]
    if len(set(shapes)) > 1:
        label = ", ".join(names) if names else "inputs"
        raise ValueError(f"{label} must share one shape, got {shapes}")
