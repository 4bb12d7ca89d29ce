"""Input validation helpers shared by the functional core and the estimators."""

import numpy as np
from sklearn.utils.validation import check_array


def signed_range(bit_width, signed=True):
    if signed:
        return -(2 ** (bit_width - 1)), 2 ** (bit_width - 1) - 1
    return 0, 2**bit_width - 1


def check_bit_width(bit_width, allowed=(4, 8)):
    if bit_width not in allowed:
        raise ValueError(f"bit_width must be one of {allowed}, got {bit_width!r}")
    return int(bit_width)


def check_int_matrix(values, name="values"):
    """Return ``values`` as a 2-D int64 array, rejecting non-integral floats."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.issubdtype(arr.dtype, np.integer):
        arr = check_array(arr, dtype=np.float64, input_name=name)
        if not np.all(arr == np.round(arr)):
            raise ValueError(f"{name} must contain integers")
    return arr.astype(np.int64)


def check_activations(a, rows=None, bit_width=8):
    """Coerce activations to an (n_samples, rows) int64 array in [0, 2^b - 1].

    A 1-D input is treated as a single sample.
    """
    arr = np.asarray(a)
    if arr.ndim == 1:
        arr = arr[None, :]
    arr = check_int_matrix(arr, name="activations")
    lo, hi = signed_range(bit_width, signed=False)
    if arr.min() < lo or arr.max() > hi:
        raise ValueError(f"activations must lie in [{lo}, {hi}]")
    if rows is not None and arr.shape[1] != rows:
        raise ValueError(f"activation length {arr.shape[1]} does not match {rows} rows")
    return arr


def check_levels(plane, levels):
    arr = check_int_matrix(plane, name="plane")
    if arr.min() < 0 or arr.max() > levels - 1:
        raise ValueError(f"digit levels must lie in [0, {levels - 1}]")
    return arr


def round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)
