"""Input validation helpers shared by the estimators."""

import numpy as np
from sklearn.utils import check_array

from .exceptions import ConfigError, DataError


def check_sequences(X, length=None):
    """2-D float array of sequences ``(n_sequences, L)``, finite, ``L >= 2``."""
    try:
        X = check_array(X, dtype=float, ensure_all_finite=True, ensure_min_features=2)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    if length is not None and X.shape[1] != length:
        raise DataError(f"sequence length {X.shape[1]} does not match trained length {length}")
    return X


def check_coords(Z, min_rows=2):
    try:
        Z = check_array(Z, dtype=float, ensure_all_finite=True, ensure_min_samples=min_rows)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    return Z


def check_kernel(K):
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ConfigError(f"kernel must be square, got shape {K.shape}")
    if not np.all(np.isfinite(K)):
        raise DataError("kernel contains non-finite entries")
    return K


def check_vector(v, n=None, name="vector"):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ConfigError(f"{name} must be 1-D, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise ConfigError(f"{name} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise DataError(f"{name} contains non-finite entries")
    return v
