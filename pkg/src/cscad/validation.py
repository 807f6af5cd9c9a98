"""Small input-validation helpers shared by the estimators."""

import numpy as np
from sklearn.exceptions import NotFittedError

from .exceptions import AsymmetricInput, LengthMismatch


def check_is_fitted(estimator, *attributes):
    """Raise NotFittedError unless every named fitted attribute is present."""
    missing = [a for a in attributes if not hasattr(estimator, a)]
    if missing:
        name = type(estimator).__name__
        raise NotFittedError(
            f"this {name} instance is not fitted yet; call fit before using it"
        )


def check_array_2d(x, name="X"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {x.shape}")
    if x.shape[0] == 0 or x.shape[1] == 0:
        raise ValueError(f"{name} must be non-empty, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def check_symmetric(a, tol=1e-9, name="matrix"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise AsymmetricInput(f"{name} must be square, got shape {a.shape}")
    if not np.allclose(a, a.T, atol=tol, rtol=0.0):
        raise AsymmetricInput(f"{name} is not symmetric within {tol}")
    return a


def check_same_length(a, b, name_a="a", name_b="b"):
    if len(a) != len(b):
        raise LengthMismatch(f"{name_a} has {len(a)} items, {name_b} has {len(b)}")
