"""Small input-validation helpers shared by the estimator and the modules."""

from __future__ import annotations

import numbers

import numpy as np


class ContractError(ValueError):
    """Raised when a caller violates a documented precondition."""


def check_positive(value, name: str, *, allow_zero: bool = False) -> float:
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise ContractError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not np.isfinite(value):
        raise ContractError(f"{name} must be finite, got {value}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ContractError(f"{name} must be {bound}, got {value}")
    return value


def check_int(value, name: str, *, minimum: int = 0) -> int:
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise ContractError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ContractError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_vector(x, name: str, *, size: int | None = None) -> np.ndarray:
    """Return ``x`` as a finite 1-D float array, optionally of fixed size."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ContractError(f"{name} must be 1-D, got shape {arr.shape}")
    if size is not None and arr.shape[0] != size:
        raise ContractError(f"{name} must have length {size}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains non-finite entries")
    return arr
