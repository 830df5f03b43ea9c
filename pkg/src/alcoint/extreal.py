"""Helpers for extended-real parameters.

Limit parameters live in R u {-inf, +inf}. They are stored as plain floats
(``math.inf`` / ``-math.inf``); NaN is rejected everywhere.
"""
import math

import numpy as np


def as_extended(value):
    """Coerce a scalar or array-like to float(s) in the extended reals.

    Accepts the strings ``"inf"``, ``"+inf"``, ``"-inf"`` as produced by JSON
    configs, since JSON has no infinity literal.
    """
    if isinstance(value, str):
        value = float(value)
    arr = np.asarray(value, dtype=float)
    if np.isnan(arr).any():
        raise ValueError("extended-real value may not be NaN")
    if arr.ndim == 0:
        return float(arr)
    return arr


def is_infinite(x):
    return np.isinf(x)


def sign(x):
    """Sign defined for all extended reals (0 for 0)."""
    return np.sign(x)


def to_json(x):
    """JSON-safe encoding: infinities become strings."""
    if np.ndim(x) == 0:
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return [to_json(v) for v in np.asarray(x, dtype=float)]
