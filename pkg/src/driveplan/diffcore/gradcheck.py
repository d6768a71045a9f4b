"""Central finite-difference utilities for gradient verification."""

from __future__ import annotations

import numpy as np


def numeric_gradient(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of scalar f at x, one probe per entry."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f(x)
        flat[i] = orig - eps
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * eps)
    return g


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray,
                       floor: float = 1e-6) -> float:
    """Worst elementwise relative error with a scale-aware floor.

    The denominator floors at max(floor, 1e-3 * ||numeric||_inf) so that
    near-zero entries do not inflate the error with finite-difference noise.
    """
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    b = np.asarray(numeric, dtype=np.float64).reshape(-1)
    scale = max(floor, 1e-3 * float(np.max(np.abs(b))) if b.size else floor)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), scale)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0
