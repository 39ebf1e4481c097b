"""Relaxed logarithmic barrier on clearance values.

For clearance h, strength mu, and relaxation threshold delta > 0:

    B(h) = -mu * ln(h)                                          for h > delta
    B(h) = mu * (((h - 2*delta)/delta)**2 / 2 - 1/2 - ln(delta)) for h <= delta

The quadratic extension keeps B finite for h <= 0 (contact is penalized, not
forbidden) and matches the log branch in value, slope, and curvature at
h = delta, so B is C2 everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError


def _check_params(mu, delta):
    if np.any(np.asarray(mu) < 0):
        raise InputError("barrier strength mu must be >= 0")
    if np.any(np.asarray(delta) <= 0):
        raise InputError("barrier relaxation delta must be > 0")


def barrier_terms(h, mu, delta):
    """(B, dB/dh, d2B/dh2) at clearance h.

    h may be a scalar or an array; mu and delta may be scalars or arrays
    broadcastable against h (per-pair overrides).
    """
    _check_params(mu, delta)
    h_arr = np.asarray(h, dtype=float)
    upper = h_arr > delta
    safe_h = np.where(upper, h_arr, delta)
    value = np.where(
        upper,
        -mu * np.log(safe_h),
        mu * (0.5 * ((h_arr - 2.0 * delta) / delta) ** 2 - 0.5 - np.log(delta)),
    )
    slope = np.where(upper, -mu / safe_h, mu * (h_arr - 2.0 * delta) / delta**2)
    curvature = np.where(upper, mu / safe_h**2, mu / delta**2)
    if np.ndim(h) == 0 and np.ndim(value) == 0:
        return float(value), float(slope), float(curvature)
    return value, slope, curvature


def barrier_value(h, mu: float, delta: float):
    return barrier_terms(h, mu, delta)[0]


@dataclass
class BarrierQuadratic:
    """Second-order model of one pair's barrier as a function of qdot.

    value     B(h)
    gradient  (dB/dh) * g            with g = dh/dq
    hessian   (d2B/dh2) * g g^T
    """

    value: float
    gradient: np.ndarray
    hessian: np.ndarray

    def cost_at(self, qdot: np.ndarray) -> float:
        """The modeled barrier term evaluated at a joint velocity."""
        return float(self.value + self.gradient @ qdot + 0.5 * qdot @ self.hessian @ qdot)


def barrier_quadratic(h: float, grad: np.ndarray, mu: float, delta: float) -> BarrierQuadratic:
    value, slope, curvature = barrier_terms(float(h), mu, delta)
    g = np.asarray(grad, dtype=float)
    return BarrierQuadratic(value=value, gradient=slope * g, hessian=curvature * np.outer(g, g))
