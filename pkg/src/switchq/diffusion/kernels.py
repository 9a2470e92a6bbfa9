"""Transition densities of a Wiener process with drift on the half line.

Reflected at 0, killed at 0, and the first-hitting density of 0. Every
exponential weight is folded into a single exponent before exponentiating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx

from ..numerics import exp_times_erfc

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class WienerKernel:
    """Brownian motion with drift ``drift`` and infinitesimal variance ``variance``."""

    drift: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("variance must be positive")


def _scalar_or_array(out):
    return float(out) if np.ndim(out) == 0 else out


def _log_gauss(x, mean, var):
    return -0.5 * (x - mean) ** 2 / var - 0.5 * np.log(var) - _LOG_SQRT_2PI


def reflected_wiener_density(kernel: WienerKernel, x, t: float, y: float):
    """Density at ``x`` after time ``t`` from ``y``, with 0 reflecting."""
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    b, v = kernel.drift, kernel.variance
    vt = v * t
    direct = np.exp(_log_gauss(x, y + b * t, vt))
    image = np.exp(-2.0 * b * y / v + _log_gauss(x, -y + b * t, vt))
    boundary = (b / v) * exp_times_erfc(2.0 * b * x / v, (x + y + b * t) / math.sqrt(2.0 * vt))
    return _scalar_or_array(direct + image - boundary)


def absorbed_wiener_density(kernel: WienerKernel, x, t: float, y: float):
    """Density at ``x`` after time ``t`` from ``y`` without having hit 0."""
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    b, v = kernel.drift, kernel.variance
    vt = v * t
    direct = np.exp(_log_gauss(x, y + b * t, vt))
    # the image term is the direct term times exp(-2xy/(vt))
    return _scalar_or_array(-direct * np.expm1(-2.0 * x * y / vt))


def wiener_fpt_density(kernel: WienerKernel, t, y: float):
    """Density of the first time the process started at ``y > 0`` hits 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    b, v = kernel.drift, kernel.variance
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (y / t) * np.exp(_log_gauss(y, -b * t, v * t))
    out = np.where(t > 0, out, 0.0)
    return _scalar_or_array(out)


# ---------------------------------------------------------------------------
# Scalar versions for use inside nested quadrature
# ---------------------------------------------------------------------------

def _gauss_scalar(x, mean, var):
    d = x - mean
    return math.exp(-0.5 * d * d / var) / math.sqrt(2.0 * math.pi * var)


def _reflected_scalar(b, v, x, t, y):
    vt = v * t
    direct = _gauss_scalar(x, y + b * t, vt)
    d = x + y - b * t
    image = math.exp(-2.0 * b * y / v - 0.5 * d * d / vt) / math.sqrt(2.0 * math.pi * vt)
    arg = (x + y + b * t) / math.sqrt(2.0 * vt)
    if arg >= 0:
        boundary = (b / v) * math.exp(2.0 * b * x / v - arg * arg) * erfcx(arg)
    else:
        boundary = (b / v) * math.exp(2.0 * b * x / v) * math.erfc(arg)
    return direct + image - boundary
