"""Transient densities and first passage of the diffusion when ``eta2 = 0``.

The process runs as a Wiener process with ``(beta1, omega1^2)`` until an
exponential switch time, then with ``(beta2, omega2^2)`` for ever after.
Densities after the switch are time-and-space convolutions of the two
single-environment kernels.

For the killed process both kernels are sums of Gaussians in the
intermediate position ``z``, so the ``z`` integral is done in closed form
and only the time integral is numerical. The reflected kernel carries an
``erfc`` term, so ``f_2`` uses nested adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate as _integrate
from scipy.special import erfcx, log_ndtr

from ..errors import RegimeError
from ..model import DiffusionSpec
from ..numerics import DEFAULT_QUAD, DEFAULT_SERIES, QuadratureSettings, SeriesSettings, integrate
from .kernels import (
    WienerKernel,
    _reflected_scalar,
    absorbed_wiener_density,
    reflected_wiener_density,
    wiener_fpt_density,
)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LaplaceRootsDiffusion:
    """``zeta_{1,2}(s)`` for environment 1 and ``theta_{1,2}(s)`` for environment 2."""

    zeta1: float
    zeta2: float
    theta1: float
    theta2: float
    s: float


def kernels_for(spec: DiffusionSpec) -> tuple[WienerKernel, WienerKernel]:
    b1, b2 = spec.drifts
    return WienerKernel(b1, spec.omega1_sq), WienerKernel(b2, spec.omega2_sq)


def _require_one_way(spec: DiffusionSpec):
    if spec.eta2 != 0:
        raise RegimeError("closed-form diffusion results require eta2 = 0")


def _check_env(i):
    if i not in (1, 2):
        raise ValueError(f"environment index must be 1 or 2, got {i!r}")


def _tau_limit(t: float, eta1: float, bound: float, series: SeriesSettings) -> float:
    """Time beyond which ``bound e^{-eta1 tau}`` is below ``tail_tol``."""
    return min(t, math.log(max(bound, 1.0) / series.tail_tol) / eta1 + 1.0)


# ---------------------------------------------------------------------------
# Closed-form z integrals of Gaussian products over [0, inf)
# ---------------------------------------------------------------------------

def _log_gauss_overlap(m1, s1, m2, s2):
    """Log of ``phi(m1 - m2; 0, s1 + s2)`` and the combined mean and sd."""
    tot = s1 + s2
    d = m1 - m2
    log_norm = -0.5 * d * d / tot - 0.5 * math.log(tot) - _LOG_SQRT_2PI
    mc = (m1 * s2 + m2 * s1) / tot
    sc = math.sqrt(s1 * s2 / tot)
    return log_norm, mc, sc


def _half_line_product(log_w, m1, s1, m2, s2):
    """``e^{log_w} int_0^inf phi(z; m1, s1) phi(z; m2, s2) dz``."""
    log_norm, mc, sc = _log_gauss_overlap(m1, s1, m2, s2)
    return math.exp(log_w + log_norm + float(log_ndtr(mc / sc)))


def _log_first_moment_factor(a):
    """``log(a Phi(a) + phi(a))``, the half-line mean of a standard normal shift."""
    if a > -5.0:
        phi = math.exp(-0.5 * a * a) / math.sqrt(2.0 * math.pi)
        return math.log(a * 0.5 * math.erfc(-a / math.sqrt(2.0)) + phi)
    # a Phi(a) + phi(a) = phi(a) (1 - |a| R(|a|)) with R the Mills ratio
    mills = math.sqrt(math.pi / 2.0) * float(erfcx(-a / math.sqrt(2.0)))
    return -0.5 * a * a - _LOG_SQRT_2PI + math.log1p(a * mills)


def _half_line_first_moment(log_w, m1, s1, m2, s2):
    """``e^{log_w} int_0^inf z phi(z; m1, s1) phi(z; m2, s2) dz``."""
    log_norm, mc, sc = _log_gauss_overlap(m1, s1, m2, s2)
    return math.exp(log_w + log_norm + math.log(sc) + _log_first_moment_factor(mc / sc))


def _absorbed_gaussians(b, v, t, y):
    """Killed kernel from ``y`` as ``[(sign, log weight, mean)]`` Gaussians in the end point."""
    return [(1.0, 0.0, y + b * t), (-1.0, -2.0 * b * y / v, -y + b * t)]


def _absorbed_gaussians_start(b, v, u, x):
    """Killed kernel to ``x`` as Gaussians in the start point ``z``."""
    return [(1.0, 0.0, x - b * u), (-1.0, 2.0 * b * x / v, -x - b * u)]


def absorbed_chain_kernel(k1: WienerKernel, k2: WienerKernel, x: float, tau: float,
                          u: float, y: float) -> float:
    """``int_0^inf a1(z, tau | y) a2(x, u | z) dz`` for the killed kernels."""
    s1, s2 = k1.variance * tau, k2.variance * u
    total = 0.0
    for sg1, lw1, m1 in _absorbed_gaussians(k1.drift, k1.variance, tau, y):
        for sg2, lw2, m2 in _absorbed_gaussians_start(k2.drift, k2.variance, u, x):
            total += sg1 * sg2 * _half_line_product(lw1 + lw2, m1, s1, m2, s2)
    return total


def absorbed_to_fpt_kernel(k1: WienerKernel, k2: WienerKernel, tau: float, u: float,
                           y: float) -> float:
    """``int_0^inf a1(z, tau | y) g2(0, u | z) dz``."""
    s1, s2 = k1.variance * tau, k2.variance * u
    total = 0.0
    for sg1, lw1, m1 in _absorbed_gaussians(k1.drift, k1.variance, tau, y):
        total += sg1 * _half_line_first_moment(lw1, m1, s1, -k2.drift * u, s2)
    return total / u


# ---------------------------------------------------------------------------
# Transient densities
# ---------------------------------------------------------------------------

def _tail_width(series: SeriesSettings) -> float:
    return math.sqrt(2.0 * math.log(1.0 / series.tail_tol)) + 2.0


def _reflected_chain(k1, k2, x, tau, u, y, quad, series):
    """``int_0^inf r1(z, tau | y) r2(x, u | z) dz`` by adaptive quadrature.

    The range stops where the first kernel's Gaussian tail drops below
    ``tail_tol``; the peaks of both factors are passed as break points.
    """
    b1, v1, b2, v2 = k1.drift, k1.variance, k2.drift, k2.variance
    zmax = y + abs(b1) * tau + _tail_width(series) * math.sqrt(v1 * tau)
    pts = sorted({p for p in (y + b1 * tau, x - b2 * u) if 0.0 < p < zmax})

    def g(z):
        return _reflected_scalar(b1, v1, z, tau, y) * _reflected_scalar(b2, v2, x, u, z)

    return _integrate.quad(g, 0.0, zmax, points=pts or None, epsabs=quad.abs_tol * 0.1,
                           epsrel=quad.rel_tol * 0.1, limit=quad.max_depth)[0]


def transient_density(spec: DiffusionSpec, x: float, i: int, t: float,
                      quad: QuadratureSettings = DEFAULT_QUAD,
                      series: SeriesSettings = DEFAULT_SERIES) -> float:
    """``f_i(x, t)``, the density of ``X(t)`` jointly with ``E(t) = i``."""
    _require_one_way(spec)
    _check_env(i)
    if not t > 0:
        raise ValueError("t must be positive")
    if x < 0:
        return 0.0
    k1, k2 = kernels_for(spec)
    y, p, e1 = spec.init_position, spec.init_env_prob, spec.eta1
    if i == 1:
        return p * math.exp(-e1 * t) * reflected_wiener_density(k1, x, t, y)
    out = (1.0 - p) * reflected_wiener_density(k2, x, t, y)
    if p > 0 and e1 > 0:
        upper = _tau_limit(t, e1, 1.0 / math.sqrt(k2.variance), series)

        def outer(tau):
            return math.exp(-e1 * tau) * _reflected_chain(k1, k2, x, tau, t - tau, y, quad, series)

        out += p * e1 * integrate(outer, 0.0, upper, quad)
    return float(out)


def absorbed_transient_density(spec: DiffusionSpec, x: float, i: int, t: float,
                               quad: QuadratureSettings = DEFAULT_QUAD,
                               series: SeriesSettings = DEFAULT_SERIES) -> float:
    """``h_i(x, t | y)``: density of ``X(t)`` with ``E(t) = i`` before hitting 0."""
    _require_one_way(spec)
    _check_env(i)
    y = spec.init_position
    if not y > 0:
        raise ValueError("absorbed densities need a start y > 0")
    if not t > 0:
        raise ValueError("t must be positive")
    if x <= 0:
        return 0.0
    k1, k2 = kernels_for(spec)
    p, e1 = spec.init_env_prob, spec.eta1
    if i == 1:
        return p * math.exp(-e1 * t) * absorbed_wiener_density(k1, x, t, y)
    out = (1.0 - p) * absorbed_wiener_density(k2, x, t, y)
    if p > 0 and e1 > 0:
        upper = _tau_limit(t, e1, 1.0 / math.sqrt(k2.variance), series)

        def outer(tau):
            return math.exp(-e1 * tau) * absorbed_chain_kernel(k1, k2, x, tau, t - tau, y)

        out += p * e1 * integrate(outer, 0.0, upper, quad)
    return float(out)


# ---------------------------------------------------------------------------
# First passage through 0
# ---------------------------------------------------------------------------

def fpt_density(spec: DiffusionSpec, t: float,
                quad: QuadratureSettings = DEFAULT_QUAD,
                series: SeriesSettings = DEFAULT_SERIES) -> float:
    """Density ``k(0, t | y)`` of the first hitting time of 0."""
    _require_one_way(spec)
    y = spec.init_position
    if not y > 0:
        raise ValueError("first passage needs a start y > 0")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 0.0
    k1, k2 = kernels_for(spec)
    p, e1 = spec.init_env_prob, spec.eta1
    out = (p * math.exp(-e1 * t) * wiener_fpt_density(k1, t, y)
           + (1.0 - p) * wiener_fpt_density(k2, t, y))
    if p > 0 and e1 > 0:
        upper = _tau_limit(t, e1, 1.0, series)

        def outer(tau):
            return math.exp(-e1 * tau) * absorbed_to_fpt_kernel(k1, k2, tau, t - tau, y)

        out += p * e1 * integrate(outer, 0.0, upper, quad)
    return float(out)


def laplace_roots(spec: DiffusionSpec, s: float) -> LaplaceRootsDiffusion:
    """``zeta_{1,2}(s)`` and ``theta_{1,2}(s)``; ``theta1(0) = max(0, 2 beta2 / omega2^2)`` exactly."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    b1, b2 = spec.drifts
    v1, v2 = spec.variances
    zeta1, zeta2 = _quadratic_roots(b1, v1, s + spec.eta1)
    if s == 0:
        theta1, theta2 = max(0.0, 2.0 * b2 / v2), min(0.0, 2.0 * b2 / v2)
    else:
        theta1, theta2 = _quadratic_roots(b2, v2, s)
    return LaplaceRootsDiffusion(zeta1, zeta2, theta1, theta2, float(s))


def _quadratic_roots(b: float, v: float, c: float) -> tuple[float, float]:
    """Roots of ``v z^2 - 2 b z - 2 c`` with ``c >= 0``, larger first, without cancellation."""
    r = math.sqrt(b * b + 2.0 * v * c)
    if b >= 0:
        big = (b + r) / v
        return big, (-2.0 * c / (v * big) if big > 0 else 0.0)
    small = (b - r) / v
    return -2.0 * c / (v * small), small


def _exp_difference_quotient(a: float, b: float, y: float) -> float:
    """``(e^{-y a} - e^{-y b}) / (a - b)``, finite at ``a = b``."""
    h = 0.5 * y * (a - b)
    sinhc = 1.0 if h == 0 else math.sinh(h) / h
    return -y * math.exp(-0.5 * y * (a + b)) * sinhc


def fpt_laplace(spec: DiffusionSpec, s: float) -> float:
    """``K(s | y) = E[e^{-s T_y}; T_y < inf]``."""
    _require_one_way(spec)
    y = spec.init_position
    if not y > 0:
        raise ValueError("first passage needs a start y > 0")
    r = laplace_roots(spec, s)
    p, e1, v1 = spec.init_env_prob, spec.eta1, spec.omega1_sq
    out = p * math.exp(-y * r.zeta1) + (1.0 - p) * math.exp(-y * r.theta1)
    if p > 0 and e1 > 0:
        out += (2.0 * e1 * p / (v1 * (r.zeta2 - r.theta1))
                * _exp_difference_quotient(r.zeta1, r.theta1, y))
    return float(out)


def absorption_probability(spec: DiffusionSpec) -> float:
    """``P(T_y < inf)``; 1 whenever ``lambda2* <= mu2*``."""
    _require_one_way(spec)
    if spec.lambda2s <= spec.mu2s:
        return 1.0
    return fpt_laplace(spec, 0.0)


def fpt_mean(spec: DiffusionSpec) -> float:
    """``E(T_y)``.

    Raises:
        RegimeError: if ``lambda2* >= mu2*`` or ``eta1 = 0``.
    """
    _require_one_way(spec)
    y = spec.init_position
    if not y > 0:
        raise ValueError("first passage needs a start y > 0")
    d1, d2 = spec.mu1s - spec.lambda1s, spec.mu2s - spec.lambda2s
    if d2 <= 0:
        raise RegimeError("FPT mean undefined: λ₂* ≥ μ₂*")
    if spec.eta1 <= 0:
        raise RegimeError("FPT mean formula requires eta1 > 0")
    zeta1 = laplace_roots(spec, 0.0).zeta1
    return y / d2 + spec.init_env_prob / spec.eta1 * (1.0 - d1 / d2) * (-math.expm1(-y * zeta1))
