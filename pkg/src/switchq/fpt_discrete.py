"""First emptying of the queue when only the 1 -> 2 switch is possible.

``T_j`` is the first time the queue reaches level 0 starting from level
``j >= 1``. Before that time the process behaves like an M/M/1 queue killed
at 0, so its law is built from taboo probabilities and the M/M/1 emptying
density ``g_{j,0}(t) = (j/t) e^{-(lam+mu)t} (mu/lam)^{j/2} I_j(2t sqrt(lam mu))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RegimeError
from .model import QueueSpec
from .numerics import (
    DEFAULT_QUAD,
    DEFAULT_SERIES,
    QuadratureSettings,
    SeriesSettings,
    log_bessel_i_scaled,
)
from .transient import (
    MM1Kernel,
    _reach,
    avoiding_matrix,
    emptying_density_vector,
    kernels_for,
    switch_convolution,
)


@dataclass(frozen=True)
class LaplaceRootsDiscrete:
    """Roots of ``mu z^2 - (s + lam + mu + eta) z + lam`` for both environments.

    ``phi`` belongs to environment 1 (with the switch rate ``eta1``), ``psi``
    to environment 2.
    """

    phi1: float
    phi2: float
    psi1: float
    psi2: float
    s: float


def _quadratic_roots(s: float, lam: float, mu: float, eta: float) -> tuple[float, float]:
    a = s + lam + mu + eta
    disc = math.sqrt(a * a - 4.0 * lam * mu)
    big = (a + disc) / (2.0 * mu)
    # the small root from the product avoids cancellation
    return big, lam / (mu * big)


def laplace_roots(spec: QueueSpec, s: float) -> LaplaceRootsDiscrete:
    """``phi_{1,2}(s)`` and ``psi_{1,2}(s)``.

    At ``s = 0`` the exact limits are used: ``psi1(0) = max(1, lam2/mu2)``.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    (l1, m1, e1), (l2, m2, _) = spec.rates
    phi1, phi2 = _quadratic_roots(s, l1, m1, e1)
    if s == 0:
        psi1 = max(1.0, l2 / m2)
        psi2 = l2 / (m2 * psi1)
    else:
        psi1, psi2 = _quadratic_roots(s, l2, m2, 0.0)
    return LaplaceRootsDiscrete(phi1, phi2, psi1, psi2, float(s))


def _require_one_way(spec: QueueSpec):
    if spec.eta2 != 0:
        raise RegimeError("first-emptying formulas require eta2 = 0")


def _require_level(j):
    if j < 1:
        raise ValueError("first emptying needs a starting level j >= 1")


# ---------------------------------------------------------------------------
# Single-environment building blocks
# ---------------------------------------------------------------------------

def avoiding_prob(kernel: MM1Kernel, j: int, n: int, t: float) -> float:
    """``P(N(t) = n, no visit to 0 in [0, t] | N(0) = j)`` for the M/M/1 queue."""
    if j < 1 or n < 1:
        raise ValueError("taboo probabilities need j, n >= 1")
    return float(avoiding_matrix(kernel, t, [j], [n])[0, 0])


def avoiding_prob_level_one(kernel: MM1Kernel, j: int, t: float) -> float:
    """Taboo probability of sitting at level 1, from the Bessel recurrence."""
    if j < 1:
        raise ValueError("j must be >= 1")
    if t == 0:
        return 1.0 if j == 1 else 0.0
    x = float(kernel.bessel_argument(t))
    return math.exp(math.log(j) - math.log(kernel.mu * t) + float(kernel.log_decay(t))
                    - 0.5 * j * kernel.log_ratio + log_bessel_i_scaled(j, x))


def mm1_fpt_density(kernel: MM1Kernel, j: int, t: float) -> float:
    """Density of the first time the M/M/1 queue empties, starting from ``j``."""
    _require_level(j)
    if t < 0:
        raise ValueError("t must be nonnegative")
    return float(emptying_density_vector(kernel, t, [j])[0])


# ---------------------------------------------------------------------------
# Switching process
# ---------------------------------------------------------------------------

def absorbed_state_pmf(spec: QueueSpec, t: float, n_max: int,
                       quad: QuadratureSettings = DEFAULT_QUAD,
                       series: SeriesSettings = DEFAULT_SERIES) -> tuple[np.ndarray, np.ndarray]:
    """``(gamma_{n,1}(t), gamma_{n,2}(t))`` for ``n = 0..n_max``.

    ``gamma_{n,i}(t) = P(N(t) = n, E(t) = i, T_j > t)``; entries at ``n = 0``
    are zero by definition.
    """
    _require_one_way(spec)
    j = spec.init_state
    _require_level(j)
    if t < 0:
        raise ValueError("t must be nonnegative")
    k1, k2 = kernels_for(spec)
    p, e1 = spec.init_env_prob, spec.eta1
    ns = np.arange(n_max + 1)
    g1 = p * math.exp(-e1 * t) * avoiding_matrix(k1, t, [j], ns)[0]
    g2 = (1.0 - p) * avoiding_matrix(k2, t, [j], ns)[0]
    if p > 0 and e1 > 0 and t > 0:
        horizon = min(t, math.log(1.0 / series.tail_tol) / e1 + 1.0)
        conv = switch_convolution(
            lambda tau, ks: avoiding_matrix(k1, tau, [j], ks)[0],
            lambda u, ks: avoiding_matrix(k2, u, ks, ns),
            e1, t, 1, _reach(k1, j, horizon), 1.0, quad, series,
        )
        g2 = g2 + p * e1 * conv
    return g1, g2


def absorbed_state_prob(spec: QueueSpec, n: int, i: int, t: float,
                        quad: QuadratureSettings = DEFAULT_QUAD,
                        series: SeriesSettings = DEFAULT_SERIES) -> float:
    """``P(N(t) = n, E(t) = i, no emptying in [0, t])``."""
    if i not in (1, 2):
        raise ValueError(f"environment index must be 1 or 2, got {i!r}")
    if n < 0:
        raise ValueError("n must be nonnegative")
    g1, g2 = absorbed_state_pmf(spec, t, n, quad, series)
    return float((g1 if i == 1 else g2)[n])


def fpt_density(spec: QueueSpec, t: float,
                quad: QuadratureSettings = DEFAULT_QUAD,
                series: SeriesSettings = DEFAULT_SERIES) -> float:
    """Density ``b_j(t)`` of the first emptying time from ``j = init_state``."""
    _require_one_way(spec)
    j = spec.init_state
    _require_level(j)
    if t < 0:
        raise ValueError("t must be nonnegative")
    k1, k2 = kernels_for(spec)
    p, e1 = spec.init_env_prob, spec.eta1
    out = (p * math.exp(-e1 * t) * emptying_density_vector(k1, t, [j])[0]
           + (1.0 - p) * emptying_density_vector(k2, t, [j])[0])
    if p > 0 and e1 > 0 and t > 0:
        horizon = min(t, math.log(k2.mu / series.tail_tol) / e1 + 1.0)
        conv = switch_convolution(
            lambda tau, ks: avoiding_matrix(k1, tau, [j], ks)[0],
            lambda u, ks: emptying_density_vector(k2, u, ks)[:, None],
            e1, t, 1, _reach(k1, j, horizon), k2.mu, quad, series,
        )
        out += p * e1 * float(conv[0])
    return float(out)


def _power_quotient(a: float, b: float, j: int) -> float:
    """``(a^j - b^j) / ((a - b) a^{j-1} b^{j-1})`` as a finite sum.

    Equals ``sum_{m=0}^{j-1} a^{-m} b^{-(j-1-m)}``, which stays finite when
    ``a = b``.
    """
    m = np.arange(j)
    return float(np.sum(a ** (-m) * b ** (-(j - 1 - m))))


def fpt_laplace(spec: QueueSpec, s: float) -> float:
    """Laplace transform ``B_j(s) = E[e^{-s T_j}; T_j < inf]``."""
    _require_one_way(spec)
    j = spec.init_state
    _require_level(j)
    r = laplace_roots(spec, s)
    p, e1, l1 = spec.init_env_prob, spec.eta1, spec.lambda1
    out = p * r.phi1 ** (-j) + (1.0 - p) * r.psi1 ** (-j)
    if e1 > 0 and p > 0:
        # (psi1^j - phi1^j) / (psi1 - phi1) is a polynomial; no pole at psi1 = phi1
        out += (e1 * p * r.phi2 / (l1 * (r.psi1 - r.phi2))
                * _power_quotient(r.psi1, r.phi1, j))
    return float(out)


def absorption_probability(spec: QueueSpec) -> float:
    """``P(T_j < inf)``; equal to 1 whenever ``lambda2 <= mu2``."""
    _require_one_way(spec)
    _require_level(spec.init_state)
    if spec.lambda2 <= spec.mu2:
        return 1.0
    return fpt_laplace(spec, 0.0)


def fpt_mean(spec: QueueSpec) -> float:
    """``E(T_j)``.

    Raises:
        RegimeError: if ``lambda2 >= mu2`` (the mean is infinite) or
            ``eta1 = 0``.
    """
    _require_one_way(spec)
    j = spec.init_state
    _require_level(j)
    (l1, m1, e1), (l2, m2, _) = spec.rates
    if l2 >= m2:
        raise RegimeError("FPT mean undefined: λ₂ ≥ μ₂")
    if e1 <= 0:
        raise RegimeError("FPT mean formula requires eta1 > 0")
    r = laplace_roots(spec, 0.0)
    c_plus, c_minus = l1 - m1 + e1, l1 - m1 - e1
    bracket = (1.0 / (c_plus * r.phi1 - c_minus) + 1.0 / (c_plus * r.phi2 - c_minus)
               - (m1 - l1) / (e1 * (m2 - l2)))
    return j / (m2 - l2) + spec.init_env_prob * (1.0 - r.phi1 ** (-j)) * bracket
