"""Stationary density of the switching reflected Wiener process.

In the mixed regime the joint density is

    W_i(x) = P(E=i) [A*_i xi1 e^{-xi1 x} + (1 - A*_i) xi2 e^{-xi2 x}],

with ``xi1 > xi2 > 0 > xi3`` the roots of the characteristic cubic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfluentRootsError, RegimeError
from ..model import DiffusionSpec, StabilityCase, classify
from ..numerics import solve_cubic
from ..steady_state import CONFLUENT_TOL, GeneralizedMixture


@dataclass(frozen=True)
class CubicRootsDiffusion:
    xi1s: float
    xi2s: float
    xi3s: float

    def as_tuple(self):
        return (self.xi1s, self.xi2s, self.xi3s)


@dataclass(frozen=True)
class SteadyDensitySolution:
    spec: DiffusionSpec
    case: StabilityCase
    roots: CubicRootsDiffusion | None
    weights: tuple[float, float] | None
    env_probs: tuple[float, float]
    env_mixtures: tuple[GeneralizedMixture | None, GeneralizedMixture | None]
    w0: tuple[float, float]                 # densities at the boundary x -> 0+

    @property
    def marginal_mixture(self) -> GeneralizedMixture:
        if self.case is StabilityCase.CASE_III:
            p1, p2 = self.env_probs
            a1, a2 = self.weights
            m = self.env_mixtures[0]
            return GeneralizedMixture(p1 * a1 + p2 * a2, m.param1, m.param2, "exponential")
        return self.env_mixtures[0] or self.env_mixtures[1]


def characteristic_polynomial(spec: DiffusionSpec) -> tuple[float, float, float, float]:
    """Coefficients ``(c3, c2, c1, c0)`` of the cubic whose roots set the decay rates."""
    b1, b2 = spec.drifts
    w1, w2 = spec.variances
    e1, e2 = spec.eta1, spec.eta2
    return (
        w1 * w2,
        2.0 * (w1 * b2 + w2 * b1),
        -2.0 * (w1 * e2 - 2.0 * b1 * b2 + w2 * e1),
        -4.0 * (e1 * b2 + e2 * b1),
    )


def diffusion_roots(spec: DiffusionSpec) -> CubicRootsDiffusion:
    """Classified roots ``xi1* >= xi2* > 0 > xi3*``.

    Raises:
        RegimeError: if the roots do not split as two positive and one negative.
    """
    r = solve_cubic(*characteristic_polynomial(spec))
    pos = sorted((z for z in r if z > 0), reverse=True)
    neg = [z for z in r if z < 0]
    if len(pos) != 2 or len(neg) != 1:
        raise RegimeError(f"characteristic roots {r.roots} do not split as two positive and one negative")
    return CubicRootsDiffusion(pos[0], pos[1], neg[0])


def solve_steady_density(spec: DiffusionSpec) -> SteadyDensitySolution:
    """Stationary law of ``(X, E)``.

    Raises:
        RegimeError: if no steady state exists.
        ConfluentRootsError: if the two positive roots coincide to 1e-8.
    """
    case = classify(spec)
    b1, b2 = spec.drifts
    w1, w2 = spec.variances
    e1, e2 = spec.eta1, spec.eta2
    if case is StabilityCase.NO_STEADY_STATE:
        raise RegimeError("no steady state: the stability condition fails")
    if case is StabilityCase.CASE_I:
        rate = -2.0 * b2 / w2
        mix = GeneralizedMixture(1.0, rate, rate, "exponential")
        return SteadyDensitySolution(spec, case, None, None, (0.0, 1.0), (None, mix), (0.0, rate))
    if case is StabilityCase.CASE_II:
        rate = -2.0 * b1 / w1
        mix = GeneralizedMixture(1.0, rate, rate, "exponential")
        return SteadyDensitySolution(spec, case, None, None, (1.0, 0.0), (mix, None), (rate, 0.0))

    roots = diffusion_roots(spec)
    x1, x2, x3 = roots.as_tuple()
    if abs(x1 - x2) < CONFLUENT_TOL:
        raise ConfluentRootsError(f"confluent roots xi1* = {x1!r}, xi2* = {x2!r}")
    drift = spec.drift_condition()
    var = (w1, w2)
    neg_drift = (-b1, -b2)        # mu_i* - lambda_i*
    weights = []
    for i in range(2):
        o = 1 - i
        weights.append(
            4.0 * drift / (w1 * w2 * x1 * x3 * (x1 - x2))
            * (var[o] * (x1 + x3) - 2.0 * neg_drift[o]) / (var[o] * x3 - 2.0 * neg_drift[o])
        )
    esum = e1 + e2
    lim1 = 4.0 * e2 / (w1 * x3 * (w2 * x3 - 2.0 * neg_drift[1])) * drift / esum
    lim2 = 4.0 * e1 / (w2 * x3 * (w1 * x3 - 2.0 * neg_drift[0])) * drift / esum
    mixes = tuple(GeneralizedMixture(a, x1, x2, "exponential") for a in weights)
    return SteadyDensitySolution(spec, case, roots, tuple(weights), (e2 / esum, e1 / esum),
                                 mixes, (lim1, lim2))


def _check_env(i):
    if i not in (1, 2):
        raise ValueError(f"environment index must be 1 or 2, got {i!r}")


def steady_density(sol: SteadyDensitySolution, x, i: int):
    """``W_i(x)``, the stationary density of ``X`` jointly with ``E = i``."""
    _check_env(i)
    mix = sol.env_mixtures[i - 1]
    if mix is None:
        out = np.zeros(np.shape(x))
        return float(out) if out.ndim == 0 else out
    return sol.env_probs[i - 1] * mix(x)


def marginal_density(sol: SteadyDensitySolution, x):
    """``W(x) = W_1(x) + W_2(x)``."""
    return steady_density(sol, x, 1) + steady_density(sol, x, 2)


def conditional_mean(sol: SteadyDensitySolution, i: int) -> float:
    """``E[X | E = i]``."""
    _check_env(i)
    mix = sol.env_mixtures[i - 1]
    if mix is None:
        raise RegimeError(f"environment {i} carries no steady-state mass")
    return mix.mean()


def mean(sol: SteadyDensitySolution) -> float:
    """``E(X)``."""
    return sol.marginal_mixture.mean()


def mgf(sol: SteadyDensitySolution, z, i: int):
    """``M_i(z) = E[e^{zX} 1{E = i}]`` in closed form, valid for ``z < xi2*``."""
    _check_env(i)
    z = np.asarray(z, dtype=float)
    if sol.case is not StabilityCase.CASE_III:
        mix = sol.env_mixtures[i - 1]
        out = np.zeros_like(z) if mix is None else mix.param1 / (mix.param1 - z)
        return float(out) if out.ndim == 0 else out
    spec = sol.spec
    x1, x2, x3 = sol.roots.as_tuple()
    w1, w2 = spec.variances
    b1, b2 = spec.drifts
    drift = spec.drift_condition()
    esum = spec.eta1 + spec.eta2
    if i == 1:
        eta, w_o, nd_o = spec.eta2, w2, -b2
    else:
        eta, w_o, nd_o = spec.eta1, w1, -b1
    pref = 4.0 * eta / (w1 * w2 * x3) * drift / esum / (w_o * x3 - 2.0 * nd_o)
    out = pref * (-w_o * z - w_o * x3 + 2.0 * nd_o) / ((z - x1) * (z - x2))
    return float(out) if out.ndim == 0 else out
