"""Steady-state distribution, means and entropies of the switching M/M/1 queue.

In the mixed regime (both switch rates positive) the joint law is

    q_{n,i} = P(E=i) [A_i P(V_1 = n) + (1 - A_i) P(V_2 = n)],

a generalized mixture of geometric laws ``P(V_k = n) = (1 - 1/xi_k) xi_k^{-n}``
where ``xi_1 > xi_2 > 1 > xi_3 > 0`` are the roots of the characteristic
cubic. When one switch rate is zero the surviving environment is a plain
M/M/1 queue and the other carries no mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfluentRootsError, RegimeError
from .model import QueueSpec, StabilityCase, classify
from .numerics import DEFAULT_SERIES, SeriesSettings, solve_cubic

CONFLUENT_TOL = 1e-8


@dataclass(frozen=True)
class GeneralizedMixture:
    """Signed two-component mixture ``w F_1 + (1 - w) F_2``.

    ``kind`` is ``"geometric"`` (parameters are the ratios ``r_k`` of
    ``(1 - r_k) r_k^n``) or ``"exponential"`` (parameters are rates ``c_k`` of
    ``c_k exp(-c_k x)``). The weight may lie outside ``[0, 1]``.
    """

    weight: float
    param1: float
    param2: float
    kind: str = "geometric"

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        w, a, b = self.weight, self.param1, self.param2
        if self.kind == "geometric":
            out = w * (1.0 - a) * a**v + (1.0 - w) * (1.0 - b) * b**v
        elif self.kind == "exponential":
            out = w * a * np.exp(-a * v) + (1.0 - w) * b * np.exp(-b * v)
        else:
            raise ValueError(f"unknown mixture kind {self.kind!r}")
        return float(out) if out.ndim == 0 else out

    def mean(self) -> float:
        w, a, b = self.weight, self.param1, self.param2
        if self.kind == "geometric":
            return w * a / (1.0 - a) + (1.0 - w) * b / (1.0 - b)
        return w / a + (1.0 - w) / b

    def tail_param(self) -> float:
        """Parameter of the slowest-decaying component."""
        if self.kind == "geometric":
            return max(self.param1, self.param2)
        return min(self.param1, self.param2)


@dataclass(frozen=True)
class CubicRootsDiscrete:
    xi1: float
    xi2: float
    xi3: float

    def as_tuple(self):
        return (self.xi1, self.xi2, self.xi3)


@dataclass(frozen=True)
class SteadyStateSolution:
    spec: QueueSpec
    case: StabilityCase
    roots: CubicRootsDiscrete | None
    weights: tuple[float, float] | None     # A_1, A_2 (mixed regime only)
    env_probs: tuple[float, float]          # P(E=1), P(E=2)
    env_mixtures: tuple[GeneralizedMixture | None, GeneralizedMixture | None]
    q0: tuple[float, float]

    @property
    def marginal_mixture(self) -> GeneralizedMixture:
        """Law of ``N`` as a single generalized mixture."""
        if self.case is StabilityCase.CASE_III:
            p1, p2 = self.env_probs
            a1, a2 = self.weights
            m = self.env_mixtures[0]
            return GeneralizedMixture(p1 * a1 + p2 * a2, m.param1, m.param2)
        mix = self.env_mixtures[0] or self.env_mixtures[1]
        return mix


def characteristic_polynomial(spec: QueueSpec) -> tuple[float, float, float, float]:
    """Coefficients ``(c3, c2, c1, c0)`` of the cubic whose roots drive the mixture."""
    (l1, m1, e1), (l2, m2, e2) = spec.rates
    return (
        l1 * l2,
        -(l1 * l2 + l1 * m2 + l1 * e2 + m1 * l2 + e1 * l2),
        l1 * m2 + m1 * l2 + m1 * m2 + m1 * e2 + e1 * m2,
        -m1 * m2,
    )


def discrete_roots(spec: QueueSpec) -> CubicRootsDiscrete:
    """Classified roots ``xi1 >= xi2 > 1 > xi3 > 0`` of the characteristic cubic.

    Raises:
        RegimeError: if the roots cannot be classified this way.
    """
    r = solve_cubic(*characteristic_polynomial(spec))
    below = [z for z in r if 0.0 < z < 1.0]
    above = sorted((z for z in r if z > 1.0), reverse=True)
    if len(below) != 1 or len(above) != 2:
        raise RegimeError(f"characteristic roots {r.roots} do not split as two > 1 and one in (0, 1)")
    return CubicRootsDiscrete(above[0], above[1], below[0])


def solve_steady(spec: QueueSpec) -> SteadyStateSolution:
    """Steady-state law of ``(N, E)``.

    Raises:
        RegimeError: if no steady state exists.
        ConfluentRootsError: if ``|xi1 - xi2| < 1e-8`` in the mixed regime.
    """
    case = classify(spec)
    (l1, m1, e1), (l2, m2, e2) = spec.rates
    if case is StabilityCase.NO_STEADY_STATE:
        raise RegimeError("no steady state: the stability condition fails")
    if case is StabilityCase.CASE_I:
        rho = l2 / m2
        mix = GeneralizedMixture(1.0, rho, rho)
        return SteadyStateSolution(spec, case, None, None, (0.0, 1.0), (None, mix), (0.0, 1.0 - rho))
    if case is StabilityCase.CASE_II:
        rho = l1 / m1
        mix = GeneralizedMixture(1.0, rho, rho)
        return SteadyStateSolution(spec, case, None, None, (1.0, 0.0), (mix, None), (1.0 - rho, 0.0))

    roots = discrete_roots(spec)
    x1, x2, x3 = roots.as_tuple()
    if abs(x1 - x2) < CONFLUENT_TOL:
        raise ConfluentRootsError(f"confluent roots xi1 = {x1!r}, xi2 = {x2!r}")
    drift = spec.drift_condition()
    lam, mu = (l1, l2), (m1, m2)
    weights = []
    for i in range(2):
        o = 1 - i
        weights.append(
            x1 * x3 * drift / (lam[i] * mu[i] * (1.0 - x3) * (x1 - 1.0) * (x1 - x2))
            * (mu[i] - lam[i] * x2) / (mu[o] - lam[o] * x3)
        )
    esum = e1 + e2
    q01 = e2 * x3 / (m1 * (1.0 - x3) * (m2 - l2 * x3)) * drift / esum
    q02 = e1 * x3 / (m2 * (1.0 - x3) * (m1 - l1 * x3)) * drift / esum
    mixes = tuple(GeneralizedMixture(a, 1.0 / x1, 1.0 / x2) for a in weights)
    return SteadyStateSolution(spec, case, roots, tuple(weights), (e2 / esum, e1 / esum),
                               mixes, (q01, q02))


def _check_env(i):
    if i not in (1, 2):
        raise ValueError(f"environment index must be 1 or 2, got {i!r}")


def joint_pmf(sol: SteadyStateSolution, n, i: int):
    """``q_{n,i} = P(N = n, E = i)``; ``n`` may be an array."""
    _check_env(i)
    mix = sol.env_mixtures[i - 1]
    if mix is None:
        out = np.zeros(np.shape(n))
        return float(out) if out.ndim == 0 else out
    return sol.env_probs[i - 1] * mix(n)


def marginal_pmf(sol: SteadyStateSolution, n):
    """``q_n = q_{n,1} + q_{n,2}``."""
    return joint_pmf(sol, n, 1) + joint_pmf(sol, n, 2)


def conditional_mean(sol: SteadyStateSolution, i: int) -> float:
    """``E[N | E = i]``."""
    _check_env(i)
    mix = sol.env_mixtures[i - 1]
    if mix is None:
        raise RegimeError(f"environment {i} carries no steady-state mass")
    return mix.mean()


def mean(sol: SteadyStateSolution) -> float:
    """``E(N)``."""
    return sol.marginal_mixture.mean()


def support_cutoff(sol: SteadyStateSolution, settings: SeriesSettings = DEFAULT_SERIES) -> int:
    """Smallest ``n > 10`` beyond which both ``q_{n,i}`` stay below ``tail_tol``.

    Both joint probabilities are eventually dominated by the slowest geometric
    component, so this bounds where truncated sums may stop.
    """
    r = max(m.tail_param() for m in sol.env_mixtures if m is not None)
    if r <= 0.0:
        return 11
    n = 11 + int(math.ceil(math.log(settings.tail_tol) / math.log(r)))
    step = max(n // 4, 16)
    while n < settings.max_terms:
        block = np.arange(n, n + 8)
        if np.all(np.abs(joint_pmf(sol, block, 1)) < settings.tail_tol) and \
                np.all(np.abs(joint_pmf(sol, block, 2)) < settings.tail_tol):
            return n
        n += step
    return settings.max_terms


def _entropy_terms(p):
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = -p[pos] * np.log(p[pos])
    return out


def entropy_N_given_env(sol: SteadyStateSolution, i: int,
                        settings: SeriesSettings = DEFAULT_SERIES) -> float:
    """Shannon entropy (nats) of ``N`` given ``E = i``."""
    _check_env(i)
    if sol.env_mixtures[i - 1] is None:
        raise RegimeError(f"environment {i} carries no steady-state mass")
    n = np.arange(support_cutoff(sol, settings))
    cond = joint_pmf(sol, n, i) / sol.env_probs[i - 1]
    return float(np.sum(_entropy_terms(cond)))


def entropy_N(sol: SteadyStateSolution, settings: SeriesSettings = DEFAULT_SERIES) -> float:
    """Shannon entropy (nats) of the steady-state queue length ``N``."""
    n = np.arange(support_cutoff(sol, settings))
    return float(np.sum(_entropy_terms(marginal_pmf(sol, n))))


def entropy_env_given_n(sol: SteadyStateSolution, n):
    """``H[E | N = n]`` in nats; ``n`` may be an array."""
    q1 = np.asarray(joint_pmf(sol, n, 1), dtype=float)
    q2 = np.asarray(joint_pmf(sol, n, 2), dtype=float)
    tot = q1 + q2
    out = _entropy_terms(q1 / tot) + _entropy_terms(q2 / tot)
    return float(out) if out.ndim == 0 else out


def entropy_env(sol: SteadyStateSolution) -> float:
    """``H(E)`` in nats."""
    return float(np.sum(_entropy_terms(np.array(sol.env_probs))))


def entropy_env_limit(sol: SteadyStateSolution) -> float:
    """``lim_{n -> inf} H[E | N = n]``."""
    if sol.case is not StabilityCase.CASE_III:
        return 0.0
    p1, p2 = sol.env_probs
    a1, a2 = sol.weights
    w = np.array([p1 * (1.0 - a1), p2 * (1.0 - a2)])
    return float(np.sum(_entropy_terms(w / w.sum())))


def pgf(sol: SteadyStateSolution, z, i: int):
    """Probability generating function ``G_i(z) = E[z^N 1{E = i}]``, closed form.

    Valid for ``|z| < xi2`` (in particular on ``[0, 1]``).
    """
    _check_env(i)
    z = np.asarray(z, dtype=float)
    spec = sol.spec
    (l1, m1, e1), (l2, m2, e2) = spec.rates
    if sol.case is not StabilityCase.CASE_III:
        mix = sol.env_mixtures[i - 1]
        if mix is None:
            out = np.zeros_like(z)
        else:
            r = mix.param1
            out = (1.0 - r) / (1.0 - r * z)
        return float(out) if out.ndim == 0 else out
    x1, x2, x3 = sol.roots.as_tuple()
    drift = spec.drift_condition()
    esum = e1 + e2
    if i == 1:
        pref = e2 * drift / ((1.0 - x3) * (m2 - l2 * x3) * esum)
        num = m2 - l2 * x3 * z
    else:
        pref = e1 * drift / ((1.0 - x3) * (m1 - l1 * x3) * esum)
        num = m1 - l1 * x3 * z
    out = pref * num / (l1 * l2 * (z - x1) * (z - x2))
    return float(out) if out.ndim == 0 else out
