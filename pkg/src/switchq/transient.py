"""Transient law of the queue when only one switch direction is possible.

With ``eta2 = 0`` the environment can only move from 1 to 2, so the process
is an M/M/1 queue with rates ``(lambda1, mu1)`` up to an exponential switch
time and an M/M/1 queue with rates ``(lambda2, mu2)`` afterwards:

    p_{n,1}(t) = p e^{-eta1 t} P1_{j,n}(t)
    p_{n,2}(t) = (1 - p) P2_{j,n}(t)
                 + p eta1 sum_k int_0^t e^{-eta1 tau} P1_{j,k}(tau) P2_{k,n}(t - tau) dtau

where ``Pi`` is the M/M/1 transition kernel. All Bessel factors are handled
in log space so that large ``t`` never overflows.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, RegimeError
from .model import QueueSpec
from .numerics import (
    DEFAULT_QUAD,
    DEFAULT_SERIES,
    QuadratureSettings,
    SeriesSettings,
    integrate_vec,
    log_bessel_i_scaled,
    sum_series,
    truncate_by_run,
)


@dataclass(frozen=True)
class MM1Kernel:
    """Plain M/M/1 queue with arrival rate ``lam`` and service rate ``mu``."""

    lam: float
    mu: float

    def __post_init__(self):
        if not (self.lam > 0 and self.mu > 0):
            raise ValueError("MM1Kernel rates must be positive")

    @property
    def log_ratio(self) -> float:
        """``log(lam / mu)``."""
        return math.log(self.lam) - math.log(self.mu)

    def bessel_argument(self, t):
        return 2.0 * np.asarray(t, dtype=float) * math.sqrt(self.lam * self.mu)

    def log_decay(self, t):
        """``log`` of ``e^{-(lam + mu) t} e^{x}`` with ``x = 2 t sqrt(lam mu)``."""
        return -((math.sqrt(self.lam) - math.sqrt(self.mu)) ** 2) * np.asarray(t, dtype=float)

    def peak_index(self, t: float) -> int:
        """Approximate index where ``(mu/lam)^{k/2} I_k(x)`` peaks in ``k``."""
        r = self.lam / self.mu
        if r >= 1.0:
            return 0
        x = float(self.bessel_argument(t))
        return int(math.ceil(x * (1.0 - r) / (2.0 * math.sqrt(r))))


def kernels_for(spec: QueueSpec) -> tuple[MM1Kernel, MM1Kernel]:
    return MM1Kernel(spec.lambda1, spec.mu1), MM1Kernel(spec.lambda2, spec.mu2)


# ---------------------------------------------------------------------------
# Vectorized kernel tables
# ---------------------------------------------------------------------------

# log-space margin below the largest term at which a series tail is dropped
_LOG_MARGIN = 46.0


def _log_bessel_table(x: float, kmax: int) -> np.ndarray:
    return np.asarray(log_bessel_i_scaled(np.arange(kmax + 1), x), dtype=float)


def _log_tail_sums(kernel: MM1Kernel, t: float, m_max: int):
    """``log sum_{k >= m} (mu/lam)^{k/2} e^{-x} I_k(x)`` for ``m = 0..m_max``.

    The table is extended until the terms have fallen ``_LOG_MARGIN`` below
    their maximum and are decreasing.
    """
    x = float(kernel.bessel_argument(t))
    half = -0.5 * kernel.log_ratio
    kmax = max(m_max, kernel.peak_index(t)) + 32 + int(8.0 * math.sqrt(x))
    while True:
        k = np.arange(kmax + 1)
        logs = half * k + _log_bessel_table(x, kmax)
        top = np.max(logs)
        if logs[-1] < top - _LOG_MARGIN and logs[-1] < logs[-2]:
            break
        kmax *= 2
    tails = np.logaddexp.accumulate(logs[::-1])[::-1]
    return tails[: m_max + 1]


def transition_matrix(kernel: MM1Kernel, t: float, j_values, n_values) -> np.ndarray:
    """Table of M/M/1 transition probabilities ``P_{j,n}(t)``.

    Rows follow ``j_values``, columns ``n_values``. ``t = 0`` gives the
    identity pattern exactly.
    """
    j = np.asarray(j_values, dtype=np.int64)[:, None]
    n = np.asarray(n_values, dtype=np.int64)[None, :]
    if t == 0:
        return (j == n).astype(float)
    if t < 0:
        raise ValueError("t must be nonnegative")
    x = float(kernel.bessel_argument(t))
    lr = kernel.log_ratio
    lp = float(kernel.log_decay(t))
    top = int(np.max(n) + np.max(j) + 2)
    lb = _log_bessel_table(x, top)
    tails = _log_tail_sums(kernel, t, top)
    first = np.exp(lp + 0.5 * (n - j) * lr + lb[np.abs(n - j)])
    second = np.exp(lp + 0.5 * (n - j - 1) * lr + lb[n + j + 1])
    third = (1.0 - math.exp(lr)) * np.exp(lp + n * lr + tails[n + j + 2])
    return first + second + third


def avoiding_matrix(kernel: MM1Kernel, t: float, j_values, n_values) -> np.ndarray:
    """Table of taboo probabilities ``P(N(t) = n, no visit to 0 | N(0) = j)``.

    Defined for ``j, n >= 1``; entries with ``n = 0`` or ``j = 0`` are zero.
    """
    j = np.asarray(j_values, dtype=np.int64)[:, None]
    n = np.asarray(n_values, dtype=np.int64)[None, :]
    live = (j >= 1) & (n >= 1)
    if t == 0:
        return ((j == n) & live).astype(float)
    if t < 0:
        raise ValueError("t must be nonnegative")
    x = float(kernel.bessel_argument(t))
    lb = _log_bessel_table(x, int(np.max(n) + np.max(j)))
    base = float(kernel.log_decay(t)) + 0.5 * (n - j) * kernel.log_ratio
    out = np.exp(base + lb[np.abs(n - j)]) - np.exp(base + lb[n + j])
    return np.where(live, out, 0.0)


def emptying_density_vector(kernel: MM1Kernel, t: float, j_values) -> np.ndarray:
    """First-passage densities from each level in ``j_values`` down to 0."""
    j = np.asarray(j_values, dtype=np.int64)
    if t == 0:
        return np.where(j == 1, kernel.mu, 0.0)
    x = float(kernel.bessel_argument(t))
    lb = _log_bessel_table(x, int(np.max(j)))
    with np.errstate(divide="ignore"):
        logs = (np.log(j.astype(float)) - math.log(t) + float(kernel.log_decay(t))
                - 0.5 * j * kernel.log_ratio + lb[j])
    return np.where(j >= 1, np.exp(logs), 0.0)


# ---------------------------------------------------------------------------
# Scalar evaluators
# ---------------------------------------------------------------------------

def mm1_transition(kernel: MM1Kernel, j: int, n: int, t: float,
                   settings: SeriesSettings = DEFAULT_SERIES, form: str = "auto") -> float:
    """``P(N(t) = n | N(0) = j)`` for the M/M/1 queue.

    ``form="general"`` uses the three-term Bessel expression, ``form="empty"``
    the single series valid from an empty queue; ``"auto"`` picks the single
    series when ``j == 0``.
    """
    if j < 0 or n < 0:
        raise ValueError("levels must be nonnegative")
    if t == 0:
        return 1.0 if j == n else 0.0
    if t < 0:
        raise ValueError("t must be nonnegative")
    if form == "auto":
        form = "empty" if j == 0 else "general"
    x = float(kernel.bessel_argument(t))
    lr = kernel.log_ratio
    lp = float(kernel.log_decay(t))
    peak = kernel.peak_index(t)

    if form == "empty":
        if j != 0:
            raise ValueError("the single-series form applies to j = 0 only")
        start = n + 1
        pre = lp + n * lr - math.log(kernel.mu) - math.log(t)

        def term(k):
            return math.exp(pre + math.log(k) - 0.5 * k * lr + log_bessel_i_scaled(k, x))

        return sum_series(term, start, settings, min_terms=max(0, peak + 2 - start))

    if form != "general":
        raise ValueError(f"unknown form {form!r}")
    head = (math.exp(lp + 0.5 * (n - j) * lr + log_bessel_i_scaled(abs(n - j), x))
            + math.exp(lp + 0.5 * (n - j - 1) * lr + log_bessel_i_scaled(n + j + 1, x)))
    start = n + j + 2
    pre = lp + n * lr

    def tail_term(k):
        return math.exp(pre - 0.5 * k * lr + log_bessel_i_scaled(k, x))

    tail = sum_series(tail_term, start, settings, min_terms=max(0, peak + 2 - start))
    return head + (1.0 - math.exp(lr)) * tail


# ---------------------------------------------------------------------------
# Switch convolution
# ---------------------------------------------------------------------------

def _reach(kernel: MM1Kernel, j: int, horizon: float) -> int:
    """Generous upper level reached from ``j`` within ``horizon``."""
    drift = max(0.0, kernel.lam - kernel.mu) * horizon
    spread = math.sqrt((kernel.lam + kernel.mu) * horizon)
    return int(j + drift + 12.0 * spread + 30)


def switch_convolution(first: Callable[[float, np.ndarray], np.ndarray],
                       second: Callable[[float, np.ndarray], np.ndarray],
                       eta1: float, t: float, k_start: int, k_count: int,
                       bound: float, quad: QuadratureSettings = DEFAULT_QUAD,
                       series: SeriesSettings = DEFAULT_SERIES) -> np.ndarray:
    """``sum_k int_0^t e^{-eta1 tau} first(tau)[k] second(t - tau)[k, :] dtau``.

    ``first(tau, ks)`` returns a vector over intermediate levels ``ks`` and
    ``second(u, ks)`` a matrix with one row per level. ``bound`` caps the
    row sums of ``second`` and lets the time integral stop once
    ``bound e^{-eta1 tau}`` is negligible. The level sum stops after five
    consecutive per-level integrals below ``tail_tol`` past their peak; the
    level range doubles until that happens.
    """
    if not (t > 0 and eta1 > 0):
        raise ValueError("switch_convolution needs t > 0 and eta1 > 0")
    cut = math.log(max(bound, 1.0) / series.tail_tol) / eta1 + 1.0
    upper = min(t, cut)
    for _ in range(12):
        ks = np.arange(k_start, k_start + k_count)

        def integrand(tau):
            return math.exp(-eta1 * tau) * first(tau, ks)[:, None] * second(t - tau, ks)

        per_level = integrate_vec(integrand, 0.0, upper, quad)
        size = np.max(np.abs(per_level), axis=1)
        peak = int(np.argmax(size))
        keep = truncate_by_run(size[peak:], series.tail_tol)
        if keep != -1:
            return np.sum(per_level[: peak + keep], axis=0)
        k_count *= 2
    raise ConvergenceError("level sum in the switch convolution did not meet the stop rule")


# ---------------------------------------------------------------------------
# Transient distribution
# ---------------------------------------------------------------------------

def _require_one_way(spec: QueueSpec):
    if spec.eta2 != 0:
        raise RegimeError("closed-form transient law requires eta2 = 0 "
                          "(use one_way_transient for eta1 = 0)")


def transient_pmf(spec: QueueSpec, t: float, n_max: int,
                  quad: QuadratureSettings = DEFAULT_QUAD,
                  series: SeriesSettings = DEFAULT_SERIES) -> tuple[np.ndarray, np.ndarray]:
    """``(p_{n,1}(t), p_{n,2}(t))`` for ``n = 0..n_max`` when ``eta2 = 0``."""
    _require_one_way(spec)
    if t < 0:
        raise ValueError("t must be nonnegative")
    k1, k2 = kernels_for(spec)
    j, p, e1 = spec.init_state, spec.init_env_prob, spec.eta1
    ns = np.arange(n_max + 1)
    p1 = p * math.exp(-e1 * t) * transition_matrix(k1, t, [j], ns)[0]
    p2 = (1.0 - p) * transition_matrix(k2, t, [j], ns)[0]
    if p > 0 and e1 > 0 and t > 0:
        horizon = min(t, math.log(1.0 / series.tail_tol) / e1 + 1.0)
        conv = switch_convolution(
            lambda tau, ks: transition_matrix(k1, tau, [j], ks)[0],
            lambda u, ks: transition_matrix(k2, u, ks, ns),
            e1, t, 0, _reach(k1, j, horizon), 1.0, quad, series,
        )
        p2 = p2 + p * e1 * conv
    return p1, p2


def joint_transient(spec: QueueSpec, n: int, i: int, t: float,
                    quad: QuadratureSettings = DEFAULT_QUAD,
                    series: SeriesSettings = DEFAULT_SERIES) -> float:
    """``P(N(t) = n, E(t) = i)`` when ``eta2 = 0``."""
    if i not in (1, 2):
        raise ValueError(f"environment index must be 1 or 2, got {i!r}")
    if n < 0:
        raise ValueError("n must be nonnegative")
    p1, p2 = transient_pmf(spec, t, n, quad, series)
    return float((p1 if i == 1 else p2)[n])


def one_way_transient(spec: QueueSpec, n: int, i: int, t: float,
                      quad: QuadratureSettings = DEFAULT_QUAD,
                      series: SeriesSettings = DEFAULT_SERIES) -> float:
    """``P(N(t) = n, E(t) = i)`` for either one-way switching direction.

    With ``eta1 = 0`` the labels are exchanged so that the formulas for
    ``eta2 = 0`` apply.
    """
    if spec.eta2 == 0:
        return joint_transient(spec, n, i, t, quad, series)
    if spec.eta1 == 0:
        return joint_transient(spec.swapped(), n, 3 - i, t, quad, series)
    raise RegimeError("no closed-form transient law when both switch rates are positive")


def transient_grid(spec: QueueSpec, t_values, n_max: int, workers: int = 1,
                   quad: QuadratureSettings = DEFAULT_QUAD,
                   series: SeriesSettings = DEFAULT_SERIES) -> np.ndarray:
    """Array of shape ``(len(t_values), n_max + 1, 2)`` of ``p_{n,i}(t)``.

    Time points are independent, so ``workers > 1`` evaluates them on a
    thread pool; each point runs the same code, so results do not depend on
    the number of workers.
    """
    ts = [float(t) for t in t_values]

    def one(t):
        return np.stack(transient_pmf(spec, t, n_max, quad, series), axis=-1)

    if workers <= 1 or len(ts) <= 1:
        rows = [one(t) for t in ts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, ts))
    return np.stack(rows) if rows else np.zeros((0, n_max + 1, 2))
