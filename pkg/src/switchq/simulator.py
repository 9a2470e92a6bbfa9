"""Monte Carlo oracle for the switching queue and its diffusion limit.

The queue is simulated exactly with competing exponential clocks. The
diffusion is simulated exactly as well: between environment switches it is
a Brownian motion with constant drift, so a reflected step is drawn from the
endpoint and the bridge minimum, and a first hit of 0 is drawn from the
inverse Gaussian law.

Replications are processed in fixed-size blocks. Block ``b`` draws from its
own stream ``SeedSequence(seed, spawn_key=(domain, b))``, so results depend
only on ``(seed, replications)`` and never on how blocks are spread over
workers.
"""

from __future__ import annotations

import enum
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import RegimeError, SpecError
from .model import DiffusionSpec, QueueSpec, classify

BLOCK = 1 << 15

# stream domains keep the different experiments statistically independent
_PATH, _TRANSIENT, _ABSORBED, _EMPTYING, _STEADY, _DIFF_PATH, _DIFF_STATE, _DIFF_FPT = range(8)


class SimulationWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class SimConfig:
    replications: int
    horizon: float
    burn_in: float = 0.0
    seed: int = 0
    worker_hint: int = 1

    def __post_init__(self):
        if int(self.replications) != self.replications or self.replications < 1:
            raise SpecError("replications >= 1 violated")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise SpecError("horizon > 0 violated")
        if not 0 <= self.burn_in < self.horizon:
            raise SpecError("0 <= burn_in < horizon violated")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise SpecError("seed must be a 64-bit unsigned integer")
        if int(self.worker_hint) != self.worker_hint or self.worker_hint < 1:
            raise SpecError("worker_hint >= 1 violated")

    def with_workers_from_env(self, var: str = "SWITCHQ_WORKERS") -> "SimConfig":
        """Copy with ``worker_hint`` taken from an environment variable, if set."""
        raw = os.environ.get(var)
        if not raw:
            return self
        try:
            hint = int(raw)
        except ValueError as exc:
            raise SpecError(f"{var} must be a positive integer, got {raw!r}") from exc
        return SimConfig(self.replications, self.horizon, self.burn_in, self.seed, hint)


@dataclass(frozen=True)
class EmpiricalEstimate:
    value: float
    std_error: float
    count: int

    def z_score(self, exact: float) -> float:
        """``(value - exact) / std_error``; infinite if the error is zero and they differ."""
        diff = self.value - exact
        if self.std_error > 0:
            return diff / self.std_error
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)


class EventKind(enum.Enum):
    ARRIVAL = "Arrival"
    SERVICE = "Service"
    SWITCH = "Switch"


@dataclass(frozen=True)
class PathEvent:
    time: float
    kind: EventKind
    level: int
    env: int

    @property
    def state_after(self) -> tuple[int, int]:
        return (self.level, self.env)


@dataclass(frozen=True)
class CtmcPath:
    initial_level: int
    initial_env: int
    events: tuple[PathEvent, ...]
    final_level: int
    final_env: int
    horizon: float


@dataclass(frozen=True)
class FirstPassageSample:
    """Per-replication first hitting times of 0; ``inf`` marks censored paths."""

    times: np.ndarray
    horizon: float

    @property
    def replications(self) -> int:
        return int(self.times.size)

    @property
    def censored_fraction(self) -> float:
        return float(np.mean(~np.isfinite(self.times)))

    def completion(self) -> EmpiricalEstimate:
        """Fraction of paths that hit 0 before the horizon."""
        return _binomial(int(np.sum(np.isfinite(self.times))), self.replications)

    def mean_time(self) -> EmpiricalEstimate:
        """Mean of the uncensored hitting times."""
        done = self.times[np.isfinite(self.times)]
        if done.size == 0:
            return EmpiricalEstimate(math.nan, math.nan, 0)
        se = float(np.std(done, ddof=1) / math.sqrt(done.size)) if done.size > 1 else math.inf
        return EmpiricalEstimate(float(np.mean(done)), se, int(done.size))


@dataclass(frozen=True)
class DiffusionOutcome:
    position: float
    env: int
    hit_time: float         # inf when 0 was not hit (or hitting was not tracked)


@dataclass(frozen=True)
class DensityHistogram:
    """Per-bin density estimates ``count / (replications * width)``."""

    edges: np.ndarray
    joint: dict = field(default_factory=dict)       # (bin, env) -> EmpiricalEstimate
    marginal: dict = field(default_factory=dict)    # bin -> EmpiricalEstimate


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def _binomial(k: int, n: int) -> EmpiricalEstimate:
    v = k / n
    return EmpiricalEstimate(v, math.sqrt(v * (1.0 - v) / n), int(k))


def _run_blocks(config: SimConfig, fn):
    """Apply ``fn(block_index, size)`` over all blocks; results in block order."""
    sizes = [min(BLOCK, config.replications - b * BLOCK)
             for b in range(-(-config.replications // BLOCK))]
    jobs = list(enumerate(sizes))
    if config.worker_hint <= 1 or len(jobs) <= 1:
        return [fn(b, s) for b, s in jobs]
    with ThreadPoolExecutor(max_workers=config.worker_hint) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def _rates(spec: QueueSpec):
    return (np.array([spec.lambda1, spec.lambda2]), np.array([spec.mu1, spec.mu2]),
            np.array([spec.eta1, spec.eta2]))


def _initial_envs(rng, size, p):
    return np.where(rng.random(size) < p, 0, 1).astype(np.int64)


# ---------------------------------------------------------------------------
# Queue: single path
# ---------------------------------------------------------------------------

def simulate_ctmc_path(spec: QueueSpec, config: SimConfig, replication_index: int = 0) -> CtmcPath:
    """One exact path of ``(N(t), E(t))`` on ``[0, horizon]`` with every event."""
    rng = _stream(config.seed, _PATH, int(replication_index))
    lam, mu, eta = _rates(spec)
    level = spec.init_state
    env = int(_initial_envs(rng, 1, spec.init_env_prob)[0])
    start_env = env
    t = 0.0
    events = []
    while True:
        serve = mu[env] if level > 0 else 0.0
        total = lam[env] + serve + eta[env]
        t += rng.exponential(1.0 / total)
        if t > config.horizon:
            break
        u = rng.random() * total
        if u < lam[env]:
            level += 1
            kind = EventKind.ARRIVAL
        elif u < lam[env] + serve:
            level -= 1
            kind = EventKind.SERVICE
        else:
            env = 1 - env
            kind = EventKind.SWITCH
        events.append(PathEvent(t, kind, level, env + 1))
    return CtmcPath(spec.init_state, start_env + 1, tuple(events), level, env + 1, config.horizon)


# ---------------------------------------------------------------------------
# Queue: many replications in lockstep
# ---------------------------------------------------------------------------

def _advance_block(rng, spec: QueueSpec, size: int, t_end: float, absorb: bool,
                   escape_level: int | None = None):
    """Run ``size`` replications to ``t_end``.

    Returns ``(level, env, hit_time)`` with environments as 0/1. With
    ``absorb`` a path stops at its first visit to 0 and ``hit_time`` records
    it. ``escape_level`` stops paths that sit in an environment they cannot
    leave at a level this high; they are reported as censored.
    """
    lam, mu, eta = _rates(spec)
    level = np.full(size, spec.init_state, dtype=np.int64)
    env = _initial_envs(rng, size, spec.init_env_prob)
    time = np.zeros(size)
    hit = np.full(size, np.inf)
    act = np.arange(size)
    if absorb:
        act = act[level[act] > 0]
    while act.size:
        e = env[act]
        n = level[act]
        serve = np.where(n > 0, mu[e], 0.0)
        total = lam[e] + serve + eta[e]
        tnew = time[act] + rng.standard_exponential(act.size) / total
        go = tnew <= t_end
        act, e, serve, total, tnew = act[go], e[go], serve[go], total[go], tnew[go]
        time[act] = tnew
        u = rng.random(act.size) * total
        up = u < lam[e]
        down = ~up & (u < lam[e] + serve)
        flip = ~up & ~down
        level[act[up]] += 1
        level[act[down]] -= 1
        env[act[flip]] = 1 - env[act[flip]]
        if absorb:
            empty = level[act] == 0
            hit[act[empty]] = time[act[empty]]
            act = act[~empty]
        if escape_level is not None and act.size:
            stuck = (eta[env[act]] == 0) & (level[act] >= escape_level)
            act = act[~stuck]
    return level, env, hit


def _pmf_table(level, env, size) -> dict:
    out = {}
    for i in (0, 1):
        counts = np.bincount(level[env == i])
        for n, k in enumerate(counts):
            if k:
                out[(n, i + 1)] = _binomial(int(k), size)
    return out


def estimate_transient_pmf(spec: QueueSpec, t: float, config: SimConfig) -> dict:
    """Empirical ``P(N(t) = n, E(t) = i)`` keyed by ``(n, i)`` over the observed support."""
    if t < 0:
        raise ValueError("t must be nonnegative")

    def block(b, size):
        return _advance_block(_stream(config.seed, _TRANSIENT, b), spec, size, t, False)[:2]

    parts = _run_blocks(config, block)
    level = np.concatenate([p[0] for p in parts])
    env = np.concatenate([p[1] for p in parts])
    return _pmf_table(level, env, config.replications)


def estimate_absorbed_pmf(spec: QueueSpec, t: float, config: SimConfig) -> dict:
    """Empirical ``P(N(t) = n, E(t) = i, no visit to 0 in [0, t])`` for ``n >= 1``."""
    if spec.init_state < 1:
        raise ValueError("needs a starting level j >= 1")

    def block(b, size):
        return _advance_block(_stream(config.seed, _ABSORBED, b), spec, size, t, True)

    parts = _run_blocks(config, block)
    level = np.concatenate([p[0] for p in parts])
    env = np.concatenate([p[1] for p in parts])
    alive = ~np.isfinite(np.concatenate([p[2] for p in parts]))
    table = _pmf_table(level[alive], env[alive], config.replications)
    return {k: v for k, v in table.items() if k[0] >= 1}


def sample_first_emptying(spec: QueueSpec, config: SimConfig,
                          escape_level: int | None = None) -> FirstPassageSample:
    """First time the queue empties, per replication, censored at ``horizon``.

    ``escape_level`` optionally abandons paths that are stuck in a
    non-switching environment at or above that level (counted as censored);
    it bounds the cost of transient regimes where such paths rarely return.
    """
    if spec.init_state < 1:
        raise ValueError("first emptying needs a starting level j >= 1")

    def block(b, size):
        rng = _stream(config.seed, _EMPTYING, b)
        return _advance_block(rng, spec, size, config.horizon, True, escape_level)[2]

    return FirstPassageSample(np.concatenate(_run_blocks(config, block)), config.horizon)


# ---------------------------------------------------------------------------
# Queue: steady state from one long path
# ---------------------------------------------------------------------------

def _relaxation_rate(spec: QueueSpec) -> float:
    rates = [spec.eta1 + spec.eta2]
    for lam, mu in ((spec.lambda1, spec.mu1), (spec.lambda2, spec.mu2)):
        if lam < mu:
            rates.append((math.sqrt(mu) - math.sqrt(lam)) ** 2)
    return min(rates)


def _long_path(rng, spec: QueueSpec, horizon: float):
    """Event times and the state entered at each, starting with time 0."""
    lam, mu, eta = (tuple(float(v) for v in a) for a in _rates(spec))
    level = spec.init_state
    env = int(_initial_envs(rng, 1, spec.init_env_prob)[0])
    times, levels, envs = [0.0], [level], [env]
    t = 0.0
    chunk = 1 << 16
    while True:
        expo = rng.standard_exponential(chunk).tolist()
        unif = rng.random(chunk).tolist()
        for ex, un in zip(expo, unif):
            serve = mu[env] if level > 0 else 0.0
            total = lam[env] + serve + eta[env]
            t += ex / total
            if t > horizon:
                return np.array(times), np.array(levels), np.array(envs)
            u = un * total
            if u < lam[env]:
                level += 1
            elif u < lam[env] + serve:
                level -= 1
            else:
                env = 1 - env
            times.append(t)
            levels.append(level)
            envs.append(env)


def estimate_steady_pmf(spec: QueueSpec, config: SimConfig, batches: int = 50) -> dict:
    """Time-average occupancy of ``(n, i)`` over ``[burn_in, horizon]`` on one path.

    Standard errors come from ``batches`` equal-length batch means.
    """
    if batches < 20:
        raise ValueError("batch means need at least 20 batches")
    if not classify(spec).has_steady_state:
        raise RegimeError("no steady state: the stability condition fails")
    need = 10.0 / _relaxation_rate(spec)
    if config.burn_in < need:
        warnings.warn(f"burn_in {config.burn_in} is shorter than 10 relaxation times ({need:.3g})",
                      SimulationWarning, stacklevel=2)
    rng = _stream(config.seed, _STEADY)
    times, levels, envs = _long_path(rng, spec, config.horizon)
    bounds = np.linspace(config.burn_in, config.horizon, batches + 1)
    # split holding intervals at batch boundaries
    cuts = np.union1d(times, bounds)
    cuts = cuts[(cuts >= config.burn_in) & (cuts <= config.horizon)]
    left = cuts[:-1]
    dur = np.diff(cuts)
    state = np.searchsorted(times, left, side="right") - 1
    batch = np.minimum(np.searchsorted(bounds, left, side="right") - 1, batches - 1)
    lv, ev = levels[state], envs[state]
    occ = np.zeros((batches, int(lv.max()) + 1, 2))
    np.add.at(occ, (batch, lv, ev), dur)
    occ /= (bounds[1] - bounds[0])
    means = occ.mean(axis=0)
    ses = occ.std(axis=0, ddof=1) / math.sqrt(batches)
    out = {}
    for n in range(occ.shape[1]):
        for i in (0, 1):
            if means[n, i] > 0:
                out[(n, i + 1)] = EmpiricalEstimate(float(means[n, i]), float(ses[n, i]), batches)
    return out


# ---------------------------------------------------------------------------
# Diffusion
# ---------------------------------------------------------------------------

def _diffusion_params(spec: DiffusionSpec):
    b1, b2 = spec.drifts
    return (np.array([b1, b2]), np.array([spec.omega1_sq, spec.omega2_sq]),
            np.array([spec.eta1, spec.eta2]))


def _reflected_step(rng, a, beta, var, h):
    """Exact reflected Brownian step: endpoint plus the Skorokhod push from the bridge minimum."""
    b = a + beta * h + np.sqrt(var * h) * rng.standard_normal(a.size)
    low = 0.5 * (a + b - np.sqrt((b - a) ** 2 - 2.0 * var * h * np.log(rng.random(a.size))))
    return b - np.minimum(0.0, low)


def _hitting_times(rng, a, beta, var):
    """First time a Brownian motion with drift hits 0 from ``a > 0``; ``inf`` if never."""
    out = np.full(a.size, np.inf)
    toward = beta < 0
    if np.any(toward):
        out[toward] = rng.wald(a[toward] / -beta[toward], a[toward] ** 2 / var[toward])
    flat = beta == 0
    if np.any(flat):
        z = rng.standard_normal(int(flat.sum()))
        out[flat] = a[flat] ** 2 / (var[flat] * z * z)
    away = beta > 0
    if np.any(away):
        idx = np.flatnonzero(away)
        u = rng.random(idx.size)
        hits = u < np.exp(-2.0 * beta[idx] * a[idx] / var[idx])
        idx = idx[hits]
        # conditioned on hitting, the drift is reversed
        out[idx] = rng.wald(a[idx] / beta[idx], a[idx] ** 2 / var[idx])
    return out


def _survivor_endpoint(rng, a, beta, var, h):
    """Endpoint of a free step of length ``h`` conditioned on not touching 0."""
    out = np.empty(a.size)
    todo = np.arange(a.size)
    while todo.size:
        aa, bb, vv, hh = a[todo], beta[todo], var[todo], h[todo]
        b = aa + bb * hh + np.sqrt(vv * hh) * rng.standard_normal(todo.size)
        with np.errstate(over="ignore"):
            cross = np.where(b > 0, np.exp(-2.0 * aa * np.maximum(b, 0.0) / (vv * hh)), 1.0)
        ok = rng.random(todo.size) >= cross
        out[todo[ok]] = b[ok]
        todo = todo[~ok]
    return out


def _advance_diffusion(rng, spec: DiffusionSpec, size: int, t_end: float, absorb: bool,
                       dt: float | None):
    beta_e, var_e, eta_e = _diffusion_params(spec)
    pos = np.full(size, float(spec.init_position))
    env = np.where(rng.random(size) < spec.init_env_prob, 0, 1).astype(np.int64)
    time = np.zeros(size)
    hit = np.full(size, np.inf)
    act = np.arange(size)
    if absorb:
        zero = pos[act] <= 0
        hit[act[zero]] = 0.0
        act = act[~zero]
    step_cap = math.inf if dt is None else float(dt)
    while act.size:
        e = env[act]
        eta = eta_e[e]
        with np.errstate(divide="ignore"):
            hold = np.where(eta > 0, rng.standard_exponential(act.size) / np.where(eta > 0, eta, 1.0),
                            np.inf)
        room = np.minimum(t_end - time[act], step_cap)
        switch = hold < room
        h = np.where(switch, hold, room)
        beta, var = beta_e[e], var_e[e]
        if absorb:
            tau = _hitting_times(rng, pos[act], beta, var)
            gone = tau <= h
            hit[act[gone]] = time[act[gone]] + tau[gone]
            keep = ~gone
            act, h, switch, beta, var = act[keep], h[keep], switch[keep], beta[keep], var[keep]
            pos[act] = _survivor_endpoint(rng, pos[act], beta, var, h)
        else:
            pos[act] = _reflected_step(rng, pos[act], beta, var, h)
        time[act] += h
        env[act[switch]] = 1 - env[act[switch]]
        act = act[time[act] < t_end]
    return pos, env, hit


def simulate_diffusion_path(spec: DiffusionSpec, config: SimConfig, dt: float | None = None,
                            replication_index: int = 0, absorb: bool = False) -> DiffusionOutcome:
    """One replication of the switching diffusion up to ``horizon``.

    Without ``absorb`` the process is reflected at 0 and the terminal state is
    returned; with ``absorb`` the first hitting time of 0 is returned (or
    ``inf`` if it exceeds the horizon). Steps are exact, so ``dt`` only caps
    the step length.
    """
    if dt is not None and not dt > 0:
        raise ValueError("dt must be positive")
    rng = _stream(config.seed, _DIFF_PATH, int(replication_index))
    pos, env, hit = _advance_diffusion(rng, spec, 1, config.horizon, absorb, dt)
    return DiffusionOutcome(float(pos[0]), int(env[0]) + 1, float(hit[0]))


def _histogram(pos, env, edges, size) -> DensityHistogram:
    edges = np.asarray(edges, dtype=float)
    width = np.diff(edges)
    hist = DensityHistogram(edges)
    tot = np.zeros(width.size, dtype=np.int64)
    for i in (0, 1):
        counts, _ = np.histogram(pos[env == i], bins=edges)
        tot += counts
        for b, k in enumerate(counts):
            est = _binomial(int(k), size)
            hist.joint[(b, i + 1)] = EmpiricalEstimate(est.value / width[b], est.std_error / width[b],
                                                       est.count)
    for b, k in enumerate(tot):
        est = _binomial(int(k), size)
        hist.marginal[b] = EmpiricalEstimate(est.value / width[b], est.std_error / width[b], est.count)
    return hist


def estimate_diffusion_density(spec: DiffusionSpec, t: float, config: SimConfig, edges,
                               dt: float | None = None) -> DensityHistogram:
    """Histogram density of the reflected process at time ``t`` over ``edges``."""
    if not t > 0:
        raise ValueError("t must be positive")

    def block(b, size):
        return _advance_diffusion(_stream(config.seed, _DIFF_STATE, b), spec, size, t, False, dt)[:2]

    parts = _run_blocks(config, block)
    pos = np.concatenate([p[0] for p in parts])
    env = np.concatenate([p[1] for p in parts])
    return _histogram(pos, env, edges, config.replications)


def estimate_diffusion_steady_density(spec: DiffusionSpec, config: SimConfig, edges,
                                      dt: float | None = None) -> DensityHistogram:
    """Histogram of independent replications observed at ``horizon``.

    The horizon must be long against the relaxation time; each replication
    then contributes one draw from (nearly) the stationary law.
    """
    if not classify(spec).has_steady_state:
        raise RegimeError("no steady state: the stability condition fails")
    return estimate_diffusion_density(spec, config.horizon, config, edges, dt)


def sample_diffusion_first_passage(spec: DiffusionSpec, config: SimConfig,
                                   dt: float | None = None) -> FirstPassageSample:
    """First hitting time of 0 per replication, censored at ``horizon``."""
    if not spec.init_position > 0:
        raise ValueError("first passage needs a start y > 0")

    def block(b, size):
        return _advance_diffusion(_stream(config.seed, _DIFF_FPT, b), spec, size,
                                  config.horizon, True, dt)[2]

    return FirstPassageSample(np.concatenate(_run_blocks(config, block)), config.horizon)
