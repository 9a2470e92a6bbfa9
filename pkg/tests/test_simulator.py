import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from switchq import diffusion as dif
from switchq.errors import RegimeError, SpecError
from switchq.fpt_discrete import absorbed_state_pmf, absorption_probability, fpt_mean
from switchq.model import DiffusionSpec, QueueSpec
from switchq.simulator import (
    EmpiricalEstimate,
    EventKind,
    SimConfig,
    SimulationWarning,
    estimate_absorbed_pmf,
    estimate_diffusion_density,
    estimate_diffusion_steady_density,
    estimate_steady_pmf,
    estimate_transient_pmf,
    sample_diffusion_first_passage,
    sample_first_emptying,
    simulate_ctmc_path,
    simulate_diffusion_path,
)
from switchq.steady_state import joint_pmf, solve_steady
from switchq.transient import transient_pmf

from conftest import MIXED_QUEUE, ONE_WAY_HEAVY, ONE_WAY_LIGHT, MIXED_DIFFUSION, ONE_WAY_DIFFUSION

SEED = 20261018


def _binomial_z(est, exact, reps):
    """z-score with the binomial error taken at the exact probability."""
    se = math.sqrt(max(exact * (1 - exact), 1e-300) / reps)
    value = 0.0 if est is None else est.value
    return (value - exact) / se


def _check_cells(observed, exact, reps):
    """Per-cell 3-sigma checks where the normal approximation holds.

    Cells expecting fewer than 5 hits are pooled into one tail cell.
    """
    tail_obs = tail_exp = 0.0
    for key, p in exact.items():
        est = observed.get(key)
        if p * reps >= 5:
            assert abs(_binomial_z(est, p, reps)) < 3, key
        else:
            tail_obs += 0.0 if est is None else est.value
            tail_exp += p
    extra = sum(e.value for k, e in observed.items() if k not in exact)
    assert abs(_binomial_z(EmpiricalEstimate(tail_obs + extra, 0.0, 0), tail_exp, reps)) < 3


def _bin_prob(hist, key, reps):
    k = hist.joint[key].count
    return EmpiricalEstimate(k / reps, 0.0, k)


class TestConfig:
    @pytest.mark.parametrize("kw", [
        dict(replications=0, horizon=1.0),
        dict(replications=2.5, horizon=1.0),
        dict(replications=1, horizon=0.0),
        dict(replications=1, horizon=math.inf),
        dict(replications=1, horizon=1.0, burn_in=1.0),
        dict(replications=1, horizon=1.0, seed=-1),
        dict(replications=1, horizon=1.0, seed=2**64),
        dict(replications=1, horizon=1.0, worker_hint=0),
    ])
    def test_rejects(self, kw):
        with pytest.raises(SpecError):
            SimConfig(**kw)

    def test_worker_env(self, monkeypatch):
        cfg = SimConfig(10, 1.0)
        monkeypatch.setenv("SWITCHQ_WORKERS", "6")
        assert cfg.with_workers_from_env().worker_hint == 6
        monkeypatch.setenv("SWITCHQ_WORKERS", "lots")
        with pytest.raises(SpecError):
            cfg.with_workers_from_env()
        monkeypatch.delenv("SWITCHQ_WORKERS")
        assert cfg.with_workers_from_env() is cfg

    def test_z_score(self):
        assert EmpiricalEstimate(1.0, 0.5, 3).z_score(0.0) == 2.0
        assert EmpiricalEstimate(1.0, 0.0, 3).z_score(1.0) == 0.0
        assert EmpiricalEstimate(1.0, 0.0, 3).z_score(0.0) == math.inf


class TestDeterminism:
    def test_transient_independent_of_workers(self, mixed_queue):
        a = estimate_transient_pmf(mixed_queue, 1.0, SimConfig(70000, 1.0, seed=SEED, worker_hint=1))
        b = estimate_transient_pmf(mixed_queue, 1.0, SimConfig(70000, 1.0, seed=SEED, worker_hint=4))
        assert a == b

    def test_emptying_independent_of_workers(self):
        spec = QueueSpec(**ONE_WAY_LIGHT, eta1=0.5)
        a = sample_first_emptying(spec, SimConfig(70000, 50.0, seed=SEED, worker_hint=1))
        b = sample_first_emptying(spec, SimConfig(70000, 50.0, seed=SEED, worker_hint=3))
        assert np.array_equal(a.times, b.times)

    def test_diffusion_independent_of_workers(self, mixed_diffusion):
        edges = np.linspace(0, 10, 11)
        a = estimate_diffusion_density(mixed_diffusion, 1.0, SimConfig(40000, 1.0, seed=SEED, worker_hint=1), edges)
        b = estimate_diffusion_density(mixed_diffusion, 1.0, SimConfig(40000, 1.0, seed=SEED, worker_hint=2), edges)
        assert a.joint == b.joint and a.marginal == b.marginal

    def test_seed_matters(self, mixed_queue):
        a = estimate_transient_pmf(mixed_queue, 1.0, SimConfig(5000, 1.0, seed=1))
        b = estimate_transient_pmf(mixed_queue, 1.0, SimConfig(5000, 1.0, seed=2))
        assert a != b

    def test_path_repeatable(self, mixed_queue):
        cfg = SimConfig(1, 50.0, seed=SEED)
        assert simulate_ctmc_path(mixed_queue, cfg, 7) == simulate_ctmc_path(mixed_queue, cfg, 7)
        assert simulate_ctmc_path(mixed_queue, cfg, 7) != simulate_ctmc_path(mixed_queue, cfg, 8)


queue_specs = st.builds(
    QueueSpec,
    st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.1, 3),
    st.floats(0.01, 2), st.floats(0.0, 2), st.integers(0, 5), st.floats(0, 1),
)


class TestPaths:
    @settings(max_examples=40, deadline=None)
    @given(queue_specs, st.integers(0, 2**32))
    def test_path_invariants(self, spec, seed):
        path = simulate_ctmc_path(spec, SimConfig(1, 30.0, seed=seed))
        level, env, last = path.initial_level, path.initial_env, 0.0
        for ev in path.events:
            assert ev.time > last
            assert ev.level >= 0
            if ev.kind is EventKind.ARRIVAL:
                assert (ev.level, ev.env) == (level + 1, env)
            elif ev.kind is EventKind.SERVICE:
                assert level > 0
                assert (ev.level, ev.env) == (level - 1, env)
            else:
                assert (ev.level, ev.env) == (level, 3 - env)
            level, env, last = ev.level, ev.env, ev.time
        assert last <= path.horizon
        assert (path.final_level, path.final_env) == (level, env)

    def test_rare_arrivals_never_increase(self):
        spec = QueueSpec(1e-12, 2.0, 1e-12, 1.0, 0.5, 0.5, init_state=20)
        path = simulate_ctmc_path(spec, SimConfig(1, 100.0, seed=SEED))
        levels = [path.initial_level] + [e.level for e in path.events]
        assert all(b <= a for a, b in zip(levels, levels[1:]))
        assert levels[-1] == 0

    @staticmethod
    def _holding_times(spec, path, state):
        holds = []
        cur, t0 = (path.initial_level, path.initial_env), 0.0
        for ev in path.events:
            if cur == state:
                holds.append(ev.time - t0)
            cur, t0 = ev.state_after, ev.time
        lam, mu, eta = spec.rates[state[1] - 1]
        return np.array(holds), lam + eta + (mu if state[0] > 0 else 0.0)

    def test_holding_times_exponential(self, mixed_queue):
        path = simulate_ctmc_path(mixed_queue, SimConfig(1, 4e5, seed=SEED))
        holds, total = self._holding_times(mixed_queue, path, (2, 1))
        holds = holds[:10000]
        assert holds.size == 10000
        assert stats.kstest(holds, "expon", args=(0, 1 / total)).pvalue > 0.01

    @pytest.mark.parametrize("state", [(2, 1), (0, 2)])
    def test_holding_time_pvalues_uniform(self, mixed_queue, state):
        # a wrong rate drives every p-value towards 0; chance leaves them uniform
        pvals = []
        for seed in range(1, 21):
            path = simulate_ctmc_path(mixed_queue, SimConfig(1, 5e4, seed=seed))
            holds, total = self._holding_times(mixed_queue, path, state)
            pvals.append(stats.kstest(holds, "expon", args=(0, 1 / total)).pvalue)
        assert stats.kstest(pvals, "uniform").pvalue > 0.01


class TestTransient:
    def test_time_zero_point_mass(self):
        spec = QueueSpec(**ONE_WAY_HEAVY, eta1=0.2).replace(init_state=3)
        est = estimate_transient_pmf(spec, 0.0, SimConfig(20000, 1.0, seed=SEED))
        assert set(est) == {(3, 1), (3, 2)}
        assert est[(3, 1)].value + est[(3, 2)].value == 1.0
        assert abs(_binomial_z(est[(3, 1)], 0.4, 20000)) < 3

    def test_sums_to_one(self, mixed_queue):
        est = estimate_transient_pmf(mixed_queue, 3.0, SimConfig(30000, 3.0, seed=SEED))
        assert sum(e.value for e in est.values()) == pytest.approx(1.0, abs=1e-12)
        assert sum(e.count for e in est.values()) == 30000

    def test_matches_closed_form(self):
        spec = QueueSpec(**ONE_WAY_HEAVY, eta1=0.5).replace(init_state=3)
        reps, t = 200000, 2.0
        est = estimate_transient_pmf(spec, t, SimConfig(reps, t, seed=SEED))
        p1, p2 = transient_pmf(spec, t, 40)
        exact = {(n, i): float(p[n]) for n in range(41) for i, p in ((1, p1), (2, p2))}
        _check_cells(est, exact, reps)

    def test_absorbed_matches_closed_form(self):
        spec = QueueSpec(**ONE_WAY_LIGHT, eta1=0.5).replace(init_state=2)
        reps, t = 200000, 1.5
        est = estimate_absorbed_pmf(spec, t, SimConfig(reps, t, seed=SEED))
        g1, g2 = absorbed_state_pmf(spec, t, 40)
        exact = {(n, i): float(g[n]) for n in range(1, 41) for i, g in ((1, g1), (2, g2))}
        _check_cells(est, exact, reps)
        assert all(n >= 1 for n, _ in est)

    def test_absorbed_needs_level(self, mixed_queue):
        with pytest.raises(ValueError):
            estimate_absorbed_pmf(mixed_queue, 1.0, SimConfig(10, 1.0))


class TestSteady:
    def test_mixed_regime(self, mixed_queue):
        est = estimate_steady_pmf(mixed_queue, SimConfig(1, 1e5, burn_in=1000.0, seed=SEED))
        sol = solve_steady(mixed_queue)
        for n in range(21):
            for i in (1, 2):
                e = est[(n, i)]
                assert abs(e.z_score(float(joint_pmf(sol, n, i)))) < 3, (n, i)
                assert e.count == 50

    def test_symmetric_environments(self):
        spec = QueueSpec(1.0, 1.6, 1.0, 1.6, 0.3, 0.3)
        est = estimate_steady_pmf(spec, SimConfig(1, 1e5, burn_in=500.0, seed=SEED))
        for n in range(10):
            a, b = est[(n, 1)], est[(n, 2)]
            assert abs(a.value - b.value) < 3 * math.hypot(a.std_error, b.std_error), n

    def test_case_one_leaves_environment_one(self):
        spec = QueueSpec(**ONE_WAY_LIGHT, eta1=0.5)
        est = estimate_steady_pmf(spec, SimConfig(1, 2e4, burn_in=200.0, seed=SEED))
        assert not any(i == 1 for _, i in est)
        assert sum(e.value for e in est.values()) == pytest.approx(1.0)

    def test_burn_in_warning(self, mixed_queue):
        with pytest.warns(SimulationWarning):
            estimate_steady_pmf(mixed_queue, SimConfig(1, 2000.0, burn_in=1.0, seed=SEED))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            estimate_steady_pmf(mixed_queue, SimConfig(1, 2000.0, burn_in=1000.0, seed=SEED))

    def test_unstable_rejected(self):
        with pytest.raises(RegimeError):
            estimate_steady_pmf(QueueSpec(2.0, 1.0, 2.0, 1.0, 0.1, 0.1), SimConfig(1, 10.0))

    def test_needs_batches(self, mixed_queue):
        with pytest.raises(ValueError):
            estimate_steady_pmf(mixed_queue, SimConfig(1, 10.0), batches=5)


class TestEmptying:
    def test_busy_period_mean(self):
        spec = QueueSpec(**ONE_WAY_LIGHT, eta1=0.5).replace(init_state=1, init_env_prob=0.0)
        s = sample_first_emptying(spec, SimConfig(200000, 500.0, seed=SEED))
        assert s.censored_fraction < 1e-4
        assert abs(s.mean_time().z_score(1 / (spec.mu2 - spec.lambda2))) < 3

    def test_mean_matches_closed_form(self):
        spec = QueueSpec(**ONE_WAY_LIGHT, eta1=0.5)
        s = sample_first_emptying(spec, SimConfig(200000, 500.0, seed=SEED))
        assert abs(s.mean_time().z_score(fpt_mean(spec))) < 3

    def test_censoring_shrinks(self):
        spec = QueueSpec(**ONE_WAY_LIGHT, eta1=0.5)
        short = sample_first_emptying(spec, SimConfig(20000, 2.0, seed=SEED))
        long = sample_first_emptying(spec, SimConfig(20000, 200.0, seed=SEED))
        assert long.censored_fraction < short.censored_fraction
        assert long.censored_fraction < 1e-3

    def test_absorption_probability(self):
        spec = QueueSpec(**ONE_WAY_HEAVY, eta1=0.2)
        s = sample_first_emptying(spec, SimConfig(100000, 1e4, seed=SEED), escape_level=150)
        assert abs(s.completion().z_score(absorption_probability(spec))) < 3

    def test_needs_level(self, mixed_queue):
        with pytest.raises(ValueError):
            sample_first_emptying(mixed_queue, SimConfig(10, 1.0))


class TestDiffusion:
    def test_deterministic_limit(self):
        d = DiffusionSpec(0.5, 1.0, 0.5, 1.0, 1e-12, 1e-12, 0.0, 1.0, init_position=2.0, init_env_prob=0.0)
        for t in (1.0, 3.0, 5.0):
            out = simulate_diffusion_path(d, SimConfig(1, t, seed=SEED))
            assert out.position == pytest.approx(max(2.0 - 0.5 * t, 0.0), abs=1e-4)
        hit = simulate_diffusion_path(d, SimConfig(1, 10.0, seed=SEED), absorb=True)
        assert hit.hit_time == pytest.approx(4.0, rel=1e-4)

    def test_rejects_bad_step(self, mixed_diffusion):
        with pytest.raises(ValueError):
            simulate_diffusion_path(mixed_diffusion, SimConfig(1, 1.0), dt=0.0)

    def test_step_size_irrelevant(self, one_way_diffusion):
        a = sample_diffusion_first_passage(one_way_diffusion, SimConfig(100000, 200.0, seed=SEED), dt=0.05).mean_time()
        b = sample_diffusion_first_passage(one_way_diffusion, SimConfig(100000, 200.0, seed=SEED + 1), dt=0.025).mean_time()
        assert abs(a.value - b.value) < 3 * math.hypot(a.std_error, b.std_error)

    def test_transient_histogram(self, one_way_diffusion):
        reps, t = 100000, 2.0
        edges = np.linspace(0, 6, 13)
        h = estimate_diffusion_density(one_way_diffusion, t, SimConfig(reps, t, seed=SEED), edges)
        for b in range(12):
            lo, hi = edges[b], edges[b + 1]
            for i in (1, 2):
                # Simpson on each half bin is far below the Monte Carlo error
                xs = np.linspace(lo, hi, 5)
                f = [dif.transient_density(one_way_diffusion, x, i, t) for x in xs]
                mass = (hi - lo) / 12 * (f[0] + 4 * f[1] + 2 * f[2] + 4 * f[3] + f[4])
                assert abs(_binomial_z(_bin_prob(h, (b, i), reps), mass, reps)) < 3, (b, i)

    def test_fpt_histogram(self, one_way_diffusion):
        reps = 100000
        s = sample_diffusion_first_passage(one_way_diffusion, SimConfig(reps, 50.0, seed=SEED))
        edges = np.array([0, 0.1, 0.25, 0.5, 1, 2, 4, 8, 16])
        counts, _ = np.histogram(s.times[np.isfinite(s.times)], bins=edges)
        for b in range(edges.size - 1):
            mass = integrate.quad(lambda u: dif.fpt_density(one_way_diffusion, u), edges[b], edges[b + 1],
                                  epsabs=1e-10, epsrel=1e-8)[0]
            est = EmpiricalEstimate(counts[b] / reps, 0.0, int(counts[b]))
            assert abs(_binomial_z(est, mass, reps)) < 3, b

    def test_fpt_mean(self, one_way_diffusion):
        s = sample_diffusion_first_passage(one_way_diffusion, SimConfig(200000, 400.0, seed=SEED))
        assert s.censored_fraction == 0
        assert abs(s.mean_time().z_score(dif.fpt_mean(one_way_diffusion))) < 3

    def test_stationary_histogram(self, mixed_diffusion):
        reps = 100000
        edges = np.linspace(0, 40, 21)
        h = estimate_diffusion_steady_density(mixed_diffusion, SimConfig(reps, 2000.0, seed=SEED), edges)
        sol = dif.solve_steady_density(mixed_diffusion)
        for b in range(20):
            for i in (1, 2):
                mass = integrate.quad(lambda x: dif.steady_density(sol, x, i), edges[b], edges[b + 1])[0]
                assert abs(_binomial_z(_bin_prob(h, (b, i), reps), mass, reps)) < 3, (b, i)

    def test_nonnegative_positions(self, mixed_diffusion):
        for k in range(20):
            out = simulate_diffusion_path(mixed_diffusion, SimConfig(1, 5.0, seed=SEED), replication_index=k)
            assert out.position >= 0 and out.env in (1, 2) and out.hit_time == math.inf

    def test_stationary_needs_stability(self, mixed_diffusion):
        with pytest.raises(RegimeError):
            estimate_diffusion_steady_density(mixed_diffusion.replace(eta2=0.5), SimConfig(10, 1.0), [0, 1])
