import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import integrate

from switchq.diffusion import (
    characteristic_polynomial,
    conditional_mean,
    diffusion_roots,
    marginal_density,
    mean,
    mgf,
    solve_steady_density,
    steady_density,
)
from switchq.errors import ConfluentRootsError, RegimeError
from switchq.model import DiffusionSpec, StabilityCase

from conftest import MIXED_DIFFUSION


def _quad(f):
    return integrate.quad(f, 0.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=500)[0]


def _boundary_target(d):
    flux = d.eta1 * (d.mu2s - d.lambda2s) + d.eta2 * (d.mu1s - d.lambda1s)
    return 2.0 * flux / (d.eta1 + d.eta2)


case_iii_specs = st.builds(
    DiffusionSpec,
    st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.1, 3),
    st.floats(0.2, 5), st.floats(0.2, 5), st.floats(0.02, 2), st.floats(0.02, 2),
)


class TestRoots:
    def test_reference_values(self, mixed_diffusion):
        r = diffusion_roots(mixed_diffusion)
        assert r.xi1s == pytest.approx(0.586811, abs=1e-4)
        assert r.xi2s == pytest.approx(0.0871, abs=1e-4)
        assert r.xi3s == pytest.approx(-1.17391, abs=1e-4)

    @settings(max_examples=150, deadline=None)
    @given(case_iii_specs)
    def test_vieta_and_residuals(self, d):
        assume(d.drift_condition() > 1e-3)
        r = diffusion_roots(d)
        c3, c2, c1, c0 = characteristic_polynomial(d)
        assert r.xi1s >= r.xi2s > 0 > r.xi3s
        for z in r.as_tuple():
            scale = abs(c3 * z**3) + abs(c2 * z**2) + abs(c1 * z) + abs(c0)
            assert abs(((c3 * z + c2) * z + c1) * z + c0) <= 1e-10 * scale
        prod = -4 * (d.eta1 * (d.mu2s - d.lambda2s) + d.eta2 * (d.mu1s - d.lambda1s)) / (d.omega1_sq * d.omega2_sq)
        assert r.xi1s * r.xi2s * r.xi3s == pytest.approx(prod, rel=1e-10)
        assert r.xi1s + r.xi2s + r.xi3s == pytest.approx(-c2 / c3, rel=1e-10, abs=1e-12)

    def test_unstable_rejected(self):
        d = DiffusionSpec(**{**MIXED_DIFFUSION, "eta2": 0.3})     # 0.1 * 1 - 0.3 * 0.5 < 0
        with pytest.raises(RegimeError):
            solve_steady_density(d)

    def test_confluent_error_type(self):
        assert issubclass(ConfluentRootsError, Exception)


class TestMixedRegime:
    @pytest.fixture
    def sol(self, mixed_diffusion):
        return solve_steady_density(mixed_diffusion)

    def test_case(self, sol):
        assert sol.case is StabilityCase.CASE_III

    @pytest.mark.parametrize("i", [1, 2])
    def test_env_mass(self, sol, mixed_diffusion, i):
        target = (mixed_diffusion.eta2, mixed_diffusion.eta1)[i - 1] / (mixed_diffusion.eta1 + mixed_diffusion.eta2)
        assert _quad(lambda x: steady_density(sol, x, i)) == pytest.approx(target, abs=1e-9)

    def test_total_mass(self, sol):
        assert _quad(lambda x: marginal_density(sol, x)) == pytest.approx(1.0, abs=1e-8)

    def test_nonnegative(self, sol):
        x = np.linspace(0, 50, 5001)
        assert np.all(steady_density(sol, x, 1) >= 0)
        assert np.all(steady_density(sol, x, 2) >= 0)

    @pytest.mark.parametrize("i", [1, 2])
    def test_boundary_limit(self, sol, i):
        x = np.array([1e-9, 1e-11, 1e-13])
        assert np.allclose(steady_density(sol, x, i), sol.w0[i - 1], rtol=0, atol=1e-10)

    def test_boundary_flux(self, sol, mixed_diffusion):
        w1, w2 = sol.w0
        lhs = mixed_diffusion.omega1_sq * w1 + mixed_diffusion.omega2_sq * w2
        assert lhs == pytest.approx(_boundary_target(mixed_diffusion), abs=1e-10)

    @pytest.mark.parametrize("i", [1, 2])
    def test_reflecting_condition(self, sol, mixed_diffusion, i):
        x, h = 1e-6, 1e-7
        w = steady_density(sol, x, i)
        dw = (steady_density(sol, x + h, i) - steady_density(sol, x - h, i)) / (2 * h)
        b = mixed_diffusion.drifts[i - 1]
        v = mixed_diffusion.variances[i - 1]
        assert abs(b * w - 0.5 * v * dw) < 1e-6

    def test_forward_equation(self, sol, mixed_diffusion):
        # (v_i/2) W_i'' - b_i W_i' - eta_i W_i + eta_{3-i} W_{3-i} = 0
        h = 1e-3
        eta = (mixed_diffusion.eta1, mixed_diffusion.eta2)
        for x in (0.3, 2.0, 7.5):
            for i in (1, 2):
                f = [steady_density(sol, x + k * h, i) for k in (-2, -1, 0, 1, 2)]
                d1 = (f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12 * h)
                d2 = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h)
                other = steady_density(sol, x, 3 - i)
                res = (0.5 * mixed_diffusion.variances[i - 1] * d2 - mixed_diffusion.drifts[i - 1] * d1
                       - eta[i - 1] * f[2] + eta[2 - i] * other)
                assert abs(res) < 1e-8

    def test_mean(self, sol):
        assert mean(sol) == pytest.approx(_quad(lambda x: x * marginal_density(sol, x)), abs=1e-8)

    @pytest.mark.parametrize("i", [1, 2])
    def test_conditional_mean(self, sol, i):
        p = sol.env_probs[i - 1]
        q = _quad(lambda x: x * steady_density(sol, x, i)) / p
        assert conditional_mean(sol, i) == pytest.approx(q, abs=1e-8)

    def test_conditional_mean_closed_form(self, sol):
        a = sol.weights[0]
        assert conditional_mean(sol, 1) == pytest.approx(a / sol.roots.xi1s + (1 - a) / sol.roots.xi2s, rel=1e-12)

    @pytest.mark.parametrize("i", [1, 2])
    @pytest.mark.parametrize("z", [-1.0, 0.0, 0.04])
    def test_mgf(self, sol, i, z):
        q = integrate.quad(lambda x: math.exp(z * x) * steady_density(sol, x, i), 0.0, 1500.0,
                           epsabs=1e-13, epsrel=1e-12, limit=500)[0]
        assert mgf(sol, z, i) == pytest.approx(q, rel=1e-8)

    def test_mgf_at_zero_is_env_prob(self, sol):
        assert mgf(sol, 0.0, 1) == pytest.approx(sol.env_probs[0], abs=1e-10)
        assert mgf(sol, 0.0, 2) == pytest.approx(sol.env_probs[1], abs=1e-10)


class TestSingleEnvironmentCases:
    def test_case_one(self):
        d = DiffusionSpec(**{**MIXED_DIFFUSION, "eta2": 0.0})
        sol = solve_steady_density(d)
        assert sol.case is StabilityCase.CASE_I
        rate = 2 * (d.mu2s - d.lambda2s) / d.omega2_sq
        x = np.linspace(0, 20, 41)
        assert np.allclose(steady_density(sol, x, 2), rate * np.exp(-rate * x), rtol=1e-13)
        assert np.all(steady_density(sol, x, 1) == 0)
        assert mean(sol) == pytest.approx(1 / rate)
        with pytest.raises(RegimeError):
            conditional_mean(sol, 1)

    def test_case_two_mirrors_case_one(self):
        d = DiffusionSpec(**{**MIXED_DIFFUSION, "eta2": 0.0}).swapped()
        sol = solve_steady_density(d)
        assert sol.case is StabilityCase.CASE_II
        assert np.all(steady_density(sol, np.linspace(0, 5, 11), 2) == 0)

    def test_bad_env_index(self, mixed_diffusion):
        with pytest.raises(ValueError):
            steady_density(solve_steady_density(mixed_diffusion), 1.0, 3)


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(case_iii_specs)
    def test_normalized_nonnegative_flux(self, d):
        assume(d.drift_condition() > 1e-2)
        try:
            sol = solve_steady_density(d)
        except ConfluentRootsError:
            assume(False)
        assume(sol.roots.xi1s - sol.roots.xi2s > 1e-3)
        x = np.linspace(0, 30 / sol.roots.xi2s, 2001)
        assert np.all(marginal_density(sol, x) >= -1e-12)
        assert np.all(steady_density(sol, x, 1) >= -1e-12)
        # mass of each exponential mixture is 1, so the env probabilities carry the weight
        assert sum(sol.env_probs) == pytest.approx(1.0, abs=1e-12)
        assert _quad(lambda t: marginal_density(sol, t)) == pytest.approx(1.0, abs=1e-7)
        lhs = d.omega1_sq * sol.w0[0] + d.omega2_sq * sol.w0[1]
        assert lhs == pytest.approx(_boundary_target(d), rel=1e-9, abs=1e-12)


ETA2_GRID = (0.01, 0.05, 0.1, 0.15, 0.19)
ETA1_GRID = (0.06, 0.1, 0.2, 0.4, 0.6)


class TestTrends:
    @staticmethod
    def _means(**eta):
        sol = solve_steady_density(DiffusionSpec(**{**MIXED_DIFFUSION, **eta}))
        return conditional_mean(sol, 1), conditional_mean(sol, 2), mean(sol)

    def test_increasing_in_eta2(self):
        rows = np.array([self._means(eta1=0.1, eta2=e) for e in ETA2_GRID])
        assert np.all(np.diff(rows, axis=0) > 0)

    def test_decreasing_in_eta1(self):
        rows = np.array([self._means(eta1=e, eta2=0.1) for e in ETA1_GRID])
        assert np.all(np.diff(rows, axis=0) < 0)
