"""Special functions and numerical primitives shared by the analytic modules.

Everything here is a pure function. Bessel factors are always handled in
their exponentially scaled form ``exp(-x) I_n(x)`` so that products such as
``exp(-(lam + mu) t) I_n(2 t sqrt(lam mu))`` never overflow.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy import integrate as _integrate
from scipy import special

from .errors import ConvergenceError, CubicRootError


@dataclass(frozen=True)
class QuadratureSettings:
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    max_depth: int = 200

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be > 0")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")

    def tightened(self, factor: float = 0.5) -> "QuadratureSettings":
        return QuadratureSettings(self.abs_tol * factor, self.rel_tol * factor, self.max_depth)


@dataclass(frozen=True)
class SeriesSettings:
    tail_tol: float = 1e-12
    max_terms: int = 100_000

    def __post_init__(self):
        if not self.tail_tol > 0:
            raise ValueError("tail_tol must be > 0")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")


DEFAULT_QUAD = QuadratureSettings()
DEFAULT_SERIES = SeriesSettings()

# number of consecutive sub-tolerance terms that stops a series
STOP_RUN = 5


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------

def bessel_i_scaled(order, x):
    """Return ``exp(-x) * I_order(x)`` for integer ``order >= 0`` and ``x >= 0``.

    Accepts scalars or broadcastable arrays.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise ValueError("bessel_i_scaled requires x >= 0")
    order_arr = np.asarray(order)
    if np.any(order_arr < 0):
        raise ValueError("bessel_i_scaled requires order >= 0")
    out = special.ive(order_arr, x_arr)
    if np.ndim(out) == 0:
        return float(out)
    return out


def log_bessel_i_scaled(order, x):
    """Natural log of ``exp(-x) I_order(x)``, robust where the value underflows.

    Falls back to the uniform (Debye) asymptotic expansion for entries where
    ``ive`` underflows; those entries only ever feed negligible series tails.
    """
    order = np.asarray(order, dtype=float)
    x = np.asarray(x, dtype=float)
    order, x = np.broadcast_arrays(order, x)
    val = special.ive(order, x)
    with np.errstate(divide="ignore"):
        out = np.array(np.log(val), dtype=float)
    bad = ~(val > 1e-290)
    if np.any(bad):
        nu = order[bad]
        xx = x[bad]
        res = np.full(nu.shape, -np.inf)
        ok = (nu > 0) & (xx > 0)
        nu, xx = nu[ok], xx[ok]
        z = xx / nu
        s = np.sqrt(1.0 + z * z)
        p = 1.0 / s
        eta = s + np.log(z / (1.0 + s))
        u1 = (3.0 * p - 5.0 * p**3) / 24.0
        res[ok] = (-0.5 * np.log(2.0 * np.pi * nu) + nu * eta - 0.5 * np.log(s)
                   + np.log1p(u1 / nu) - xx)
        out[bad] = res
    if out.ndim == 0:
        return float(out)
    return out


def erfc(x):
    """Complementary error function ``(2/sqrt(pi)) int_x^inf exp(-z^2) dz``."""
    out = special.erfc(x)
    if np.ndim(out) == 0:
        return float(out)
    return out


def exp_times_erfc(a, b):
    """Return ``exp(a) * erfc(b)`` without intermediate overflow."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    out = np.empty(a.shape)
    pos = b >= 0
    # erfc(b) = exp(-b^2) erfcx(b) is the stable split for b >= 0
    out[pos] = np.exp(a[pos] - b[pos] ** 2) * special.erfcx(b[pos])
    out[~pos] = np.exp(a[~pos]) * special.erfc(b[~pos])
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Cubic equations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CubicRoots:
    """Three real roots of ``c3 z^3 + c2 z^2 + c1 z + c0`` in descending order."""

    roots: tuple[float, float, float]
    coefficients: tuple[float, float, float, float]

    def __iter__(self):
        return iter(self.roots)

    def __getitem__(self, k):
        return self.roots[k]

    def residuals(self) -> tuple[float, ...]:
        """Residual of each root scaled by ``sum |c_k| |z|^k``."""
        return tuple(_scaled_residual(self.coefficients, z) for z in self.roots)


def _poly(coeffs, z):
    c3, c2, c1, c0 = coeffs
    return ((c3 * z + c2) * z + c1) * z + c0


def _dpoly(coeffs, z):
    c3, c2, c1, _ = coeffs
    return (3.0 * c3 * z + 2.0 * c2) * z + c1


def _scaled_residual(coeffs, z):
    c3, c2, c1, c0 = coeffs
    az = abs(z)
    scale = abs(c3) * az**3 + abs(c2) * az**2 + abs(c1) * az + abs(c0)
    if scale == 0.0:
        return 0.0
    return abs(_poly(coeffs, z)) / scale


def _newton_polish(coeffs, z, steps=3):
    best = z
    best_res = abs(_poly(coeffs, z))
    for _ in range(steps):
        d = _dpoly(coeffs, best)
        if d == 0.0:
            break
        cand = best - _poly(coeffs, best) / d
        res = abs(_poly(coeffs, cand))
        if not res < best_res:
            break
        best, best_res = cand, res
    return best


def solve_cubic(c3: float, c2: float, c1: float, c0: float, imag_tol: float = 1e-7) -> CubicRoots:
    """Real roots of a cubic known to have three real roots.

    Uses the trigonometric form of the depressed cubic, then Newton polishing.

    Raises:
        CubicRootError: if the cubic has a complex pair whose imaginary part
            exceeds ``imag_tol`` relative to the root scale.
    """
    if c3 == 0:
        raise ValueError("leading coefficient must be nonzero")
    coeffs = (float(c3), float(c2), float(c1), float(c0))
    a, b, c = c2 / c3, c1 / c3, c0 / c3
    shift = a / 3.0
    p = b - a * a / 3.0
    q = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    scale = max(1.0, abs(a), math.sqrt(abs(b)), abs(c) ** (1.0 / 3.0))

    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if p < 0 and disc <= 0:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * m)
        arg = min(1.0, max(-1.0, arg))
        theta = math.acos(arg) / 3.0
        ts = [m * math.cos(theta - 2.0 * math.pi * k / 3.0) for k in range(3)]
    else:
        # one real root plus a pair; accept only if the pair is numerically real
        sd = math.sqrt(max(disc, 0.0))
        u = np.cbrt(-q / 2.0 + sd)
        v = np.cbrt(-q / 2.0 - sd)
        t0 = float(u + v)
        imag = abs(float(u - v)) * math.sqrt(3.0) / 2.0
        if imag > imag_tol * scale:
            raise CubicRootError(
                f"cubic has complex roots (imaginary part {imag:.3g}); "
                "parameters are outside the regime with three real roots"
            )
        tr = -t0 / 2.0
        ts = [t0, tr, tr]
    roots = sorted((_newton_polish(coeffs, t - shift) for t in ts), reverse=True)
    return CubicRoots(roots=tuple(float(r) for r in roots), coefficients=coeffs)


# ---------------------------------------------------------------------------
# Quadrature and series
# ---------------------------------------------------------------------------

def integrate(f: Callable[[float], float], a: float, b: float,
              settings: QuadratureSettings = DEFAULT_QUAD,
              points=None) -> float:
    """Adaptive quadrature of a scalar function over ``[a, b]``.

    ``b`` may be ``math.inf``; the half-line is mapped onto ``[0, 1)`` via
    ``x = a + u / (1 - u)`` before integrating.

    Raises:
        ConvergenceError: if the error estimate stays above
            ``max(abs_tol, rel_tol * |result|)`` after ``max_depth`` subdivisions.
    """
    if b < a:
        raise ValueError("integrate requires a <= b")
    if a == b:
        return 0.0
    if math.isinf(b):
        def g(u):
            if u >= 1.0:
                return 0.0
            w = 1.0 - u
            return f(a + u / w) / (w * w)
        lo, hi, fun = 0.0, 1.0, g
        if points is not None:
            points = [(p - a) / (1.0 + p - a) for p in points if p > a]
    else:
        lo, hi, fun = a, b, f
        if points is not None:
            points = [p for p in points if a < p < b]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _integrate.IntegrationWarning)
        res = _integrate.quad(fun, lo, hi, epsabs=settings.abs_tol, epsrel=settings.rel_tol,
                              limit=settings.max_depth, points=points or None,
                              full_output=1)
    val, err = res[0], res[1]
    allowed = max(settings.abs_tol, settings.rel_tol * abs(val))
    if not np.isfinite(val) or err > 10.0 * allowed:
        raise ConvergenceError(
            f"quadrature did not converge on [{a}, {b}]: estimate {val!r}, error {err:.3g}"
        )
    return float(val)


def integrate_vec(f, a: float, b: float, settings: QuadratureSettings = DEFAULT_QUAD,
                  points=None):
    """Adaptive quadrature of an array-valued function over a finite ``[a, b]``.

    The error criterion is the max-norm over components.
    """
    if b < a:
        raise ValueError("integrate_vec requires a <= b")
    if a == b:
        return np.zeros_like(np.asarray(f(a), dtype=float))
    val, err, info = _integrate.quad_vec(
        f, a, b, epsabs=settings.abs_tol, epsrel=settings.rel_tol,
        norm="max", limit=settings.max_depth * 50, points=points, full_output=True,
    )
    if not info.success:
        scale = float(np.max(np.abs(val))) if np.size(val) else 0.0
        if err > 10.0 * max(settings.abs_tol, settings.rel_tol * scale):
            raise ConvergenceError(f"vector quadrature did not converge on [{a}, {b}]")
    return val


def sum_series(term: Callable[[int], float], start: int = 0,
               settings: SeriesSettings = DEFAULT_SERIES, min_terms: int = 0) -> float:
    """Sum ``term(k)`` for ``k = start, start + 1, ...``.

    Stops after a run of five consecutive terms each smaller than
    ``settings.tail_tol`` in magnitude. The stop rule is only armed after
    ``min_terms`` terms, which callers use to skip a growing head.

    Raises:
        ConvergenceError: if ``max_terms`` terms are consumed first.
    """
    total = 0.0
    comp = 0.0
    run = 0
    k = start
    for idx in range(settings.max_terms):
        v = float(term(k))
        # Kahan summation keeps long slowly-decaying tails accurate
        y = v - comp
        t = total + y
        comp = (t - total) - y
        total = t
        if abs(v) < settings.tail_tol and idx >= min_terms:
            run += 1
            if run >= STOP_RUN:
                return total
        else:
            run = 0
        k += 1
    raise ConvergenceError(f"series did not meet the stop rule within {settings.max_terms} terms")


def truncate_by_run(values, tail_tol: float, run: int = STOP_RUN) -> int:
    """Index after which a sequence is truncated by the consecutive-run rule.

    Returns the length of the prefix kept, i.e. the position just after the
    first run of ``run`` consecutive entries below ``tail_tol``. Returns
    ``-1`` if no such run exists.
    """
    small = np.abs(np.asarray(values)) < tail_tol
    count = 0
    for idx, s in enumerate(small):
        count = count + 1 if s else 0
        if count >= run:
            return idx + 1
    return -1
