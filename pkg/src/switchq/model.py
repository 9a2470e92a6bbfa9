"""Parameter containers, validation and stability classification.

``QueueSpec`` describes the queue-length chain ``(N(t), E(t))``: arrival and
service rates per environment, the switch rates ``eta1`` (1 -> 2) and
``eta2`` (2 -> 1), and the initial condition ``N(0) = j`` with ``E(0) = 1``
with probability ``p``. ``DiffusionSpec`` carries the same information for
the approximating reflected Wiener process.
"""

from __future__ import annotations

import enum
import math
import numbers
from dataclasses import asdict, dataclass, replace

from .errors import SpecError


class StabilityCase(enum.Enum):
    CASE_I = "CaseI"          # eta2 = 0, environment 2 stable
    CASE_II = "CaseII"        # eta1 = 0, environment 1 stable
    CASE_III = "CaseIII"      # both switch rates positive, averaged drift negative
    NO_STEADY_STATE = "NoSteadyState"

    @property
    def has_steady_state(self) -> bool:
        return self is not StabilityCase.NO_STEADY_STATE


def _finite(name, value):
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not math.isfinite(value):
        raise SpecError(f"{name} must be a finite real number, got {value!r}")


@dataclass(frozen=True)
class QueueSpec:
    lambda1: float
    mu1: float
    lambda2: float
    mu2: float
    eta1: float
    eta2: float
    init_state: int = 0
    init_env_prob: float = 1.0

    def __post_init__(self):
        validate(self)

    @property
    def rates(self):
        """``(lambda_i, mu_i, eta_i)`` for environments 1 and 2."""
        return ((self.lambda1, self.mu1, self.eta1), (self.lambda2, self.mu2, self.eta2))

    def drift_condition(self) -> float:
        """``eta1 (mu2 - lambda2) + eta2 (mu1 - lambda1)``; positive means stable."""
        return self.eta1 * (self.mu2 - self.lambda2) + self.eta2 * (self.mu1 - self.lambda1)

    def swapped(self) -> "QueueSpec":
        """Same chain with the environment labels exchanged."""
        return QueueSpec(self.lambda2, self.mu2, self.lambda1, self.mu1, self.eta2, self.eta1,
                         self.init_state, 1.0 - self.init_env_prob)

    def replace(self, **changes) -> "QueueSpec":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DiffusionSpec:
    lambda1s: float
    mu1s: float
    lambda2s: float
    mu2s: float
    omega1_sq: float
    omega2_sq: float
    eta1: float
    eta2: float
    init_position: float = 0.0
    init_env_prob: float = 1.0

    def __post_init__(self):
        validate(self)

    @property
    def drifts(self) -> tuple[float, float]:
        """Infinitesimal means ``beta_i = lambda_i* - mu_i*``."""
        return (self.lambda1s - self.mu1s, self.lambda2s - self.mu2s)

    @property
    def variances(self) -> tuple[float, float]:
        return (self.omega1_sq, self.omega2_sq)

    def drift_condition(self) -> float:
        """``eta1 (mu2* - lambda2*) + eta2 (mu1* - lambda1*)``."""
        return self.eta1 * (self.mu2s - self.lambda2s) + self.eta2 * (self.mu1s - self.lambda1s)

    def swapped(self) -> "DiffusionSpec":
        return DiffusionSpec(self.lambda2s, self.mu2s, self.lambda1s, self.mu1s,
                             self.omega2_sq, self.omega1_sq, self.eta2, self.eta1,
                             self.init_position, 1.0 - self.init_env_prob)

    def replace(self, **changes) -> "DiffusionSpec":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


def validate(spec):
    """Check the invariants of a ``QueueSpec`` or ``DiffusionSpec``.

    Returns the spec unchanged.

    Raises:
        SpecError: naming the first violated invariant.
    """
    if isinstance(spec, QueueSpec):
        for name in ("lambda1", "mu1", "lambda2", "mu2"):
            _finite(name, getattr(spec, name))
            if not getattr(spec, name) > 0:
                raise SpecError(f"{name} > 0 violated ({getattr(spec, name)!r})")
        j = spec.init_state
        if isinstance(j, bool) or not isinstance(j, numbers.Integral) or j < 0:
            raise SpecError(f"init_state must be a nonnegative integer, got {j!r}")
    elif isinstance(spec, DiffusionSpec):
        for name in ("lambda1s", "mu1s", "lambda2s", "mu2s", "omega1_sq", "omega2_sq"):
            _finite(name, getattr(spec, name))
            if not getattr(spec, name) > 0:
                raise SpecError(f"{name} > 0 violated ({getattr(spec, name)!r})")
        _finite("init_position", spec.init_position)
        if spec.init_position < 0:
            raise SpecError(f"init_position >= 0 violated ({spec.init_position!r})")
    else:
        raise TypeError(f"expected QueueSpec or DiffusionSpec, got {type(spec).__name__}")

    for name in ("eta1", "eta2"):
        _finite(name, getattr(spec, name))
        if getattr(spec, name) < 0:
            raise SpecError(f"{name} >= 0 violated ({getattr(spec, name)!r})")
    if not spec.eta1 + spec.eta2 > 0:
        raise SpecError("eta1 + eta2 > 0 violated")
    _finite("init_env_prob", spec.init_env_prob)
    if not 0.0 <= spec.init_env_prob <= 1.0:
        raise SpecError(f"0 <= init_env_prob <= 1 violated ({spec.init_env_prob!r})")
    return spec


def classify(spec) -> StabilityCase:
    """Which steady-state regime, if any, the parameters fall into.

    The mixed case requires the strict inequality; equality has no steady state.
    """
    if isinstance(spec, QueueSpec):
        (l1, m1, e1), (l2, m2, e2) = spec.rates
    elif isinstance(spec, DiffusionSpec):
        l1, m1, l2, m2 = spec.lambda1s, spec.mu1s, spec.lambda2s, spec.mu2s
        e1, e2 = spec.eta1, spec.eta2
    else:
        raise TypeError(f"expected QueueSpec or DiffusionSpec, got {type(spec).__name__}")

    if e2 == 0:
        return StabilityCase.CASE_I if l2 < m2 else StabilityCase.NO_STEADY_STATE
    if e1 == 0:
        return StabilityCase.CASE_II if l1 < m1 else StabilityCase.NO_STEADY_STATE
    if e1 * (m2 - l2) + e2 * (m1 - l1) > 0:
        return StabilityCase.CASE_III
    return StabilityCase.NO_STEADY_STATE


def scale_to_discrete(d: DiffusionSpec, epsilon: float) -> QueueSpec:
    """Heavy-traffic rates whose scaled queue converges to ``d`` as ``epsilon -> 0``.

    ``lambda_i = lambda_i*/eps + omega_i^2/(2 eps^2)`` and likewise for
    ``mu_i``; switch rates and ``p`` carry over, and the initial level is the
    lattice point nearest to ``y``, ``j = round(y / eps)``.
    """
    if not epsilon > 0:
        raise SpecError("epsilon > 0 violated")
    eps = float(epsilon)
    half1 = d.omega1_sq / (2.0 * eps * eps)
    half2 = d.omega2_sq / (2.0 * eps * eps)
    return QueueSpec(
        lambda1=d.lambda1s / eps + half1,
        mu1=d.mu1s / eps + half1,
        lambda2=d.lambda2s / eps + half2,
        mu2=d.mu2s / eps + half2,
        eta1=d.eta1,
        eta2=d.eta2,
        init_state=int(round(d.init_position / eps)),
        init_env_prob=d.init_env_prob,
    )
