"""Side-by-side check of the scaled queue against its diffusion limit.

Under the heavy-traffic scaling the queue length ``N`` behaves like
``X / eps``, so ``q_n`` should be close to ``eps W(eps n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import DiffusionSpec, scale_to_discrete
from ..steady_state import joint_pmf, solve_steady
from .steady import solve_steady_density, steady_density

COLUMNS = ("n", "q_n", "q_n1", "q_n2", "epsW", "epsW1", "epsW2")


@dataclass(frozen=True)
class ScaledComparison:
    epsilon: float
    table: np.ndarray            # one row per n, columns as in COLUMNS
    sup_marginal: float          # max_n |q_n - eps W(eps n)|
    sup_joint: float             # max over n and i of |q_{n,i} - eps W_i(eps n)|

    columns = COLUMNS


def default_levels() -> np.ndarray:
    return 20 * np.arange(16)


def compare_scaled(d: DiffusionSpec, epsilon: float, levels=None) -> ScaledComparison:
    """Tabulate ``q_{n,i}`` of the scaled queue against ``eps W_i(eps n)``."""
    n = default_levels() if levels is None else np.asarray(levels, dtype=np.int64)
    if n.ndim != 1 or n.size == 0 or np.any(n < 0):
        raise ValueError("levels must be a nonempty list of nonnegative integers")
    disc = solve_steady(scale_to_discrete(d, epsilon))
    cont = solve_steady_density(d)
    q1, q2 = joint_pmf(disc, n, 1), joint_pmf(disc, n, 2)
    x = epsilon * n
    w1 = epsilon * steady_density(cont, x, 1)
    w2 = epsilon * steady_density(cont, x, 2)
    table = np.column_stack([n.astype(float), q1 + q2, q1, q2, w1 + w2, w1, w2])
    sup_m = float(np.max(np.abs(table[:, 1] - table[:, 4])))
    sup_j = float(max(np.max(np.abs(q1 - w1)), np.max(np.abs(q2 - w2))))
    return ScaledComparison(float(epsilon), table, sup_m, sup_j)
