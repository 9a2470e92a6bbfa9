"""Time to empty the queue when the environment switches only once.

The queue starts in environment 1 with probability p and moves to
environment 2 after an exponential time; from there it never switches back.
"""

import numpy as np

from switchq import QueueSpec, fpt_discrete as fpt
from switchq.errors import RegimeError

light = QueueSpec(lambda1=1.0, mu1=0.5, lambda2=1.0, mu2=2.0, eta1=0.5, eta2=0.0,
                  init_state=1, init_env_prob=0.4)
heavy = QueueSpec(lambda1=1.0, mu1=0.5, lambda2=1.2, mu2=1.0, eta1=0.2, eta2=0.0,
                  init_state=1, init_env_prob=0.4)

for name, spec in (("light second environment", light), ("heavy second environment", heavy)):
    print(f"-- {name}")
    print(f"P(T < inf) = {fpt.absorption_probability(spec):.6f}")
    try:
        print(f"E[T]       = {fpt.fpt_mean(spec):.6f}")
    except RegimeError as err:
        print(f"E[T]       undefined ({err})")
    for t in np.linspace(0.5, 8.0, 6):
        print(f"  b({t:4.1f}) = {fpt.fpt_density(spec, t):.6f}")
    print(f"  B(s=1)   = {fpt.fpt_laplace(spec, 1.0):.6f}")
