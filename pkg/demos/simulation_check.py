"""Monte Carlo against the closed forms, with z-scores.

Runs in well under a minute; increase the replications to tighten the errors.
"""

import numpy as np

from switchq import DiffusionSpec, QueueSpec, SimConfig, solve_steady
from switchq import fpt_discrete as fpt
from switchq import simulator as sim
from switchq import steady_state as ss
from switchq.diffusion import one_way

spec = QueueSpec(lambda1=1.0, mu1=0.5, lambda2=1.0, mu2=2.0, eta1=0.1, eta2=0.08)
sol = solve_steady(spec)
est = sim.estimate_steady_pmf(spec, SimConfig(1, horizon=2e4, burn_in=500, seed=11))
print("steady state, one long path")
for n in (0, 2, 5, 10):
    for i in (1, 2):
        e = est[(n, i)]
        exact = float(ss.joint_pmf(sol, n, i))
        print(f"  q({n:2d},{i}) exact {exact:.5f}  sim {e.value:.5f}  z {e.z_score(exact):+.2f}")

one = QueueSpec(lambda1=1.0, mu1=0.5, lambda2=1.0, mu2=2.0, eta1=0.5, eta2=0.0,
                init_state=1, init_env_prob=0.4)
sample = sim.sample_first_emptying(one, SimConfig(200_000, horizon=1e3, seed=12))
m = sample.mean_time()
print(f"\nqueue first emptying: E[T] exact {fpt.fpt_mean(one):.4f}"
      f"  sim {m.value:.4f}  z {m.z_score(fpt.fpt_mean(one)):+.2f}")

d = DiffusionSpec(lambda1s=1.0, mu1s=0.5, lambda2s=1.0, mu2s=2.0, omega1_sq=1.0,
                  omega2_sq=4.0, eta1=0.5, eta2=0.0, init_position=1.0, init_env_prob=0.4)
hits = sim.sample_diffusion_first_passage(d, SimConfig(200_000, horizon=1e3, seed=13))
m = hits.mean_time()
exact = one_way.fpt_mean(d)
print(f"diffusion first passage: E[T] exact {exact:.4f}  sim {m.value:.4f}"
      f"  z {m.z_score(exact):+.2f}  censored {hits.censored_fraction:.1e}")
