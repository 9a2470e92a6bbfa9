"""Steady state of the queue in two alternating environments.

Environment 1 is overloaded (lambda > mu) and environment 2 is light. The
queue is still stable because it spends enough time in environment 2.
"""

import numpy as np

from switchq import QueueSpec, solve_steady
from switchq import steady_state as ss

spec = QueueSpec(lambda1=1.0, mu1=0.5, lambda2=1.0, mu2=2.0, eta1=0.1, eta2=0.08)
sol = solve_steady(spec)

print("stability case:", sol.case.name)
print("roots:", ", ".join(f"{r:.6f}" for r in sol.roots.as_tuple()))
print(f"P(E=1) = {sol.env_probs[0]:.4f}   P(E=2) = {sol.env_probs[1]:.4f}")
print(f"E[N] = {ss.mean(sol):.4f}   E[N|E=1] = {ss.conditional_mean(sol, 1):.4f}"
      f"   E[N|E=2] = {ss.conditional_mean(sol, 2):.4f}")

n = np.arange(0, 41, 5)
print("\n  n      q_n1        q_n2        q_n     H(E|N=n)")
for k, a, b, h in zip(n, ss.joint_pmf(sol, n, 1), ss.joint_pmf(sol, n, 2),
                      ss.entropy_env_given_n(sol, n)):
    print(f"{k:3d}  {a:.4e}  {b:.4e}  {a + b:.4e}  {h:.4f}")

# past a few customers the queue length barely narrows down the environment
print(f"\nH(N) = {ss.entropy_N(sol):.4f} nats")
print(f"H(E) = {ss.entropy_env(sol):.4f},  H(E|N=n) -> {ss.entropy_env_limit(sol):.4f} as n grows")
