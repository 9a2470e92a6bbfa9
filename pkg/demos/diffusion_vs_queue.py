"""How well the switching diffusion approximates a scaled queue.

Rates are scaled as lambda_i = lambda_i*/eps + omega_i^2/2 (and similarly for
mu_i), so the queue at level n should look like eps * W(eps * n).
"""

from switchq import DiffusionSpec, solve_steady_density
from switchq.diffusion import compare_scaled
from switchq.diffusion import steady as ds

d = DiffusionSpec(lambda1s=1.0, mu1s=0.5, lambda2s=0.8, mu2s=1.2, omega1_sq=0.2,
                  omega2_sq=0.4, eta1=0.6, eta2=0.4)
sol = solve_steady_density(d)
print("decay rates:", ", ".join(f"{r:.6f}" for r in sol.roots.as_tuple()))
print(f"E[X] = {ds.mean(sol):.4f}  W1(0+) = {sol.w0[0]:.4f}  W2(0+) = {sol.w0[1]:.4f}")

print("\n  eps     sup|q_n - eps W|   sup over (n, i)")
for eps in (0.1, 0.05, 0.02, 0.01):
    c = compare_scaled(d, eps, levels=range(0, 3001, 10))
    print(f"{eps:5.2f}     {c.sup_marginal:.3e}          {c.sup_joint:.3e}")
