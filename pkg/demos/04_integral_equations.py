# %% [markdown]
# Fredholm and Urysohn equations by successive approximation
#
# The integral is discretized with a tensor Gauss-Legendre rule whose nodes are
# also the collocation points. Iteration starts from u_0 = f.

# %%
import numpy as np

from picardo import (
    FredholmProblem,
    QuadratureRule,
    UrysohnProblem,
    oracle_urysohn_newton,
    solve_fredholm,
    solve_urysohn,
)

# %%
# u(t) = t + 0.5 * int t s u(s) ds has the solution u = 1.2 t
p = FredholmProblem(1, lambda t, s: 0.5 * t[..., 0] * s[..., 0], lambda t: t[:, 0], delta=0.5, gamma=2.0)
rep = solve_fredholm(p, QuadratureRule.gauss(16), oracle=True)
t = rep.solution.nodes[:, 0]
print(rep.iterations, "iterations; error", np.max(np.abs(rep.solution.values - 1.2 * t)),
      "dense gap", rep.oracle_gap)
print({k: v for k, v in rep.hypothesis_checks.items() if k.endswith("_ok")})

# %%
# two axes: u = t1 t2 / (1 - 0.5/9)
p2 = FredholmProblem(2, lambda t, s: 0.5 * t[..., 0] * t[..., 1] * s[..., 0] * s[..., 1],
                     lambda t: t[:, 0] * t[:, 1], 0.5, 2.0)
rep2 = solve_fredholm(p2, QuadratureRule.gauss(6))
x = rep2.solution.nodes
print(np.max(np.abs(rep2.solution.values - x[:, 0] * x[:, 1] / (1 - 0.5 / 9))))

# %%
# nonlinear: u(t) = t + int sin(u(s)) t s / 10 ds, in the weighted metric
q = QuadratureRule.gauss(32)
up = UrysohnProblem(1, lambda t, s, u: np.sin(u) * t[..., 0] * s[..., 0] / 10, lambda t: t[:, 0], tau=10.0, alpha=0.5)
urep = solve_urysohn(up, q)
newton = oracle_urysohn_newton(up, q)
print(urep.iterations, urep.residual_sup, np.max(np.abs(newton.values - urep.solution.values)))
print(urep.metric)
