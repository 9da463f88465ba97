# %% [markdown]
# k-Picard iteration
#
# From base points x_1..x_k the finite engine computes x_{n+k} = T(x_n, ..., x_{n+k-1}).
# The infinite engine feeds T the hat sequence (x_n, ..., x_{n+k-2}, x_{n+k-1}, x_{n+k-1}, ...).

# %%
import numpy as np

from picardo import AbsDiff, GeraghtyFn, IterationConfig, diagnose, infinite_k_picard, k_picard

d = AbsDiff()

# %%
res = k_picard(lambda x: x / 2 + 1, [0.0], d, IterationConfig(eps_step=1e-10, eps_res=1e-10))
print(res.point, res.iterations_used, res.residual)

# %%
# the same contraction on three inputs, both engines
T_fin = lambda a, b, c: (a + b + c) / 6 + 1
T_inf = lambda seq: (seq[1] + seq[2] + seq[3]) / 6 + 1
a = k_picard(T_fin, [0.0, 0.5, 1.0], d)
b = infinite_k_picard(T_inf, [0.0, 0.5, 1.0], d)
print(a.point, b.point, a.trace.iterates == b.trace.iterates)

# %%
# steps of T = c * x_k shrink by exactly c
res = infinite_k_picard(lambda s: 0.7 * s[2], [0.3, 0.9], d, beta=GeraghtyFn.constant(0.85))
diag = diagnose(res.trace)
print("violations", diag.violations, "rate", diag.rate, "cauchy", diag.cauchy)
for row in res.trace.rows()[:4]:
    print(row)

# %%
# vectors work the same way under the sup norm
from picardo import SupNorm

A = np.array([[0.4, 0.1], [0.2, 0.3]])
res = k_picard(lambda x: A @ x + 1, [np.zeros(2)], SupNorm())
print(res.point, np.linalg.solve(np.eye(2) - A, np.ones(2)))
