# %% [markdown]
# Checking contraction conditions by falsification
#
# The conditions quantify over all pairs of inputs, so they cannot be verified
# numerically. The falsifier tries a boundary grid and then seeded random
# samples. A pass means no counterexample was found.

# %%
from picardo import AbsDiff, ContractionKind, GeraghtyFn, SamplerConfig, beta_sanity, falsify, lhs_rhs

d = AbsDiff()
cfg = SamplerConfig(n_samples=10_000, seed=1)

# %%
# T(x) = c * x_k with c = 0.3 against three H_k-type conditions, k = 2
c, k = 0.3, 2
T = lambda seq: c * seq[k]
for kind, b in [
    (ContractionKind.hk(k), (1 + c) / 2),
    (ContractionKind.ext_kannan_geraghty(k), 0.95),
    (ContractionKind.ext_fisher_geraghty(k), 0.9),
]:
    rep = falsify(kind, T, GeraghtyFn.constant(b), d, cfg)
    print(f"{str(kind):28s} beta={b:.3f} passed={rep.passed} max lhs/rhs={rep.max_ratio:.4f}")

# %%
# The extended Kannan form stops holding once c reaches 1/3:
# at u_k = 1, v_k = 0 the left side is c and the right side is below (1 - c)/2.
rep = falsify(ContractionKind.ext_kannan_geraghty(1), lambda s: 0.4 * s[1],
              GeraghtyFn.constant(0.99), d, SamplerConfig(n_samples=100))
print("c = 0.4:", rep.counterexample)

# %%
# The identity is never a strict contraction.
rep = falsify(ContractionKind.hk(1), lambda s: s[1], GeraghtyFn.reciprocal(), d, cfg)
print("identity:", rep.counterexample)

# %%
# Classical Kannan with T(x) = 0.6 x fails at (1, 0): 0.6 > 0.4 * (0.4 + 0).
print(lhs_rhs(ContractionKind.kannan(0.4), lambda x: 0.6 * x, None, 1.0, 0.0, d))

# %%
# A user supplied Geraghty function is only range-checked on samples.
print(beta_sanity(GeraghtyFn.user(lambda t: t / (1 + t), "t/(1+t)")))
