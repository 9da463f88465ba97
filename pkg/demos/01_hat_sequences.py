# %% [markdown]
# Hat sequences and the M_k function
#
# An infinite tuple here is always eventually constant: a short prefix and a
# tail that repeats forever. That is enough for every iteration the library runs.

# %%
from picardo import AbsDiff, constant, hat, m_k, rehat

d = AbsDiff()
s = hat([0.2, 0.7], 0.4)
print(s, "->", s.head(6))
print("entry 1000:", s[1000])

# %%
# rehat(s, l) keeps entries 1..l-1 and repeats entry l.
print(rehat(s, 1), rehat(s, 2), rehat(s, 5))

# trailing prefix entries equal to the tail are dropped, so equality is structural
print(hat([0.2, 0.4, 0.4], 0.4) == hat([0.2], 0.4))

# %%
# M_k takes the max of d(u_l, v_l), d(u_l, T(u hatted at l)) and d(v_l, T(v hatted at l))
# over l >= k. For hat-form inputs only finitely many l matter.
T = lambda seq: 0.5 * seq[2]
u, v = hat([0.2], 0.4), hat([0.6], 0.8)
print("m_2 =", m_k(T, u, v, 2, d))
print("three-term max =", max(abs(u[2] - v[2]), abs(u[2] - T(u)), abs(v[2] - T(v))))

# %%
proj = lambda seq: seq[1]
print("projection, constant inputs:", m_k(proj, constant(0.3), constant(0.7), 1, d))
