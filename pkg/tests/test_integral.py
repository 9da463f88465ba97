"""Fredholm and Urysohn successive approximation against closed forms and dense oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from picardo.errors import CapExceeded, HypothesisViolated, SingularSystem
from picardo.integral import (
    FredholmProblem,
    UrysohnProblem,
    apply_fredholm,
    apply_urysohn,
    fredholm_hypotheses,
    fredholm_operator,
    oracle_fredholm_dense,
    oracle_urysohn_newton,
    solve_fredholm,
    solve_urysohn,
)
from picardo.metric import FunctionGrid
from picardo.picard import IterationConfig
from picardo.quadrature import QuadratureRule

G16 = QuadratureRule.gauss(16)


def separable(delta=0.5, n=1, forcing=None):
    def kernel(t, s):
        return delta * np.prod(t, axis=-1) * np.prod(s, axis=-1)
    return FredholmProblem(n, kernel, forcing or (lambda t: np.prod(t, axis=-1)), delta, 2.0)


def grid_for(p, q, fn):
    nodes, _ = q.nodes_weights(p.n_trunc, *p.domain)
    return FunctionGrid(nodes, fn(nodes))


def sup(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


class TestApplyFredholm:
    def test_zero_kernel(self):
        p = FredholmProblem(2, lambda t, s: 0.0, lambda t: np.sin(t[:, 0]) + t[:, 1], 0.5, 2.0)
        u = grid_for(p, G16, lambda x: np.cos(x[:, 0]))
        out = apply_fredholm(u, p, G16)
        assert np.array_equal(out.values, np.sin(u.nodes[:, 0]) + u.nodes[:, 1])

    @pytest.mark.parametrize("m", [2, 3, 16])
    def test_seven_sixths(self, m):
        q = QuadratureRule.gauss(m)
        p = separable()
        u = grid_for(p, q, lambda x: x[:, 0])
        out = apply_fredholm(u, p, q)
        # t + 0.5 t * int s^2 = 7t/6
        assert sup(out.values, 7 * u.nodes[:, 0] / 6) <= 1e-15

    def test_exact_solution_is_fixed(self):
        p = separable()
        u = grid_for(p, G16, lambda x: 1.2 * x[:, 0])
        assert sup(apply_fredholm(u, p, G16).values, u.values) <= 1e-15

    @given(st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 1000))
    @settings(max_examples=50)
    def test_affine(self, a, b, seed):
        p = FredholmProblem(1, lambda t, s: 0.3 * np.cos(t[..., 0] - 2 * s[..., 0]),
                            lambda t: np.exp(t[:, 0]), 0.5, 2.0)
        q = QuadratureRule.gauss(8)
        rng = np.random.default_rng(seed)
        u = grid_for(p, q, lambda x: rng.normal(size=len(x)))
        v = u.with_values(rng.normal(size=len(u)))
        f = apply_fredholm(u.with_values(np.zeros(len(u))), p, q).values
        lhs = apply_fredholm(u.with_values(a * u.values + b * v.values), p, q).values
        rhs = a * apply_fredholm(u, p, q).values + b * apply_fredholm(v, p, q).values + (1 - a - b) * f
        assert sup(lhs, rhs) <= 1e-12 * (1 + abs(a) + abs(b)) * 10

    def test_grid_must_match(self):
        p = separable()
        u = grid_for(p, QuadratureRule.gauss(8), lambda x: x[:, 0])
        with pytest.raises(ValueError):
            apply_fredholm(u, p, G16)


class TestSolveFredholm:
    def test_separable_closed_form(self):
        rep = solve_fredholm(separable(), G16, oracle=True)
        t = rep.solution.nodes[:, 0]
        assert rep.converged
        assert sup(rep.solution.values, 3 * t / (3 - 0.5)) <= 1e-8
        assert rep.oracle_gap <= 1e-10
        assert rep.hypothesis_checks["kernel_bound_ok"]
        assert rep.hypothesis_checks["kernel_bound_worst"] == 0.5

    def test_zero_forcing(self):
        p = FredholmProblem(1, lambda t, s: 0.9 * np.sin(7 * t[..., 0] * s[..., 0]), lambda t: 0.0 * t[:, 0], 0.95, 2.0)
        rep = solve_fredholm(p, G16)
        assert rep.iterations == 1
        assert np.array_equal(rep.solution.values, np.zeros(16))

    def test_two_axes(self):
        q = QuadratureRule.gauss(6)
        rep = solve_fredholm(separable(n=2), q, oracle=True)
        x = rep.solution.nodes
        exact = x[:, 0] * x[:, 1] / (1 - 0.5 / 9)
        assert sup(rep.solution.values, exact) <= 1e-8
        assert rep.oracle_gap <= 1e-8

    def test_residual_rechecked(self):
        cfg = IterationConfig(eps_step=1e-12, eps_res=1e-12)
        p = separable()
        rep = solve_fredholm(p, G16, cfg)
        assert sup(rep.solution.values, apply_fredholm(rep.solution, p, G16).values) <= cfg.eps_res

    def test_kernel_bound_violation(self):
        p = FredholmProblem(1, lambda t, s: 2 * t[..., 0] * s[..., 0], lambda t: t[:, 0], 0.5, 2.0)
        with pytest.raises(HypothesisViolated) as exc:
            solve_fredholm(p, G16)
        assert exc.value.condition == "kernel_bound"
        assert exc.value.worst == 2.0
        assert exc.value.checks["kernel_bound_at"] == [[1.0], [1.0]]

    def test_force(self):
        p = FredholmProblem(1, lambda t, s: 0.7 * t[..., 0] * s[..., 0], lambda t: t[:, 0], 0.5, 2.0)
        rep = solve_fredholm(p, G16, force=True)
        assert not rep.hypothesis_checks["kernel_bound_ok"]
        assert rep.converged

    def test_gamma_at_most_one(self):
        p = FredholmProblem(1, lambda t, s: 0.0, lambda t: t[:, 0], 0.5, 1.0)
        checks = fredholm_hypotheses(p, G16)
        assert not checks["beta_ok"]

    @pytest.mark.parametrize("delta", [0.0, 1.0])
    def test_delta_range(self, delta):
        with pytest.raises(ValueError):
            FredholmProblem(1, lambda t, s: 0.0, lambda t: t[:, 0], delta, 2.0)

    def test_nystrom_equivalence_bound(self, rng):
        q = QuadratureRule.gauss(12)
        for _ in range(5):
            c = rng.uniform(-1, 1, size=4)
            kern = lambda t, s: 0.2 * (c[0] + c[1] * t[..., 0] + c[2] * s[..., 0] + c[3] * t[..., 0] * s[..., 0])
            p = FredholmProblem(1, kern, lambda t: np.cos(3 * t[:, 0]), 0.9, 2.0)
            cfg = IterationConfig(eps_step=1e-11, eps_res=1e-11)
            rep = solve_fredholm(p, q, cfg, oracle=True)
            op = fredholm_operator(p, q)
            contraction = float(np.max(np.sum(np.abs(op.kmat) * op.disc.weights[None, :], axis=1)))
            assert contraction < 1
            assert rep.oracle_gap <= cfg.eps_res / (1 - contraction) + 1e-15


class TestDenseOracle:
    def test_zero_kernel(self):
        p = FredholmProblem(1, lambda t, s: 0.0, lambda t: t[:, 0] ** 2, 0.5, 2.0)
        u = oracle_fredholm_dense(p, G16)
        assert np.array_equal(u.values, u.nodes[:, 0] ** 2)

    def test_closed_form(self):
        u = oracle_fredholm_dense(separable(), G16)
        assert sup(u.values, 1.2 * u.nodes[:, 0]) <= 1e-10

    def test_singular(self):
        # I - W 1 1^T has eigenvalue 1 - sum(w) = 0
        p = FredholmProblem(1, lambda t, s: 1.0, lambda t: t[:, 0], 0.5, 2.0)
        with pytest.raises(SingularSystem):
            oracle_fredholm_dense(p, G16)

    def test_cap(self):
        with pytest.raises(CapExceeded):
            oracle_fredholm_dense(separable(n=2), QuadratureRule.gauss(101))


def sin_problem(alpha=0.5, tau=10.0):
    return UrysohnProblem(1, lambda t, s, u: np.sin(u) * t[..., 0] * s[..., 0] / tau,
                          lambda t: t[:, 0], tau, alpha)


class TestUrysohn:
    def test_zero_integrand(self):
        p = UrysohnProblem(1, lambda t, s, u: 0.0 * u, lambda t: 1 + t[:, 0], 10.0, 0.5)
        u = grid_for(p, G16, lambda x: np.sin(x[:, 0]))
        assert np.array_equal(apply_urysohn(u, p, G16).values, 1 + u.nodes[:, 0])

    def test_linear_matches_fredholm_bitwise(self, rng):
        kern = lambda t, s: 0.4 * np.cos(t[..., 0] + s[..., 1]) * t[..., 1]
        f = lambda t: t[:, 0] - t[:, 1]
        q = QuadratureRule.gauss(5)
        fp = FredholmProblem(2, kern, f, 0.5, 2.0)
        up = UrysohnProblem(2, lambda t, s, u: kern(t, s) * u, f, 10.0, 0.3)
        u = grid_for(fp, q, lambda x: rng.normal(size=len(x)))
        assert np.array_equal(apply_fredholm(u, fp, q).values, apply_urysohn(u, up, q).values)

    def test_constant_integrand(self):
        p = UrysohnProblem(1, lambda t, s, u: np.sin(u) / 10, lambda t: 0.0 * t[:, 0], 10.0, 1.0)
        u = grid_for(p, G16, lambda x: np.full(len(x), math.pi / 2))
        assert sup(apply_urysohn(u, p, G16).values, 0.1) <= 1e-15

    def test_solve_vs_newton(self):
        q = QuadratureRule.gauss(16)
        p = sin_problem()
        rep = solve_urysohn(p, q, IterationConfig(eps_step=1e-12, eps_res=1e-12), oracle=True)
        assert rep.converged and rep.residual <= 1e-10
        assert rep.oracle_gap <= 1e-8
        newton = oracle_urysohn_newton(p, q, dP_du=lambda t, s, u: np.cos(u) * t[..., 0] * s[..., 0] / 10)
        assert sup(newton.values, rep.solution.values) <= 1e-8

    def test_constant_forcing_one_step(self):
        p = UrysohnProblem(2, lambda t, s, u: 0.0 * u, lambda t: np.full(len(t), 3.5), 10.0, 0.5)
        rep = solve_urysohn(p, QuadratureRule.gauss(4))
        assert rep.iterations == 1
        assert (rep.solution.values == 3.5).all()

    def test_lipschitz_violation(self):
        p = UrysohnProblem(1, lambda t, s, u: u ** 2, lambda t: t[:, 0], 10.0, 0.5, u_range=(0.0, 10.0))
        with pytest.raises(HypothesisViolated) as exc:
            solve_urysohn(p, G16)
        assert exc.value.condition == "lipschitz"
        at = exc.value.checks["lipschitz_at"]
        # |u1^2 - u2^2| / |u1 - u2| = u1 + u2
        assert exc.value.worst == pytest.approx(at["u1"] + at["u2"], rel=1e-9)
        assert 10 < exc.value.worst <= 20

    def test_volume_condition(self):
        p = UrysohnProblem(1, lambda t, s, u: 0.0 * u, lambda t: t[:, 0], 1.5, 0.5, a=0.0, b=2.0)
        with pytest.raises(HypothesisViolated) as exc:
            solve_urysohn(p, G16)
        assert exc.value.condition == "volume"

    def test_alpha_invariance(self):
        q = QuadratureRule.gauss(12)
        runs = []
        for alpha in (0.1, 1.0):
            w = math.exp(-math.asin(alpha))
            cfg = IterationConfig(eps_step=1e-12 * w, eps_res=1e-12 * w)
            runs.append(solve_urysohn(sin_problem(alpha), q, cfg))
        a, b = runs
        assert a.iterations == b.iterations
        for x, y in zip(a.trace.iterates, b.trace.iterates):
            assert np.array_equal(x.values, y.values)
        assert a.residual_sup == b.residual_sup

    @pytest.mark.parametrize("alpha", [0.0, 1.2])
    def test_alpha_range(self, alpha):
        with pytest.raises(ValueError):
            sin_problem(alpha)

    def test_montecarlo_many_axes(self):
        q = QuadratureRule.montecarlo(400, seed=1)
        p = UrysohnProblem(6, lambda t, s, u: 0.05 * np.sin(u) * s[..., 0], lambda t: t[:, 0], 10.0, 0.5)
        rep = solve_urysohn(p, q)
        assert rep.converged
        assert rep.solution.nodes.shape == (400, 6)
