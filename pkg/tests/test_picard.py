"""k-Picard engines, stopping rules and trace diagnostics."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from picardo.contractions import ContractionKind, GeraghtyFn, SamplerConfig, falsify
from picardo.errors import Diverged, InsufficientTrace, OperatorFailure
from picardo.metric import AbsDiff, FunctionGrid, SupNorm
from picardo.picard import (
    IterationConfig,
    IterationTrace,
    diagnose,
    infinite_k_picard,
    k_picard,
)

D = AbsDiff()


def closed_form_half_plus_one(n):
    # x_n = 2 (1 - 2^-n) from x_0 = 0, generated in the same float order
    x = 0.0
    for _ in range(n):
        x = x / 2 + 1
    return x


class TestKPicard:
    def test_half_plus_one(self):
        cfg = IterationConfig(eps_step=1e-10, eps_res=1e-10)
        res = k_picard(lambda x: x / 2 + 1, [0.0], D, cfg)
        assert res.converged
        assert 30 <= res.iterations_used <= 40
        assert res.point == closed_form_half_plus_one(res.iterations_used)
        # a posteriori bound for factor 1/2: |x - 2| <= 2 * residual
        assert abs(res.point - 2.0) <= 2 * cfg.eps_res
        assert abs(res.point - 2.0) == pytest.approx(2.0 ** (1 - res.iterations_used), rel=1e-6)

    def test_k2_average(self):
        res = k_picard(lambda a, b: (a + b) / 4, [1.0, 1.0], D)
        assert res.converged
        # residual |T(u,u) - u| = u/2
        assert abs(res.point) <= 2e-12

    def test_identity_certifies_residual_only(self):
        res = k_picard(lambda x: x, [0.7], D)
        assert res.converged
        assert res.iterations_used == 1
        assert res.point == 0.7
        assert res.residual == 0.0

    def test_diverges(self):
        with pytest.raises(Diverged) as exc:
            k_picard(lambda x: 3 * x + 1, [1.0], D)
        assert exc.value.iteration > 1

    def test_nan_iterate_diverges(self):
        with pytest.raises(Diverged):
            k_picard(lambda x: math.nan, [1.0], D)

    def test_max_iter(self):
        res = k_picard(lambda x: 0.999 * x + 0.001, [0.0], D, IterationConfig(max_iter=50))
        assert not res.converged
        assert res.iterations_used == 50

    def test_operator_exception(self):
        with pytest.raises(OperatorFailure):
            k_picard(lambda x: 1 / (x - x), [1.0], D)

    def test_trace_off_keeps_nothing(self):
        res = k_picard(lambda x: x / 2, [1.0], D, IterationConfig(record_trace=False))
        assert res.trace is None
        assert res.converged

    def test_vector_points(self):
        A = np.array([[0.5, 0.1], [0.0, 0.3]])
        b = np.array([1.0, 2.0])
        res = k_picard(lambda x: A @ x + b, [np.zeros(2)], SupNorm(), IterationConfig(eps_res=1e-13, eps_step=1e-13))
        exact = np.linalg.solve(np.eye(2) - A, b)
        assert np.max(np.abs(res.point - exact)) < 1e-12

    def test_grid_points(self):
        nodes = np.linspace(0, 1, 9)
        f = FunctionGrid(nodes, nodes)
        res = k_picard(lambda u: u.with_values(0.5 * u.values + nodes), [f], SupNorm())
        assert np.max(np.abs(res.point.values - 2 * nodes)) < 1e-11


class TestInfinitePicard:
    def test_scaled_projection(self):
        res = infinite_k_picard(lambda s: 0.5 * s[1], [1.0], D)
        it = res.trace.iterates
        assert it[:5] == [1.0, 0.5, 0.25, 0.125, 0.0625]
        steps = res.trace.step_distances
        assert all(b / a == 0.5 for a, b in zip(steps, steps[1:]))
        assert res.converged and abs(res.point) < 1e-12

    def test_at_fixed_point(self):
        res = infinite_k_picard(lambda s: 0.5 * s[1], [0.0], D)
        assert res.converged
        assert res.iterations_used == 1
        assert res.residual == 0.0

    def test_k2_mixed(self):
        T = lambda s: 0.4 * s[2] + 0.1 * s[1]
        res = infinite_k_picard(T, [1.0, 1.0], D)
        ref = [1.0, 1.0]
        for _ in range(10_000):
            ref.append(0.4 * ref[-1] + 0.1 * ref[-2])
        assert res.converged
        assert abs(res.point - ref[-1]) < 1e-12
        assert abs(res.point) < 1e-12

    def test_residual_uses_constant_sequence(self):
        # T reads entry 3 only; on a constant sequence that is u itself
        T = lambda s: 0.25 * s[3] + 0.75
        res = infinite_k_picard(T, [0.0, 0.0, 0.0], D)
        assert res.point == pytest.approx(1.0, abs=1e-11)
        assert res.residual == abs(res.point - T_const(T, res.point))


def T_const(T, u):
    from picardo.metric import constant
    return T(constant(u))


class TestStepDecrease:
    @pytest.mark.parametrize("k", [1, 2, 4])
    @pytest.mark.parametrize("c", [0.2, 0.5, 0.8])
    def test_hk_operator_steps_decrease(self, k, c):
        T = lambda s: c * s[k]
        beta = GeraghtyFn.constant((1 + c) / 2)
        assert falsify(ContractionKind.hk(k), T, beta, D, SamplerConfig(n_samples=500)).passed
        rng = np.random.default_rng(k)
        for _ in range(10):
            res = infinite_k_picard(T, list(rng.uniform(0, 1, k)), D, beta=beta)
            assert res.monotone_violations == 0
            assert all(b == beta(m) for b, m in zip(res.trace.beta_values, res.trace.mk_values))

    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=4),
           st.lists(st.floats(-0.45, 0.45), min_size=1, max_size=4))
    def test_finite_infinite_consistency(self, base, coeffs):
        k = len(base)
        coeffs = [0.9 * c / k for c in (coeffs * k)[:k]]
        T_fin = lambda *xs: sum(c * x for c, x in zip(coeffs, xs)) + 0.1
        T_inf = lambda s: sum(c * s[i + 1] for i, c in enumerate(coeffs)) + 0.1
        cfg = IterationConfig(max_iter=400)
        a = k_picard(T_fin, base, D, cfg)
        b = infinite_k_picard(T_inf, base, D, cfg)
        assert a.trace.iterates == b.trace.iterates
        assert a.trace.step_distances == b.trace.step_distances
        assert a.trace.residuals == b.trace.residuals

    def test_deterministic(self):
        T = lambda s: 0.3 * s[2] + 0.2 * s[1] + 1
        a = infinite_k_picard(T, [0.1, 0.9], D)
        b = infinite_k_picard(T, [0.1, 0.9], D)
        assert a.trace.rows() == b.trace.rows()


class TestDiagnose:
    def test_half_rate(self):
        res = k_picard(lambda x: 0.5 * x, [1.0], D)
        diag = diagnose(res.trace)
        assert diag.violations == 0
        assert diag.rate == pytest.approx(0.5, abs=1e-6)
        assert diag.cauchy < 1e-9

    def test_constant_trace(self):
        tr = IterationTrace(k=1, space=D, iterates=[1.0] * 4, step_distances=[0.0, 0.0, 0.0])
        diag = diagnose(tr)
        assert diag.violations == 0
        assert diag.rate is None and not diag.rate_defined

    def test_one_increase(self):
        steps = [1.0, 0.5, 0.7, 0.2, 0.1]
        tr = IterationTrace(k=1, space=D, iterates=[0.0] * 6, step_distances=steps)
        assert diagnose(tr).violations == 1

    def test_tie_below_floor_not_counted(self):
        steps = [1e-3, 1e-15, 1e-15, 0.0]
        tr = IterationTrace(k=1, space=D, iterates=[0.0] * 5, step_distances=steps)
        assert diagnose(tr).violations == 0

    def test_too_short(self):
        with pytest.raises(InsufficientTrace):
            diagnose(IterationTrace(k=1, space=D, step_distances=[1.0, 0.5]))

    def test_rows_shape(self):
        res = k_picard(lambda x: x / 2 + 1, [0.0], D, beta=GeraghtyFn.constant(0.5))
        rows = res.trace.rows()
        assert rows[0]["n"] == 1 and rows[0]["mk_value"] is None
        assert rows[1]["mk_value"] == max(rows[0]["step_distance"], rows[1]["step_distance"])
        assert rows[1]["beta_value"] == 0.5
        assert len(rows) == res.iterations_used


class TestConfig:
    @pytest.mark.parametrize("kw", [{"eps_step": 0}, {"eps_res": -1e-3}, {"max_iter": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            IterationConfig(**kw)

    @given(st.floats(0.01, 0.95), st.floats(-10, 10))
    def test_converged_implies_residual(self, c, x0):
        cfg = IterationConfig(eps_res=1e-9, eps_step=1e-9)
        res = k_picard(lambda x: c * x + 1, [x0], D, cfg)
        if res.converged:
            assert abs(res.point - (c * res.point + 1)) <= cfg.eps_res
