"""Successive approximation for truncated Fredholm and Urysohn equations.

The infinite product of integrals is truncated to ``n_trunc`` axes and
discretized with a tensor quadrature rule whose nodes double as collocation
points (the Nystrom choice), so operators map grid samples to grid samples
without interpolation.

Callable conventions (all vectorized with numpy broadcasting):

* ``forcing(t)`` gets ``t`` of shape ``(N, n)`` and returns shape ``(N,)``;
* ``kernel(t, s)`` gets ``t`` of shape ``(N, 1, n)`` and ``s`` of shape
  ``(1, M, n)`` and returns shape ``(N, M)``;
* ``integrand(t, s, u)`` additionally gets ``u`` of shape ``(1, M)``.

Scalars are broadcast, so ``lambda t, s: 0.0`` is a valid zero kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .contractions import GeraghtyFn, beta_sanity
from .errors import CapExceeded, HypothesisViolated, NonFinite, OutOfRange, SingularSystem
from .metric import FunctionGrid, SupNorm, WeightedSupNorm, element_at
from .picard import FixedPointResult, IterationConfig, IterationTrace, infinite_k_picard
from .quadrature import QuadratureRule

__all__ = [
    "FredholmProblem",
    "UrysohnProblem",
    "SolverReport",
    "fredholm_operator",
    "urysohn_operator",
    "apply_fredholm",
    "apply_urysohn",
    "solve_fredholm",
    "solve_urysohn",
    "oracle_fredholm_dense",
    "oracle_urysohn_newton",
    "fredholm_hypotheses",
    "urysohn_hypotheses",
]

DENSE_CAP = 10_000
# at most this many points per side when scanning |K| for the kernel bound
KERNEL_SCAN_CAP = 2048
CONDITION_LIMIT = 1e14


@dataclass
class FredholmProblem:
    n_trunc: int
    kernel: Callable
    forcing: Callable
    delta: float
    gamma: float

    def __post_init__(self):
        if self.n_trunc < 1:
            raise ValueError("n_trunc must be >= 1")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (0, 1), got {self.delta!r}")
        if not self.gamma > 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")

    @property
    def domain(self) -> Tuple[float, float]:
        return (0.0, 1.0)


@dataclass
class UrysohnProblem:
    n_trunc: int
    integrand: Callable
    forcing: Callable
    tau: float
    alpha: float
    a: float = 0.0
    b: float = 1.0
    u_range: Optional[Tuple[float, float]] = None
    lipschitz_samples: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.n_trunc < 1:
            raise ValueError("n_trunc must be >= 1")
        if not self.tau > 0.0:
            raise ValueError(f"tau must be positive, got {self.tau!r}")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if not self.b > self.a:
            raise ValueError("need a < b")

    @property
    def domain(self) -> Tuple[float, float]:
        return (self.a, self.b)

    @property
    def volume(self) -> float:
        return (self.b - self.a) ** self.n_trunc


@dataclass
class SolverReport:
    solution: Optional[FunctionGrid]
    residual: Optional[float]
    residual_sup: Optional[float]
    iterations: int
    converged: bool
    hypothesis_checks: dict
    oracle_gap: Optional[float] = None
    trace: Optional[IterationTrace] = field(default=None, repr=False)
    metric: Optional[dict] = None

    def to_dict(self) -> dict:
        sol = None
        if self.solution is not None:
            sol = {
                "nodes": self.solution.nodes.tolist(),
                "values": self.solution.values.tolist(),
            }
        return {
            "solution": sol,
            "residual": self.residual,
            "residual_sup": self.residual_sup,
            "iterations": self.iterations,
            "converged": self.converged,
            "hypothesis_checks": self.hypothesis_checks,
            "oracle_gap": self.oracle_gap,
            "metric": self.metric,
        }


def _full(value, shape, what):
    arr = np.broadcast_to(np.asarray(value, dtype=float), shape)
    return np.array(arr)


def _check_finite(arr, nodes, what):
    bad = ~np.isfinite(arr)
    if bad.any():
        idx = np.unravel_index(int(np.flatnonzero(bad)[0]), arr.shape)
        where = [nodes[i].tolist() for i in idx]
        raise NonFinite(f"{what} is not finite at node {where}", where=where)


class _Discretization:
    def __init__(self, n, domain, q):
        self.nodes, self.weights = q.nodes_weights(n, *domain)
        self.grid = FunctionGrid(self.nodes, np.zeros(len(self.weights)))
        # shared read-only node array so every iterate compares by identity
        self.nodes = self.grid.nodes
        self.t = self.nodes[:, None, :]
        self.s = self.nodes[None, :, :]

    def forcing(self, f):
        vals = _full(f(self.nodes), (len(self.weights),), "forcing")
        _check_finite(vals, self.nodes, "forcing")
        return vals

    def integrate_rows(self, g):
        # fixed pairwise order along the contiguous node axis
        return (g * self.weights[None, :]).sum(axis=1)


def _require_grid(u, disc):
    if not isinstance(u, FunctionGrid) or not u.same_grid(disc.grid):
        raise ValueError("u must be sampled on the collocation grid of the quadrature rule")


class _FredholmOperator:
    def __init__(self, p: FredholmProblem, q: QuadratureRule):
        self.problem, self.rule = p, q
        self.disc = _Discretization(p.n_trunc, p.domain, q)
        n = len(self.disc.weights)
        self.kmat = _full(p.kernel(self.disc.t, self.disc.s), (n, n), "kernel")
        _check_finite(self.kmat, self.disc.nodes, "kernel")
        self.f = self.disc.forcing(p.forcing)

    def __call__(self, u: FunctionGrid) -> FunctionGrid:
        _require_grid(u, self.disc)
        out = self.f + self.disc.integrate_rows(self.kmat * u.values[None, :])
        _check_finite(out, self.disc.nodes, "T u")
        return u.with_values(out)


class _UrysohnOperator:
    def __init__(self, p: UrysohnProblem, q: QuadratureRule):
        self.problem, self.rule = p, q
        self.disc = _Discretization(p.n_trunc, p.domain, q)
        self.f = self.disc.forcing(p.forcing)

    def integrand_matrix(self, values):
        n = len(self.disc.weights)
        g = _full(self.problem.integrand(self.disc.t, self.disc.s, values[None, :]), (n, n), "integrand")
        _check_finite(g, self.disc.nodes, "integrand")
        return g

    def __call__(self, u: FunctionGrid) -> FunctionGrid:
        _require_grid(u, self.disc)
        out = self.f + self.disc.integrate_rows(self.integrand_matrix(u.values))
        _check_finite(out, self.disc.nodes, "T u")
        return u.with_values(out)


def fredholm_operator(p: FredholmProblem, q: QuadratureRule) -> _FredholmOperator:
    """The discrete operator ``u -> f + sum_j w_j K(t, s_j) u(s_j)`` with a cached kernel matrix.

    ``op.disc.grid`` is the collocation grid; ``op.f`` the sampled forcing.
    """
    return _FredholmOperator(p, q)


def urysohn_operator(p: UrysohnProblem, q: QuadratureRule) -> _UrysohnOperator:
    return _UrysohnOperator(p, q)


def apply_fredholm(u: FunctionGrid, p: FredholmProblem, q: QuadratureRule) -> FunctionGrid:
    return fredholm_operator(p, q)(u)


def apply_urysohn(u: FunctionGrid, p: UrysohnProblem, q: QuadratureRule) -> FunctionGrid:
    return urysohn_operator(p, q)(u)


def _scan_points(disc, n, domain, seed=0):
    """Quadrature nodes plus every corner of the box, capped in size."""
    a, b = domain
    axis = np.unique(np.concatenate([np.unique(disc.nodes), [a, b]]))
    if axis.size ** n <= KERNEL_SCAN_CAP:
        return np.array(np.meshgrid(*([axis] * n), indexing="ij")).reshape(n, -1).T
    corners = np.array(np.meshgrid(*([[a, b]] * n), indexing="ij")).reshape(n, -1).T
    nodes = disc.nodes
    if len(nodes) > KERNEL_SCAN_CAP - len(corners):
        rng = np.random.default_rng(seed)
        pick = np.sort(rng.choice(len(nodes), KERNEL_SCAN_CAP - len(corners), replace=False))
        nodes = nodes[pick]
    return np.vstack([corners, nodes])


def _beta_check(factor, checks, prefix="beta"):
    try:
        rep = beta_sanity(GeraghtyFn.constant(factor), samples=64)
        checks[f"{prefix}_ok"] = True
        checks[f"{prefix}_worst"] = rep.max_value
    except (ValueError, OutOfRange):
        checks[f"{prefix}_ok"] = False
        checks[f"{prefix}_worst"] = factor


def fredholm_hypotheses(p: FredholmProblem, q: QuadratureRule, op=None) -> dict:
    """Sampled checks of the kernel bound ``sup |K| <= delta`` and ``beta = 1/gamma < 1``.

    The kernel is scanned on the quadrature nodes together with the box
    corners, so extreme values at the boundary are seen even by Gauss rules.
    """
    op = op or fredholm_operator(p, q)
    pts = _scan_points(op.disc, p.n_trunc, p.domain)
    kvals = np.abs(_full(p.kernel(pts[:, None, :], pts[None, :, :]), (len(pts), len(pts)), "kernel"))
    _check_finite(kvals, pts, "kernel")
    flat = int(np.argmax(kvals))
    i, j = np.unravel_index(flat, kvals.shape)
    worst = float(kvals[i, j])
    checks = {
        "kernel_bound_ok": worst <= p.delta,
        "kernel_bound_worst": worst,
        "kernel_bound_at": [pts[i].tolist(), pts[j].tolist()],
        "kernel_bound_samples": int(kvals.size),
        "delta": p.delta,
    }
    _beta_check(1.0 / p.gamma, checks)
    return checks


def urysohn_hypotheses(p: UrysohnProblem, q: QuadratureRule, op=None) -> dict:
    """Sampled Lipschitz bound ``|P(t,s,u1) - P(t,s,u2)| <= |u1 - u2| / tau``
    plus ``1/tau < 1`` and ``tau > (b - a)^n``.
    """
    op = op or urysohn_operator(p, q)
    rng = np.random.default_rng(p.seed)
    lo, hi = p.u_range if p.u_range is not None else (float(op.f.min()) - 1.0, float(op.f.max()) + 1.0)
    m = p.lipschitz_samples
    t = rng.uniform(p.a, p.b, size=(m, p.n_trunc))
    s = rng.uniform(p.a, p.b, size=(m, p.n_trunc))
    u1 = rng.uniform(lo, hi, size=m)
    u2 = rng.uniform(lo, hi, size=m)
    keep = u1 != u2
    t, s, u1, u2 = t[keep], s[keep], u1[keep], u2[keep]
    p1 = _full(p.integrand(t, s, u1), u1.shape, "integrand")
    p2 = _full(p.integrand(t, s, u2), u2.shape, "integrand")
    ratio = np.abs(p1 - p2) / np.abs(u1 - u2)
    _check_finite(ratio, t, "Lipschitz ratio")
    worst_i = int(np.argmax(ratio)) if ratio.size else 0
    worst = float(ratio[worst_i]) if ratio.size else 0.0
    checks = {
        "lipschitz_ok": worst <= 1.0 / p.tau + 1e-12,
        "lipschitz_worst": worst,
        "lipschitz_bound": 1.0 / p.tau,
        "lipschitz_samples": int(ratio.size),
        "lipschitz_u_range": [lo, hi],
    }
    if ratio.size:
        checks["lipschitz_at"] = {
            "t": t[worst_i].tolist(), "s": s[worst_i].tolist(),
            "u1": float(u1[worst_i]), "u2": float(u2[worst_i]),
        }
    _beta_check(1.0 / p.tau, checks)
    checks["volume_ok"] = p.tau > p.volume
    checks["volume_worst"] = p.volume / p.tau
    return checks


def _first_failure(checks, names):
    for name in names:
        if checks.get(f"{name}_ok") is False:
            return name, checks.get(f"{name}_worst")
    return None


def _iterate_condition(trace, checks):
    """Along the run, ``r_j = d(u_j, T u_j)`` must satisfy ``r_{j+1} <= (r_j + r_{j+1}) / 2``.

    ``r_j`` is exactly the j-th step distance, so the trace already holds it.
    """
    if trace is None or len(trace.step_distances) < 2:
        checks["iterate_condition_ok"] = None
        checks["iterate_condition_worst"] = None
        return
    s = trace.step_distances
    gaps = [b - 0.5 * (a + b) for a, b in zip(s, s[1:])]
    worst = max(gaps)
    checks["iterate_condition_ok"] = worst <= 1e-12
    checks["iterate_condition_worst"] = worst


def _picard(op, space, cfg) -> FixedPointResult:
    def T(seq):
        return op(element_at(seq, 1))
    return infinite_k_picard(T, [op.disc.grid.with_values(op.f)], space, cfg)


def solve_fredholm(p: FredholmProblem, q: QuadratureRule, cfg: Optional[IterationConfig] = None,
                   *, force: bool = False, oracle: bool = False) -> SolverReport:
    """Successive approximation ``u_{n+1} = T u_n`` from ``u_0 = f``.

    Raises :class:`HypothesisViolated` before iterating when the kernel bound
    or the Geraghty constant fails, unless ``force`` is set.
    """
    cfg = cfg or IterationConfig(eps_step=1e-13, eps_res=1e-13)
    op = fredholm_operator(p, q)
    checks = fredholm_hypotheses(p, q, op)
    failed = _first_failure(checks, ("kernel_bound", "beta"))
    if failed and not force:
        raise HypothesisViolated(failed[0], failed[1], checks)

    space = SupNorm()
    res = _picard(op, space, cfg)
    _iterate_condition(res.trace, checks)
    u = res.point
    residual = space.distance(u, op(u))
    gap = None
    if oracle:
        gap = space.distance(u, oracle_fredholm_dense(p, q))
    return SolverReport(
        solution=u, residual=residual, residual_sup=residual,
        iterations=res.iterations_used, converged=res.converged and residual <= cfg.eps_res,
        hypothesis_checks=checks, oracle_gap=gap, trace=res.trace, metric=space.describe(),
    )


def solve_urysohn(p: UrysohnProblem, q: QuadratureRule, cfg: Optional[IterationConfig] = None,
                  *, force: bool = False, oracle: bool = False) -> SolverReport:
    """Successive approximation in the weighted sup metric ``exp(-arcsin(alpha)) * max|u - v|``.

    ``cfg`` thresholds are in weighted units. ``residual`` is reported in the
    same units, ``residual_sup`` unweighted.
    """
    cfg = cfg or IterationConfig(eps_step=1e-13, eps_res=1e-13)
    op = urysohn_operator(p, q)
    checks = urysohn_hypotheses(p, q, op)
    failed = _first_failure(checks, ("lipschitz", "beta", "volume"))
    if failed and not force:
        raise HypothesisViolated(failed[0], failed[1], checks)

    space = WeightedSupNorm(p.alpha)
    res = _picard(op, space, cfg)
    u = res.point
    residual = space.distance(u, op(u))
    gap = None
    if oracle:
        gap = SupNorm().distance(u, oracle_urysohn_newton(p, q))
    return SolverReport(
        solution=u, residual=residual, residual_sup=residual / space.weight,
        iterations=res.iterations_used, converged=res.converged and residual <= cfg.eps_res,
        hypothesis_checks=checks, oracle_gap=gap, trace=res.trace, metric=space.describe(),
    )


def oracle_fredholm_dense(p: FredholmProblem, q: QuadratureRule, cap: int = DENSE_CAP) -> FunctionGrid:
    """Solve ``u_i - sum_j w_j K(t_i, s_j) u_j = f(t_i)`` directly (LU, partial pivoting)."""
    if not q.deterministic:
        raise ValueError("the dense oracle needs a deterministic quadrature rule")
    total = q.total_nodes(p.n_trunc)
    if total > cap:
        raise CapExceeded(f"{total} collocation nodes exceed the cap of {cap}")
    op = fredholm_operator(p, q)
    a = np.eye(total) - op.kmat * op.disc.weights[None, :]
    cond = float(np.linalg.cond(a))
    if not math.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularSystem(f"collocation matrix is singular (cond ~ {cond:.3e})", cond)
    return op.disc.grid.with_values(np.linalg.solve(a, op.f))


def oracle_urysohn_newton(p: UrysohnProblem, q: QuadratureRule, *, dP_du: Optional[Callable] = None,
                          tol: float = 1e-14, max_iter: int = 100, cap: int = DENSE_CAP) -> FunctionGrid:
    """Damped Newton on ``F(u) = u - f - sum_j w_j P(t, s_j, u_j) = 0``.

    Without ``dP_du`` the derivative in ``u`` is a central difference; that
    only slows convergence, the root of ``F`` itself is evaluated exactly.
    """
    total = q.total_nodes(p.n_trunc)
    if total > cap:
        raise CapExceeded(f"{total} collocation nodes exceed the cap of {cap}")
    op = urysohn_operator(p, q)
    w = op.disc.weights

    def F(u):
        return u - op.f - op.disc.integrate_rows(op.integrand_matrix(u))

    def jac(u):
        if dP_du is not None:
            d = _full(dP_du(op.disc.t, op.disc.s, u[None, :]), (total, total), "dP/du")
        else:
            h = 1e-6 * np.maximum(1.0, np.abs(u))
            d = (op.integrand_matrix(u + h) - op.integrand_matrix(u - h)) / (2.0 * h)[None, :]
        return np.eye(total) - d * w[None, :]

    u = op.f.copy()
    fu = F(u)
    for _ in range(max_iter):
        norm = float(np.max(np.abs(fu)))
        if norm == 0.0:
            break
        step = np.linalg.solve(jac(u), -fu)
        lam = 1.0
        while True:
            trial = u + lam * step
            ft = F(trial)
            if float(np.max(np.abs(ft))) <= (1.0 - 0.5 * lam) * norm or lam < 1e-8:
                break
            lam *= 0.5
        u, fu = trial, ft
        if float(np.max(np.abs(lam * step))) <= tol * (1.0 + float(np.max(np.abs(u)))):
            break
    return op.disc.grid.with_values(u)
