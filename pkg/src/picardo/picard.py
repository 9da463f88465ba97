"""k-Picard and infinite k-Picard iteration engines.

Given base points ``x_1, ..., x_k`` the finite engine generates

    x_{n+k} = T(x_n, ..., x_{n+k-1})

and the infinite engine feeds ``T`` the hat sequence whose prefix is
``x_n, ..., x_{n+k-2}`` and whose tail is ``x_{n+k-1}``. A run stops once the
step ``d(x_{n+k-1}, x_{n+k})`` is at most ``eps_step`` *and* the fixed-point
residual of the newest iterate is at most ``eps_res``. The residual is always
measured on the diagonal tuple ``(u, ..., u)`` (finite) or the constant
sequence ``(u, u, ...)`` (infinite).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .contractions import GeraghtyFn, apply_operator
from .errors import Diverged, InsufficientTrace, NonFinite
from .metric import MetricSpace, Point, as_point, constant, hat

__all__ = [
    "IterationConfig",
    "IterationTrace",
    "FixedPointResult",
    "Diagnostics",
    "k_picard",
    "infinite_k_picard",
    "diagnose",
    "DIVERGENCE_THRESHOLD",
]

DIVERGENCE_THRESHOLD = 1e12
# steps this small may tie without counting as a monotonicity violation
TIE_FLOOR = 1e-14


@dataclass(frozen=True)
class IterationConfig:
    eps_step: float = 1e-12
    eps_res: float = 1e-12
    max_iter: int = 10_000
    record_trace: bool = True

    def __post_init__(self):
        if not (self.eps_step > 0 and self.eps_res > 0):
            raise ValueError("eps_step and eps_res must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class IterationTrace:
    """Everything a run produced.

    ``iterates`` starts with the ``k`` base points. ``step_distances[j]`` is
    ``d(x_{k+j}, x_{k+j+1})`` and ``residuals[j]`` the fixed-point residual of
    ``x_{k+j+1}``. ``mk_values[j]`` is M_k of the consecutive inputs that
    produced steps ``j`` and ``j + 1``, so it is one entry shorter; on hat-form inputs it collapses to
    ``max(step_j, step_{j+1})``.
    """

    k: int
    space: MetricSpace
    iterates: List[Point] = field(default_factory=list)
    step_distances: List[float] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    mk_values: List[float] = field(default_factory=list)
    beta_values: Optional[List[float]] = None

    def rows(self):
        """One dict per step, the shape written to ``trace.csv``."""
        out = []
        for j, step in enumerate(self.step_distances):
            # M_k needs two consecutive steps, so the first row has none
            mk = self.mk_values[j - 1] if 0 < j <= len(self.mk_values) else None
            beta = None
            if self.beta_values is not None and 0 < j <= len(self.beta_values):
                beta = self.beta_values[j - 1]
            out.append({
                "n": j + 1,
                "step_distance": step,
                "residual_estimate": self.residuals[j] if j < len(self.residuals) else None,
                "mk_value": mk,
                "beta_value": beta,
            })
        return out


@dataclass
class FixedPointResult:
    point: Point
    residual: float
    iterations_used: int
    converged: bool
    trace: Optional[IterationTrace]
    monotone_violations: int


def _is_violation(prev: float, step: float) -> bool:
    if prev <= 0.0 or step <= 0.0:
        return False
    if step < prev:
        return False
    return not (step <= TIE_FLOOR and prev <= TIE_FLOOR)


def _run(advance, residual_of, base, space, cfg, beta):
    k = len(base)
    if k < 1:
        raise ValueError("need at least one base point")
    window = deque((as_point(b) for b in base), maxlen=k)
    trace = IterationTrace(k=k, space=space, beta_values=[] if beta is not None else None)
    if cfg.record_trace:
        trace.iterates.extend(window)

    prev_step = None
    violations = 0
    residual = None
    converged = False
    n = 0
    for n in range(1, cfg.max_iter + 1):
        new = as_point(advance(tuple(window)))
        try:
            step = space.distance(window[-1], new)
        except NonFinite as exc:
            raise Diverged(f"non-finite iterate at step {n}", iteration=n) from exc
        if not math.isfinite(step) or step > DIVERGENCE_THRESHOLD:
            raise Diverged(f"step {step!r} at iteration {n}", iteration=n, step=step)
        window.append(new)
        if prev_step is not None and _is_violation(prev_step, step):
            violations += 1

        residual = None
        if cfg.record_trace or step <= cfg.eps_step:
            residual = space.distance(new, residual_of(new))
        if cfg.record_trace:
            trace.iterates.append(new)
            if prev_step is not None:
                mk = max(prev_step, step)
                trace.mk_values.append(mk)
                if beta is not None:
                    trace.beta_values.append(beta(mk))
            trace.step_distances.append(step)
            trace.residuals.append(residual)
        prev_step = step
        if step <= cfg.eps_step and residual <= cfg.eps_res:
            converged = True
            break

    point = window[-1]
    # independent re-check outside the loop
    final_residual = space.distance(point, residual_of(point))
    if converged and not final_residual <= cfg.eps_res:
        converged = False
    return FixedPointResult(
        point=point,
        residual=final_residual,
        iterations_used=n,
        converged=converged,
        trace=trace if cfg.record_trace else None,
        monotone_violations=violations,
    )


def k_picard(T: Callable, base: Sequence[Point], space: MetricSpace,
             cfg: Optional[IterationConfig] = None, *, beta: Optional[GeraghtyFn] = None) -> FixedPointResult:
    """Run ``x_{n+k} = T(x_n, ..., x_{n+k-1})`` from ``base``.

    ``T`` is called with ``k`` positional points. ``beta``, when given, is
    recorded alongside M_k in the trace.
    """
    cfg = cfg or IterationConfig()
    k = len(base)
    return _run(
        lambda window: apply_operator(T, window, unpack=True),
        lambda u: apply_operator(T, (u,) * k, unpack=True),
        base, space, cfg, beta,
    )


def infinite_k_picard(T: Callable, base: Sequence[Point], space: MetricSpace,
                      cfg: Optional[IterationConfig] = None, *, beta: Optional[GeraghtyFn] = None) -> FixedPointResult:
    """Run ``x_{n+k} = T(hat([x_n, ..., x_{n+k-2}], x_{n+k-1}))`` from ``base``.

    ``T`` receives a :class:`~picardo.metric.HatSequence`; the residual is
    ``d(u, T(constant(u)))``.
    """
    cfg = cfg or IterationConfig()
    return _run(
        lambda window: apply_operator(T, hat(window[:-1], window[-1])),
        lambda u: apply_operator(T, constant(u)),
        base, space, cfg, beta,
    )


@dataclass
class Diagnostics:
    violations: int
    rate: Optional[float]
    rate_defined: bool
    cauchy: float
    window: int


def diagnose(trace: IterationTrace, window: int = 10) -> Diagnostics:
    """Monotonicity count, fitted geometric rate and a Cauchy indicator.

    The rate is ``exp`` of the least-squares slope of ``log(step)`` against
    the step index over the positive steps; it is undefined when fewer than
    two steps are positive. The Cauchy indicator is the largest pairwise
    distance among the last ``window`` iterates.
    """
    steps = trace.step_distances
    if len(steps) < 3:
        raise InsufficientTrace(f"need at least 3 steps, got {len(steps)}")
    violations = sum(_is_violation(a, b) for a, b in zip(steps, steps[1:]))

    idx = np.array([j for j, s in enumerate(steps) if s > 0.0], dtype=float)
    rate = None
    if idx.size >= 2:
        logs = np.log(np.array([steps[int(j)] for j in idx]))
        slope = np.polyfit(idx, logs, 1)[0]
        rate = float(np.exp(slope))

    tail = trace.iterates[-window:]
    cauchy = 0.0
    for i in range(len(tail)):
        for j in range(i + 1, len(tail)):
            cauchy = max(cauchy, trace.space.distance(tail[i], tail[j]))
    return Diagnostics(violations, rate, rate is not None, cauchy, len(tail))
