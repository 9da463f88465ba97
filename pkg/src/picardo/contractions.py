"""Geraghty functions, the extended M_k function and contraction checks.

Operators come in three shapes, and the contraction kind decides which one
is expected:

* ``"point"`` kinds (Banach, Geraghty, Kannan, Fisher) take ``T(x)``;
* ``"tuple"`` kinds (the dimension-k families) take ``T(x_1, ..., x_k)``;
* ``"hat"`` kinds (H_k and the extended families) take ``T(seq)`` where
  ``seq`` is a :class:`~picardo.metric.HatSequence`.

Every universally quantified inequality is checked by falsification: sampling
plus a boundary grid. A passing report means no counterexample was found.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ArityMismatch, OperatorFailure, OutOfRange, PicardoError
from .metric import HatSequence, MetricSpace, element_at, hat, rehat

__all__ = [
    "GeraghtyFn",
    "ContractionKind",
    "FalsificationReport",
    "SamplerConfig",
    "BetaReport",
    "apply_operator",
    "m_k",
    "lhs_rhs",
    "falsify",
    "beta_sanity",
    "COUNTEREXAMPLE_TOL",
]

COUNTEREXAMPLE_TOL = 1e-12


@dataclass(frozen=True)
class GeraghtyFn:
    """A member of the Geraghty class: ``beta: [0, inf) -> [0, 1)`` with
    ``beta(t_n) -> 1`` forcing ``t_n -> 0``.

    The built-in families are certified analytically. ``reciprocal`` and
    ``exp_decay`` reach 1 only in the limit ``t -> 0``; their value at
    ``t = 0`` is defined as 0 so the codomain stays ``[0, 1)``. User
    functions only get a sampled codomain check; the limit condition is the
    caller's responsibility.
    """

    family: str
    c: Optional[float] = None
    fn: Optional[Callable[[float], float]] = field(default=None, compare=False)
    label: str = ""

    def __post_init__(self):
        if self.family == "constant":
            if self.c is None or not (0.0 < self.c < 1.0):
                raise ValueError(f"constant beta needs c in (0, 1), got {self.c!r}")
        elif self.family == "user":
            if self.fn is None:
                raise ValueError("user beta needs a callable")
        elif self.family not in ("reciprocal", "exp"):
            raise ValueError(f"unknown Geraghty family {self.family!r}")

    @classmethod
    def constant(cls, c: float) -> "GeraghtyFn":
        return cls("constant", c=float(c))

    @classmethod
    def reciprocal(cls) -> "GeraghtyFn":
        """``beta(t) = 1 / (1 + t)``."""
        return cls("reciprocal")

    @classmethod
    def exp_decay(cls) -> "GeraghtyFn":
        """``beta(t) = exp(-t)``."""
        return cls("exp")

    @classmethod
    def user(cls, fn: Callable[[float], float], label: str = "user") -> "GeraghtyFn":
        return cls("user", fn=fn, label=label)

    @property
    def certified(self) -> bool:
        return self.family != "user"

    def __call__(self, t: float) -> float:
        t = float(t)
        if self.family == "constant":
            return self.c
        if self.family == "user":
            return float(self.fn(t))
        if t == 0.0:
            return 0.0
        if self.family == "reciprocal":
            return 1.0 / (1.0 + t)
        return math.exp(-t)

    def describe(self) -> str:
        if self.family == "constant":
            return f"constant({self.c!r})"
        if self.family == "user":
            return f"user({self.label})"
        return self.family


_POINT, _TUPLE, _HAT = "point", "tuple", "hat"

_FAMILIES = {
    "banach": _POINT,
    "geraghty": _POINT,
    "kannan": _POINT,
    "fisher": _POINT,
    "hk": _HAT,
    "kannan-geraghty": _TUPLE,
    "ext-kannan-geraghty": _HAT,
    "fisher-geraghty": _TUPLE,
    "ext-fisher-geraghty": _HAT,
}


@dataclass(frozen=True)
class ContractionKind:
    family: str
    k: int = 1
    c: Optional[float] = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown contraction family {self.family!r}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        if self.family == "banach":
            if self.c is None or not (0.0 < self.c < 1.0):
                raise ValueError("Banach constant must lie in (0, 1)")
        elif self.family in ("kannan", "fisher"):
            if self.c is None or not (0.0 < self.c < 0.5):
                raise ValueError(f"{self.family} constant must lie in (0, 1/2)")
        elif self.c is not None:
            raise ValueError(f"{self.family} takes no constant; use a Geraghty function")
        if _FAMILIES[self.family] == _POINT and self.k != 1:
            raise ValueError(f"{self.family} is a self-map condition (k = 1)")

    @property
    def arity(self) -> str:
        return _FAMILIES[self.family]

    @classmethod
    def banach(cls, c):
        return cls("banach", 1, float(c))

    @classmethod
    def geraghty(cls):
        return cls("geraghty")

    @classmethod
    def kannan(cls, c):
        return cls("kannan", 1, float(c))

    @classmethod
    def fisher(cls, c):
        return cls("fisher", 1, float(c))

    @classmethod
    def kannan_geraghty_self(cls):
        # the self-map definition is dimension k = 1 of the tuple family
        return cls("kannan-geraghty", 1)

    @classmethod
    def hk(cls, k):
        return cls("hk", k)

    @classmethod
    def kannan_geraghty(cls, k):
        return cls("kannan-geraghty", k)

    @classmethod
    def ext_kannan_geraghty(cls, k):
        return cls("ext-kannan-geraghty", k)

    @classmethod
    def fisher_geraghty(cls, k):
        return cls("fisher-geraghty", k)

    @classmethod
    def ext_fisher_geraghty(cls, k):
        return cls("ext-fisher-geraghty", k)

    def __str__(self):
        if self.c is not None:
            return f"{self.family}({self.c!r})"
        if self.arity == _POINT:
            return self.family
        return f"{self.family}({self.k})"


def apply_operator(T, arg, *, unpack=False):
    """Evaluate ``T`` and wrap foreign exceptions in :class:`OperatorFailure`."""
    try:
        return T(*arg) if unpack else T(arg)
    except PicardoError:
        raise
    except Exception as exc:
        raise OperatorFailure(f"operator raised {type(exc).__name__}: {exc}", sample=arg) from exc


def m_k(T, u: HatSequence, v: HatSequence, k: int, space: MetricSpace) -> float:
    """The extended M_k value of two eventually-constant sequences.

    Each supremum over ``l >= k`` is attained at some
    ``l <= max(k, stabilization(u), stabilization(v))``: beyond that index
    ``u_l`` is the tail and ``rehat(u, l) == u``, so every term is constant.
    The scan is therefore finite and exact.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    last = max(k, u.stabilization, v.stabilization)
    best = 0.0
    for l in range(k, last + 1):
        ul, vl = element_at(u, l), element_at(v, l)
        best = max(
            best,
            space.distance(ul, vl),
            space.distance(ul, apply_operator(T, rehat(u, l))),
            space.distance(vl, apply_operator(T, rehat(v, l))),
        )
    return best


def _as_tuple(x, k, label):
    if isinstance(x, HatSequence):
        raise ArityMismatch(f"{label}: expected {k} points, got a hat sequence")
    if isinstance(x, np.ndarray) and x.ndim == 1 and k == 1:
        return (x,)
    if not isinstance(x, (tuple, list)):
        if k == 1:
            return (x,)
        raise ArityMismatch(f"{label}: expected a tuple of {k} points")
    if len(x) != k:
        raise ArityMismatch(f"{label}: expected {k} points, got {len(x)}")
    return tuple(x)


def _as_hat(x, k, label):
    if isinstance(x, HatSequence):
        return rehat(x, k)
    if isinstance(x, (tuple, list)) and len(x) == k:
        return hat(list(x[:-1]), x[-1])
    raise ArityMismatch(f"{label}: expected a hat sequence or {k} points")


def lhs_rhs(kind: ContractionKind, T, beta: Optional[GeraghtyFn], u, v, space: MetricSpace):
    """Both sides of the contraction inequality for one pair of inputs.

    Returns ``(lhs, rhs)`` with ``lhs = d(T(u-form), T(v-form))``. Kannan-style
    right-hand sides measure ``T`` of a tuple against its own k-th point;
    Fisher-style ones against the other tuple's k-th point.
    """
    d = space.distance
    fam, k = kind.family, kind.k
    if kind.arity != _POINT and beta is None:
        raise ValueError(f"{kind} needs a Geraghty function")

    if kind.arity == _POINT:
        if isinstance(u, (HatSequence, tuple, list)) or isinstance(v, (HatSequence, tuple, list)):
            raise ArityMismatch(f"{kind} compares single points")
        tu, tv = apply_operator(T, u), apply_operator(T, v)
        lhs = d(tu, tv)
        if fam == "banach":
            rhs = kind.c * d(u, v)
        elif fam == "geraghty":
            if beta is None:
                raise ValueError("geraghty needs a Geraghty function")
            duv = d(u, v)
            rhs = beta(duv) * duv
        elif fam == "kannan":
            rhs = kind.c * (d(tu, u) + d(tv, v))
        else:
            rhs = kind.c * (d(tu, v) + d(tv, u))
        return lhs, rhs

    if kind.arity == _TUPLE:
        ut, vt = _as_tuple(u, k, "u"), _as_tuple(v, k, "v")
        tu = apply_operator(T, ut, unpack=True)
        tv = apply_operator(T, vt, unpack=True)
        uk, vk = ut[-1], vt[-1]
    else:
        ut, vt = _as_hat(u, k, "u"), _as_hat(v, k, "v")
        tu, tv = apply_operator(T, ut), apply_operator(T, vt)
        uk, vk = element_at(ut, k), element_at(vt, k)

    lhs = d(tu, tv)
    if fam == "hk":
        m = m_k(T, ut, vt, k, space)
        rhs = beta(m) * m
    elif fam in ("kannan-geraghty", "ext-kannan-geraghty"):
        rhs = beta(d(uk, vk)) / 2.0 * (d(tu, uk) + d(tv, vk))
    else:
        rhs = beta(d(uk, vk)) / 2.0 * (d(tu, vk) + d(tv, uk))
    return lhs, rhs


@dataclass
class SamplerConfig:
    """How :func:`falsify` draws inputs.

    Without a ``generator`` points are uniform scalars on ``[low, high]`` and
    the boundary grid is ``{low, midpoint, high}``. A custom
    ``generator(rng) -> point`` gets only the caller's ``boundary`` points.
    """

    n_samples: int = 10_000
    seed: int = 0
    generator: Optional[Callable] = None
    low: float = 0.0
    high: float = 1.0
    boundary: Optional[list] = None
    workers: int = 1


@dataclass
class FalsificationReport:
    kind: str
    beta: Optional[str]
    samples_tried: int
    counterexample: Optional[dict]
    max_ratio: float

    @property
    def passed(self) -> bool:
        return self.counterexample is None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "beta": self.beta,
            "samples_tried": self.samples_tried,
            "counterexample": self.counterexample,
            "max_ratio": self.max_ratio,
            "passed": self.passed,
        }


_BOUNDARY_CAP = 4096


def _pack(kind, points):
    if kind.arity == _POINT:
        return points[0]
    if kind.arity == _TUPLE:
        return tuple(points)
    return hat(points[:-1], points[-1])


def _boundary_pairs(kind, values):
    m = 1 if kind.arity == _POINT else kind.k
    if len(values) ** (2 * m) <= _BOUNDARY_CAP:
        for combo in itertools.product(values, repeat=2 * m):
            yield _pack(kind, list(combo[:m])), _pack(kind, list(combo[m:]))
        return
    # too many corners: vary the k-th entries only, fill the rest with the middle value
    mid = values[len(values) // 2]
    for a, b in itertools.product(values, repeat=2):
        yield _pack(kind, [mid] * (m - 1) + [a]), _pack(kind, [mid] * (m - 1) + [b])


def _draw_pairs(kind, config):
    rng = np.random.default_rng(config.seed)
    m = 1 if kind.arity == _POINT else kind.k
    if config.generator is None:
        boundary = config.boundary
        if boundary is None:
            boundary = [config.low, 0.5 * (config.low + config.high), config.high]
        pairs = list(_boundary_pairs(kind, [float(b) for b in boundary]))
        draws = rng.uniform(config.low, config.high, size=(config.n_samples, 2 * m))
        for row in draws:
            pts = [float(x) for x in row]
            pairs.append((_pack(kind, pts[:m]), _pack(kind, pts[m:])))
        return pairs
    pairs = list(_boundary_pairs(kind, list(config.boundary))) if config.boundary else []
    for _ in range(config.n_samples):
        pts = [config.generator(rng) for _ in range(2 * m)]
        pairs.append((_pack(kind, pts[:m]), _pack(kind, pts[m:])))
    return pairs


def _jsonable(x):
    if isinstance(x, HatSequence):
        return {"prefix": [_jsonable(p) for p in x.prefix], "tail": _jsonable(x.tail)}
    if isinstance(x, (tuple, list)):
        return [_jsonable(p) for p in x]
    if isinstance(x, np.ndarray):
        return [float(v) for v in x]
    if hasattr(x, "values") and hasattr(x, "nodes"):
        return [float(v) for v in x.values]
    return float(x)


def _scan(kind, T, beta, space, pairs, start):
    """Evaluate a chunk; stop at its first counterexample."""
    max_ratio = 0.0
    for offset, (u, v) in enumerate(pairs):
        try:
            lhs, rhs = lhs_rhs(kind, T, beta, u, v, space)
        except OperatorFailure as exc:
            exc.sample = {"index": start + offset, "u": _jsonable(u), "v": _jsonable(v)}
            raise
        if rhs > 0.0:
            max_ratio = max(max_ratio, lhs / rhs)
        elif lhs > 0.0:
            max_ratio = math.inf
        if lhs > rhs + COUNTEREXAMPLE_TOL:
            return start + offset, (u, v, lhs, rhs), max_ratio
    return None, None, max_ratio


def falsify(kind: ContractionKind, T, beta: Optional[GeraghtyFn], space: MetricSpace,
            config: Optional[SamplerConfig] = None) -> FalsificationReport:
    """Search for inputs where ``lhs > rhs + 1e-12``.

    The boundary grid is tried first, then ``config.n_samples`` seeded random
    pairs. With ``workers > 1`` chunks are evaluated concurrently but the
    counterexample with the smallest sample index is the one reported.
    """
    config = config or SamplerConfig()
    pairs = _draw_pairs(kind, config)
    workers = max(1, int(config.workers))
    if workers == 1:
        chunks = [(0, pairs)]
        results = [_scan(kind, T, beta, space, pairs, 0)]
    else:
        size = max(1, math.ceil(len(pairs) / workers))
        chunks = [(i, pairs[i:i + size]) for i in range(0, len(pairs), size)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: _scan(kind, T, beta, space, c[1], c[0]), chunks))

    max_ratio = 0.0
    found = None
    for (start, chunk), (index, hit, ratio) in zip(chunks, results):
        max_ratio = max(max_ratio, ratio)
        if index is not None:
            found = (index, hit)
            break
    if found is None:
        tried = len(pairs)
        counter = None
    else:
        index, (u, v, lhs, rhs) = found
        tried = index + 1
        counter = {"index": index, "u": _jsonable(u), "v": _jsonable(v), "lhs": lhs, "rhs": rhs}
    return FalsificationReport(
        kind=str(kind),
        beta=None if beta is None else beta.describe(),
        samples_tried=tried,
        counterexample=counter,
        max_ratio=max_ratio,
    )


@dataclass
class BetaReport:
    """Outcome of a passing :func:`beta_sanity` run (failures raise)."""

    beta: str
    samples: int
    max_value: float
    certified: bool


def beta_sanity(beta: GeraghtyFn, samples: int = 1000) -> BetaReport:
    """Check ``0 <= beta(t) < 1`` at ``t = 0`` and log-spaced ``t`` up to ``1e6``.

    Raises :class:`~picardo.errors.OutOfRange` at the first violating sample.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    ts = np.concatenate(([0.0], np.logspace(-6, 6, samples - 1))) if samples > 1 else np.array([0.0])
    worst = -math.inf
    for t in ts:
        b = beta(t)
        if not (0.0 <= b < 1.0) or not math.isfinite(b):
            raise OutOfRange(float(t), b)
        worst = max(worst, b)
    return BetaReport(beta.describe(), len(ts), worst, beta.certified)
