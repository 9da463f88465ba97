"""Points, metric spaces and eventually-constant sequences.

A point of X is one of

* a scalar (``float``),
* a fixed-length vector (1-D ``numpy.ndarray``),
* a :class:`FunctionGrid`, i.e. real samples of a function on a declared grid.

Infinite tuples of points are only ever represented as
:class:`HatSequence` objects: a finite prefix followed by a tail that repeats
forever. ``(x_1, ..., x_{k-1}, x_k, x_k, ...)`` is ``hat([x_1, ..., x_{k-1}], x_k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import MismatchedDomain, NonFinite

__all__ = [
    "FunctionGrid",
    "Point",
    "MetricSpace",
    "AbsDiff",
    "SupNorm",
    "WeightedSupNorm",
    "UserDistance",
    "HatSequence",
    "as_point",
    "same_point",
    "distance",
    "hat",
    "constant",
    "element_at",
    "rehat",
]


@dataclass(frozen=True, eq=False)
class FunctionGrid:
    """Samples ``values[j] = u(nodes[j])`` of a function on ``[a, b]^n``.

    ``nodes`` has shape ``(N, n)``. Two grids are compatible only when their
    node arrays are identical; nothing is ever interpolated.
    """

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        values = np.array(self.values, dtype=float).reshape(-1)
        if nodes.ndim != 2 or nodes.shape[0] != values.shape[0]:
            raise MismatchedDomain(
                f"{values.shape[0]} values for a grid of shape {nodes.shape}"
            )
        if nodes.flags.writeable:
            nodes = nodes.copy()
            nodes.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def __len__(self):
        return self.values.shape[0]

    def with_values(self, values) -> "FunctionGrid":
        """Same grid, new samples (the node array is shared, not copied)."""
        return FunctionGrid(self.nodes, values)

    def same_grid(self, other: "FunctionGrid") -> bool:
        return self.nodes is other.nodes or (
            self.nodes.shape == other.nodes.shape
            and bool(np.array_equal(self.nodes, other.nodes))
        )

    def __eq__(self, other):
        if not isinstance(other, FunctionGrid):
            return NotImplemented
        return self.same_grid(other) and bool(np.array_equal(self.values, other.values))

    __hash__ = None

    def __repr__(self):
        return f"FunctionGrid(n={self.dim}, N={len(self)})"


Point = Union[float, np.ndarray, FunctionGrid]


def as_point(x) -> Point:
    """Normalize user input into one of the three point representations."""
    if isinstance(x, FunctionGrid):
        return x
    if isinstance(x, np.ndarray) and x.ndim > 0:
        arr = np.array(x, dtype=float).reshape(-1)
        arr.flags.writeable = False
        return arr
    if isinstance(x, (list, tuple)):
        return as_point(np.asarray(x, dtype=float))
    return float(x)


def _samples(x: Point) -> np.ndarray:
    if isinstance(x, FunctionGrid):
        return x.values
    return np.asarray(x, dtype=float)


def _check_compatible(x: Point, y: Point) -> None:
    if isinstance(x, FunctionGrid) or isinstance(y, FunctionGrid):
        if not (isinstance(x, FunctionGrid) and isinstance(y, FunctionGrid)):
            raise MismatchedDomain("cannot compare a FunctionGrid with a non-grid point")
        if not x.same_grid(y):
            raise MismatchedDomain("points are sampled on different grids")
        return
    xs, ys = np.shape(x), np.shape(y)
    if xs != ys:
        raise MismatchedDomain(f"point shapes differ: {xs} vs {ys}")


def _check_finite(x: Point) -> None:
    s = _samples(x)
    if not np.all(np.isfinite(s)):
        bad = int(np.flatnonzero(~np.isfinite(np.atleast_1d(s)))[0])
        raise NonFinite(f"non-finite sample at index {bad}", where=bad)


def same_point(x: Point, y: Point) -> bool:
    """Exact structural equality used for canonicalization.

    Scalars are compared bitwise; arrays and grids sample by sample.
    """
    if isinstance(x, FunctionGrid) or isinstance(y, FunctionGrid):
        return isinstance(x, FunctionGrid) and isinstance(y, FunctionGrid) and x == y
    if isinstance(x, float) and isinstance(y, float):
        return x == y and math.copysign(1.0, x) == math.copysign(1.0, y)
    xa, ya = np.asarray(x), np.asarray(y)
    return xa.shape == ya.shape and bool(np.array_equal(xa, ya))


class MetricSpace:
    """A distance function on points. Subclasses implement :meth:`_raw`."""

    name = "metric"

    def distance(self, x: Point, y: Point) -> float:
        if type(x) is float and type(y) is float:
            # hot path for the falsifier and scalar engines
            if not (math.isfinite(x) and math.isfinite(y)):
                raise NonFinite("non-finite scalar point", where=0)
            return self._raw(x, y)
        _check_compatible(x, y)
        _check_finite(x)
        _check_finite(y)
        return self._raw(x, y)

    __call__ = distance

    def _raw(self, x: Point, y: Point) -> float:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.name}


class AbsDiff(MetricSpace):
    """``d(x, y) = |x - y|`` on the real line."""

    name = "abs"

    def _raw(self, x, y):
        if type(x) is float and type(y) is float:
            return abs(x - y)
        if np.ndim(x) or np.ndim(y):
            raise MismatchedDomain("AbsDiff is defined on scalars only")
        return abs(float(x) - float(y))


class SupNorm(MetricSpace):
    """``d(u, v) = max_j |u_j - v_j|`` over vector entries or grid samples."""

    name = "sup"

    def _raw(self, x, y):
        diff = np.abs(_samples(x) - _samples(y))
        return float(diff.max()) if diff.size else 0.0


class WeightedSupNorm(SupNorm):
    """Sup distance scaled by the constant ``exp(-arcsin(alpha))``.

    The weight rescales every distance uniformly, so it changes thresholds
    but never which function is a fixed point.
    """

    name = "weighted-sup"

    def __init__(self, alpha: float):
        alpha = float(alpha)
        if not (0.0 < alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
        self.alpha = alpha
        self.weight = math.exp(-math.asin(alpha))

    def _raw(self, x, y):
        return self.weight * super()._raw(x, y)

    def describe(self):
        return {"kind": self.name, "alpha": self.alpha, "weight": self.weight}


class UserDistance(MetricSpace):
    """Wraps a caller-supplied ``fn(x, y) -> float``. Metric axioms are not checked."""

    name = "user"

    def __init__(self, fn: Callable[[Point, Point], float], name: str = "user"):
        self.fn = fn
        self.name = name

    def _raw(self, x, y):
        return float(self.fn(x, y))


def distance(space: MetricSpace, x: Point, y: Point) -> float:
    return space.distance(x, y)


@dataclass(frozen=True, eq=False)
class HatSequence:
    """Eventually-constant infinite tuple ``prefix[0], ..., prefix[m-1], tail, tail, ...``.

    Instances are always canonical: trailing prefix entries equal to the tail
    are trimmed on construction, so equality is structural.
    """

    prefix: tuple = ()
    tail: Point = 0.0
    _kind: tuple = field(default=None, repr=False)

    def __post_init__(self):
        tail = as_point(self.tail)
        prefix = [as_point(p) for p in self.prefix]
        kind = _domain_signature(tail)
        for p in prefix:
            if _domain_signature(p) != kind:
                raise MismatchedDomain("all entries of a hat sequence must share one domain")
            if isinstance(p, FunctionGrid) and not p.same_grid(tail):
                raise MismatchedDomain("all entries of a hat sequence must share one grid")
        while prefix and same_point(prefix[-1], tail):
            prefix.pop()
        object.__setattr__(self, "prefix", tuple(prefix))
        object.__setattr__(self, "tail", tail)
        object.__setattr__(self, "_kind", kind)

    @property
    def stabilization(self) -> int:
        """Smallest index ``i`` with ``element_at(self, j) == tail`` for all ``j >= i``."""
        return len(self.prefix) + 1

    def __getitem__(self, i: int) -> Point:
        return element_at(self, i)

    def head(self, n: int) -> list:
        """Entries ``1..n``."""
        return [element_at(self, i) for i in range(1, n + 1)]

    def __eq__(self, other):
        if not isinstance(other, HatSequence):
            return NotImplemented
        return (
            len(self.prefix) == len(other.prefix)
            and all(same_point(a, b) for a, b in zip(self.prefix, other.prefix))
            and same_point(self.tail, other.tail)
        )

    __hash__ = None

    def __repr__(self):
        return f"hat({list(self.prefix)!r}, {self.tail!r})"


def _domain_signature(p: Point):
    if isinstance(p, FunctionGrid):
        return ("grid", p.nodes.shape)
    if isinstance(p, np.ndarray):
        return ("vector", p.shape)
    return ("scalar",)


def hat(prefix: Sequence[Point], tail: Point) -> HatSequence:
    return HatSequence(tuple(prefix), tail)


def constant(u: Point) -> HatSequence:
    """The constant sequence ``(u, u, ...)``."""
    return HatSequence((), u)


def element_at(seq: HatSequence, i: int) -> Point:
    if i < 1:
        raise IndexError("hat sequences are indexed from 1")
    if i <= len(seq.prefix):
        return seq.prefix[i - 1]
    return seq.tail


def rehat(seq: HatSequence, l: int) -> HatSequence:
    """Entries ``1..l-1`` of ``seq`` followed by entry ``l`` repeated forever."""
    if l < 1:
        raise IndexError("rehat index must be >= 1")
    if l >= seq.stabilization:
        return seq
    return HatSequence(seq.prefix[: l - 1], seq.prefix[l - 1])
