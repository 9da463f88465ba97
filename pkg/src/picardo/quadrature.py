"""Tensor-product quadrature on boxes ``[a, b]^n``.

Nodes come back in canonical (row-major, last axis fastest) order. The
integral solvers use the same nodes as collocation points, so the node order
also fixes the summation order of every discrete integral.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

__all__ = ["QuadratureRule", "gauss_legendre_1d", "trapezoid_1d", "tensor_rule"]


def gauss_legendre_1d(m: int, a: float = 0.0, b: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def trapezoid_1d(m: int, a: float = 0.0, b: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    if m < 2:
        raise ValueError("composite trapezoid needs at least 2 nodes")
    x = np.linspace(a, b, m)
    h = (b - a) / (m - 1)
    w = np.full(m, h)
    w[0] = w[-1] = 0.5 * h
    return x, w


def tensor_rule(x: np.ndarray, w: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes = np.array(list(itertools.product(x, repeat=n)), dtype=float).reshape(-1, n)
    weights = np.array([np.prod(c) for c in itertools.product(w, repeat=n)], dtype=float)
    return nodes, weights


@dataclass(frozen=True)
class QuadratureRule:
    """``kind`` is ``"gauss"``, ``"trapezoid"`` or ``"montecarlo"``.

    ``size`` is nodes per axis for the tensor rules and the total number of
    points for Monte Carlo.
    """

    kind: str
    size: int
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("gauss", "trapezoid", "montecarlo"):
            raise ValueError(f"unknown quadrature kind {self.kind!r}")
        if self.size < 1:
            raise ValueError("quadrature size must be positive")
        if self.kind == "trapezoid" and self.size < 2:
            raise ValueError("composite trapezoid needs at least 2 nodes per axis")

    @classmethod
    def gauss(cls, m: int) -> "QuadratureRule":
        return cls("gauss", m)

    @classmethod
    def trapezoid(cls, m: int) -> "QuadratureRule":
        return cls("trapezoid", m)

    @classmethod
    def montecarlo(cls, n_points: int, seed: int = 0) -> "QuadratureRule":
        return cls("montecarlo", n_points, seed)

    @property
    def deterministic(self) -> bool:
        return self.kind != "montecarlo"

    def total_nodes(self, n: int) -> int:
        return self.size if self.kind == "montecarlo" else self.size ** n

    def nodes_weights(self, n: int, a: float = 0.0, b: float = 1.0):
        """Nodes of shape ``(N, n)`` and positive weights of shape ``(N,)``."""
        if n < 1:
            raise ValueError("dimension must be >= 1")
        if self.kind == "montecarlo":
            rng = np.random.default_rng(self.seed)
            nodes = rng.uniform(a, b, size=(self.size, n))
            return nodes, np.full(self.size, (b - a) ** n / self.size)
        one_d = gauss_legendre_1d if self.kind == "gauss" else trapezoid_1d
        x, w = one_d(self.size, a, b)
        return tensor_rule(x, w, n)

    def describe(self) -> str:
        if self.kind == "montecarlo":
            return f"montecarlo {self.size} {self.seed}"
        return f"{self.kind} {self.size}"
