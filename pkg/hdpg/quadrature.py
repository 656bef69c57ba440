"""
Gauss-Legendre rules on [0, 1], mapped to rectangles and edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np

from hdpg.errors import ProblemDefinitionError
from hdpg.mesh import Edge, Element


@dataclass(frozen=True)
class LineRule:
    points: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class RectRule:
    points: np.ndarray   # (P, 2)
    weights: np.ndarray  # (P,)


@lru_cache(maxsize=64)
def _leggauss_unit(n: int) -> Tuple[np.ndarray, np.ndarray]:
    xg, wg = np.polynomial.legendre.leggauss(n)
    # [-1, 1] -> [0, 1]
    xg = 0.5 * (xg + 1.0)
    wg = 0.5 * wg
    xg.setflags(write=False)
    wg.setflags(write=False)
    return xg, wg


def gauss_line(n: int) -> LineRule:
    """n-point rule on [0, 1], exact for degree <= 2n - 1."""
    if n < 1:
        raise ProblemDefinitionError(f"quadrature order must be >= 1, got {n}")
    xg, wg = _leggauss_unit(int(n))
    return LineRule(points=xg, weights=wg)


def tensor_rect(rule: LineRule, element: Element) -> RectRule:
    b = element.bounds
    hx, hy = b.width, b.height
    px = b.x_min + hx * rule.points
    py = b.y_min + hy * rule.points
    X, Y = np.meshgrid(px, py, indexing='ij')
    points = np.column_stack([X.ravel(), Y.ravel()])
    weights = np.outer(rule.weights, rule.weights).ravel() * (hx * hy)
    return RectRule(points=points, weights=weights)


def edge_rule(rule: LineRule, edge: Edge) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Map the line rule onto an edge.

    Returns:
        points (n, 2), weights (n,) summing to the edge length, and the
        edge parameter t in [0, 1] with t = 0 at the lexicographically
        smaller endpoint.
    """
    t = np.asarray(rule.points, dtype=float)
    p0 = edge.start
    p1 = edge.end
    points = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    weights = rule.weights * edge.length
    return points, weights, t
