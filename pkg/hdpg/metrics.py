"""
Relative error norms against exact fields.

    e0   = ||num - exact||_L2  / ||exact||_L2
    e1   = |num - exact|_H1    / |exact|_H1     (from gradients)
    eps1 = ||num - exact||_L1  / ||exact||_L1

Integrals are summed element by element in id order with a tensor Gauss
rule. Vector and tensor values use the Frobenius norm pointwise.

Evaluators:
    numeric(element_id, points) -> (P, ...) values on one element
    exact(points)               -> (P, ...) values
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional, Tuple

import numpy as np

from hdpg.errors import NormalizationError
from hdpg.mesh import Element, Mesh, Subdomain
from hdpg.quadrature import gauss_line, tensor_rect

Numeric = Callable[[int, np.ndarray], np.ndarray]
Exact = Callable[[np.ndarray], np.ndarray]


@dataclass
class ErrorReport:
    e0: Dict[str, float] = field(default_factory=dict)
    e1: Dict[str, float] = field(default_factory=dict)
    eps1: Dict[str, float] = field(default_factory=dict)
    dof: int = 0
    rows: int = 0
    residual_norm: float = float('nan')
    runtime_ms: float = 0.0
    numerical_rank: int = 0


def _pointwise(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        return np.abs(v)
    return np.sqrt(np.sum(v.reshape(v.shape[0], -1) ** 2, axis=1))


def _integrate(numeric: Numeric, exact: Exact, mesh: Mesh, quad_order: int,
               elements: Optional[Iterable[Element]], power: int) -> Tuple[float, float]:
    rule = gauss_line(quad_order)
    els = sorted(elements if elements is not None else mesh.elements, key=lambda el: el.id)
    diff_total = 0.0
    ref_total = 0.0
    for el in els:
        quad = tensor_rect(rule, el)
        ex = np.asarray(exact(quad.points), dtype=float)
        num = np.asarray(numeric(el.id, quad.points), dtype=float)
        diff_total += float(quad.weights @ (_pointwise(num - ex) ** power))
        ref_total += float(quad.weights @ (_pointwise(ex) ** power))
    return diff_total, ref_total


def _relative(numeric: Numeric, exact: Exact, mesh: Mesh, quad_order: int,
              elements: Optional[Iterable[Element]], power: int, label: str) -> float:
    diff, ref = _integrate(numeric, exact, mesh, quad_order, elements, power)
    if ref <= 0.0:
        raise NormalizationError(f"exact field has zero {label} norm")
    if power == 2:
        return float(np.sqrt(diff / ref))
    return diff / ref


def relative_l2(numeric: Numeric, exact: Exact, mesh: Mesh, quad_order: int,
                elements: Optional[Iterable[Element]] = None) -> float:
    return _relative(numeric, exact, mesh, quad_order, elements, 2, 'L2')


def relative_semi_h1(numeric_grad: Numeric, exact_grad: Exact, mesh: Mesh, quad_order: int,
                     elements: Optional[Iterable[Element]] = None) -> float:
    """Relative H1 seminorm error: the L2 ratio of the gradient misfit."""
    return _relative(numeric_grad, exact_grad, mesh, quad_order, elements, 2, 'H1 semi')


def relative_l1(numeric: Numeric, exact: Exact, mesh: Mesh, quad_order: int,
                elements: Optional[Iterable[Element]] = None) -> float:
    return _relative(numeric, exact, mesh, quad_order, elements, 1, 'L1')


# -- per-problem reports ----------------------------------------------------

def darcy_errors(solution, problem, mesh: Mesh, quad_order: int,
                 elements: Optional[Iterable[Element]] = None) -> ErrorReport:
    """e0/e1/eps1 of p and e0 of u for a DarcySolution."""
    report = ErrorReport()
    els = list(elements) if elements is not None else None
    report.e0['p'] = relative_l2(solution.pressure, problem.exact_p, mesh, quad_order, els)
    report.eps1['p'] = relative_l1(solution.pressure, problem.exact_p, mesh, quad_order, els)
    if problem.exact_grad_p is not None:
        report.e1['p'] = relative_semi_h1(solution.pressure_gradient, problem.exact_grad_p, mesh, quad_order, els)
    if problem.exact_u is not None:
        report.e0['u'] = relative_l2(solution.velocity, problem.exact_u, mesh, quad_order, els)
    return report


def stokes_errors(solution, problem, mesh: Mesh, quad_order: int,
                  elements: Optional[Iterable[Element]] = None) -> ErrorReport:
    """e0 of sigma, u, p and e1 of u for a StokesSolution (Stokes or Brinkman)."""
    report = ErrorReport()
    els = list(elements) if elements is not None else None
    report.e0['u'] = relative_l2(solution.velocity, problem.exact_u, mesh, quad_order, els)
    report.e0['sigma'] = relative_l2(solution.sigma, problem.exact_sigma, mesh, quad_order, els)
    report.e0['p'] = relative_l2(solution.pressure, problem.exact_p, mesh, quad_order, els)
    if problem.exact_grad_u is not None:
        report.e1['u'] = relative_semi_h1(solution.velocity_gradient, problem.exact_grad_u, mesh, quad_order, els)
    return report


def coupled_errors(solution, problem, mesh: Mesh, quad_order: int) -> ErrorReport:
    """e0 of u^S, p^S, sigma^S, u^D, p^D for a CoupledSolution, each over its own subdomain."""
    s_els = mesh.elements_in(Subdomain.STOKES)
    d_els = mesh.elements_in(Subdomain.DARCY)
    report = ErrorReport()
    sp, dp = problem.stokes, problem.darcy
    report.e0['uS'] = relative_l2(solution.stokes.velocity, sp.exact_u, mesh, quad_order, s_els)
    report.e0['pS'] = relative_l2(solution.stokes.pressure, sp.exact_p, mesh, quad_order, s_els)
    report.e0['sigmaS'] = relative_l2(solution.stokes.sigma, sp.exact_sigma, mesh, quad_order, s_els)
    report.e0['uD'] = relative_l2(solution.darcy.velocity, dp.exact_u, mesh, quad_order, d_els)
    report.e0['pD'] = relative_l2(solution.darcy.pressure, dp.exact_p, mesh, quad_order, d_els)
    return report
