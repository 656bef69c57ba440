"""
Piecewise polynomial test spaces.

Scalar element basis: products L_i(s) L_j(t) with i + j <= k, where L_n is
the Legendre polynomial of degree n shifted to [0, 1] and scaled to unit
L2 norm, and (s, t) are the element coordinates mapped to the reference
square [0, 1]^2. The products are orthonormal on the reference square and
span the total-degree space P_k.

Tensor fields are (..., 2, 2) arrays; vectors are (..., 2).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import List, Tuple

import numpy as np
from numpy.polynomial import legendre as npleg

from hdpg.errors import ProblemDefinitionError
from hdpg.mesh import Edge, Element

# E11, E12 (= E21), E22
SYM_UNITS = np.array([
    [[1.0, 0.0], [0.0, 0.0]],
    [[0.0, 1.0], [1.0, 0.0]],
    [[0.0, 0.0], [0.0, 1.0]],
])


def scalar_dim(k: int) -> int:
    return (k + 1) * (k + 2) // 2


@lru_cache(maxsize=32)
def _index_pairs(k: int) -> Tuple[Tuple[int, int], ...]:
    pairs: List[Tuple[int, int]] = []
    for total in range(k + 1):
        for i in range(total, -1, -1):
            pairs.append((i, total - i))
    return tuple(pairs)


@lru_cache(maxsize=32)
def _derivative_matrix(k: int) -> np.ndarray:
    # column n holds the Legendre coefficients of P_n'
    if k == 0:
        return np.zeros((1, 1))
    return npleg.legder(np.eye(k + 1), axis=0)


def _shifted_legendre(z: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Orthonormal shifted Legendre values and d/dz on [0, 1]: (P, k+1) each."""
    xi = 2.0 * z - 1.0
    scale = np.sqrt(2.0 * np.arange(k + 1) + 1.0)
    vals = npleg.legvander(xi, k) * scale
    if k == 0:
        ders = np.zeros_like(vals)
    else:
        ders = (npleg.legvander(xi, k - 1) @ _derivative_matrix(k)) * scale * 2.0
    return vals, ders


@dataclass(frozen=True, eq=False)
class ElementPolyBasis:
    k: int
    element: Element

    def __post_init__(self):
        if self.k < 0:
            raise ProblemDefinitionError(f"polynomial degree must be >= 0, got {self.k}")

    @property
    def dim(self) -> int:
        return scalar_dim(self.k)

    def _reference(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float, float]:
        b = self.element.bounds
        x = np.atleast_2d(x)
        return (x[:, 0] - b.x_min) / b.width, (x[:, 1] - b.y_min) / b.height, b.width, b.height

    def values(self, x: np.ndarray) -> np.ndarray:
        """(P, 2) -> (P, dim)"""
        s, t, _, _ = self._reference(x)
        Ls, _ = _shifted_legendre(s, self.k)
        Lt, _ = _shifted_legendre(t, self.k)
        pairs = _index_pairs(self.k)
        ii = [p[0] for p in pairs]
        jj = [p[1] for p in pairs]
        return Ls[:, ii] * Lt[:, jj]

    def gradients(self, x: np.ndarray) -> np.ndarray:
        """(P, 2) -> (P, dim, 2)"""
        s, t, hx, hy = self._reference(x)
        Ls, dLs = _shifted_legendre(s, self.k)
        Lt, dLt = _shifted_legendre(t, self.k)
        pairs = _index_pairs(self.k)
        ii = [p[0] for p in pairs]
        jj = [p[1] for p in pairs]
        gx = dLs[:, ii] * Lt[:, jj] / hx
        gy = Ls[:, ii] * dLt[:, jj] / hy
        return np.stack([gx, gy], axis=-1)


@dataclass(frozen=True, eq=False)
class EdgePolyBasis:
    k: int
    edge: Edge

    @property
    def dim(self) -> int:
        return self.k + 1

    def values(self, t: np.ndarray) -> np.ndarray:
        vals, _ = _shifted_legendre(np.atleast_1d(np.asarray(t, dtype=float)), self.k)
        return vals


def eval_scalar_poly(basis: ElementPolyBasis, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    vals = basis.values(x)
    return vals[0] if x.ndim == 1 else vals


def eval_scalar_poly_gradient(basis: ElementPolyBasis, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    grads = basis.gradients(x)
    return grads[0] if x.ndim == 1 else grads


# -- tensor algebra ---------------------------------------------------------

def trace(T: np.ndarray) -> np.ndarray:
    return T[..., 0, 0] + T[..., 1, 1]


def deviatoric(T: np.ndarray) -> np.ndarray:
    """T - tr(T)/2 I"""
    half_tr = 0.5 * trace(T)
    D = np.array(T, dtype=float, copy=True)
    D[..., 0, 0] -= half_tr
    D[..., 1, 1] -= half_tr
    return D


def contract_normal(T: np.ndarray, n: np.ndarray) -> np.ndarray:
    """T n for a fixed normal n."""
    return T @ np.asarray(n, dtype=float)


def symmetric_from_components(c: np.ndarray) -> np.ndarray:
    """(..., 3) components (11, 12, 22) -> (..., 2, 2) symmetric tensors."""
    return np.einsum('...a,aij->...ij', c, SYM_UNITS)


@dataclass(frozen=True, eq=False)
class SymmetricTensorBasis:
    """
    Symmetric 2x2 tensor fields: member (a, j) = phi_j * E_a with a in
    (11, 12, 22), ordered a-major.
    """
    scalar: ElementPolyBasis

    @property
    def dim(self) -> int:
        return 3 * self.scalar.dim

    def values(self, x: np.ndarray) -> np.ndarray:
        """(P, 2) -> (P, 3*dim, 2, 2)"""
        phi = self.scalar.values(x)
        P, n = phi.shape
        return np.einsum('pj,aik->pajik', phi, SYM_UNITS).reshape(P, 3 * n, 2, 2)

    def divergence(self, x: np.ndarray) -> np.ndarray:
        """Row-wise divergence (div T)_i = sum_j d_j T_ij: (P, 3*dim, 2)"""
        grad = self.scalar.gradients(x)  # (P, n, 2)
        P, n, _ = grad.shape
        return np.einsum('pjk,aik->paji', grad, SYM_UNITS).reshape(P, 3 * n, 2)


def symmetric_tensor_test_basis(k: int, element: Element) -> SymmetricTensorBasis:
    return SymmetricTensorBasis(ElementPolyBasis(k, element))


def strain_of_vector_features(space, x: np.ndarray) -> np.ndarray:
    """
    Symmetric gradients of the vector fields psi_i e_d built from a scalar
    space (feature space or polynomial basis).

    Returns:
        (P, 2, N, 2, 2) array indexed [point, component d, function i, :, :]
    """
    grad = space.gradients(np.atleast_2d(x))  # (P, N, 2)
    P, N, _ = grad.shape
    G = np.zeros((P, 2, N, 2, 2))
    # grad(psi e_d)[a, b] = delta_ad d_b psi
    G[:, 0, :, 0, :] = grad
    G[:, 1, :, 1, :] = grad
    return 0.5 * (G + np.swapaxes(G, -1, -2))
