"""
Column layout, row assembly and the pivoted least-squares solve.

Columns are grouped into blocks keyed by (field, entity, component); each
block holds one coefficient per neuron of the feature space behind it.
Rows are appended in groups, each group tagged with the weak-form
equation and entity that produced it, so residuals can later be split by
equation.

Usage:
    layout = build_layout([Block('darcy.p', 0, 0, 10), ...])
    builder = SystemBuilder(layout)
    builder.add_rows('darcy.divergence', 0, [(('darcy.p', 0, 0), M)], rhs)
    system = builder.build()
    solution = solve_least_squares(system)
"""

from __future__ import annotations

import os
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import polars as pl
from scipy.linalg import qr, solve_triangular

from hdpg.errors import LayoutError, NumericInputError

BlockKey = Tuple[str, int, int]


@dataclass(frozen=True)
class Block:
    field: str
    entity: int
    component: int
    size: int
    offset: int = 0

    @property
    def key(self) -> BlockKey:
        return (self.field, self.entity, self.component)

    @property
    def columns(self) -> slice:
        return slice(self.offset, self.offset + self.size)


@dataclass(frozen=True, eq=False)
class ColumnLayout:
    blocks: Tuple[Block, ...]
    dof: int
    _index: Dict[BlockKey, Block]

    def __contains__(self, key: BlockKey) -> bool:
        return key in self._index

    def block(self, field: str, entity: int, component: int = 0) -> Block:
        try:
            return self._index[(field, entity, component)]
        except KeyError:
            raise LayoutError(f"no block for field={field!r} entity={entity} component={component}") from None

    def columns(self, field: str, entity: int, component: int = 0) -> slice:
        return self.block(field, entity, component).columns

    def fields(self) -> List[str]:
        return list(OrderedDict.fromkeys(b.field for b in self.blocks))

    def field_dof(self, field: str) -> int:
        return sum(b.size for b in self.blocks if b.field == field)


def build_layout(blocks: Iterable[Block]) -> ColumnLayout:
    """Pack blocks contiguously in the given order; incoming offsets are ignored."""
    placed: List[Block] = []
    index: Dict[BlockKey, Block] = {}
    offset = 0
    for blk in blocks:
        if blk.size < 1:
            raise LayoutError(f"block {blk.key} has non-positive size {blk.size}")
        if blk.key in index:
            raise LayoutError(f"duplicate block {blk.key}")
        b = Block(blk.field, blk.entity, blk.component, blk.size, offset)
        placed.append(b)
        index[b.key] = b
        offset += blk.size
    if not placed:
        raise LayoutError('layout needs at least one block')
    return ColumnLayout(blocks=tuple(placed), dof=offset, _index=index)


@dataclass(frozen=True, eq=False)
class DenseSystem:
    A: np.ndarray
    b: np.ndarray
    provenance: Tuple[Tuple[str, int], ...]  # (tag, entity) per row

    @property
    def rows(self) -> int:
        return self.A.shape[0]

    @property
    def dof(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True)
class LeastSquaresSolution:
    x: np.ndarray
    residual_norm: float
    numerical_rank: int


@dataclass(eq=False)
class AssembledScheme:
    """An assembled discretization and everything needed to evaluate its solution."""
    system: Optional[DenseSystem]
    layout: ColumnLayout
    mesh: Any
    spaces: Any
    # element id -> (2 N_u, N_p) map from p- to u-coefficients
    elimination: Dict[int, np.ndarray] = field(default_factory=dict)
    # element id -> numerical rank of the eliminated block
    elimination_rank: Dict[int, int] = field(default_factory=dict)
    # boundary edge id -> projected p^ coefficients
    boundary_trace: Dict[int, np.ndarray] = field(default_factory=dict)
    # interface sampling points, coupled systems only
    interface_points: Any = None


class SystemBuilder:
    """Accumulates row groups against a fixed layout."""

    def __init__(self, layout: ColumnLayout):
        self.layout = layout
        self._groups: List[Tuple[str, int, np.ndarray, np.ndarray]] = []

    def add_rows(self, tag: str, entity: int, terms: Sequence[Tuple[BlockKey, np.ndarray]],
                 rhs: np.ndarray) -> None:
        """
        Append one group of rows. Every term is (block key, matrix of shape
        (rows, block size)); terms hitting the same block are summed.
        """
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        n_rows = rhs.shape[0]
        rows = np.zeros((n_rows, self.layout.dof))
        for key, mat in terms:
            cols = self.layout.columns(*key)
            mat = np.asarray(mat, dtype=float)
            if mat.shape != (n_rows, cols.stop - cols.start):
                raise LayoutError(
                    f"{tag}: term for {key} has shape {mat.shape}, expected {(n_rows, cols.stop - cols.start)}"
                )
            rows[:, cols] += mat
        self._groups.append((tag, int(entity), rows, rhs))

    @property
    def row_count(self) -> int:
        return sum(g[3].shape[0] for g in self._groups)

    def build(self) -> DenseSystem:
        if not self._groups:
            return DenseSystem(np.zeros((0, self.layout.dof)), np.zeros(0), ())
        A = np.vstack([g[2] for g in self._groups])
        b = np.concatenate([g[3] for g in self._groups])
        provenance = tuple((g[0], g[1]) for g in self._groups for _ in range(g[3].shape[0]))
        return DenseSystem(A=A, b=b, provenance=provenance)


def _check_finite(A: np.ndarray, B: np.ndarray) -> None:
    if not np.all(np.isfinite(A)):
        raise NumericInputError('matrix contains non-finite entries')
    if not np.all(np.isfinite(B)):
        raise NumericInputError('right-hand side contains non-finite entries')


def lstsq_pivoted(A: np.ndarray, B: np.ndarray, rank_tol: Optional[float] = None) -> Tuple[np.ndarray, int]:
    """
    Basic least-squares solution via QR with column pivoting.

    Columns whose pivot falls below rank_tol * |R[0, 0]| get zero
    coefficients. B may hold several right-hand sides as columns.

    Returns:
        (X, numerical rank)
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    _check_finite(A, B)
    m, n = A.shape
    if m < 1 or n < 1:
        raise NumericInputError(f"least-squares system must be non-empty, got {m}x{n}")

    Q, R, piv = qr(A, mode='economic', pivoting=True)
    diag = np.abs(np.diag(R))
    if rank_tol is None:
        rank_tol = max(m, n) * np.finfo(float).eps
    if diag.size == 0 or diag[0] == 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(diag > rank_tol * diag[0]))

    squeeze = B.ndim == 1
    B2 = B[:, None] if squeeze else B
    X = np.zeros((n, B2.shape[1]))
    if rank > 0:
        QtB = Q[:, :rank].T @ B2
        X[piv[:rank]] = solve_triangular(R[:rank, :rank], QtB)
    return (X[:, 0] if squeeze else X), rank


def solve_least_squares(system: DenseSystem, rank_tol: Optional[float] = None) -> LeastSquaresSolution:
    x, rank = lstsq_pivoted(system.A, system.b, rank_tol=rank_tol)
    residual = float(np.linalg.norm(system.A @ x - system.b))
    return LeastSquaresSolution(x=x, residual_norm=residual, numerical_rank=rank)


def residual_by_provenance(system: DenseSystem, x: np.ndarray) -> Dict[str, float]:
    """Residual norm restricted to the rows of each weak-form tag."""
    r = system.A @ np.asarray(x, dtype=float) - system.b
    if not system.provenance:
        return {}
    df = pl.DataFrame({
        'tag': [p[0] for p in system.provenance],
        'sq': r ** 2,
    })
    agg = df.group_by('tag', maintain_order=True).agg(pl.col('sq').sum())
    return {tag: float(np.sqrt(sq)) for tag, sq in zip(agg['tag'].to_list(), agg['sq'].to_list())}


def dump_system(system: DenseSystem, path: str) -> None:
    """
    Write non-zero matrix entries as `row col value` lines followed by the
    right-hand side as `row rhs value` lines, 0-based indices.
    """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    rows, cols = np.nonzero(system.A)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(f"# {system.rows} rows, {system.dof} columns\n")
        for i, j in zip(rows, cols):
            f.write(f"{i} {j} {system.A[i, j]:.17g}\n")
        for i, v in enumerate(system.b):
            if v != 0.0:
                f.write(f"{i} rhs {v:.17g}\n")
