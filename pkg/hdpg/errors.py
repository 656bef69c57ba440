"""
Error types raised by the solver library.

Every error is a ValueError so callers that only care about "bad input"
can keep catching ValueError.
"""

from __future__ import annotations


class HdpgError(ValueError):
    """Base class for all solver errors."""


class MeshAlignmentError(HdpgError):
    """Dividing line does not coincide with a mesh line."""


class TopologyError(HdpgError):
    """Element/edge pair that is not incident."""


class LayoutError(HdpgError):
    """Invalid or duplicate column block."""


class NumericInputError(HdpgError):
    """Non-finite entries in a matrix or right-hand side."""


class EliminationError(HdpgError):
    """Local velocity block could not be eliminated."""

    def __init__(self, element_id: int, rank: int, columns: int):
        self.element_id = element_id
        self.rank = rank
        self.columns = columns
        super().__init__(
            f"Element {element_id}: local velocity block has numerical rank {rank} < {columns}"
        )


class ProjectionError(HdpgError):
    """Boundary trace projection onto edge features failed."""

    def __init__(self, edge_id: int, rank: int, columns: int):
        self.edge_id = edge_id
        self.rank = rank
        self.columns = columns
        super().__init__(
            f"Edge {edge_id}: boundary projection has numerical rank {rank} < {columns}"
        )


class PlacementError(HdpgError):
    """Interface sampling point not on an interface edge."""


class NormalizationError(HdpgError):
    """Exact field has zero norm, relative error undefined."""


class ProblemDefinitionError(HdpgError):
    """Inconsistent coefficients or data in a problem definition."""


class ConfigError(HdpgError):
    """Invalid run configuration."""


class PointLocationError(HdpgError):
    """Evaluation point outside the hinted element."""
