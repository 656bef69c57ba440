"""
Uniform rectangular partitions of axis-aligned domains.

Numbering:
    element (i, j)            -> j * nx + i
    horizontal edge (i, j)    -> j * nx + i                      j = 0..ny
    vertical edge (i, j)      -> nx * (ny + 1) + j * (nx + 1) + i   i = 0..nx

Every edge stores one global normal n_e: +y for horizontal edges, +x for
vertical edges. Element-outward normals are n_e times a sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from hdpg.errors import MeshAlignmentError, ProblemDefinitionError, TopologyError

# Relative tolerance for deciding that a divider lies on a mesh line
_ALIGN_TOL = 1e-10


class Subdomain(str, Enum):
    SINGLE = 'single'
    STOKES = 'stokes'
    DARCY = 'darcy'


class EdgeKind(str, Enum):
    INTERIOR = 'interior'
    BOUNDARY = 'boundary'
    INTERFACE = 'interface'


@dataclass(frozen=True)
class Domain:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ProblemDefinitionError(
                f"degenerate domain ({self.x_min}, {self.x_max}) x ({self.y_min}, {self.y_max})"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    def contains(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(points)
        sx = tol * max(1.0, abs(self.x_min), abs(self.x_max))
        sy = tol * max(1.0, abs(self.y_min), abs(self.y_max))
        return (
            (pts[:, 0] >= self.x_min - sx) & (pts[:, 0] <= self.x_max + sx)
            & (pts[:, 1] >= self.y_min - sy) & (pts[:, 1] <= self.y_max + sy)
        )


@dataclass(frozen=True)
class Element:
    id: int
    bounds: Domain
    h_K: float
    subdomain: Subdomain
    # bottom, right, top, left
    edge_ids: Tuple[int, int, int, int]

    @property
    def center(self) -> np.ndarray:
        b = self.bounds
        return np.array([0.5 * (b.x_min + b.x_max), 0.5 * (b.y_min + b.y_max)])


@dataclass(frozen=True)
class Edge:
    id: int
    # lexicographically ordered: endpoints[0] < endpoints[1]
    endpoints: Tuple[Tuple[float, float], Tuple[float, float]]
    normal: Tuple[float, float]
    length: float
    neighbors: Tuple[int, ...]
    kind: EdgeKind

    @property
    def is_horizontal(self) -> bool:
        return self.normal[1] != 0.0

    @property
    def start(self) -> np.ndarray:
        return np.asarray(self.endpoints[0], dtype=float)

    @property
    def end(self) -> np.ndarray:
        return np.asarray(self.endpoints[1], dtype=float)

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.start + self.end)


@dataclass(frozen=True)
class Mesh:
    domain: Domain
    nx: int
    ny: int
    elements: Tuple[Element, ...]
    edges: Tuple[Edge, ...]
    h: float
    divider_y: Optional[float] = None
    _orientation: Dict[Tuple[int, int], float] = field(default_factory=dict, repr=False, compare=False)

    @property
    def boundary_edges(self) -> List[Edge]:
        return [e for e in self.edges if e.kind is EdgeKind.BOUNDARY]

    @property
    def interior_edges(self) -> List[Edge]:
        return [e for e in self.edges if e.kind is EdgeKind.INTERIOR]

    @property
    def interface_edges(self) -> List[Edge]:
        return [e for e in self.edges if e.kind is EdgeKind.INTERFACE]

    def elements_in(self, subdomain: Subdomain) -> List[Element]:
        return [el for el in self.elements if el.subdomain is subdomain]

    def edges_touching(self, element_ids) -> List[Edge]:
        """Edges with at least one neighbor in element_ids, ordered by id."""
        wanted = set(element_ids)
        return [e for e in self.edges if wanted.intersection(e.neighbors)]

    def orientation(self, element_id: int, edge_id: int) -> float:
        """Sign s with n_K = s * n_e on the shared face."""
        try:
            return self._orientation[(element_id, edge_id)]
        except KeyError:
            raise TopologyError(f"edge {edge_id} is not incident to element {element_id}") from None

    def locate(self, point) -> int:
        """Id of an element containing the point; shared faces resolve to the upper/right element."""
        x, y = float(point[0]), float(point[1])
        d = self.domain
        if not d.contains(np.array([[x, y]]))[0]:
            raise TopologyError(f"point ({x}, {y}) lies outside the domain")
        i = min(int((x - d.x_min) / d.width * self.nx), self.nx - 1)
        j = min(int((y - d.y_min) / d.height * self.ny), self.ny - 1)
        return j * self.nx + max(i, 0)


def _mesh_line_index(value: float, start: float, step: float, count: int) -> Optional[int]:
    pos = (value - start) / step
    j = int(round(pos))
    if abs(pos - j) <= _ALIGN_TOL * max(1.0, abs(pos)) and 0 <= j <= count:
        return j
    return None


def build_uniform_mesh(domain: Domain, nx: int, ny: int, divider_y: Optional[float] = None) -> Mesh:
    """
    Build an nx x ny uniform rectangular partition of the domain.

    Args:
        domain: axis-aligned rectangle
        nx, ny: subdivisions in x and y
        divider_y: optional horizontal dividing line. Elements above it are
            labeled Stokes, elements below Darcy, edges on it Interface.

    Returns:
        Mesh with elements and edges numbered as described in the module docstring.
    """
    if nx < 1 or ny < 1:
        raise ProblemDefinitionError(f"subdivision counts must be >= 1, got nx={nx}, ny={ny}")

    hx = domain.width / nx
    hy = domain.height / ny
    xs = [domain.x_min + i * hx for i in range(nx)] + [domain.x_max]
    ys = [domain.y_min + j * hy for j in range(ny)] + [domain.y_max]

    j_div = None
    if divider_y is not None:
        j_div = _mesh_line_index(divider_y, domain.y_min, hy, ny)
        if j_div is None or j_div in (0, ny):
            raise MeshAlignmentError(
                f"divider y={divider_y} is not an interior mesh line of the {nx}x{ny} partition"
            )

    n_horizontal = nx * (ny + 1)

    def h_edge(i: int, j: int) -> int:
        return j * nx + i

    def v_edge(i: int, j: int) -> int:
        return n_horizontal + j * (nx + 1) + i

    elements: List[Element] = []
    for j in range(ny):
        for i in range(nx):
            bounds = Domain(xs[i], xs[i + 1], ys[j], ys[j + 1])
            if j_div is None:
                sub = Subdomain.SINGLE
            else:
                sub = Subdomain.STOKES if j >= j_div else Subdomain.DARCY
            elements.append(Element(
                id=j * nx + i,
                bounds=bounds,
                h_K=bounds.diameter,
                subdomain=sub,
                edge_ids=(h_edge(i, j), v_edge(i + 1, j), h_edge(i, j + 1), v_edge(i, j)),
            ))

    edges: List[Edge] = []
    orientation: Dict[Tuple[int, int], float] = {}

    for j in range(ny + 1):
        for i in range(nx):
            below = (j - 1) * nx + i if j > 0 else None
            above = j * nx + i if j < ny else None
            neighbors = tuple(sorted(n for n in (below, above) if n is not None))
            if len(neighbors) == 1:
                kind = EdgeKind.BOUNDARY
            elif j_div is not None and j == j_div:
                kind = EdgeKind.INTERFACE
            else:
                kind = EdgeKind.INTERIOR
            eid = h_edge(i, j)
            edges.append(Edge(
                id=eid,
                endpoints=((xs[i], ys[j]), (xs[i + 1], ys[j])),
                normal=(0.0, 1.0),
                length=xs[i + 1] - xs[i],
                neighbors=neighbors,
                kind=kind,
            ))
            if below is not None:
                orientation[(below, eid)] = 1.0
            if above is not None:
                orientation[(above, eid)] = -1.0

    for j in range(ny):
        for i in range(nx + 1):
            left = j * nx + i - 1 if i > 0 else None
            right = j * nx + i if i < nx else None
            neighbors = tuple(sorted(n for n in (left, right) if n is not None))
            kind = EdgeKind.BOUNDARY if len(neighbors) == 1 else EdgeKind.INTERIOR
            eid = v_edge(i, j)
            edges.append(Edge(
                id=eid,
                endpoints=((xs[i], ys[j]), (xs[i], ys[j + 1])),
                normal=(1.0, 0.0),
                length=ys[j + 1] - ys[j],
                neighbors=neighbors,
                kind=kind,
            ))
            if left is not None:
                orientation[(left, eid)] = 1.0
            if right is not None:
                orientation[(right, eid)] = -1.0

    return Mesh(
        domain=domain,
        nx=nx,
        ny=ny,
        elements=tuple(elements),
        edges=tuple(edges),
        h=max(el.h_K for el in elements),
        divider_y=None if j_div is None else ys[j_div],
        _orientation=orientation,
    )


def outward_normal(mesh: Mesh, element_id: int, edge_id: int) -> np.ndarray:
    """Unit outward normal of the element on the given edge."""
    s = mesh.orientation(element_id, edge_id)
    return s * np.asarray(mesh.edges[edge_id].normal, dtype=float)
