"""
Coupled Stokes-Darcy and Brinkman discretizations.

Stokes-Darcy: one mesh split by a horizontal divider, Stokes above and
Darcy below. The Stokes rows (no mean-trace row) and the Darcy normal-flux
rows are assembled side by side; on the interface neither side emits edge
rows. Instead, at M sampling points x_i on the interface,

    mass:          u_S . n - u^_D . n                        = 0
    normal stress: (sigma^_S n) . n + p_D                    = 0
    tangential:    (sigma^_S n) . t + nu/kappa (u_S . t)     = 0   (BJS)
                   (sigma^_S n) . t + nu/kappa (u_S - u_D) . t = 0 (BJ)

with n the unit normal pointing from the Stokes side into the Darcy side
and t = (-n_y, n_x).

Brinkman: the Stokes scheme with -nu (kappa^-1 u, v) added to the
momentum rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from hdpg.darcy_schemes import (
    FIELD_P as DARCY_P,
    FIELD_U as DARCY_U,
    FIELD_UHAT as DARCY_UHAT,
    DarcyProblem,
    DarcySchemeConfig,
    DarcySolution,
    DarcySpaces,
    DarcyVariant,
    darcy_edge_blocks,
    darcy_element_blocks,
    emit_darcy_rows,
    init_darcy_spaces,
)
from hdpg.errors import ConfigError, MeshAlignmentError, PlacementError, ProblemDefinitionError
from hdpg.mesh import Domain, Mesh, Subdomain
from hdpg.stokes_scheme import (
    COMPATIBILITY_TOL,
    FIELD_SIGMAHAT,
    FIELD_U as STOKES_U,
    StokesProblem,
    StokesSchemeConfig,
    StokesSolution,
    StokesSpaces,
    assemble_stokes_like,
    boundary_flux,
    emit_stokes_rows,
    init_stokes_spaces,
    stokes_edge_blocks,
    stokes_element_blocks,
)
from hdpg.system import (
    AssembledScheme,
    LeastSquaresSolution,
    SystemBuilder,
    build_layout,
    solve_least_squares,
)

Field = Callable[[np.ndarray], np.ndarray]

INTERFACE_TAGS = ('interface:mass', 'interface:normal_stress', 'interface:tangential')

_ON_LINE_TOL = 1e-10


class InterfaceLaw(str, Enum):
    BJS = 'BJS'
    BJ = 'BJ'


@dataclass(frozen=True, eq=False)
class CoupledProblem:
    domain: Domain
    divider_y: float
    stokes: StokesProblem
    darcy: DarcyProblem
    # friction coefficient on the interface: constant or field over (P, 2) points
    kappa: Union[float, Field] = 1.0
    law: InterfaceLaw = InterfaceLaw.BJ
    alpha: Optional[float] = None

    def __post_init__(self):
        try:
            object.__setattr__(self, 'law', InterfaceLaw(str(getattr(self.law, 'value', self.law)).upper()))
        except ValueError:
            raise ProblemDefinitionError(f"unknown interface law {self.law!r}") from None
        if not callable(self.kappa) and not float(self.kappa) > 0:
            raise ProblemDefinitionError(f"friction coefficient must be > 0, got {self.kappa}")

    @classmethod
    def from_alpha(cls, domain: Domain, divider_y: float, stokes: StokesProblem, darcy: DarcyProblem,
                   alpha: float, law: InterfaceLaw = InterfaceLaw.BJS) -> 'CoupledProblem':
        """kappa = sqrt(nu (K t) . t) / alpha with t the interface tangent (1, 0)."""
        if not alpha > 0:
            raise ProblemDefinitionError(f"alpha must be > 0, got {alpha}")
        t = np.array([1.0, 0.0])
        kappa = math.sqrt(stokes.nu * float((darcy.K @ t) @ t)) / alpha
        return cls(domain=domain, divider_y=divider_y, stokes=stokes, darcy=darcy,
                   kappa=kappa, law=law, alpha=alpha)

    def kappa_at(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        if callable(self.kappa):
            vals = np.asarray(self.kappa(pts), dtype=float)
        else:
            vals = np.full(pts.shape[0], float(self.kappa))
        if np.any(vals <= 0):
            raise ProblemDefinitionError('friction coefficient must be > 0 on the interface')
        return vals


@dataclass(frozen=True)
class InterfaceConfig:
    M: int = 30
    # explicit (M, 2) sampling points; default is M equispaced interior points
    points: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self):
        if self.points is not None:
            object.__setattr__(self, 'M', len(self.points))
        if self.M < 1:
            raise ConfigError(f"need at least one interface sampling point, got M={self.M}")


@dataclass(frozen=True, eq=False)
class InterfacePoint:
    x: np.ndarray
    edge_id: int
    t: float
    stokes_element: int
    darcy_element: int
    # orientation of the Stokes element on the edge: n = sign * n_e
    sign: float
    normal: np.ndarray
    tangent: np.ndarray


def locate_interface_point(mesh: Mesh, point) -> InterfacePoint:
    x = np.asarray(point, dtype=float).reshape(2)
    scale = max(1.0, mesh.domain.diameter)
    for edge in mesh.interface_edges:
        a, b = edge.start, edge.end
        ab = b - a
        t = float((x - a) @ ab / (ab @ ab))
        off = np.linalg.norm(a + t * ab - x)
        if off <= _ON_LINE_TOL * scale and -_ON_LINE_TOL <= t <= 1.0 + _ON_LINE_TOL:
            stokes_el = [K for K in edge.neighbors if mesh.elements[K].subdomain is Subdomain.STOKES]
            darcy_el = [K for K in edge.neighbors if mesh.elements[K].subdomain is Subdomain.DARCY]
            sign = mesh.orientation(stokes_el[0], edge.id)
            n = sign * np.asarray(edge.normal)
            return InterfacePoint(
                x=x, edge_id=edge.id, t=min(max(t, 0.0), 1.0),
                stokes_element=stokes_el[0], darcy_element=darcy_el[0],
                sign=sign, normal=n, tangent=np.array([-n[1], n[0]]),
            )
    raise PlacementError(f"point {x.tolist()} does not lie on an interface edge")


def interface_points(mesh: Mesh, iface: InterfaceConfig) -> List[InterfacePoint]:
    if not mesh.interface_edges:
        raise PlacementError('mesh has no interface edges')
    if iface.points is not None:
        return [locate_interface_point(mesh, p) for p in iface.points]
    xs = np.array([c for e in mesh.interface_edges for c in (e.start[0], e.end[0])])
    x0, x1 = xs.min(), xs.max()
    y = mesh.divider_y
    return [
        locate_interface_point(mesh, (x0 + (x1 - x0) * i / (iface.M + 1), y))
        for i in range(1, iface.M + 1)
    ]


@dataclass(eq=False)
class CoupledSpaces:
    stokes: StokesSpaces
    darcy: DarcySpaces


def _emit_interface_rows(builder: SystemBuilder, problem: CoupledProblem, spaces: CoupledSpaces,
                         points: List[InterfacePoint]) -> None:
    nu = problem.stokes.nu
    for i, ip in enumerate(points):
        xp = ip.x[None, :]
        tp = np.array([ip.t])
        S, D, e = ip.stokes_element, ip.darcy_element, ip.edge_id
        n, t, s = ip.normal, ip.tangent, ip.sign
        phi_su = spaces.stokes.u[S].values(xp)
        chi_s = spaces.stokes.sigmahat[e].values(tp)
        chi_d = spaces.darcy.uhat[e].values(tp)
        phi_dp = spaces.darcy.p[D].values(xp)
        ratio = nu / problem.kappa_at(xp)[0]

        mass = [((STOKES_U, S, d), n[d] * phi_su) for d in range(2)]
        mass.append(((DARCY_UHAT, e, 0), -s * chi_d))
        builder.add_rows(INTERFACE_TAGS[0], i, mass, np.zeros(1))

        normal = [((FIELD_SIGMAHAT, e, c), s * n[c] * chi_s) for c in range(2)]
        normal.append(((DARCY_P, D, 0), phi_dp))
        builder.add_rows(INTERFACE_TAGS[1], i, normal, np.zeros(1))

        tangential = [((FIELD_SIGMAHAT, e, c), s * t[c] * chi_s) for c in range(2)]
        tangential += [((STOKES_U, S, d), ratio * t[d] * phi_su) for d in range(2)]
        if problem.law is InterfaceLaw.BJ:
            phi_du = spaces.darcy.u[D].values(xp)
            tangential += [((DARCY_U, D, d), -ratio * t[d] * phi_du) for d in range(2)]
        builder.add_rows(INTERFACE_TAGS[2], i, tangential, np.zeros(1))


def assemble_stokes_darcy(mesh: Mesh, problem: CoupledProblem, stokes_config: StokesSchemeConfig,
                          darcy_config: DarcySchemeConfig, iface: InterfaceConfig) -> AssembledScheme:
    """
    Block system: Stokes rows on the Stokes elements and their edges, Darcy
    normal-flux rows on the Darcy elements and their edges, then 3 M
    collocation rows tying the two along the interface.
    """
    if mesh.divider_y is None:
        raise MeshAlignmentError('coupled assembly needs a mesh built with a divider')
    if abs(mesh.divider_y - problem.divider_y) > _ON_LINE_TOL * max(1.0, abs(problem.divider_y)):
        raise MeshAlignmentError(f"mesh divider y={mesh.divider_y} differs from interface y={problem.divider_y}")
    if darcy_config.variant is not DarcyVariant.HDPG:
        raise ConfigError(f"coupled assembly uses the {DarcyVariant.HDPG.value} Darcy variant, "
                          f"got {darcy_config.variant.value}")

    s_elems = mesh.elements_in(Subdomain.STOKES)
    d_elems = mesh.elements_in(Subdomain.DARCY)
    s_edges = mesh.edges_touching(el.id for el in s_elems)
    d_edges = mesh.edges_touching(el.id for el in d_elems)
    points = interface_points(mesh, iface)

    spaces = CoupledSpaces(
        stokes=init_stokes_spaces(mesh, s_elems, s_edges, stokes_config),
        darcy=init_darcy_spaces(mesh, d_elems, d_edges, darcy_config),
    )
    layout = build_layout(
        stokes_element_blocks(s_elems, stokes_config)
        + darcy_element_blocks(d_elems, darcy_config)
        + stokes_edge_blocks(s_edges, stokes_config)
        + darcy_edge_blocks(d_edges, darcy_config)
    )
    builder = SystemBuilder(layout)
    scheme = AssembledScheme(system=None, layout=layout, mesh=mesh, spaces=spaces, interface_points=points)

    sp = problem.stokes
    emit_stokes_rows(builder, mesh, s_elems, s_edges, sp.nu, sp.f, sp.g, stokes_config, spaces.stokes,
                     mean_trace_row=False)
    emit_darcy_rows(builder, mesh, d_elems, d_edges, problem.darcy, darcy_config, spaces.darcy, scheme)
    _emit_interface_rows(builder, problem, spaces, points)
    scheme.system = builder.build()
    return scheme


@dataclass(eq=False)
class CoupledSolution:
    stokes: StokesSolution
    darcy: DarcySolution

    def stokes_velocity(self, element_id: int, points: np.ndarray) -> np.ndarray:
        return self.stokes.velocity(element_id, points)

    def stokes_traction(self, edge_id: int, points: np.ndarray, t: np.ndarray) -> np.ndarray:
        return self.stokes.stress_trace(edge_id, t)

    def darcy_normal_flux(self, edge_id: int, points: np.ndarray, t: np.ndarray) -> np.ndarray:
        return self.darcy.normal_flux(edge_id, points, t)

    def darcy_pressure(self, element_id: int, points: np.ndarray) -> np.ndarray:
        return self.darcy.pressure(element_id, points)

    def darcy_velocity(self, element_id: int, points: np.ndarray) -> np.ndarray:
        return self.darcy.velocity(element_id, points)


@dataclass(frozen=True, eq=False)
class ExactCoupledFields:
    """Closed-form fields of a CoupledProblem with the CoupledSolution interface."""
    problem: CoupledProblem
    mesh: Mesh

    def stokes_velocity(self, element_id: int, points: np.ndarray) -> np.ndarray:
        return self.problem.stokes.exact_u(points)

    def stokes_traction(self, edge_id: int, points: np.ndarray, t: np.ndarray) -> np.ndarray:
        ne = np.asarray(self.mesh.edges[edge_id].normal)
        return self.problem.stokes.exact_sigma(points) @ ne

    def darcy_normal_flux(self, edge_id: int, points: np.ndarray, t: np.ndarray) -> np.ndarray:
        ne = np.asarray(self.mesh.edges[edge_id].normal)
        return self.problem.darcy.exact_u(points) @ ne

    def darcy_pressure(self, element_id: int, points: np.ndarray) -> np.ndarray:
        return self.problem.darcy.exact_p(points)

    def darcy_velocity(self, element_id: int, points: np.ndarray) -> np.ndarray:
        return self.problem.darcy.exact_u(points)


def solve_coupled(scheme: AssembledScheme, rank_tol: Optional[float] = None) -> Tuple[CoupledSolution, LeastSquaresSolution]:
    lsq = solve_least_squares(scheme.system, rank_tol=rank_tol)
    spaces: CoupledSpaces = scheme.spaces
    solution = CoupledSolution(
        stokes=StokesSolution(scheme.mesh, scheme.layout, spaces.stokes, lsq.x),
        darcy=DarcySolution(scheme.mesh, scheme.layout, spaces.darcy, lsq.x),
    )
    return solution, lsq


def interface_residuals(solution, problem: CoupledProblem, points: List[InterfacePoint]) -> np.ndarray:
    """
    (M, 3) residuals of the mass, normal-stress and tangential conditions at
    each sampling point. `solution` is a CoupledSolution or ExactCoupledFields.
    """
    nu = problem.stokes.nu
    out = np.zeros((len(points), 3))
    for i, ip in enumerate(points):
        xp = ip.x[None, :]
        tp = np.array([ip.t])
        n, t, s = ip.normal, ip.tangent, ip.sign
        u_s = solution.stokes_velocity(ip.stokes_element, xp)[0]
        trac = s * solution.stokes_traction(ip.edge_id, xp, tp)[0]
        flux = s * solution.darcy_normal_flux(ip.edge_id, xp, tp)[0]
        p_d = solution.darcy_pressure(ip.darcy_element, xp)[0]
        ratio = nu / problem.kappa_at(xp)[0]
        slip = u_s @ t
        if problem.law is InterfaceLaw.BJ:
            slip -= solution.darcy_velocity(ip.darcy_element, xp)[0] @ t
        out[i] = (u_s @ n - flux, trac @ n + p_d, trac @ t + ratio * slip)
    return out


# -- Brinkman ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BrinkmanProblem:
    nu: float
    inv_kappa: np.ndarray
    f: Field
    g: Field
    domain: Optional[Domain] = None
    exact_u: Optional[Field] = None
    exact_grad_u: Optional[Field] = None
    exact_sigma: Optional[Field] = None
    exact_p: Optional[Field] = None

    def __post_init__(self):
        if not self.nu > 0:
            raise ProblemDefinitionError(f"viscosity must be > 0, got {self.nu}")
        ik = np.asarray(self.inv_kappa, dtype=float)
        if ik.shape != (2, 2) or not np.all(np.isfinite(ik)):
            raise ProblemDefinitionError(f"inverse permeability must be a finite 2x2 tensor, got {ik!r}")
        if abs(ik[0, 1] - ik[1, 0]) > 1e-14 * max(1.0, np.abs(ik).max()):
            raise ProblemDefinitionError('inverse permeability is not symmetric')
        if np.linalg.eigvalsh(ik).min() < -1e-14 * max(1.0, np.abs(ik).max()):
            raise ProblemDefinitionError('inverse permeability is not positive semidefinite')
        object.__setattr__(self, 'inv_kappa', ik)
        if self.domain is not None and self.exact_u is not None:
            flux = boundary_flux(self.g, self.domain)
            if abs(flux) > COMPATIBILITY_TOL:
                raise ProblemDefinitionError(f"boundary data violates the zero net flux condition: {flux:.3e}")


def assemble_brinkman(mesh: Mesh, problem: BrinkmanProblem, config: StokesSchemeConfig) -> AssembledScheme:
    return assemble_stokes_like(mesh, problem.nu, problem.f, problem.g, problem.domain, config,
                                inv_kappa=problem.inv_kappa)
