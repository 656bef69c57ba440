"""
Local randomized-network discretizations of Darcy flow.

    u = -K grad p,   div u = f   in the domain,   p = g   on the boundary

Variants (DarcyVariant):
    hdpg               per-element u, p features, per-edge normal flux u^;
                       polynomial test functions, optional eta-stabilization
    hdpg_reduced       same scheme with u eliminated element by element
    hdpg_global_trace  u^ represented by one network over the whole domain
    hdg                trial features doubling as test functions (square system)
    hdpg_flux2         hybridized on the trace pressure p^ instead of u^

Column blocks use field names prefixed with 'darcy.' so the same blocks can
sit next to Stokes blocks in a coupled system. Element blocks come first,
then edge blocks, each in id order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from hdpg.errors import (
    ConfigError,
    EliminationError,
    PointLocationError,
    ProblemDefinitionError,
    ProjectionError,
)
from hdpg.mesh import Domain, Edge, EdgeKind, Element, Mesh
from hdpg.poly_test_space import EdgePolyBasis, ElementPolyBasis, scalar_dim
from hdpg.quadrature import edge_rule, gauss_line, tensor_rect
from hdpg.random_features import (
    EdgeFeatureSpace,
    ElementFeatureSpace,
    FeatureSpaceConfig,
    init_edge_space,
    init_element_space,
    init_global_trace_space,
)
from hdpg.system import (
    AssembledScheme,
    Block,
    ColumnLayout,
    DenseSystem,
    LeastSquaresSolution,
    SystemBuilder,
    build_layout,
    lstsq_pivoted,
    solve_least_squares,
)

# (P, 2) points -> (P,) or (P, 2) values
Field = Callable[[np.ndarray], np.ndarray]

FIELD_U = 'darcy.u'
FIELD_P = 'darcy.p'
FIELD_UHAT = 'darcy.uhat'
FIELD_PHAT = 'darcy.phat'
FIELD_UHAT_GLOBAL = 'darcy.uhat_global'


class DarcyVariant(str, Enum):
    HDPG = 'hdpg'
    REDUCED = 'hdpg_reduced'
    GLOBAL_TRACE = 'hdpg_global_trace'
    HDG = 'hdg'
    FLUX2 = 'hdpg_flux2'


def check_spd(K: np.ndarray, name: str = 'K') -> np.ndarray:
    K = np.asarray(K, dtype=float)
    if K.shape != (2, 2):
        raise ProblemDefinitionError(f"{name} must be 2x2, got shape {K.shape}")
    if not np.all(np.isfinite(K)):
        raise ProblemDefinitionError(f"{name} has non-finite entries")
    if abs(K[0, 1] - K[1, 0]) > 1e-14 * max(1.0, np.abs(K).max()):
        raise ProblemDefinitionError(f"{name} is not symmetric: {K.tolist()}")
    if np.linalg.eigvalsh(K).min() <= 0.0:
        raise ProblemDefinitionError(f"{name} is not positive definite: {K.tolist()}")
    return K


@dataclass(frozen=True, eq=False)
class DarcyProblem:
    K: np.ndarray
    f: Field
    g: Field
    domain: Optional[Domain] = None
    exact_p: Optional[Field] = None
    exact_grad_p: Optional[Field] = None
    exact_u: Optional[Field] = None

    def __post_init__(self):
        object.__setattr__(self, 'K', check_spd(self.K))

    @property
    def K_inv(self) -> np.ndarray:
        return np.linalg.inv(self.K)


@dataclass(frozen=True)
class DarcySchemeConfig:
    N_u: int
    N_uhat: int
    N_p: int
    k: int
    eta: float = 0.0
    tau: float = 0.0
    variant: DarcyVariant = DarcyVariant.HDPG
    r: float = 1.0
    seed: int = 0
    quad_order: Optional[int] = None
    shared_weights: bool = False
    # raise instead of truncating when a local solve loses rank
    strict_rank: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'variant', DarcyVariant(self.variant))
        if min(self.N_u, self.N_uhat, self.N_p) < 1:
            raise ConfigError(f"neuron counts must be >= 1, got ({self.N_u}, {self.N_uhat}, {self.N_p})")
        if self.k < 0:
            raise ConfigError(f"test degree must be >= 0, got {self.k}")
        if self.eta < 0 or self.tau < 0:
            raise ConfigError(f"stabilization constants must be >= 0, got eta={self.eta}, tau={self.tau}")
        if self.variant in (DarcyVariant.REDUCED, DarcyVariant.HDG) and self.eta != 0:
            raise ConfigError(f"variant {self.variant.value} eliminates u and requires eta = 0")

    @classmethod
    def from_degree(cls, k: int, **kwargs) -> 'DarcySchemeConfig':
        """Neuron counts N_u = dim P_k, N_uhat = k + 1, N_p = dim P_{k+1}."""
        kwargs.setdefault('N_u', scalar_dim(k))
        kwargs.setdefault('N_uhat', k + 1)
        kwargs.setdefault('N_p', scalar_dim(k + 1))
        return cls(k=k, **kwargs)

    @property
    def n_quad(self) -> int:
        return self.quad_order if self.quad_order is not None else self.k + 5

    def feature_config(self, N: int) -> FeatureSpaceConfig:
        return FeatureSpaceConfig(N=N, r=self.r, seed=self.seed, shared_weights=self.shared_weights)

    @property
    def eliminates_velocity(self) -> bool:
        return self.variant in (DarcyVariant.REDUCED, DarcyVariant.HDG)


@dataclass(eq=False)
class DarcySpaces:
    u: Dict[int, ElementFeatureSpace]
    p: Dict[int, ElementFeatureSpace]
    uhat: Dict[int, EdgeFeatureSpace] = field(default_factory=dict)
    phat: Dict[int, EdgeFeatureSpace] = field(default_factory=dict)
    uhat_global: Optional[ElementFeatureSpace] = None


# -- spaces and layout ------------------------------------------------------

def init_darcy_spaces(mesh: Mesh, elements: Sequence[Element], edges: Sequence[Edge],
                      config: DarcySchemeConfig) -> DarcySpaces:
    cu = config.feature_config(config.N_u)
    cp = config.feature_config(config.N_p)
    ch = config.feature_config(config.N_uhat)
    spaces = DarcySpaces(
        u={el.id: init_element_space(cu, el.id, mesh.domain, stream=FIELD_U) for el in elements},
        p={el.id: init_element_space(cp, el.id, mesh.domain, stream=FIELD_P) for el in elements},
    )
    if config.variant is DarcyVariant.GLOBAL_TRACE:
        spaces.uhat_global = init_global_trace_space(ch, mesh.domain, stream=FIELD_UHAT_GLOBAL)
    elif config.variant is DarcyVariant.FLUX2:
        spaces.phat = {e.id: init_edge_space(ch, e.id, stream=FIELD_PHAT) for e in edges}
    else:
        spaces.uhat = {e.id: init_edge_space(ch, e.id, stream=FIELD_UHAT) for e in edges}
    return spaces


def darcy_element_blocks(elements: Sequence[Element], config: DarcySchemeConfig) -> List[Block]:
    blocks: List[Block] = []
    for el in elements:
        if not config.eliminates_velocity:
            blocks.append(Block(FIELD_U, el.id, 0, config.N_u))
            blocks.append(Block(FIELD_U, el.id, 1, config.N_u))
        blocks.append(Block(FIELD_P, el.id, 0, config.N_p))
    return blocks


def darcy_edge_blocks(edges: Sequence[Edge], config: DarcySchemeConfig) -> List[Block]:
    if config.variant is DarcyVariant.GLOBAL_TRACE:
        return [Block(FIELD_UHAT_GLOBAL, 0, 0, config.N_uhat)]
    if config.variant is DarcyVariant.FLUX2:
        return [Block(FIELD_PHAT, e.id, 0, config.N_uhat) for e in edges if e.kind is EdgeKind.INTERIOR]
    return [Block(FIELD_UHAT, e.id, 0, config.N_uhat) for e in edges]


def _trace_key(config: DarcySchemeConfig, edge_id: int) -> Tuple[str, int, int]:
    if config.variant is DarcyVariant.GLOBAL_TRACE:
        return (FIELD_UHAT_GLOBAL, 0, 0)
    return (FIELD_UHAT, edge_id, 0)


def _trace_values(spaces: DarcySpaces, edge_id: int, points: np.ndarray, t: np.ndarray) -> np.ndarray:
    if spaces.uhat_global is not None:
        return spaces.uhat_global.values(points)
    return spaces.uhat[edge_id].values(t)


def _check_standalone(mesh: Mesh, problem_domain: Optional[Domain]) -> None:
    if mesh.divider_y is not None:
        raise ConfigError('single-domain assembly needs a mesh without a divider')
    if problem_domain is not None:
        d, m = problem_domain, mesh.domain
        if not np.allclose([d.x_min, d.x_max, d.y_min, d.y_max], [m.x_min, m.x_max, m.y_min, m.y_max]):
            raise ProblemDefinitionError(f"mesh domain {m} does not match problem domain {d}")


# -- element-wise projection and elimination --------------------------------

def project_boundary_trace(space: EdgeFeatureSpace, edge: Edge, g: Field, quad_order: int,
                           strict: bool = False) -> np.ndarray:
    """Weighted L2 least-squares projection of g onto the edge feature span."""
    rule = gauss_line(max(quad_order, space.dim + 2))
    pts, w, t = edge_rule(rule, edge)
    sw = np.sqrt(w)
    A = space.values(t) * sw[:, None]
    b = np.asarray(g(pts), dtype=float) * sw
    coeffs, rank = lstsq_pivoted(A, b)
    if (rank == 0 and np.any(b != 0.0)) or (strict and rank < space.dim):
        raise ProjectionError(edge.id, rank, space.dim)
    return coeffs


def _eliminate(element_id: int, A_u: np.ndarray, A_p: np.ndarray, strict: bool) -> Tuple[np.ndarray, int]:
    R, rank = lstsq_pivoted(A_u, -A_p)
    if rank == 0 or (strict and rank < A_u.shape[1]):
        raise EliminationError(element_id, rank, A_u.shape[1])
    return R, rank


# -- hybrid normal-flux schemes ---------------------------------------------

def _test_spaces(config: DarcySchemeConfig, spaces: DarcySpaces, el: Element):
    if config.variant is DarcyVariant.HDG:
        return spaces.u[el.id], spaces.p[el.id]
    return ElementPolyBasis(config.k, el), ElementPolyBasis(config.k + 1, el)


def _edge_test_values(config: DarcySchemeConfig, spaces: DarcySpaces, edge: Edge, t: np.ndarray) -> np.ndarray:
    if config.variant is DarcyVariant.HDG:
        return spaces.uhat[edge.id].values(t)
    return EdgePolyBasis(config.k, edge).values(t)


def emit_darcy_rows(builder: SystemBuilder, mesh: Mesh, elements: Sequence[Element], edges: Sequence[Edge],
                    problem: DarcyProblem, config: DarcySchemeConfig, spaces: DarcySpaces,
                    scheme: AssembledScheme) -> None:
    """
    Rows of the normal-flux hybridized scheme on a set of elements and
    their edges. Interface edges get no edge rows.
    """
    Kinv = problem.K_inv
    eta = config.eta
    rule = gauss_line(config.n_quad)
    element_ids = {el.id for el in elements}
    Nu = config.N_u

    for el in elements:
        quad = tensor_rect(rule, el)
        pts, w = quad.points, quad.weights
        V, Q = _test_spaces(config, spaces, el)
        su, sp = spaces.u[el.id], spaces.p[el.id]

        psi = V.values(pts)
        nv = psi.shape[1]
        wpsi = psi * w[:, None]
        phi_u = su.values(pts)
        grad_p = sp.gradients(pts)

        Muv = wpsi.T @ phi_u
        A_u = np.zeros((2 * nv, 2 * Nu))
        for c in range(2):
            for d in range(2):
                A_u[c * nv:(c + 1) * nv, d * Nu:(d + 1) * Nu] = Kinv[c, d] * Muv
        A_p = np.vstack([wpsi.T @ grad_p[:, :, c] for c in range(2)])

        q = Q.values(pts)
        grad_q = Q.gradients(pts)
        B_u = np.hstack([(grad_q[:, :, d] * w[:, None]).T @ phi_u for d in range(2)])
        rhs_div = -((q * w[:, None]).T @ np.asarray(problem.f(pts), dtype=float))

        vel_trace_terms = []
        div_trace_terms = []
        for eid in el.edge_ids:
            edge = mesh.edges[eid]
            s = mesh.orientation(el.id, eid)
            ne = np.asarray(edge.normal)
            epts, ew, t = edge_rule(rule, edge)
            chi = _trace_values(spaces, eid, epts, t)
            key = _trace_key(config, eid)
            q_e = Q.values(epts) * ew[:, None]
            div_trace_terms.append((key, -s * (q_e.T @ chi)))
            if eta > 0:
                psi_e = V.values(epts) * ew[:, None]
                Me = psi_e.T @ su.values(epts)
                for c in range(2):
                    for d in range(2):
                        A_u[c * nv:(c + 1) * nv, d * Nu:(d + 1) * Nu] += eta * el.h_K * ne[c] * ne[d] * Me
                Mh = psi_e.T @ chi
                vel_trace_terms.append((key, np.vstack([-eta * el.h_K * ne[c] * Mh for c in range(2)])))

        if config.eliminates_velocity:
            R, rank = _eliminate(el.id, A_u, A_p, config.strict_rank)
            scheme.elimination[el.id] = R
            scheme.elimination_rank[el.id] = rank
            builder.add_rows('darcy.divergence', el.id,
                             [((FIELD_P, el.id, 0), B_u @ R)] + div_trace_terms, rhs_div)
        else:
            u0, u1 = (FIELD_U, el.id, 0), (FIELD_U, el.id, 1)
            builder.add_rows('darcy.velocity', el.id,
                             [(u0, A_u[:, :Nu]), (u1, A_u[:, Nu:]), ((FIELD_P, el.id, 0), A_p)] + vel_trace_terms,
                             np.zeros(2 * nv))
            builder.add_rows('darcy.divergence', el.id,
                             [(u0, B_u[:, :Nu]), (u1, B_u[:, Nu:])] + div_trace_terms, rhs_div)

    for edge in edges:
        if edge.kind is EdgeKind.INTERFACE:
            continue
        epts, ew, t = edge_rule(rule, edge)
        ne = np.asarray(edge.normal)
        wtheta = _edge_test_values(config, spaces, edge, t) * ew[:, None]
        key = _trace_key(config, edge.id)
        chi = _trace_values(spaces, edge.id, epts, t)
        terms = []
        rhs = np.zeros(wtheta.shape[1])
        for K in edge.neighbors:
            if K not in element_ids:
                continue
            el = mesh.elements[K]
            s = mesh.orientation(K, edge.id)
            terms.append(((FIELD_P, K, 0), -s * (wtheta.T @ spaces.p[K].values(epts))))
            if eta > 0:
                Mu = wtheta.T @ spaces.u[K].values(epts)
                for d in range(2):
                    terms.append(((FIELD_U, K, d), -eta * el.h_K * ne[d] * Mu))
                terms.append((key, eta * el.h_K * (wtheta.T @ chi)))
            if edge.kind is EdgeKind.BOUNDARY:
                rhs -= s * (wtheta.T @ np.asarray(problem.g(epts), dtype=float))
        builder.add_rows('darcy.trace', edge.id, terms, rhs)


def _assemble_normal_flux(mesh: Mesh, problem: DarcyProblem, config: DarcySchemeConfig,
                          expected: DarcyVariant) -> AssembledScheme:
    if config.variant is not expected:
        raise ConfigError(f"expected variant {expected.value}, got {config.variant.value}")
    _check_standalone(mesh, problem.domain)
    elements, edges = list(mesh.elements), list(mesh.edges)
    spaces = init_darcy_spaces(mesh, elements, edges, config)
    layout = build_layout(darcy_element_blocks(elements, config) + darcy_edge_blocks(edges, config))
    builder = SystemBuilder(layout)
    scheme = AssembledScheme(system=None, layout=layout, mesh=mesh, spaces=spaces)
    emit_darcy_rows(builder, mesh, elements, edges, problem, config, spaces, scheme)
    scheme.system = builder.build()
    return scheme


def assemble_hdpg_darcy(mesh: Mesh, problem: DarcyProblem, config: DarcySchemeConfig) -> AssembledScheme:
    """Hybrid normal-flux scheme with per-edge traces; eta > 0 adds the penalty terms."""
    return _assemble_normal_flux(mesh, problem, config, DarcyVariant.HDPG)


def assemble_hdpg_darcy_reduced(mesh: Mesh, problem: DarcyProblem, config: DarcySchemeConfig) -> AssembledScheme:
    """
    Normal-flux scheme with the velocity eliminated on every element.

    The first-equation block is solved locally in the least-squares sense,
    u = R p, and R is substituted into the divergence rows. The map R per
    element is returned in AssembledScheme.elimination.
    """
    return _assemble_normal_flux(mesh, problem, config, DarcyVariant.REDUCED)


def assemble_hdpg_darcy_global_trace(mesh: Mesh, problem: DarcyProblem,
                                     config: DarcySchemeConfig) -> AssembledScheme:
    return _assemble_normal_flux(mesh, problem, config, DarcyVariant.GLOBAL_TRACE)


def assemble_hdg_darcy(mesh: Mesh, problem: DarcyProblem, config: DarcySchemeConfig) -> AssembledScheme:
    """
    Reduced scheme tested against the trial features themselves: u features
    in the first equation, u^ edge features on edges and p features in the
    divergence rows. Rows = columns = E * N_p + edges * N_uhat.
    """
    return _assemble_normal_flux(mesh, problem, config, DarcyVariant.HDG)


# -- trace pressure scheme --------------------------------------------------

def assemble_hdpg_darcy_flux2(mesh: Mesh, problem: DarcyProblem, config: DarcySchemeConfig) -> AssembledScheme:
    """
    Scheme hybridized on the trace pressure p^.

    Interior edges carry p^ unknowns. On boundary edges p^ is fixed to the
    projection of g onto the edge features and moved to the right-hand side;
    no edge rows are emitted there. tau-terms are scaled by tau / h_K.
    """
    if config.variant is not DarcyVariant.FLUX2:
        raise ConfigError(f"expected variant {DarcyVariant.FLUX2.value}, got {config.variant.value}")
    _check_standalone(mesh, problem.domain)
    elements, edges = list(mesh.elements), list(mesh.edges)
    spaces = init_darcy_spaces(mesh, elements, edges, config)
    layout = build_layout(darcy_element_blocks(elements, config) + darcy_edge_blocks(edges, config))
    builder = SystemBuilder(layout)
    scheme = AssembledScheme(system=None, layout=layout, mesh=mesh, spaces=spaces)

    for edge in mesh.boundary_edges:
        scheme.boundary_trace[edge.id] = project_boundary_trace(
            spaces.phat[edge.id], edge, problem.g, config.n_quad, strict=config.strict_rank
        )

    Kinv = problem.K_inv
    tau = config.tau
    rule = gauss_line(config.n_quad)
    Nu = config.N_u

    for el in elements:
        quad = tensor_rect(rule, el)
        pts, w = quad.points, quad.weights
        V = ElementPolyBasis(config.k, el)
        Q = ElementPolyBasis(config.k + 1, el)
        su, sp = spaces.u[el.id], spaces.p[el.id]
        u0, u1, pk = (FIELD_U, el.id, 0), (FIELD_U, el.id, 1), (FIELD_P, el.id, 0)

        psi = V.values(pts)
        grad_psi = V.gradients(pts)
        nv = psi.shape[1]
        phi_u = su.values(pts)
        grad_u = su.gradients(pts)
        phi_p = sp.values(pts)
        q = Q.values(pts)
        wq = q * w[:, None]

        # (K^-1 u, v) - (p, div v) + (p^, v.n)
        Muv = (psi * w[:, None]).T @ phi_u
        A_u = np.zeros((2 * nv, 2 * Nu))
        for c in range(2):
            for d in range(2):
                A_u[c * nv:(c + 1) * nv, d * Nu:(d + 1) * Nu] = Kinv[c, d] * Muv
        A_p = np.vstack([-(grad_psi[:, :, c] * w[:, None]).T @ phi_p for c in range(2)])
        rhs_vel = np.zeros(2 * nv)
        vel_terms = [(u0, A_u[:, :Nu]), (u1, A_u[:, Nu:]), (pk, A_p)]

        # -(div u, q) - tau (p, q) + tau (p^, q)
        B_u = [-(wq.T @ grad_u[:, :, d]) for d in range(2)]
        div_terms = [(u0, B_u[0]), (u1, B_u[1])]
        rhs_div = wq.T @ np.asarray(problem.f(pts), dtype=float)

        for eid in el.edge_ids:
            edge = mesh.edges[eid]
            s = mesh.orientation(el.id, eid)
            ne = np.asarray(edge.normal)
            epts, ew, t = edge_rule(rule, edge)
            chi = spaces.phat[eid].values(t)
            psi_e = V.values(epts) * ew[:, None]
            q_e = Q.values(epts) * ew[:, None]
            if edge.kind is EdgeKind.BOUNDARY:
                phat_g = chi @ scheme.boundary_trace[eid]
                for c in range(2):
                    rhs_vel[c * nv:(c + 1) * nv] -= s * ne[c] * (psi_e.T @ phat_g)
                if tau > 0:
                    rhs_div -= (tau / el.h_K) * (q_e.T @ phat_g)
            else:
                Mh = psi_e.T @ chi
                vel_terms.append(((FIELD_PHAT, eid, 0), np.vstack([s * ne[c] * Mh for c in range(2)])))
                if tau > 0:
                    div_terms.append(((FIELD_PHAT, eid, 0), (tau / el.h_K) * (q_e.T @ chi)))
            if tau > 0:
                div_terms.append((pk, -(tau / el.h_K) * (q_e.T @ sp.values(epts))))

        builder.add_rows('darcy.velocity', el.id, vel_terms, rhs_vel)
        builder.add_rows('darcy.divergence', el.id, div_terms, rhs_div)

    for edge in mesh.interior_edges:
        epts, ew, t = edge_rule(rule, edge)
        ne = np.asarray(edge.normal)
        wtheta = EdgePolyBasis(config.k + 1, edge).values(t) * ew[:, None]
        chi = spaces.phat[edge.id].values(t)
        terms = []
        for K in edge.neighbors:
            el = mesh.elements[K]
            s = mesh.orientation(K, edge.id)
            Mu = wtheta.T @ spaces.u[K].values(epts)
            for d in range(2):
                terms.append(((FIELD_U, K, d), s * ne[d] * Mu))
            if tau > 0:
                terms.append(((FIELD_P, K, 0), (tau / el.h_K) * (wtheta.T @ spaces.p[K].values(epts))))
                terms.append(((FIELD_PHAT, edge.id, 0), -(tau / el.h_K) * (wtheta.T @ chi)))
        builder.add_rows('darcy.trace', edge.id, terms, np.zeros(wtheta.shape[1]))

    scheme.system = builder.build()
    return scheme


ASSEMBLERS = {
    DarcyVariant.HDPG: assemble_hdpg_darcy,
    DarcyVariant.REDUCED: assemble_hdpg_darcy_reduced,
    DarcyVariant.GLOBAL_TRACE: assemble_hdpg_darcy_global_trace,
    DarcyVariant.HDG: assemble_hdg_darcy,
    DarcyVariant.FLUX2: assemble_hdpg_darcy_flux2,
}


def assemble_darcy(mesh: Mesh, problem: DarcyProblem, config: DarcySchemeConfig) -> AssembledScheme:
    return ASSEMBLERS[config.variant](mesh, problem, config)


# -- solutions --------------------------------------------------------------

@dataclass(eq=False)
class DarcySolution:
    mesh: Mesh
    layout: ColumnLayout
    spaces: DarcySpaces
    coefficients: np.ndarray
    elimination: Dict[int, np.ndarray] = field(default_factory=dict)

    def p_coefficients(self, element_id: int) -> np.ndarray:
        return self.coefficients[self.layout.columns(FIELD_P, element_id, 0)]

    def u_coefficients(self, element_id: int) -> np.ndarray:
        """(2, N_u) output weights of the velocity network."""
        if element_id in self.elimination:
            R = self.elimination[element_id]
            return (R @ self.p_coefficients(element_id)).reshape(2, -1)
        return np.vstack([
            self.coefficients[self.layout.columns(FIELD_U, element_id, c)] for c in range(2)
        ])

    def pressure(self, element_id: int, points: np.ndarray) -> np.ndarray:
        return self.spaces.p[element_id].values(points) @ self.p_coefficients(element_id)

    def pressure_gradient(self, element_id: int, points: np.ndarray) -> np.ndarray:
        grads = self.spaces.p[element_id].gradients(points)
        return np.einsum('pnk,n->pk', grads, self.p_coefficients(element_id))

    def velocity(self, element_id: int, points: np.ndarray) -> np.ndarray:
        return self.spaces.u[element_id].values(points) @ self.u_coefficients(element_id).T

    def normal_flux(self, edge_id: int, points: np.ndarray, t: np.ndarray) -> np.ndarray:
        """u^ . n_e on an edge."""
        if self.spaces.uhat_global is not None:
            cols = self.layout.columns(FIELD_UHAT_GLOBAL, 0, 0)
        else:
            cols = self.layout.columns(FIELD_UHAT, edge_id, 0)
        return _trace_values(self.spaces, edge_id, points, t) @ self.coefficients[cols]


def solve_darcy(scheme: AssembledScheme, rank_tol: Optional[float] = None) -> Tuple[DarcySolution, LeastSquaresSolution]:
    lsq = solve_least_squares(scheme.system, rank_tol=rank_tol)
    solution = DarcySolution(
        mesh=scheme.mesh,
        layout=scheme.layout,
        spaces=scheme.spaces,
        coefficients=lsq.x,
        elimination=dict(scheme.elimination),
    )
    return solution, lsq


def recover_velocity(scheme: AssembledScheme, coefficients: np.ndarray) -> Dict[int, np.ndarray]:
    """u-coefficients R(p) per element for the variants that eliminate u."""
    out: Dict[int, np.ndarray] = {}
    for eid, R in scheme.elimination.items():
        cp = coefficients[scheme.layout.columns(FIELD_P, eid, 0)]
        out[eid] = (R @ cp).reshape(2, -1)
    return out


def eval_darcy_solution(solution: DarcySolution, x, element_id: int) -> Tuple[float, np.ndarray, np.ndarray]:
    """(p, grad p, u) at one point of the hinted element."""
    pt = np.asarray(x, dtype=float).reshape(1, 2)
    el = solution.mesh.elements[element_id]
    if not el.bounds.contains(pt)[0]:
        raise PointLocationError(f"point {pt[0].tolist()} is not in element {element_id}")
    p = solution.pressure(element_id, pt)[0]
    gp = solution.pressure_gradient(element_id, pt)[0]
    u = solution.velocity(element_id, pt)[0]
    return float(p), gp, u
