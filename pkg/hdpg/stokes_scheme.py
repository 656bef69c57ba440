"""
Velocity-stress discretization of Stokes flow.

    sigma^d - 2 nu eps(u) = 0,   -div sigma = f,   div u = 0,   u = g on the boundary
    p = -tr(sigma) / 2

Unknowns per element: symmetric stress (components 11, 12, 22 over one
shared feature space) and velocity (2 components over one shared feature
space). Per edge: the stress-normal trace sigma^ n_e, 2 components over
one edge feature space.

The same row emitter serves the Brinkman scheme through an optional
inverse-permeability tensor added to the momentum rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from hdpg.errors import ConfigError, PointLocationError, ProblemDefinitionError
from hdpg.mesh import Domain, Edge, EdgeKind, Element, Mesh
from hdpg.poly_test_space import (
    SYM_UNITS,
    EdgePolyBasis,
    ElementPolyBasis,
    deviatoric,
    scalar_dim,
    strain_of_vector_features,
    symmetric_from_components,
    trace,
)
from hdpg.quadrature import edge_rule, gauss_line, tensor_rect
from hdpg.random_features import (
    EdgeFeatureSpace,
    ElementFeatureSpace,
    FeatureSpaceConfig,
    init_edge_space,
    init_element_space,
)
from hdpg.system import (
    AssembledScheme,
    Block,
    ColumnLayout,
    LeastSquaresSolution,
    SystemBuilder,
    build_layout,
    solve_least_squares,
)

Field = Callable[[np.ndarray], np.ndarray]

FIELD_SIGMA = 'stokes.sigma'
FIELD_U = 'stokes.u'
FIELD_SIGMAHAT = 'stokes.sigmahat'

# (E_a^d : E_b^d) for the symmetric units E11, E12, E22
DEVIATORIC_GRAM = np.einsum('aij,bij->ab', deviatoric(SYM_UNITS), deviatoric(SYM_UNITS))

COMPATIBILITY_TOL = 1e-10


def boundary_flux(g: Field, domain: Domain, n: int = 40) -> float:
    """Closed-boundary integral of g . n over the rectangle."""
    rule = gauss_line(n)
    s = rule.points
    total = 0.0
    sides = [
        (np.column_stack([domain.x_min + domain.width * s, np.full_like(s, domain.y_min)]), (0.0, -1.0), domain.width),
        (np.column_stack([np.full_like(s, domain.x_max), domain.y_min + domain.height * s]), (1.0, 0.0), domain.height),
        (np.column_stack([domain.x_min + domain.width * s, np.full_like(s, domain.y_max)]), (0.0, 1.0), domain.width),
        (np.column_stack([np.full_like(s, domain.x_min), domain.y_min + domain.height * s]), (-1.0, 0.0), domain.height),
    ]
    for pts, normal, length in sides:
        total += float(np.sum(rule.weights * length * (np.asarray(g(pts)) @ np.asarray(normal))))
    return total


@dataclass(frozen=True, eq=False)
class StokesProblem:
    nu: float
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
        if self.domain is not None and self.exact_u is not None:
            flux = boundary_flux(self.g, self.domain)
            if abs(flux) > COMPATIBILITY_TOL:
                raise ProblemDefinitionError(f"boundary data violates the zero net flux condition: {flux:.3e}")


@dataclass(frozen=True)
class StokesSchemeConfig:
    N_sigma: int
    N_sigmahat: int
    N_u: int
    k: int
    eta: float = 0.0
    r: float = 1.0
    seed: int = 0
    quad_order: Optional[int] = None
    shared_weights: bool = False

    def __post_init__(self):
        if min(self.N_sigma, self.N_sigmahat, self.N_u) < 1:
            raise ConfigError(
                f"neuron counts must be >= 1, got ({self.N_sigma}, {self.N_sigmahat}, {self.N_u})"
            )
        if self.k < 0:
            raise ConfigError(f"test degree must be >= 0, got {self.k}")
        if self.eta < 0:
            raise ConfigError(f"eta must be >= 0, got {self.eta}")

    @classmethod
    def from_degree(cls, k: int, **kwargs) -> 'StokesSchemeConfig':
        """N_sigma = dim P_k, N_sigmahat = k + 1, N_u = dim P_{k+1}."""
        kwargs.setdefault('N_sigma', scalar_dim(k))
        kwargs.setdefault('N_sigmahat', k + 1)
        kwargs.setdefault('N_u', scalar_dim(k + 1))
        return cls(k=k, **kwargs)

    @property
    def n_quad(self) -> int:
        return self.quad_order if self.quad_order is not None else self.k + 5

    def feature_config(self, N: int) -> FeatureSpaceConfig:
        return FeatureSpaceConfig(N=N, r=self.r, seed=self.seed, shared_weights=self.shared_weights)


@dataclass(eq=False)
class StokesSpaces:
    sigma: Dict[int, ElementFeatureSpace]
    u: Dict[int, ElementFeatureSpace]
    sigmahat: Dict[int, EdgeFeatureSpace] = field(default_factory=dict)


def init_stokes_spaces(mesh: Mesh, elements: Sequence[Element], edges: Sequence[Edge],
                       config: StokesSchemeConfig) -> StokesSpaces:
    cs = config.feature_config(config.N_sigma)
    cu = config.feature_config(config.N_u)
    ch = config.feature_config(config.N_sigmahat)
    return StokesSpaces(
        sigma={el.id: init_element_space(cs, el.id, mesh.domain, stream=FIELD_SIGMA) for el in elements},
        u={el.id: init_element_space(cu, el.id, mesh.domain, stream=FIELD_U) for el in elements},
        sigmahat={e.id: init_edge_space(ch, e.id, stream=FIELD_SIGMAHAT) for e in edges},
    )


def stokes_element_blocks(elements: Sequence[Element], config: StokesSchemeConfig) -> List[Block]:
    blocks: List[Block] = []
    for el in elements:
        blocks.extend(Block(FIELD_SIGMA, el.id, a, config.N_sigma) for a in range(3))
        blocks.extend(Block(FIELD_U, el.id, c, config.N_u) for c in range(2))
    return blocks


def stokes_edge_blocks(edges: Sequence[Edge], config: StokesSchemeConfig) -> List[Block]:
    return [Block(FIELD_SIGMAHAT, e.id, c, config.N_sigmahat) for e in edges for c in range(2)]


def _stacked(n_blocks: int, row: int, mat: np.ndarray) -> np.ndarray:
    """Place mat into row block `row` of a zero matrix with n_blocks row blocks."""
    n = mat.shape[0]
    out = np.zeros((n * n_blocks, mat.shape[1]))
    out[row * n:(row + 1) * n] = mat
    return out


def emit_stokes_rows(builder: SystemBuilder, mesh: Mesh, elements: Sequence[Element], edges: Sequence[Edge],
                     nu: float, f: Field, g: Field, config: StokesSchemeConfig, spaces: StokesSpaces,
                     inv_kappa: Optional[np.ndarray] = None, mean_trace_row: bool = True) -> None:
    """
    Rows of the velocity-stress scheme on a set of elements and their edges.

    inv_kappa adds -nu (kappa^-1 u, v) to the momentum rows. Interface edges
    get no edge rows. With mean_trace_row, one extra row asks for
    int tr(sigma) = 0 over the given elements.
    """
    eta = config.eta
    rule = gauss_line(config.n_quad)
    element_ids = {el.id for el in elements}
    mean_terms = []

    for el in elements:
        quad = tensor_rect(rule, el)
        pts, w = quad.points, quad.weights
        ss, su = spaces.sigma[el.id], spaces.u[el.id]
        T = ElementPolyBasis(config.k, el)
        V = ElementPolyBasis(config.k + 1, el)
        skeys = [(FIELD_SIGMA, el.id, a) for a in range(3)]
        ukeys = [(FIELD_U, el.id, c) for c in range(2)]

        phi_s = ss.values(pts)
        phi_u = su.values(pts)
        wpsi = T.values(pts) * w[:, None]
        nt = wpsi.shape[1]

        # (1/2nu)(sigma^d, tau^d) + eta h_K ((sigma - sigma^) n, tau n) - (eps(u), tau)
        Mss = wpsi.T @ phi_s
        A_s = [np.vstack([DEVIATORIC_GRAM[a, b] / (2.0 * nu) * Mss for a in range(3)]) for b in range(3)]
        strain_u = np.einsum('pdixy,axy->pdia', strain_of_vector_features(su, pts), SYM_UNITS)
        A_u = [np.vstack([-(wpsi.T @ strain_u[:, d, :, a]) for a in range(3)]) for d in range(2)]
        const_terms = list(zip(skeys, A_s)) + list(zip(ukeys, A_u))

        hat_terms_const = []
        hat_terms_mom = []

        # -(sigma, eps(v)) + <sigma^ n, v> [- nu (kappa^-1 u, v)] = -(f, v)
        psi_v = V.values(pts)
        nv = psi_v.shape[1]
        wv = psi_v * w[:, None]
        strain_v = np.einsum('pcjxy,bxy->pcjb', strain_of_vector_features(V, pts), SYM_UNITS)
        B_s = [np.vstack([-((strain_v[:, c, :, b] * w[:, None]).T @ phi_s) for c in range(2)]) for b in range(3)]
        mom_terms = list(zip(skeys, B_s))
        if inv_kappa is not None:
            Mvu = wv.T @ phi_u
            for d in range(2):
                mat = np.vstack([-nu * inv_kappa[c, d] * Mvu for c in range(2)])
                mom_terms.append((ukeys[d], mat))
        fv = np.asarray(f(pts), dtype=float)
        rhs_mom = np.concatenate([-(wv.T @ fv[:, c]) for c in range(2)])

        for eid in el.edge_ids:
            edge = mesh.edges[eid]
            s = mesh.orientation(el.id, eid)
            ne = np.asarray(edge.normal)
            En = SYM_UNITS @ ne  # (3, 2): E_a n_e
            epts, ew, t = edge_rule(rule, edge)
            chi = spaces.sigmahat[eid].values(t)
            hkeys = [(FIELD_SIGMAHAT, eid, c) for c in range(2)]
            psi_ve = V.values(epts) * ew[:, None]
            Mh = psi_ve.T @ chi
            for c in range(2):
                hat_terms_mom.append((hkeys[c], _stacked(2, c, s * Mh)))
            if eta > 0:
                psi_te = T.values(epts) * ew[:, None]
                Me = psi_te.T @ ss.values(epts)
                Mth = psi_te.T @ chi
                for b in range(3):
                    mat = np.vstack([eta * el.h_K * float(En[a] @ En[b]) * Me for a in range(3)])
                    hat_terms_const.append((skeys[b], mat))
                for c in range(2):
                    mat = np.vstack([-eta * el.h_K * En[a, c] * Mth for a in range(3)])
                    hat_terms_const.append((hkeys[c], mat))

        builder.add_rows('stokes.constitutive', el.id, const_terms + hat_terms_const, np.zeros(3 * nt))
        builder.add_rows('stokes.momentum', el.id, mom_terms + hat_terms_mom, rhs_mom)

        if mean_trace_row:
            tr_row = (w @ phi_s)[None, :]
            mean_terms.append((skeys[0], tr_row))
            mean_terms.append((skeys[2], tr_row))

    for edge in edges:
        if edge.kind is EdgeKind.INTERFACE:
            continue
        epts, ew, t = edge_rule(rule, edge)
        ne = np.asarray(edge.normal)
        En = SYM_UNITS @ ne
        wtheta = EdgePolyBasis(config.k, edge).values(t) * ew[:, None]
        chi = spaces.sigmahat[edge.id].values(t)
        hkeys = [(FIELD_SIGMAHAT, edge.id, c) for c in range(2)]
        terms = []
        rhs = np.zeros(2 * wtheta.shape[1])
        for K in edge.neighbors:
            if K not in element_ids:
                continue
            el = mesh.elements[K]
            s = mesh.orientation(K, edge.id)
            Mu = wtheta.T @ spaces.u[K].values(epts)
            for c in range(2):
                terms.append(((FIELD_U, K, c), _stacked(2, c, s * Mu)))
            if eta > 0:
                Ms = wtheta.T @ spaces.sigma[K].values(epts)
                for b in range(3):
                    mat = np.vstack([-eta * el.h_K * En[b, c] * Ms for c in range(2)])
                    terms.append(((FIELD_SIGMA, K, b), mat))
                Mh = wtheta.T @ chi
                for c in range(2):
                    terms.append((hkeys[c], _stacked(2, c, eta * el.h_K * Mh)))
            if edge.kind is EdgeKind.BOUNDARY:
                gv = np.asarray(g(epts), dtype=float)
                rhs += s * np.concatenate([wtheta.T @ gv[:, c] for c in range(2)])
        builder.add_rows('stokes.trace', edge.id, terms, rhs)

    if mean_trace_row and mean_terms:
        builder.add_rows('stokes.mean_trace', 0, mean_terms, np.zeros(1))


def assemble_stokes_like(mesh: Mesh, nu: float, f: Field, g: Field, domain: Optional[Domain],
                         config: StokesSchemeConfig, inv_kappa: Optional[np.ndarray] = None) -> AssembledScheme:
    if mesh.divider_y is not None:
        raise ConfigError('single-domain assembly needs a mesh without a divider')
    if domain is not None:
        m = mesh.domain
        if not np.allclose([domain.x_min, domain.x_max, domain.y_min, domain.y_max],
                           [m.x_min, m.x_max, m.y_min, m.y_max]):
            raise ProblemDefinitionError(f"mesh domain {m} does not match problem domain {domain}")
    elements, edges = list(mesh.elements), list(mesh.edges)
    spaces = init_stokes_spaces(mesh, elements, edges, config)
    layout = build_layout(stokes_element_blocks(elements, config) + stokes_edge_blocks(edges, config))
    builder = SystemBuilder(layout)
    emit_stokes_rows(builder, mesh, elements, edges, nu, f, g, config, spaces, inv_kappa=inv_kappa)
    return AssembledScheme(system=builder.build(), layout=layout, mesh=mesh, spaces=spaces)


def assemble_hdpg_stokes(mesh: Mesh, problem: StokesProblem, config: StokesSchemeConfig) -> AssembledScheme:
    return assemble_stokes_like(mesh, problem.nu, problem.f, problem.g, problem.domain, config)


# -- solutions --------------------------------------------------------------

@dataclass(eq=False)
class StokesSolution:
    mesh: Mesh
    layout: ColumnLayout
    spaces: StokesSpaces

    coefficients: np.ndarray

    def sigma_coefficients(self, element_id: int) -> np.ndarray:
        """(3, N_sigma)"""
        return np.vstack([self.coefficients[self.layout.columns(FIELD_SIGMA, element_id, a)] for a in range(3)])

    def u_coefficients(self, element_id: int) -> np.ndarray:
        """(2, N_u)"""
        return np.vstack([self.coefficients[self.layout.columns(FIELD_U, element_id, c)] for c in range(2)])

    def sigma(self, element_id: int, points: np.ndarray) -> np.ndarray:
        """(P, 2, 2) symmetric stress."""
        comps = self.spaces.sigma[element_id].values(points) @ self.sigma_coefficients(element_id).T
        return symmetric_from_components(comps)

    def velocity(self, element_id: int, points: np.ndarray) -> np.ndarray:
        return self.spaces.u[element_id].values(points) @ self.u_coefficients(element_id).T

    def velocity_gradient(self, element_id: int, points: np.ndarray) -> np.ndarray:
        """(P, 2, 2) with [p, c, k] = d u_c / d x_k"""
        grads = self.spaces.u[element_id].gradients(points)
        return np.einsum('pnk,cn->pck', grads, self.u_coefficients(element_id))

    def pressure(self, element_id: int, points: np.ndarray) -> np.ndarray:
        return -0.5 * trace(self.sigma(element_id, points))

    def stress_trace(self, edge_id: int, t: np.ndarray) -> np.ndarray:
        """(P, 2) values of sigma^ n_e on an edge."""
        chi = self.spaces.sigmahat[edge_id].values(t)
        coeffs = np.vstack([self.coefficients[self.layout.columns(FIELD_SIGMAHAT, edge_id, c)] for c in range(2)])
        return chi @ coeffs.T


def solve_stokes(scheme: AssembledScheme, rank_tol: Optional[float] = None) -> Tuple[StokesSolution, LeastSquaresSolution]:
    lsq = solve_least_squares(scheme.system, rank_tol=rank_tol)
    return StokesSolution(scheme.mesh, scheme.layout, scheme.spaces, lsq.x), lsq


def postprocess_pressure(solution: StokesSolution) -> Callable[[int, np.ndarray], np.ndarray]:
    """Pressure evaluator p = -tr(sigma) / 2 over (element id, points)."""
    return solution.pressure


def eval_stokes_solution(solution: StokesSolution, x, element_id: int) -> Tuple[np.ndarray, np.ndarray, float]:
    """(sigma, u, p) at one point of the hinted element."""
    pt = np.asarray(x, dtype=float).reshape(1, 2)
    if not solution.mesh.elements[element_id].bounds.contains(pt)[0]:
        raise PointLocationError(f"point {pt[0].tolist()} is not in element {element_id}")
    sig = solution.sigma(element_id, pt)[0]
    return sig, solution.velocity(element_id, pt)[0], float(-0.5 * trace(sig))
