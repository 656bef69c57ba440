"""
Manufactured test problems and the parameter grids of the reference runs.

Example 1  Darcy, anisotropic K = [[10, 2], [2, 100]] on (0,1)^2,
           p = x(1-x) y(1-y) exp(xy)
Example 2  Darcy, K = I on (0,1)^2, p = 1/m sum_i sin(2^i pi x) sin(2^i pi y)
Example 3  Stokes on (0,1)^2, u = (sin^2(pi x) sin(2 pi y), -sin(2 pi x) sin^2(pi y)),
           p = cos(pi x) cos(pi y)
Example 4  Stokes (0,pi)^2 over Darcy (0,pi)x(-pi,0), K = alpha I, kappa = 1,
           Beavers-Joseph law on y = 0
Example 5  Brinkman on (0,1)^2, kappa^-1 = alpha I, nu = 1

Sources are closed forms derived by hand:
    Darcy     f = -div(K grad p), u = -K grad p
    Stokes    f = -nu lap u + grad p, sigma = 2 nu eps(u) - p I
    Brinkman  Stokes f + nu kappa^-1 u

Fields take (P, 2) points and return (P,), (P, 2) or (P, 2, 2) arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional

import numpy as np

from hdpg.config import DEFAULT_SEEDS, RunConfig
from hdpg.coupled_schemes import BrinkmanProblem, CoupledProblem, InterfaceLaw
from hdpg.darcy_schemes import DarcyProblem
from hdpg.errors import ConfigError, ProblemDefinitionError
from hdpg.mesh import Domain
from hdpg.stokes_scheme import StokesProblem

Field = Callable[[np.ndarray], np.ndarray]

UNIT_SQUARE = Domain(0.0, 1.0, 0.0, 1.0)
EX4_DOMAIN = Domain(0.0, math.pi, -math.pi, math.pi)
EX4_STOKES = Domain(0.0, math.pi, 0.0, math.pi)
EX4_DARCY = Domain(0.0, math.pi, -math.pi, 0.0)

EX1_K = np.array([[10.0, 2.0], [2.0, 100.0]])


@dataclass(frozen=True, eq=False)
class FieldSet:
    """Exact fields of one manufactured solution on one domain."""
    domain: Domain
    f: Field
    g: Field
    exact_p: Optional[Field] = None
    exact_grad_p: Optional[Field] = None
    exact_u: Optional[Field] = None
    exact_grad_u: Optional[Field] = None
    exact_sigma: Optional[Field] = None


def _xy(pts: np.ndarray):
    pts = np.atleast_2d(pts)
    return pts[:, 0], pts[:, 1]


def _stress(nu: float, grad_u: Field, p: Field) -> Field:
    def sigma(pts):
        G = grad_u(pts)
        S = nu * (G + np.swapaxes(G, -1, -2))
        pv = p(pts)
        S[:, 0, 0] -= pv
        S[:, 1, 1] -= pv
        return S
    return sigma


def _darcy_velocity(K: np.ndarray, grad_p: Field) -> Field:
    return lambda pts: -grad_p(pts) @ K.T


# -- Example 1 --------------------------------------------------------------

def _ex1_fields() -> FieldSet:
    K = EX1_K

    def p(pts):
        x, y = _xy(pts)
        return x * (1 - x) * y * (1 - y) * np.exp(x * y)

    def grad_p(pts):
        x, y = _xy(pts)
        a, b, E = x * (1 - x), y * (1 - y), np.exp(x * y)
        return np.stack([b * E * ((1 - 2 * x) + a * y), a * E * ((1 - 2 * y) + b * x)], axis=-1)

    def f(pts):
        x, y = _xy(pts)
        a, b, E = x * (1 - x), y * (1 - y), np.exp(x * y)
        da, db = 1 - 2 * x, 1 - 2 * y
        pxx = b * E * (2 * da * y + a * y ** 2 - 2)
        pyy = a * E * (2 * db * x + b * x ** 2 - 2)
        pxy = E * ((db + b * x) * (da + a * y) + a * b)
        return -(K[0, 0] * pxx + (K[0, 1] + K[1, 0]) * pxy + K[1, 1] * pyy)

    return FieldSet(domain=UNIT_SQUARE, f=f, g=p, exact_p=p, exact_grad_p=grad_p,
                    exact_u=_darcy_velocity(K, grad_p))


def example1() -> DarcyProblem:
    fs = _ex1_fields()
    return DarcyProblem(K=EX1_K, f=fs.f, g=fs.g, domain=fs.domain,
                        exact_p=fs.exact_p, exact_grad_p=fs.exact_grad_p, exact_u=fs.exact_u)


# -- Example 2 --------------------------------------------------------------

def _ex2_fields(m: int) -> FieldSet:
    omegas = [2.0 ** i * math.pi for i in range(1, m + 1)]

    def p(pts):
        x, y = _xy(pts)
        return sum(np.sin(w * x) * np.sin(w * y) for w in omegas) / m

    def grad_p(pts):
        x, y = _xy(pts)
        gx = sum(w * np.cos(w * x) * np.sin(w * y) for w in omegas) / m
        gy = sum(w * np.sin(w * x) * np.cos(w * y) for w in omegas) / m
        return np.stack([gx, gy], axis=-1)

    def f(pts):
        x, y = _xy(pts)
        return sum(2.0 * w ** 2 * np.sin(w * x) * np.sin(w * y) for w in omegas) / m

    return FieldSet(domain=UNIT_SQUARE, f=f, g=p, exact_p=p, exact_grad_p=grad_p,
                    exact_u=_darcy_velocity(np.eye(2), grad_p))


def example2(m: int = 1) -> DarcyProblem:
    if m < 1:
        raise ProblemDefinitionError(f"m must be a positive integer, got {m}")
    fs = _ex2_fields(m)
    return DarcyProblem(K=np.eye(2), f=fs.f, g=fs.g, domain=fs.domain,
                        exact_p=fs.exact_p, exact_grad_p=fs.exact_grad_p, exact_u=fs.exact_u)


# -- Example 3 --------------------------------------------------------------

def _ex3_fields(nu: float) -> FieldSet:
    P = math.pi

    def u(pts):
        x, y = _xy(pts)
        return np.stack([np.sin(P * x) ** 2 * np.sin(2 * P * y),
                         -np.sin(2 * P * x) * np.sin(P * y) ** 2], axis=-1)

    def grad_u(pts):
        x, y = _xy(pts)
        G = np.empty((x.shape[0], 2, 2))
        G[:, 0, 0] = P * np.sin(2 * P * x) * np.sin(2 * P * y)
        G[:, 0, 1] = 2 * P * np.sin(P * x) ** 2 * np.cos(2 * P * y)
        G[:, 1, 0] = -2 * P * np.cos(2 * P * x) * np.sin(P * y) ** 2
        G[:, 1, 1] = -P * np.sin(2 * P * x) * np.sin(2 * P * y)
        return G

    def p(pts):
        x, y = _xy(pts)
        return np.cos(P * x) * np.cos(P * y)

    def f(pts):
        x, y = _xy(pts)
        lap1 = 2 * P ** 2 * np.sin(2 * P * y) * (2 * np.cos(2 * P * x) - 1)
        lap2 = -2 * P ** 2 * np.sin(2 * P * x) * (2 * np.cos(2 * P * y) - 1)
        px = -P * np.sin(P * x) * np.cos(P * y)
        py = -P * np.cos(P * x) * np.sin(P * y)
        return np.stack([-nu * lap1 + px, -nu * lap2 + py], axis=-1)

    return FieldSet(domain=UNIT_SQUARE, f=f, g=u, exact_p=p, exact_u=u, exact_grad_u=grad_u,
                    exact_sigma=_stress(nu, grad_u, p))


def example3(nu: float = 0.1) -> StokesProblem:
    fs = _ex3_fields(nu)
    return StokesProblem(nu=nu, f=fs.f, g=fs.g, domain=fs.domain, exact_u=fs.exact_u,
                         exact_grad_u=fs.exact_grad_u, exact_sigma=fs.exact_sigma, exact_p=fs.exact_p)


# -- Example 4 --------------------------------------------------------------

def _ex4_stokes_fields(alpha: float, nu: float) -> FieldSet:
    def u(pts):
        x, y = _xy(pts)
        return alpha * np.stack([np.sin(2 * y) * np.cos(x), (np.sin(y) ** 2 - 2) * np.sin(x)], axis=-1)

    def grad_u(pts):
        x, y = _xy(pts)
        G = np.empty((x.shape[0], 2, 2))
        G[:, 0, 0] = -alpha * np.sin(2 * y) * np.sin(x)
        G[:, 0, 1] = 2 * alpha * np.cos(2 * y) * np.cos(x)
        G[:, 1, 0] = alpha * (np.sin(y) ** 2 - 2) * np.cos(x)
        G[:, 1, 1] = alpha * np.sin(2 * y) * np.sin(x)
        return G

    def p(pts):
        x, y = _xy(pts)
        return np.sin(2 * x) * np.sin(2 * y)

    def f(pts):
        x, y = _xy(pts)
        lap1 = -5 * alpha * np.sin(2 * y) * np.cos(x)
        lap2 = alpha * np.sin(x) * (2 * np.cos(2 * y) - np.sin(y) ** 2 + 2)
        px = 2 * np.cos(2 * x) * np.sin(2 * y)
        py = 2 * np.sin(2 * x) * np.cos(2 * y)
        return np.stack([-nu * lap1 + px, -nu * lap2 + py], axis=-1)

    return FieldSet(domain=EX4_STOKES, f=f, g=u, exact_p=p, exact_u=u, exact_grad_u=grad_u,
                    exact_sigma=_stress(nu, grad_u, p))


def _ex4_darcy_fields(alpha: float) -> FieldSet:
    c = 2.0 / math.pi

    def p(pts):
        x, y = _xy(pts)
        return c * y * (math.pi - y) * np.sin(x)

    def grad_p(pts):
        x, y = _xy(pts)
        return np.stack([c * y * (math.pi - y) * np.cos(x), c * (math.pi - 2 * y) * np.sin(x)], axis=-1)

    def f(pts):
        x, y = _xy(pts)
        return alpha * c * np.sin(x) * (y * (math.pi - y) + 2)

    return FieldSet(domain=EX4_DARCY, f=f, g=p, exact_p=p, exact_grad_p=grad_p,
                    exact_u=_darcy_velocity(alpha * np.eye(2), grad_p))


def example4(alpha: float = 0.01, nu: float = 0.1, law: InterfaceLaw = InterfaceLaw.BJ) -> CoupledProblem:
    if not alpha > 0:
        raise ProblemDefinitionError(f"alpha must be > 0, got {alpha}")
    s = _ex4_stokes_fields(alpha, nu)
    d = _ex4_darcy_fields(alpha)
    stokes = StokesProblem(nu=nu, f=s.f, g=s.g, exact_u=s.exact_u, exact_grad_u=s.exact_grad_u,
                           exact_sigma=s.exact_sigma, exact_p=s.exact_p)
    darcy = DarcyProblem(K=alpha * np.eye(2), f=d.f, g=d.g, exact_p=d.exact_p,
                         exact_grad_p=d.exact_grad_p, exact_u=d.exact_u)
    return CoupledProblem(domain=EX4_DOMAIN, divider_y=0.0, stokes=stokes, darcy=darcy,
                          kappa=1.0, law=law, alpha=alpha)


# -- Example 5 --------------------------------------------------------------

def _ex5_fields(alpha: float) -> FieldSet:
    nu = 1.0

    def A(z):
        return z ** 2 * (z - 1) ** 2

    def dA(z):
        return 2 * z * (z - 1) * (2 * z - 1)

    def d2A(z):
        return 12 * z ** 2 - 12 * z + 2

    def B(z):
        return z * (z - 1) * (2 * z - 1)

    def dB(z):
        return 6 * z ** 2 - 6 * z + 1

    def d2B(z):
        return 12 * z - 6

    def u(pts):
        x, y = _xy(pts)
        return np.stack([A(x) * B(y), -B(x) * A(y)], axis=-1)

    def grad_u(pts):
        x, y = _xy(pts)
        G = np.empty((x.shape[0], 2, 2))
        G[:, 0, 0] = dA(x) * B(y)
        G[:, 0, 1] = A(x) * dB(y)
        G[:, 1, 0] = -dB(x) * A(y)
        G[:, 1, 1] = -B(x) * dA(y)
        return G

    def p(pts):
        x, y = _xy(pts)
        return (2 * x - 1) * (2 * y - 1)

    def f(pts):
        x, y = _xy(pts)
        lap1 = d2A(x) * B(y) + A(x) * d2B(y)
        lap2 = -(d2B(x) * A(y) + B(x) * d2A(y))
        uu = u(pts)
        return np.stack([-nu * lap1 + 2 * (2 * y - 1) + nu * alpha * uu[:, 0],
                         -nu * lap2 + 2 * (2 * x - 1) + nu * alpha * uu[:, 1]], axis=-1)

    return FieldSet(domain=UNIT_SQUARE, f=f, g=u, exact_p=p, exact_u=u, exact_grad_u=grad_u,
                    exact_sigma=_stress(nu, grad_u, p))


def example5(alpha: float = 1.0) -> BrinkmanProblem:
    if not alpha > 0:
        raise ProblemDefinitionError(f"alpha must be > 0, got {alpha}")
    fs = _ex5_fields(alpha)
    return BrinkmanProblem(nu=1.0, inv_kappa=alpha * np.eye(2), f=fs.f, g=fs.g, domain=fs.domain,
                           exact_u=fs.exact_u, exact_grad_u=fs.exact_grad_u,
                           exact_sigma=fs.exact_sigma, exact_p=fs.exact_p)


# -- finite-difference checks -----------------------------------------------

def _fd_divergence(field: Field, pts: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central difference of sum_k d_k F[..., k] for a (P, ..., 2) field."""
    out = 0.0
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        d = (-field(pts + 2 * e) + 8 * field(pts + e) - 8 * field(pts - e) + field(pts - 2 * e)) / (12 * h)
        out = out + d[..., k]
    return out


def darcy_strong_residual(problem: DarcyProblem, pts: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """f - div(u) with u = -K grad p, the divergence taken by finite differences."""
    u = _darcy_velocity(problem.K, problem.exact_grad_p)
    return problem.f(pts) - _fd_divergence(u, pts, h)


def stokes_strong_residual(problem, pts: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """
    f - (-div sigma + nu kappa^-1 u) with a finite-difference divergence.
    Works for StokesProblem and BrinkmanProblem.
    """
    residual = problem.f(pts) + _fd_divergence(problem.exact_sigma, pts, h)
    inv_kappa = getattr(problem, 'inv_kappa', None)
    if inv_kappa is not None:
        residual = residual - problem.nu * problem.exact_u(pts) @ np.asarray(inv_kappa).T
    return residual


# -- reference run tables ---------------------------------------------------

EX1_NEURONS = ((6, 3, 10), (15, 5, 21), (28, 7, 36), (45, 9, 55))
EX1_GLOBAL_NEURONS = ((6, 72, 10), (15, 120, 21), (28, 168, 36), (45, 216, 55))
EX1_DEGREES = (3, 4, 5, 6, 7, 8)

# (nx, r) per mesh
EX2_M3_MESHES = ((2, 2.1), (4, 1.9), (6, 1.6), (8, 1.6))
# (m, nx, r)
EX2_BY_M = ((1, 8, 0.9), (2, 8, 1.1), (3, 16, 1.1), (4, 16, 1.2), (5, 32, 1.1), (6, 32, 1.3))
EX3_MESHES = ((2, 1.5), (3, 1.2), (4, 0.9))
EX3_NUS = (0.1, 0.01, 0.001)
# (alpha, r_darcy, r_stokes)
EX4_CASES = ((0.01, 0.7, 0.6), (100.0, 1.3, 1.5))
EX4_NUS = (0.001, 0.1)
EX5_MESHES = ((2, 0.8), (3, 0.9), (4, 0.9))
EX5_ALPHAS = (1e-3, 1.0, 1e3)
FIG2_MESHES = ((2, 0.8), (3, 0.6), (4, 0.8))


def _table1(scheme: str, eta: float, neurons=EX1_NEURONS) -> List[RunConfig]:
    return [
        RunConfig(example=1, scheme=scheme, nx=3, ny=3, k0=k, k=k, N_u=nu_, N_uhat=nh, N_p=np_,
                  r=0.6, eta=eta)
        for nu_, nh, np_ in neurons
        for k in EX1_DEGREES
    ]


def _preset_rows(table_id: str) -> List[RunConfig]:
    if table_id == '1':
        return _table1('hdpg', 0.0)
    if table_id == '1s':
        return _table1('hdpg', 1.0)
    if table_id == '2':
        return _table1('hdpg_reduced', 0.0)
    if table_id == '3':
        return _table1('hdpg_global_trace', 0.0, EX1_GLOBAL_NEURONS)
    if table_id == '5':
        return [
            RunConfig(example=2, scheme='hdg', m=3, nx=n, ny=n, k0=k0, r=r)
            for n, r in EX2_M3_MESHES
            for k0 in range(2, 11)
        ]
    if table_id == '6':
        return [RunConfig(example=2, scheme='hdg', m=m, nx=n, ny=n, k0=5, r=r) for m, n, r in EX2_BY_M]
    if table_id == 'ex3':
        return [
            RunConfig(example=3, scheme='stokes', nu=nu, nx=n, ny=n, k0=k0, r=r)
            for nu in EX3_NUS
            for n, r in EX3_MESHES
            for k0 in range(4, 11)
        ]
    if table_id == 'ex4':
        return [
            RunConfig(example=4, scheme='stokes_darcy', alpha=alpha, nu=nu, nx=3, ny=6, k0=k0,
                      r_darcy=rd, r_stokes=rs, M=30, law='BJ')
            for alpha, rd, rs in EX4_CASES
            for nu in EX4_NUS
            for k0 in range(4, 10)
        ]
    if table_id == 'ex5':
        return [
            RunConfig(example=5, scheme='brinkman', alpha=alpha, nx=n, ny=n, k0=k0, r=r)
            for alpha in EX5_ALPHAS
            for n, r in EX5_MESHES
            for k0 in range(3, 9)
        ]
    if table_id == 'fig2':
        return [
            RunConfig(example=1, scheme='hdpg', nx=n, ny=n, k0=k, k=k, r=r)
            for n, r in FIG2_MESHES
            for k in range(1, 6)
        ]
    raise ConfigError(f"unknown table {table_id!r}; expected one of {', '.join(PRESET_TABLES)}")


PRESET_TABLES = ('1', '1s', '2', '3', '5', '6', 'ex3', 'ex4', 'ex5', 'fig2')


def preset_run_table(table_id, seeds=DEFAULT_SEEDS) -> List[RunConfig]:
    """Parameter rows of one reference table, each tagged with the table id."""
    tid = str(table_id).strip().lower()
    if tid.startswith('table'):
        tid = tid[len('table'):]
    return [replace(row, seeds=tuple(seeds), table=tid) for row in _preset_rows(tid)]


def build_problem(config: RunConfig):
    """Problem object for a RunConfig's example and physical parameters."""
    if config.example == 1:
        return example1()
    if config.example == 2:
        return example2(config.m)
    if config.example == 3:
        return example3(config.nu if config.nu is not None else 0.1)
    if config.example == 4:
        return example4(
            alpha=config.alpha if config.alpha is not None else 0.01,
            nu=config.nu if config.nu is not None else 0.1,
            law=config.law,
        )
    return example5(config.alpha if config.alpha is not None else 1.0)


EXAMPLE_DOMAINS: Dict[int, Domain] = {1: UNIT_SQUARE, 2: UNIT_SQUARE, 3: UNIT_SQUARE, 4: EX4_DOMAIN, 5: UNIT_SQUARE}
