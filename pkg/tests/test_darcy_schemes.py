import numpy as np
import pytest

from hdpg.darcy_schemes import (
    FIELD_P,
    FIELD_PHAT,
    FIELD_U,
    FIELD_UHAT,
    FIELD_UHAT_GLOBAL,
    DarcyProblem,
    DarcySchemeConfig,
    DarcySolution,
    DarcyVariant,
    assemble_darcy,
    assemble_hdg_darcy,
    assemble_hdpg_darcy,
    assemble_hdpg_darcy_flux2,
    assemble_hdpg_darcy_global_trace,
    assemble_hdpg_darcy_reduced,
    check_spd,
    eval_darcy_solution,
    project_boundary_trace,
    recover_velocity,
    solve_darcy,
)
from hdpg.errors import ConfigError, EliminationError, PointLocationError, ProblemDefinitionError
from hdpg.mesh import Domain, EdgeKind, build_uniform_mesh
from hdpg.metrics import darcy_errors
from hdpg.problems import UNIT_SQUARE, example1, example2
from hdpg.random_features import FeatureSpaceConfig, init_edge_space
from hdpg.system import residual_by_provenance

MESH3 = build_uniform_mesh(UNIT_SQUARE, 3, 3)


def _config(variant='hdpg', N=(6, 3, 10), k=3, **kw):
    return DarcySchemeConfig(N_u=N[0], N_uhat=N[1], N_p=N[2], k=k, variant=variant, r=0.6, seed=1, **kw)


@pytest.mark.parametrize('N, dof', [((6, 3, 10), 270), ((15, 5, 21), 579), ((28, 7, 36), 996), ((45, 9, 55), 1521)])
def test_hdpg_dof_formula(N, dof):
    scheme = assemble_hdpg_darcy(MESH3, example1(), _config(N=N, k=3))
    assert scheme.system.dof == dof


def test_hdpg_row_count_and_tags():
    scheme = assemble_hdpg_darcy(MESH3, example1(), _config())
    assert scheme.system.rows == 9 * 20 + 24 * 4 + 9 * 15
    tags = {p[0] for p in scheme.system.provenance}
    assert tags == {'darcy.velocity', 'darcy.divergence', 'darcy.trace'}
    assert scheme.layout.fields() == [FIELD_U, FIELD_P, FIELD_UHAT]


@pytest.mark.parametrize('N, dof', [((15, 5, 21), 309), ((28, 7, 36), 492), ((45, 9, 55), 711)])
def test_reduced_dof_formula(N, dof):
    scheme = assemble_hdpg_darcy_reduced(MESH3, example1(), _config('hdpg_reduced', N=N))
    assert scheme.system.dof == dof


def test_reduced_drops_velocity_columns():
    scheme = assemble_hdpg_darcy_reduced(MESH3, example1(), _config('hdpg_reduced'))
    assert scheme.system.dof == 162
    assert FIELD_U not in scheme.layout.fields()
    assert sorted(scheme.elimination) == list(range(9))
    assert all(R.shape == (12, 10) for R in scheme.elimination.values())
    assert all(0 < rank <= 12 for rank in scheme.elimination_rank.values())


def test_global_trace_block():
    scheme = assemble_hdpg_darcy_global_trace(MESH3, example1(), _config('hdpg_global_trace', N=(6, 72, 10)))
    assert scheme.system.dof == 9 * 22 + 72
    assert scheme.layout.field_dof(FIELD_UHAT_GLOBAL) == 72
    assert scheme.spaces.uhat_global is not None


def test_hdg_system_is_square():
    mesh = build_uniform_mesh(UNIT_SQUARE, 2, 3)
    scheme = assemble_hdg_darcy(mesh, example2(1), _config('hdg', N=(10, 4, 15), k=3))
    assert scheme.system.rows == scheme.system.dof == 6 * 15 + len(mesh.edges) * 4


def test_flux2_unknowns_live_on_interior_edges():
    scheme = assemble_hdpg_darcy_flux2(MESH3, example1(), _config('hdpg_flux2', tau=1.0))
    phat_blocks = [b for b in scheme.layout.blocks if b.field == FIELD_PHAT]
    assert {b.entity for b in phat_blocks} == {e.id for e in MESH3.interior_edges}
    assert sorted(scheme.boundary_trace) == [e.id for e in MESH3.boundary_edges]
    n_trace = sum(1 for p in scheme.system.provenance if p[0] == 'darcy.trace')
    assert n_trace == len(MESH3.interior_edges) * 5


def test_flux2_zero_boundary_data_projects_to_zero():
    p1 = example1()
    problem = DarcyProblem(K=p1.K, f=p1.f, g=lambda pts: np.zeros(len(pts)), domain=UNIT_SQUARE)
    scheme = assemble_hdpg_darcy_flux2(MESH3, problem, _config('hdpg_flux2'))
    for coeffs in scheme.boundary_trace.values():
        np.testing.assert_array_equal(coeffs, 0.0)


def test_boundary_projection_reproduces_span():
    edge = MESH3.edges[0]
    space = init_edge_space(FeatureSpaceConfig(N=4, r=1.0, seed=5), edge.id)
    c = np.array([0.3, -1.0, 2.0, 0.5])

    def g(pts):
        t = (pts[:, 0] - edge.start[0]) / edge.length
        return space.values(t) @ c

    coeffs = project_boundary_trace(space, edge, g, 6)
    t = np.linspace(0.0, 1.0, 7)
    np.testing.assert_allclose(space.values(t) @ coeffs, space.values(t) @ c, atol=1e-8)


def _projection_misfit(edge, g):
    space = init_edge_space(FeatureSpaceConfig(N=8, r=1.0, seed=2), edge.id)
    coeffs = project_boundary_trace(space, edge, g, 12)
    t = np.linspace(0.0, 1.0, 11)
    pts = edge.start + t[:, None] * (edge.end - edge.start)
    return np.abs(space.values(t) @ coeffs - g(pts)).max()


def test_boundary_projection_of_smooth_data():
    g = example1().g
    for edge in MESH3.boundary_edges:
        assert edge.kind is EdgeKind.BOUNDARY
        assert _projection_misfit(edge, g) < 1e-4

    # data that does not vanish on the top side
    top = [e for e in MESH3.boundary_edges if abs(e.start[1] - 1.0) < 1e-12 and abs(e.end[1] - 1.0) < 1e-12]
    assert len(top) == 3
    for edge in top:
        assert _projection_misfit(edge, lambda pts: np.exp(pts[:, 0] * pts[:, 1])) < 1e-4


def test_eta_only_changes_penalized_rows():
    a = assemble_hdpg_darcy(MESH3, example1(), _config(eta=0.0)).system
    b = assemble_hdpg_darcy(MESH3, example1(), _config(eta=1.0)).system
    assert a.provenance == b.provenance
    changed = {a.provenance[i][0] for i in np.nonzero(np.any(a.A != b.A, axis=1))[0]}
    assert changed <= {'darcy.velocity', 'darcy.trace'}
    np.testing.assert_array_equal(a.b, b.b)


def test_tau_only_changes_flux2_coupling_rows():
    a = assemble_hdpg_darcy_flux2(MESH3, example1(), _config('hdpg_flux2', tau=0.0)).system
    b = assemble_hdpg_darcy_flux2(MESH3, example1(), _config('hdpg_flux2', tau=2.0)).system
    assert a.provenance == b.provenance
    changed = {a.provenance[i][0] for i in np.nonzero(np.any(a.A != b.A, axis=1))[0]}
    assert changed and changed <= {'darcy.divergence', 'darcy.trace'}


def test_strict_rank_raises_on_underdetermined_elimination():
    cfg = _config('hdpg_reduced', N=(45, 3, 10), k=1, strict_rank=True)
    with pytest.raises(EliminationError):
        assemble_hdpg_darcy_reduced(MESH3, example1(), cfg)
    loose = assemble_hdpg_darcy_reduced(MESH3, example1(), _config('hdpg_reduced', N=(45, 3, 10), k=1))
    assert all(rank <= 6 for rank in loose.elimination_rank.values())


@pytest.mark.parametrize('kwargs', [dict(eta=-1.0), dict(tau=-0.5), dict(k=-1),
                                    dict(variant='hdpg_reduced', eta=1.0), dict(variant='nope')])
def test_invalid_configs(kwargs):
    kw = dict(N_u=3, N_uhat=2, N_p=6, k=1)
    kw.update(kwargs)
    with pytest.raises((ConfigError, ValueError)):
        DarcySchemeConfig(**kw)


def test_variant_mismatch_and_mesh_checks():
    with pytest.raises(ConfigError):
        assemble_hdpg_darcy_reduced(MESH3, example1(), _config('hdpg'))
    split = build_uniform_mesh(Domain(0.0, 1.0, -1.0, 1.0), 2, 2, divider_y=0.0)
    with pytest.raises(ConfigError):
        assemble_hdpg_darcy(split, example1(), _config())
    other = build_uniform_mesh(Domain(0.0, 2.0, 0.0, 1.0), 2, 2)
    with pytest.raises(ProblemDefinitionError):
        assemble_hdpg_darcy(other, example1(), _config())


@pytest.mark.parametrize('K', [[[1.0, 2.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, -1.0]], [[1.0, 0.0], [0.0, np.nan]], np.eye(3)])
def test_check_spd_rejects(K):
    with pytest.raises(ProblemDefinitionError):
        check_spd(np.asarray(K))


def test_solve_is_deterministic_and_accurate():
    mesh = build_uniform_mesh(UNIT_SQUARE, 2, 2)
    cfg = DarcySchemeConfig.from_degree(6, r=0.6, seed=3)
    problem = example1()
    s1 = assemble_darcy(mesh, problem, cfg)
    s2 = assemble_darcy(mesh, problem, cfg)
    np.testing.assert_array_equal(s1.system.A, s2.system.A)
    solution, lsq = solve_darcy(s1)
    assert lsq.numerical_rank > 0
    report = darcy_errors(solution, problem, mesh, 14)
    assert report.e0['p'] < 1e-2
    parts = residual_by_provenance(s1.system, lsq.x)
    assert np.sqrt(sum(v ** 2 for v in parts.values())) == pytest.approx(lsq.residual_norm, rel=1e-10)


def test_recovered_velocity_is_locally_optimal():
    mesh = build_uniform_mesh(UNIT_SQUARE, 2, 2)
    cfg = DarcySchemeConfig.from_degree(3, variant=DarcyVariant.REDUCED, r=0.6, seed=2)
    scheme = assemble_hdpg_darcy_reduced(mesh, example1(), cfg)
    solution, lsq = solve_darcy(scheme)
    recovered = recover_velocity(scheme, lsq.x)
    for eid, cu in recovered.items():
        np.testing.assert_allclose(cu, solution.u_coefficients(eid))

    # the first-equation block of the full scheme, rebuilt with the same seed
    full = assemble_hdpg_darcy(mesh, example1(), DarcySchemeConfig.from_degree(3, r=0.6, seed=2))
    rows = np.array([i for i, p in enumerate(full.system.provenance) if p == ('darcy.velocity', 0)])
    ucols = np.r_[full.layout.columns(FIELD_U, 0, 0), full.layout.columns(FIELD_U, 0, 1)]
    pcols = full.layout.columns(FIELD_P, 0, 0)
    A_u = full.system.A[np.ix_(rows, ucols)]
    A_p = full.system.A[rows, pcols]
    cp = lsq.x[scheme.layout.columns(FIELD_P, 0, 0)]
    best = np.linalg.norm(A_u @ recovered[0].ravel() + A_p @ cp)
    rng = np.random.default_rng(0)
    for _ in range(5):
        trial = recovered[0].ravel() + 1e-3 * rng.standard_normal(ucols.size)
        assert np.linalg.norm(A_u @ trial + A_p @ cp) >= best - 1e-12


def test_eval_darcy_solution():
    mesh = build_uniform_mesh(UNIT_SQUARE, 2, 2)
    scheme = assemble_hdpg_darcy(mesh, example1(), DarcySchemeConfig.from_degree(2, seed=1))
    x = np.zeros(scheme.layout.dof)
    sol = DarcySolution(mesh, scheme.layout, scheme.spaces, x)
    p, gp, u = eval_darcy_solution(sol, (0.2, 0.3), 0)
    assert p == 0.0 and not gp.any() and not u.any()

    x[scheme.layout.columns(FIELD_P, 0, 0).start] = 1.0
    sol = DarcySolution(mesh, scheme.layout, scheme.spaces, x)
    p, _, _ = eval_darcy_solution(sol, (0.2, 0.3), 0)
    assert p == pytest.approx(scheme.spaces.p[0].values(np.array([[0.2, 0.3]]))[0, 0])
    with pytest.raises(PointLocationError):
        eval_darcy_solution(sol, (0.9, 0.9), 0)
