import math

import numpy as np
import pytest

from hdpg.coupled_schemes import (
    INTERFACE_TAGS,
    CoupledProblem,
    ExactCoupledFields,
    InterfaceConfig,
    InterfaceLaw,
    assemble_stokes_darcy,
    interface_points,
    interface_residuals,
    solve_coupled,
)
from hdpg.darcy_schemes import FIELD_U as DARCY_U, DarcySchemeConfig
from hdpg.errors import ConfigError, MeshAlignmentError, PlacementError, ProblemDefinitionError
from hdpg.mesh import build_uniform_mesh
from hdpg.metrics import coupled_errors
from hdpg.problems import EX4_DOMAIN, example4
from hdpg.stokes_scheme import StokesSchemeConfig
from hdpg.system import residual_by_provenance

MESH = build_uniform_mesh(EX4_DOMAIN, 3, 6, divider_y=0.0)


def _assemble(law='BJ', M=5, mesh=MESH, darcy_variant='hdpg'):
    problem = example4(alpha=0.01, nu=0.1, law=law)
    scfg = StokesSchemeConfig.from_degree(2, r=0.6, seed=1)
    dcfg = DarcySchemeConfig.from_degree(1, variant=darcy_variant, r=0.7, seed=1)
    return problem, assemble_stokes_darcy(mesh, problem, scfg, dcfg, InterfaceConfig(M=M))


def test_interface_points_geometry():
    points = interface_points(MESH, InterfaceConfig(M=30))
    assert len(points) == 30
    xs = np.array([p.x[0] for p in points])
    assert np.all(xs > 0) and np.all(xs < math.pi)
    np.testing.assert_allclose(np.diff(xs), math.pi / 31)
    for p in points:
        assert p.x[1] == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_array_equal(p.normal, [0.0, -1.0])
        np.testing.assert_array_equal(p.tangent, [1.0, 0.0])
        assert MESH.edges[p.edge_id].kind.value == 'interface'
        assert MESH.elements[p.stokes_element].bounds.y_min == pytest.approx(0.0, abs=1e-12)


def test_interface_config_validation():
    with pytest.raises(ConfigError):
        InterfaceConfig(M=0)
    assert InterfaceConfig(points=((1.0, 0.0), (2.0, 0.0))).M == 2
    with pytest.raises(PlacementError):
        interface_points(MESH, InterfaceConfig(points=((1.0, 0.5),)))


def test_interface_rows_are_appended():
    _, scheme = _assemble(M=30)
    tags = [p[0] for p in scheme.system.provenance]
    assert sum(t.startswith('interface:') for t in tags) == 90
    assert tags[-90:] == [INTERFACE_TAGS[i % 3] for i in range(90)]
    assert 'stokes.mean_trace' not in tags


def test_subsystems_decouple_without_interface_rows():
    _, scheme = _assemble()
    A = scheme.system.A
    darcy_cols = np.zeros(scheme.layout.dof, dtype=bool)
    for blk in scheme.layout.blocks:
        if blk.field.startswith('darcy.'):
            darcy_cols[blk.columns] = True
    for i, (tag, _) in enumerate(scheme.system.provenance):
        if tag.startswith('stokes.'):
            assert not A[i, darcy_cols].any()
        elif tag.startswith('darcy.'):
            assert not A[i, ~darcy_cols].any()


def test_bj_and_bjs_differ_only_in_darcy_velocity_columns():
    _, bj = _assemble('BJ')
    _, bjs = _assemble('BJS')
    diff = bj.system.A != bjs.system.A
    rows, cols = np.nonzero(diff)
    assert rows.size > 0
    assert {bj.system.provenance[r][0] for r in rows} == {'interface:tangential'}
    for c in cols:
        blk = next(b for b in bj.layout.blocks if b.columns.start <= c < b.columns.stop)
        assert blk.field == DARCY_U
    # zeroing the darcy velocity terms of the BJ rows gives the BJS rows
    A = bj.system.A.copy()
    A[diff] = 0.0
    np.testing.assert_array_equal(A, bjs.system.A)


def test_exact_fields_satisfy_interface_conditions():
    for law in InterfaceLaw:
        problem = example4(alpha=0.01, nu=0.1, law=law)
        points = interface_points(MESH, InterfaceConfig(M=30))
        res = interface_residuals(ExactCoupledFields(problem, MESH), problem, points)
        assert res.shape == (30, 3)
        assert np.abs(res).max() <= 1e-10


def test_solved_interface_residuals_match_provenance():
    problem, scheme = _assemble(M=8)
    solution, lsq = solve_coupled(scheme)
    res = interface_residuals(solution, problem, scheme.interface_points)
    parts = residual_by_provenance(scheme.system, lsq.x)
    for j, tag in enumerate(INTERFACE_TAGS):
        assert np.linalg.norm(res[:, j]) == pytest.approx(parts[tag], rel=1e-9, abs=1e-13)
    assert np.abs(res).max() <= lsq.residual_norm + 1e-12
    report = coupled_errors(solution, problem, MESH, 10)
    assert set(report.e0) == {'uS', 'pS', 'sigmaS', 'uD', 'pD'}
    assert all(np.isfinite(v) for v in report.e0.values())


def test_assembly_preconditions():
    plain = build_uniform_mesh(EX4_DOMAIN, 3, 6)
    with pytest.raises(MeshAlignmentError):
        _assemble(mesh=plain)
    shifted = build_uniform_mesh(EX4_DOMAIN, 3, 6, divider_y=-math.pi / 3)
    with pytest.raises(MeshAlignmentError):
        _assemble(mesh=shifted)
    with pytest.raises(ConfigError):
        _assemble(darcy_variant='hdpg_reduced')


def test_problem_parameters():
    p4 = example4()
    assert p4.law is InterfaceLaw.BJ
    assert CoupledProblem(p4.domain, 0.0, p4.stokes, p4.darcy, law='bjs').law is InterfaceLaw.BJS
    with pytest.raises(ProblemDefinitionError):
        CoupledProblem(p4.domain, 0.0, p4.stokes, p4.darcy, law='slip')
    with pytest.raises(ProblemDefinitionError):
        CoupledProblem(p4.domain, 0.0, p4.stokes, p4.darcy, kappa=0.0)
    varying = CoupledProblem(p4.domain, 0.0, p4.stokes, p4.darcy, kappa=lambda pts: pts[:, 0] - 1.0)
    with pytest.raises(ProblemDefinitionError):
        varying.kappa_at(np.array([[0.5, 0.0]]))

    derived = CoupledProblem.from_alpha(p4.domain, 0.0, p4.stokes, p4.darcy, alpha=0.5)
    assert derived.kappa == pytest.approx(math.sqrt(0.1 * 0.01) / 0.5)
    assert derived.law is InterfaceLaw.BJS
    np.testing.assert_allclose(derived.kappa_at(np.zeros((3, 2))), derived.kappa)
