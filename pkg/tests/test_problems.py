import math

import numpy as np
import pytest

from hdpg.config import RunConfig
from hdpg.coupled_schemes import BrinkmanProblem, CoupledProblem
from hdpg.darcy_schemes import DarcyProblem
from hdpg.errors import ConfigError, ProblemDefinitionError
from hdpg.mesh import Domain, build_uniform_mesh
from hdpg.problems import (
    EX4_DARCY,
    EX4_STOKES,
    PRESET_TABLES,
    UNIT_SQUARE,
    build_problem,
    darcy_strong_residual,
    example1,
    example2,
    example3,
    example4,
    example5,
    preset_run_table,
    stokes_strong_residual,
)
from hdpg.quadrature import gauss_line, tensor_rect
from hdpg.stokes_scheme import StokesProblem


def _interior(domain: Domain, n=100, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.02, 0.98, size=(n, 2))
    return np.column_stack([domain.x_min + domain.width * u[:, 0], domain.y_min + domain.height * u[:, 1]])


def _assert_small(residual, f_values, rel=1e-7):
    scale = max(1.0, float(np.abs(f_values).max()))
    assert np.abs(residual).max() <= rel * scale


@pytest.mark.parametrize('problem', [example1(), example2(1), example2(3)])
def test_darcy_sources_match_operator(problem):
    pts = _interior(UNIT_SQUARE)
    _assert_small(darcy_strong_residual(problem, pts), problem.f(pts))


@pytest.mark.parametrize('problem', [example3(0.1), example3(0.001), example5(1e-3), example5(1.0), example5(1e3)])
def test_stokes_sources_match_operator(problem):
    pts = _interior(UNIT_SQUARE)
    _assert_small(stokes_strong_residual(problem, pts), problem.f(pts))


@pytest.mark.parametrize('alpha, nu', [(0.01, 0.1), (100.0, 0.001)])
def test_coupled_sources_match_operator(alpha, nu):
    p = example4(alpha=alpha, nu=nu)
    sp = _interior(EX4_STOKES)
    dp = _interior(EX4_DARCY)
    _assert_small(stokes_strong_residual(p.stokes, sp), p.stokes.f(sp))
    _assert_small(darcy_strong_residual(p.darcy, dp), p.darcy.f(dp))


@pytest.mark.parametrize('problem', [example3(0.1), example5(1.0)])
def test_velocities_are_divergence_free(problem):
    G = problem.exact_grad_u(_interior(UNIT_SQUARE, seed=3))
    assert np.abs(G[:, 0, 0] + G[:, 1, 1]).max() <= 1e-12


@pytest.mark.parametrize('problem', [example3(0.1), example5(1.0)])
def test_pressures_have_zero_mean(problem):
    mesh = build_uniform_mesh(UNIT_SQUARE, 2, 2)
    total = 0.0
    for el in mesh.elements:
        quad = tensor_rect(gauss_line(10), el)
        total += quad.weights @ problem.exact_p(quad.points)
    assert abs(total) <= 1e-12


def test_point_values():
    p1 = example1()
    assert p1.exact_p(np.array([[0.5, 0.5]]))[0] == pytest.approx(0.0625 * math.exp(0.25))
    edge = np.column_stack([np.zeros(5), np.linspace(0, 1, 5)])
    np.testing.assert_array_equal(p1.exact_p(edge), 0.0)
    assert example2(1).exact_p(np.array([[0.25, 0.25]]))[0] == pytest.approx(1.0)
    for m in (1, 2, 4):
        boundary = np.array([[0.0, 0.3], [1.0, 0.7], [0.4, 0.0], [0.6, 1.0]])
        np.testing.assert_allclose(example2(m).exact_p(boundary), 0.0, atol=1e-12)
    square = np.array([[0.0, 0.5], [1.0, 0.2], [0.3, 0.0], [0.8, 1.0]])
    np.testing.assert_allclose(example5(2.0).exact_u(square), 0.0, atol=1e-15)


def test_example4_interface_values():
    p = example4(alpha=0.01)
    x = np.linspace(0.1, 3.0, 7)
    gamma = np.column_stack([x, np.zeros_like(x)])
    n = np.array([0.0, -1.0])
    np.testing.assert_allclose(p.stokes.exact_u(gamma) @ n, 2 * 0.01 * np.sin(x), atol=1e-15)
    np.testing.assert_allclose(p.darcy.exact_u(gamma) @ n, 2 * 0.01 * np.sin(x), atol=1e-15)
    top = np.column_stack([x, np.full_like(x, math.pi)])
    np.testing.assert_allclose(p.darcy.exact_p(gamma), 0.0, atol=1e-15)
    np.testing.assert_allclose(p.darcy.exact_p(top), 0.0, atol=1e-14)


def test_invalid_parameters():
    for bad in (lambda: example2(0), lambda: example4(alpha=0.0), lambda: example5(-1.0)):
        with pytest.raises(ProblemDefinitionError):
            bad()


def test_preset_tables():
    t1 = preset_run_table('1')
    assert len(t1) == 24
    assert {(c.N_u, c.N_uhat, c.N_p) for c in t1} >= {(45, 9, 55)}
    assert all(c.nx == 3 and c.r == 0.6 and c.table == '1' for c in t1)
    assert len(preset_run_table('table1s')) == 24
    assert all(c.eta == 1.0 for c in preset_run_table('1s'))

    t5 = preset_run_table('5', seeds=(1, 2))
    assert any(c.m == 3 and c.nx == 8 and c.r == 1.6 for c in t5)
    assert all(c.seeds == (1, 2) for c in t5)

    t4 = preset_run_table('ex4')
    assert any(c.alpha == 100.0 and c.nu == 0.1 and c.r_darcy == 1.3 and c.r_stokes == 1.5 and c.M == 30
               for c in t4)
    for tid in PRESET_TABLES:
        assert preset_run_table(tid)
    with pytest.raises(ConfigError):
        preset_run_table('7')


def test_build_problem_types():
    assert isinstance(build_problem(RunConfig(example=1)), DarcyProblem)
    assert isinstance(build_problem(RunConfig(example=2, m=2)), DarcyProblem)
    assert isinstance(build_problem(RunConfig(example=3, nu=0.01)), StokesProblem)
    coupled = build_problem(RunConfig(example=4, alpha=100.0, nu=0.001, law='bjs'))
    assert isinstance(coupled, CoupledProblem)
    assert coupled.law.value == 'BJS'
    assert isinstance(build_problem(RunConfig(example=5, alpha=1e3)), BrinkmanProblem)
