import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdpg.errors import LayoutError, NumericInputError
from hdpg.system import (
    Block,
    DenseSystem,
    SystemBuilder,
    build_layout,
    dump_system,
    lstsq_pivoted,
    residual_by_provenance,
    solve_least_squares,
)


def _layout():
    return build_layout([Block('a', 0, 0, 2), Block('a', 1, 0, 3), Block('b', 0, 1, 1)])


def test_layout_packs_blocks_in_order():
    layout = _layout()
    assert layout.dof == 6
    assert layout.columns('a', 1) == slice(2, 5)
    assert layout.columns('b', 0, 1) == slice(5, 6)
    assert layout.fields() == ['a', 'b']
    assert layout.field_dof('a') == 5
    assert ('b', 0, 1) in layout


def test_layout_errors():
    with pytest.raises(LayoutError):
        build_layout([Block('a', 0, 0, 2), Block('a', 0, 0, 2)])
    with pytest.raises(LayoutError):
        build_layout([Block('a', 0, 0, 0)])
    with pytest.raises(LayoutError):
        build_layout([])
    with pytest.raises(LayoutError):
        _layout().block('c', 0)


def test_builder_sums_terms_and_tracks_provenance():
    builder = SystemBuilder(_layout())
    builder.add_rows('eq1', 3, [(('a', 0, 0), np.ones((1, 2))), (('a', 0, 0), np.ones((1, 2)))], [1.0])
    builder.add_rows('eq2', 0, [(('b', 0, 1), np.eye(1) * 5)], [2.0])
    sys_ = builder.build()
    assert sys_.rows == 2 and sys_.dof == 6
    np.testing.assert_array_equal(sys_.A[0], [2, 2, 0, 0, 0, 0])
    assert sys_.provenance == (('eq1', 3), ('eq2', 0))
    with pytest.raises(LayoutError):
        builder.add_rows('bad', 0, [(('a', 1, 0), np.ones((1, 2)))], [0.0])


def test_lstsq_exact_on_full_rank():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((8, 5))
    x = rng.standard_normal(5)
    sol, rank = lstsq_pivoted(A, A @ x)
    assert rank == 5
    np.testing.assert_allclose(sol, x, atol=1e-10)


def test_lstsq_rank_deficient_gives_basic_solution():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((10, 3))
    A = np.hstack([A, A[:, :1]])
    b = rng.standard_normal(10)
    sol, rank = lstsq_pivoted(A, b)
    assert rank == 3
    assert np.count_nonzero(sol) <= 3
    ref = np.linalg.lstsq(A, b, rcond=None)[0]
    assert np.linalg.norm(A @ sol - b) == pytest.approx(np.linalg.norm(A @ ref - b), rel=1e-8)


def test_lstsq_multiple_rhs_and_zero_matrix():
    A = np.eye(3)
    B = np.arange(6.0).reshape(3, 2)
    X, rank = lstsq_pivoted(A, B)
    np.testing.assert_allclose(X, B)
    X0, rank0 = lstsq_pivoted(np.zeros((3, 2)), np.ones(3))
    assert rank0 == 0
    np.testing.assert_array_equal(X0, 0.0)


def test_lstsq_rejects_bad_input():
    with pytest.raises(NumericInputError):
        lstsq_pivoted(np.array([[np.nan]]), np.array([1.0]))
    with pytest.raises(NumericInputError):
        lstsq_pivoted(np.eye(2), np.array([np.inf, 0.0]))
    with pytest.raises(NumericInputError):
        lstsq_pivoted(np.zeros((0, 2)), np.zeros(0))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_lstsq_minimality_and_row_permutation(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((30, 12))
    b = rng.standard_normal(30)
    system = DenseSystem(A=A, b=b, provenance=tuple(('r', i) for i in range(30)))
    sol = solve_least_squares(system)
    assert sol.residual_norm == pytest.approx(np.linalg.norm(A @ sol.x - b), rel=1e-12)

    for j in range(12):
        for step in (-1e-3, 1e-3):
            moved = sol.x.copy()
            moved[j] += step
            assert np.linalg.norm(A @ moved - b) >= sol.residual_norm - 1e-12

    perm = rng.permutation(30)
    shuffled = DenseSystem(A=A[perm], b=b[perm], provenance=tuple(system.provenance[i] for i in perm))
    assert abs(solve_least_squares(shuffled).residual_norm - sol.residual_norm) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_residual_splits_by_tag(seed):
    rng = np.random.default_rng(seed)
    builder = SystemBuilder(_layout())
    for i, tag in enumerate(['x', 'y', 'x', 'z']):
        builder.add_rows(tag, i, [(('a', 1, 0), rng.standard_normal((2, 3)))], rng.standard_normal(2))
    system = builder.build()
    sol = solve_least_squares(system)
    parts = residual_by_provenance(system, sol.x)
    assert set(parts) == {'x', 'y', 'z'}
    total = np.sqrt(sum(v ** 2 for v in parts.values()))
    assert total == pytest.approx(sol.residual_norm, rel=1e-10, abs=1e-14)


def test_dump_system(tmp_path):
    builder = SystemBuilder(_layout())
    builder.add_rows('eq', 0, [(('b', 0, 1), np.array([[3.0]]))], [4.0])
    path = tmp_path / 'out' / 'system.txt'
    dump_system(builder.build(), str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == '# 1 rows, 6 columns'
    assert '0 5 3' in lines
    assert '0 rhs 4' in lines
