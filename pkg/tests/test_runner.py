import numpy as np
import polars as pl
import pytest

from hdpg.config import RunConfig
from hdpg.errors import ConfigError
from hdpg.mesh import Subdomain
from hdpg.problems import preset_run_table
from hdpg.runner import (
    CSV_COLUMNS,
    aggregate_seeds,
    build_mesh,
    darcy_scheme_config,
    main,
    resolve_scheme,
    run,
    run_many,
    seed_frame,
    stokes_scheme_config,
    write_csv,
)

SMALL = {
    1: RunConfig(example=1, nx=2, k0=3, r=0.6, seeds=(1,)),
    2: RunConfig(example=2, nx=2, k0=3, r=0.9, seeds=(1,)),
    3: RunConfig(example=3, nx=2, k0=3, r=1.0, seeds=(1,)),
    4: RunConfig(example=4, nx=1, k0=2, r_stokes=0.6, r_darcy=0.7, M=6, seeds=(1,)),
    5: RunConfig(example=5, nx=2, k0=3, r=0.9, alpha=1.0, seeds=(1,)),
}


def test_scheme_resolution():
    assert resolve_scheme(RunConfig(example=1)) == 'hdpg'
    assert resolve_scheme(RunConfig(example=2)) == 'hdg'
    assert resolve_scheme(RunConfig(example=1, scheme='HDPG_Reduced')) == 'hdpg_reduced'
    with pytest.raises(ConfigError):
        resolve_scheme(RunConfig(example=5, scheme='hdpg'))
    with pytest.raises(ConfigError):
        resolve_scheme(RunConfig(example=1, scheme='brinkman'))


def test_mesh_defaults():
    mesh = build_mesh(RunConfig(example=4))
    assert (mesh.nx, mesh.ny) == (3, 6)
    assert mesh.divider_y == pytest.approx(0.0, abs=1e-12)
    assert len(mesh.elements_in(Subdomain.STOKES)) == 9
    assert (build_mesh(RunConfig(example=4, nx=2)).ny) == 4
    assert (build_mesh(RunConfig(example=1)).nx) == 3
    assert (build_mesh(RunConfig(example=3, nx=2, ny=5)).ny) == 5


def test_neuron_conventions():
    d = darcy_scheme_config(RunConfig(example=1, k0=4), seed=1)
    assert (d.N_u, d.N_uhat, d.N_p, d.k) == (15, 5, 21, 4)
    d = darcy_scheme_config(RunConfig(example=1, k0=4, N_uhat=72, k=3), seed=1, variant='hdpg_global_trace')
    assert (d.N_uhat, d.k) == (72, 3)
    s = stokes_scheme_config(RunConfig(example=3, k0=7), seed=1)
    assert (s.N_sigma, s.N_sigmahat, s.N_u, s.k) == (36, 8, 45, 7)
    # Stokes side of the coupled problem runs one degree higher
    s = stokes_scheme_config(RunConfig(example=4, k0=7, N_u=3), seed=1, shift=1, explicit=False)
    assert (s.N_sigma, s.N_sigmahat, s.N_u, s.k) == (45, 9, 55, 8)


@pytest.mark.parametrize('example', sorted(SMALL))
def test_every_example_runs(example):
    [record] = run(SMALL[example])
    assert record.dof > 0 and record.rows > 0
    means = record.means
    if example in (1, 2):
        keys = ('e0_p', 'e1_p', 'eps1_p', 'e0_u')
    elif example == 4:
        keys = ('e0_uS', 'e0_pS', 'e0_sigmaS', 'e0_uD', 'e0_pD')
    else:
        keys = ('e0_u', 'e0_sigma', 'e0_p', 'e1_u')
    for key in keys:
        assert np.isfinite(means[key]) and means[key] >= 0
    assert means['residual'] >= 0


def test_rerun_is_identical():
    cfg = SMALL[1]
    a = run(cfg)[0].reports[0]
    b = run(cfg)[0].reports[0]
    assert a.e0 == b.e0 and a.e1 == b.e1 and a.eps1 == b.eps1
    assert a.residual_norm == b.residual_norm


def test_seed_means():
    cfg = SMALL[1].with_overrides(seeds=(1, 2, 3))
    [record] = run(cfg)
    values = [r.e0['p'] for r in record.reports]
    assert len(set(values)) == 3
    assert record.means['e0_p'] == pytest.approx(np.mean(values), rel=1e-14)
    frame = aggregate_seeds(seed_frame([record, record]))
    assert frame.height == 2
    assert frame['e0_p'][1] == pytest.approx(np.mean(values), rel=1e-14)


def test_csv_output(tmp_path):
    empty = tmp_path / 'empty.csv'
    write_csv([], str(empty))
    assert empty.read_text().splitlines() == [','.join(CSV_COLUMNS)]

    records = run(SMALL[3])
    path = tmp_path / 'nested' / 'one.csv'
    write_csv(records, str(path))
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    df = pl.read_csv(str(path), infer_schema_length=0)
    row = df.row(0, named=True)
    assert row['example'] == '3' and row['scheme'] == 'stokes'
    assert float(row['e0_u']) == records[0].means['e0_u']
    assert float(row['h']) == 0.5
    assert row['e0_p'] is not None
    assert row['eps1_p'] in (None, '')
    assert row['M'] in (None, '')


def test_cli_solve_and_errors(tmp_path, capsys):
    cfg = tmp_path / 'tiny.cfg'
    cfg.write_text('example = 1\nnx = 2\nk0 = 2\nr = 0.6\nseeds = 1-5\n', encoding='utf-8')
    out = tmp_path / 'tiny.csv'
    dump = tmp_path / 'A.txt'
    assert main(['solve', '--config', str(cfg), '--seed-list', '4', '--out', str(out),
                 '--dump-system', str(dump), '--quiet']) == 0
    df = pl.read_csv(str(out))
    assert df.height == 1 and df['seeds'][0] == 1
    assert dump.read_text().startswith('# ')

    assert main(['solve', '--config', str(cfg), '--seed-list', '1,2', '--out', str(out)]) == 0
    printed = capsys.readouterr().out
    assert '[OK] Saved' in printed and '=' * 60 in printed

    bad = tmp_path / 'bad.cfg'
    bad.write_text('example = 5\nscheme = hdpg\n', encoding='utf-8')
    assert main(['solve', '--config', str(bad), '--quiet']) == 1
    assert '[ERROR]' in capsys.readouterr().err
    assert main(['reproduce', '--table', 'nope', '--quiet']) == 1


def test_run_many_keeps_declaration_order():
    configs = [SMALL[1].with_overrides(k0=2), SMALL[1]]
    records = run_many(configs)
    assert [r.config.k0 for r in records] == [2, 3]


@pytest.mark.slow
def test_reproduce_table1_shape(tmp_path):
    out = tmp_path / 'table1.csv'
    assert main(['reproduce', '--table', '1', '--seed-list', '1', '--out', str(out), '--quiet']) == 0
    df = pl.read_csv(str(out))
    assert df.height == len(preset_run_table('1')) == 24
    assert set(df['dof'].to_list()) == {270, 579, 996, 1521}
