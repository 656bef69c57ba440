"""
Runs solver experiments and writes averaged error tables.

Each RunConfig is one parameter row. Every seed in its seed list gets its
own random feature draw; errors are averaged over seeds with polars and
written as one CSV line per row.

Output files:
- data/results/<config name>.csv        (solve)
- data/results/table_<id>.csv           (reproduce)
- optional system dumps (--dump-system)

Usage:
    python -m hdpg.runner solve --config data/configs/ex1_hdpg.cfg
    python -m hdpg.runner solve --config data/configs/ex3_stokes.cfg --seed-list 1-3 --out /tmp/ex3.csv
    python -m hdpg.runner reproduce --table 1
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import polars as pl

from hdpg.config import RunConfig, load_run_config, parse_seed_list
from hdpg.coupled_schemes import (
    InterfaceConfig,
    assemble_brinkman,
    assemble_stokes_darcy,
    solve_coupled,
)
from hdpg.darcy_schemes import DarcySchemeConfig, DarcyVariant, assemble_darcy, solve_darcy
from hdpg.errors import ConfigError, HdpgError
from hdpg.mesh import Mesh, build_uniform_mesh
from hdpg.metrics import ErrorReport, coupled_errors, darcy_errors, stokes_errors
from hdpg.poly_test_space import scalar_dim
from hdpg.problems import EXAMPLE_DOMAINS, PRESET_TABLES, build_problem, preset_run_table
from hdpg.stokes_scheme import StokesSchemeConfig, assemble_hdpg_stokes, solve_stokes
from hdpg.system import AssembledScheme, dump_system

DARCY_SCHEMES = tuple(v.value for v in DarcyVariant)

SCHEMES_BY_EXAMPLE: Dict[int, Tuple[str, ...]] = {
    1: DARCY_SCHEMES,
    2: DARCY_SCHEMES,
    3: ('stokes',),
    4: ('stokes_darcy',),
    5: ('brinkman',),
}

DEFAULT_SCHEME = {1: 'hdpg', 2: 'hdg', 3: 'stokes', 4: 'stokes_darcy', 5: 'brinkman'}

# (nx, ny) when the config leaves them out
DEFAULT_MESH = {1: (3, 3), 2: (8, 8), 3: (4, 4), 4: (3, 6), 5: (4, 4)}

CSV_COLUMNS = [
    'example', 'scheme', 'h', 'k0', 'N_u', 'N_uhat', 'N_p', 'r', 'eta', 'tau', 'M',
    'dof', 'rows', 'seeds', 'e0_p', 'e1_p', 'eps1_p', 'e0_u', 'e0_sigma', 'residual', 'runtime_ms',
    'table', 'm', 'alpha', 'nu', 'law', 'k', 'r_stokes', 'r_darcy',
    'e1_u', 'e0_uS', 'e0_pS', 'e0_sigmaS', 'e0_uD', 'e0_pD', 'rank',
]

METRIC_COLUMNS = [
    'e0_p', 'e1_p', 'eps1_p', 'e0_u', 'e0_sigma', 'e1_u',
    'e0_uS', 'e0_pS', 'e0_sigmaS', 'e0_uD', 'e0_pD', 'residual', 'runtime_ms', 'rank',
]

DEFAULT_RESULTS_DIR = os.path.join('data', 'results')


@dataclass
class RunRecord:
    config: RunConfig
    scheme: str
    h: float
    k: int
    # N_u, N_uhat, N_p as written to the CSV
    neurons: Tuple[int, int, int]
    dof: int
    rows: int
    seeds: Tuple[int, ...]
    reports: List[ErrorReport] = field(default_factory=list)
    means: Dict[str, Optional[float]] = field(default_factory=dict)


def resolve_scheme(config: RunConfig) -> str:
    scheme = (config.scheme or DEFAULT_SCHEME[config.example]).lower()
    allowed = SCHEMES_BY_EXAMPLE[config.example]
    if scheme not in allowed:
        raise ConfigError(
            f"scheme {scheme!r} does not apply to example {config.example}; expected one of {', '.join(allowed)}"
        )
    return scheme


def build_mesh(config: RunConfig) -> Mesh:
    nx_default, ny_default = DEFAULT_MESH[config.example]
    if config.nx is None:
        nx, ny = nx_default, ny_default
    else:
        nx = config.nx
        ny = 2 * nx if config.example == 4 else nx
    if config.ny is not None:
        ny = config.ny
    divider = 0.0 if config.example == 4 else None
    return build_uniform_mesh(EXAMPLE_DOMAINS[config.example], nx, ny, divider_y=divider)


def darcy_scheme_config(config: RunConfig, seed: int, variant: str = 'hdpg',
                        r: Optional[float] = None) -> DarcySchemeConfig:
    k0 = config.k0
    return DarcySchemeConfig(
        N_u=config.N_u or scalar_dim(k0),
        N_uhat=config.N_uhat or k0 + 1,
        N_p=config.N_p or scalar_dim(k0 + 1),
        k=config.k if config.k is not None else k0,
        eta=config.eta,
        tau=config.tau,
        variant=variant,
        r=r if r is not None else config.r,
        seed=seed,
        quad_order=config.quad_order,
        shared_weights=config.shared_weights,
    )


def stokes_scheme_config(config: RunConfig, seed: int, shift: int = 0,
                         r: Optional[float] = None, explicit: bool = True) -> StokesSchemeConfig:
    """Neuron counts from k0 + shift unless given explicitly."""
    k0 = config.k0 + shift
    return StokesSchemeConfig(
        N_sigma=(config.N_sigma if explicit else None) or scalar_dim(k0),
        N_sigmahat=(config.N_sigmahat if explicit else None) or k0 + 1,
        N_u=(config.N_u if explicit else None) or scalar_dim(k0 + 1),
        k=config.k if (explicit and config.k is not None) else k0,
        eta=config.eta if explicit else 0.0,
        r=r if r is not None else config.r,
        seed=seed,
        quad_order=config.quad_order,
        shared_weights=config.shared_weights,
    )


def _error_order(config: RunConfig) -> int:
    if config.error_quad_order is not None:
        return config.error_quad_order
    return config.k0 + 8


def _dump_path(base: str, seed: int, many: bool) -> str:
    if not many:
        return base
    stem, ext = os.path.splitext(base)
    return f"{stem}_seed{seed}{ext or '.txt'}"


def solve_one(config: RunConfig, seed: int, mesh: Optional[Mesh] = None,
              dump: Optional[str] = None) -> Tuple[ErrorReport, AssembledScheme]:
    """Assemble, solve and measure one (row, seed) pair."""
    scheme_name = resolve_scheme(config)
    mesh = mesh if mesh is not None else build_mesh(config)
    problem = build_problem(config)
    order = _error_order(config)
    t0 = time.perf_counter()

    if config.example in (1, 2):
        scheme = assemble_darcy(mesh, problem, darcy_scheme_config(config, seed, scheme_name))
        if dump:
            dump_system(scheme.system, dump)
        solution, lsq = solve_darcy(scheme)
        report = darcy_errors(solution, problem, mesh, order)
    elif config.example == 4:
        scfg = stokes_scheme_config(config, seed, shift=1, r=config.r_stokes, explicit=False)
        dcfg = darcy_scheme_config(config, seed, 'hdpg', r=config.r_darcy)
        scheme = assemble_stokes_darcy(mesh, problem, scfg, dcfg, InterfaceConfig(M=config.M))
        if dump:
            dump_system(scheme.system, dump)
        solution, lsq = solve_coupled(scheme)
        report = coupled_errors(solution, problem, mesh, order)
    else:
        cfg = stokes_scheme_config(config, seed)
        if config.example == 3:
            scheme = assemble_hdpg_stokes(mesh, problem, cfg)
        else:
            scheme = assemble_brinkman(mesh, problem, cfg)
        if dump:
            dump_system(scheme.system, dump)
        solution, lsq = solve_stokes(scheme)
        report = stokes_errors(solution, problem, mesh, order)

    report.runtime_ms = (time.perf_counter() - t0) * 1000.0
    report.dof = scheme.system.dof
    report.rows = scheme.system.rows
    report.residual_norm = lsq.residual_norm
    report.numerical_rank = lsq.numerical_rank
    return report, scheme


def _report_row(report: ErrorReport) -> Dict[str, Optional[float]]:
    row: Dict[str, Optional[float]] = {c: None for c in METRIC_COLUMNS}
    for name, value in report.e0.items():
        row[f"e0_{name}"] = value
    for name, value in report.e1.items():
        row[f"e1_{name}"] = value
    for name, value in report.eps1.items():
        row[f"eps1_{name}"] = value
    row['residual'] = report.residual_norm
    row['runtime_ms'] = report.runtime_ms
    row['rank'] = float(report.numerical_rank)
    return row


def seed_frame(records: Sequence[RunRecord]) -> pl.DataFrame:
    """One line per (row, seed) with every metric column."""
    data = []
    for idx, rec in enumerate(records):
        for seed, rep in zip(rec.seeds, rec.reports):
            data.append({'row': idx, 'seed': seed, **_report_row(rep)})
    schema = {'row': pl.Int64, 'seed': pl.Int64, **{c: pl.Float64 for c in METRIC_COLUMNS}}
    return pl.DataFrame(data, schema=schema)


def aggregate_seeds(frame: pl.DataFrame) -> pl.DataFrame:
    """Arithmetic mean over seeds per row."""
    return (
        frame
        .group_by('row', maintain_order=True)
        .agg([pl.col(c).mean() for c in METRIC_COLUMNS])
        .sort('row')
    )


def _neurons(config: RunConfig, scheme) -> Tuple[int, int, int]:
    if config.example in (1, 2):
        c = darcy_scheme_config(config, 0, scheme)
        return c.N_u, c.N_uhat, c.N_p
    if config.example == 4:
        c = darcy_scheme_config(config, 0, 'hdpg', r=config.r_darcy)
        return c.N_u, c.N_uhat, c.N_p
    c = stokes_scheme_config(config, 0)
    return c.N_u, c.N_sigmahat, c.N_sigma


def _warn_rank(config: RunConfig, seed: int, report: ErrorReport, scheme: AssembledScheme, verbose: bool) -> None:
    if not verbose:
        return
    if report.numerical_rank < report.dof:
        print(f"  [WARNING] seed {seed}: numerical rank {report.numerical_rank} < {report.dof} columns")
    for eid, rank in sorted(scheme.elimination_rank.items()):
        cols = scheme.elimination[eid].shape[0]
        if rank < cols:
            print(f"  [WARNING] seed {seed}: element {eid} velocity block rank {rank} < {cols}")


def run(config: RunConfig, dump: Optional[str] = None, verbose: bool = False) -> List[RunRecord]:
    """Run every seed of one parameter row; returns a single averaged record."""
    scheme_name = resolve_scheme(config)
    mesh = build_mesh(config)
    reports: List[ErrorReport] = []
    for seed in config.seeds:
        path = _dump_path(dump, seed, len(config.seeds) > 1) if dump else None
        report, scheme = solve_one(config, seed, mesh=mesh, dump=path)
        _warn_rank(config, seed, report, scheme, verbose)
        reports.append(report)
        if path and verbose:
            print(f"  [OK] Saved {path}")

    rec = RunRecord(
        config=config,
        scheme=scheme_name,
        h=mesh.domain.width / mesh.nx,
        k=config.k if config.k is not None else config.k0,
        neurons=_neurons(config, scheme_name),
        dof=reports[0].dof,
        rows=reports[0].rows,
        seeds=config.seeds,
        reports=reports,
    )
    means = aggregate_seeds(seed_frame([rec])).row(0, named=True)
    rec.means = {c: means[c] for c in METRIC_COLUMNS}
    return [rec]


def run_many(configs: Sequence[RunConfig], dump: Optional[str] = None, verbose: bool = False) -> List[RunRecord]:
    records: List[RunRecord] = []
    for i, cfg in enumerate(configs, start=1):
        if verbose:
            print(f"\n[{i}/{len(configs)}] example {cfg.example}, scheme {resolve_scheme(cfg)}, "
                  f"k0={cfg.k0}, seeds={len(cfg.seeds)}")
        batch = run(cfg, dump=dump, verbose=verbose)
        if verbose:
            m = batch[0].means
            shown = ', '.join(f"{c}={m[c]:.3e}" for c in METRIC_COLUMNS[:11] if m.get(c) is not None)
            print(f"  dof={batch[0].dof} rows={batch[0].rows} {shown}")
        records.extend(batch)
    return records


def _fmt(value) -> Optional[str]:
    if value is None:
        return None
    if isinstance(value, (float, np.floating)):
        if np.isnan(value):
            return None
        return f"{float(value):.17g}"
    return str(value)


def record_values(rec: RunRecord) -> Dict[str, object]:
    c = rec.config
    coupled = c.example == 4
    values: Dict[str, object] = {
        'example': c.example,
        'scheme': rec.scheme,
        'h': rec.h,
        'k0': c.k0,
        'N_u': rec.neurons[0],
        'N_uhat': rec.neurons[1],
        'N_p': rec.neurons[2],
        'r': c.r,
        'eta': c.eta,
        'tau': c.tau,
        'M': c.M if coupled else None,
        'dof': rec.dof,
        'rows': rec.rows,
        'seeds': len(rec.seeds),
        'table': c.table or None,
        'm': c.m if c.example == 2 else None,
        'alpha': c.alpha,
        'nu': c.nu,
        'law': c.law if coupled else None,
        'k': rec.k,
        'r_stokes': c.r_stokes,
        'r_darcy': c.r_darcy,
    }
    for col in METRIC_COLUMNS:
        values[col] = rec.means.get(col)
    return values


def write_csv(records: Sequence[RunRecord], path: str) -> None:
    """Header plus one line per record; floats carry 17 significant digits."""
    out_dir = os.path.dirname(os.path.abspath(path))
    os.makedirs(out_dir, exist_ok=True)
    table = {col: [] for col in CSV_COLUMNS}
    for rec in records:
        values = record_values(rec)
        for col in CSV_COLUMNS:
            table[col].append(_fmt(values.get(col)))
    df = pl.DataFrame(table, schema={col: pl.Utf8 for col in CSV_COLUMNS})
    df.write_csv(path)


# -- CLI --------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='hdpg.runner', description='Randomized-network HDPG flow solvers')
    sub = parser.add_subparsers(dest='command', required=True)

    solve = sub.add_parser('solve', help='run one configuration file')
    solve.add_argument('--config', required=True, help='key = value configuration file')
    solve.add_argument('--seed-list', help="seeds, e.g. '1,2,5-7' (overrides the file)")
    solve.add_argument('--out', help='CSV output path')
    solve.add_argument('--dump-system', help='write the assembled matrix as row/col/value lines')
    solve.add_argument('--quad-order', type=int, help='assembly quadrature points per direction')
    solve.add_argument('--quiet', action='store_true', help='suppress progress output')

    rep = sub.add_parser('reproduce', help='replay a reference table')
    rep.add_argument('--table', required=True, help=f"one of {', '.join(PRESET_TABLES)}")
    rep.add_argument('--seed-list', help='seeds (default 1-10)')
    rep.add_argument('--out', help='CSV output path')
    rep.add_argument('--quiet', action='store_true', help='suppress progress output')
    return parser


def _cmd_solve(args) -> str:
    config = load_run_config(args.config)
    config = config.with_overrides(
        seeds=tuple(parse_seed_list(args.seed_list)) if args.seed_list else None,
        out=args.out,
        quad_order=args.quad_order,
    )
    verbose = not args.quiet
    if verbose:
        print(f"Config: {args.config}")
        print(f"  example={config.example} scheme={resolve_scheme(config)} k0={config.k0} "
              f"seeds={','.join(str(s) for s in config.seeds)}")
    records = run_many([config], dump=args.dump_system, verbose=verbose)
    name = os.path.splitext(os.path.basename(args.config))[0]
    out = config.out or os.path.join(DEFAULT_RESULTS_DIR, f"{name}.csv")
    write_csv(records, out)
    return out


def _cmd_reproduce(args) -> str:
    seeds = parse_seed_list(args.seed_list) if args.seed_list else None
    configs = preset_run_table(args.table, seeds=seeds) if seeds else preset_run_table(args.table)
    verbose = not args.quiet
    if verbose:
        print(f"Table {configs[0].table}: {len(configs)} parameter rows x {len(configs[0].seeds)} seeds")
    records = run_many(configs, verbose=verbose)
    out = args.out or os.path.join(DEFAULT_RESULTS_DIR, f"table_{configs[0].table}.csv")
    write_csv(records, out)
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    verbose = not args.quiet
    if verbose:
        print("=" * 60)
        print("HDPG Randomized-Network Flow Solver")
        print("=" * 60)
    try:
        out = _cmd_solve(args) if args.command == 'solve' else _cmd_reproduce(args)
    except (HdpgError, OSError) as exc:
        print(f"[ERROR] {exc}", file=sys.stderr)
        return 1
    if verbose:
        print(f"\n[OK] Saved {out}")
        print("\n" + "=" * 60)
        print("[OK] Run complete!")
        print("=" * 60)
    return 0


if __name__ == '__main__':
    sys.exit(main())
