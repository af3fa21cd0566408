"""Command-line interface: ``homfem simple|homogen|macro|convert``.

Exit codes: 0 on success, 1 when solving fails, 2 for usage or
configuration errors. Summaries go to stdout as ``key = value`` lines,
diagnostics to stderr.
"""
import argparse
import contextlib
import csv
import dataclasses
import logging
import os
import sys

import numpy as np

from .config import MaterialDef, parse_problem
from .errors import ConfigError, DependencyCycleError, HomfemError, PhaseError
from .homogenization.cache import config_digest, write_cache
from .homogenization.engine import run_engine
from .problem import solve_declarative
from .vtk import read_vtk_with_data, write_vtk

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _fmt(x):
    return '%.17g' % x


def _print(key, value, out):
    print(f'{key} = {value}', file=out)


def _exit_code(exc):
    cause = exc.cause if isinstance(exc, PhaseError) else exc
    usage = (ConfigError, DependencyCycleError)
    return EXIT_USAGE if isinstance(cause, usage) else EXIT_FAIL


def _fail(exc, err):
    print(f'error: {exc}', file=err)
    return _exit_code(exc)


def _load(path, phase='parse'):
    try:
        return parse_problem(path)
    except HomfemError as exc:
        raise PhaseError(phase, exc) from exc


def _default_cache(micro_path, folder):
    stem = os.path.splitext(os.path.basename(micro_path))[0]
    return os.path.join(folder, f'{stem}.coefs.json')


def cmd_simple(args, out, err):
    conf = _load(args.config)
    res = solve_declarative(conf, output_dir=args.output_dir,
                            write=not args.no_output,
                            echo=lambda line: print(line, file=out))
    _print('steps', len(res.steps), out)
    _print('n_dofs', res.problem.n_dofs, out)
    for path in res.files[-1:]:
        _print('last_output', path, out)
    return EXIT_OK


def cmd_homogen(args, out, err):
    conf = _load(args.config)
    try:
        results = run_engine(conf, n_workers=args.workers)
    except (ConfigError, DependencyCycleError) as exc:
        raise PhaseError('parse', exc) from exc
    except HomfemError as exc:
        raise PhaseError('solve', exc) from exc
    folder = args.output_dir or os.path.dirname(os.path.abspath(args.config))
    cache = args.cache or _default_cache(args.config, folder)
    try:
        write_cache(cache, results, config_digest(conf))
    except OSError as exc:
        raise PhaseError('output', HomfemError(f'cannot write {cache}: {exc}'))
    _print('corrector_solves', results.stats['corrector_solves'], out)
    _print('volume', _fmt(results.volume), out)
    for name, val in sorted(results.coefs.items()):
        _print(f'{name}.shape', ' '.join(map(str, val.shape)) or 'scalar', out)
        _print(name, ' '.join(_fmt(v) for v in np.ravel(val)), out)
    _print('cache', cache, out)
    return EXIT_OK


def cmd_macro(args, out, err):
    conf = _load(args.config)
    hom = {n: m for n, m in conf.materials.items()
           if isinstance(m.values, dict) and 'homogenized' in m.values}
    if not hom:
        raise PhaseError('parse', ConfigError(
            'macro configuration has no homogenized material', key='materials'))
    if args.output_dir:
        folder = os.path.abspath(args.output_dir)
    else:
        folder = os.path.join(conf.base_dir, conf.options.get('output_dir', '.'))
    materials = dict(conf.materials)
    for name, mat in hom.items():
        spec = dict(mat.values['homogenized'])
        if args.phi is not None:
            spec['phi'] = list(args.phi)
        if args.workers is not None:
            spec['workers'] = args.workers
        if args.cache:
            spec['cache'] = os.path.abspath(args.cache)
        elif 'cache' not in spec:
            micro = spec['micro']
            spec['cache'] = os.path.abspath(_default_cache(micro, folder))
        materials[name] = MaterialDef(name, {'homogenized': spec})
    conf = dataclasses.replace(conf, materials=materials)
    res = solve_declarative(conf, output_dir=folder, write=not args.no_output,
                            echo=lambda line: print(line, file=out))
    for name, info in sorted(res.problem.homog_info.items()):
        _print(f'{name}.micro_cache', info.get('cache'), out)
        _print(f'{name}.micro_solves', info.get('corrector_solves', 0), out)
        if info.get('path'):
            _print(f'{name}.cache_file', info['path'], out)
    state = res.final_state
    for name, vals in res.problem.point_data(state).items():
        arr = np.asarray(vals)
        mag = np.linalg.norm(arr, axis=1) if arr.ndim == 2 else np.abs(arr)
        _print(f'{name}.max_abs', _fmt(mag.max() if len(mag) else 0.0), out)
    for path in res.files[-1:]:
        _print('last_output', path, out)
    return EXIT_OK


def cmd_convert(args, out, err):
    """Rewrite a VTK result file, or export its point data as CSV."""
    if not os.path.exists(args.input):
        raise PhaseError('parse', ConfigError(f'input not found: {args.input}'))
    try:
        mesh, pdata, cdata = read_vtk_with_data(args.input)
    except HomfemError as exc:
        raise PhaseError('parse', exc) from exc
    ext = os.path.splitext(args.output)[1].lower()
    if ext == '.vtk':
        with open(args.input, errors='replace') as fd:
            fd.readline()
            title = fd.readline().rstrip('\r\n')
        write_vtk(args.output, mesh, pdata, cdata, title=title)
    elif ext == '.csv':
        cols = ['x', 'y', 'z'][:mesh.dim]
        data = [mesh.vertices]
        for name, arr in pdata.items():
            arr = np.asarray(arr, dtype=np.float64)
            if arr.ndim == 1:
                cols.append(name)
                data.append(arr[:, None])
            else:
                cols.extend(f'{name}_{k}' for k in range(arr.shape[1]))
                data.append(arr)
        table = np.hstack(data)
        with open(args.output, 'w', newline='') as fd:
            writer = csv.writer(fd)
            writer.writerow(cols)
            writer.writerows([[_fmt(v) for v in row] for row in table])
    else:
        raise PhaseError('parse', ConfigError(
            f'unsupported output format {ext or args.output!r} (use .vtk or .csv)'))
    _print('vertices', mesh.n_vertex, out)
    _print('cells', mesh.n_cell, out)
    _print('written', args.output, out)
    return EXIT_OK


def _positive_int(text):
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f'not an integer: {text!r}') from None
    if val < 1:
        raise argparse.ArgumentTypeError('must be at least 1')
    return val


def build_parser():
    parser = argparse.ArgumentParser(prog='homfem', description=__doc__.split('\n')[0])
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='log progress to stderr (repeat for debug output)')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('simple', help='solve a declarative problem')
    p.add_argument('config')
    p.add_argument('--output-dir', '-o')
    p.add_argument('--no-output', action='store_true',
                   help='do not write VTK files')
    p.set_defaults(func=cmd_simple)

    p = sub.add_parser('homogen', help='run the homogenization engine')
    p.add_argument('config')
    p.add_argument('--workers', '-w', type=_positive_int,
                   default=os.cpu_count() or 1)
    p.add_argument('--cache', help='coefficient file to write')
    p.add_argument('--output-dir', '-o')
    p.set_defaults(func=cmd_homogen)

    p = sub.add_parser('macro', help='solve a macro problem with homogenized '
                                     'materials')
    p.add_argument('config')
    p.add_argument('--workers', '-w', type=_positive_int)
    p.add_argument('--cache', help='coefficient cache file')
    p.add_argument('--phi', type=float, nargs='+',
                   help='conductor potentials overriding the config')
    p.add_argument('--output-dir', '-o')
    p.add_argument('--no-output', action='store_true')
    p.set_defaults(func=cmd_macro)

    p = sub.add_parser('convert', help='convert a VTK result file (.vtk, .csv)')
    p.add_argument('input')
    p.add_argument('output')
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        with contextlib.redirect_stderr(err):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, stream=err,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        return args.func(args, out, err)
    except HomfemError as exc:
        return _fail(exc, err)
    except OSError as exc:
        print(f'error: {exc}', file=err)
        return EXIT_FAIL


if __name__ == '__main__':
    sys.exit(main())
