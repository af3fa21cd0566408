"""End-to-end acceptance criteria, each reported as one PASS/FAIL line."""
import json
import random
import shutil
import time

import numpy as np
import pytest

from homfem import config_from_dict, data_path, parse_problem, solve_declarative
from homfem.constraints import build_reduction, tie_classes
from homfem.equations import format_equation, parse_call, parse_equation
from homfem.fields import l2_error
from homfem.homogenization import run_engine
from homfem.homogenization.cache import config_digest, write_cache

from helpers import (DOCUMENTED_CALLS, DOCUMENTED_EQUATIONS, call_shape,
                     decay_problem, random_equation, scalar_problem)

RESULTS = []


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        line = f'criterion {number:2d} {"PASS" if ok else "FAIL"}  {title}: {detail}'
        RESULTS.append(line)
        with capsys.disabled():
            print('\n' + line)
        assert ok, line
    return emit


def _data(name):
    with open(data_path(name)) as fd:
        return json.load(fd)


def test_01_patch(report):
    t = time.perf_counter()
    out = solve_declarative(data_path('laplace_patch.json'), write=False)
    elapsed = time.perf_counter() - t
    pb = out.problem
    x = pb.variable('t').field.dofmap.node_coors[:, 0]
    err = np.abs(out.final_state - (2 - 40 * x)).max()
    n_cells = pb.mesh.n_cell
    report(1, 'patch test', n_cells == 64 and err <= 1e-9 and elapsed < 1.0,
           f'{n_cells} hexahedra, max nodal error {err:.2e}, {elapsed:.2f} s')


@pytest.mark.parametrize('dims, shape, centre', [
    ([0.1], [21], [0.05]),
    ([0.1, 0.01, 0.01], [21, 3, 3], [0.05, 0.0, 0.0])], ids=['1d', '3d'])
def test_02_heat_steady_limit(report, dims, shape, centre):
    data = _data('heat_cond.json')
    data['mesh'] = {'generate': {'dims': dims, 'shape': shape, 'centre': centre}}
    ts = data['solvers']['ts']
    c = data['materials']['m']['c']
    length = dims[0]
    # Backward-Euler damping of the slowest Dirichlet mode over the run.
    rate = c * (np.pi / length) ** 2
    n_steps = round((ts['t1'] - ts['t0']) / ts['dt'])
    damping = (1 + rate * ts['dt']) ** -n_steps
    t = time.perf_counter()
    out = solve_declarative(config_from_dict(data), write=False)
    elapsed = time.perf_counter() - t
    x = out.problem.variable('u').field.dofmap.node_coors[:, 0]
    err = np.abs(out.final_state - (2 - 40 * x)).max()
    ok = damping < 1e-6 and err <= 1e-5 and elapsed < 10
    report(2, f'heat steady limit ({len(dims)}D)', ok,
           f'slowest-mode factor {damping:.1e}, max error {err:.2e}, '
           f'{elapsed:.2f} s')


def test_03_backward_euler_oracle(report):
    worst = 0.0
    for dt in (0.01, 0.1, 0.5, 1.0, 3.0):
        out = solve_declarative(decay_problem(dt, n_steps=20).conf, write=False)
        x = out.problem.variable('u').field.dofmap.node_coors[:, 0]
        right = int(np.argmax(x))
        for step in out.steps:
            exact = (1.0 / (1.0 + dt)) ** step.step
            worst = max(worst, abs(step.state[right] - exact))
            worst = max(worst, abs(step.state[1 - right] + exact))
    report(3, 'backward-Euler oracle', worst <= 1e-12,
           f'max per-step deviation {worst:.2e} over 5 step sizes')


def test_04_homogeneous_cell(report):
    t = time.perf_counter()
    res = run_engine(data_path('homogeneous_micro.json'))
    elapsed = time.perf_counter() - t
    mat = _data('homogeneous_micro.json')['materials']['elastic']['D']['Ym']
    d = np.array(mat['value']) * mat['scale']
    rel = np.abs(res['A'] - d).max() / np.abs(d).max()
    p = max(np.abs(res[k]).max() for k in ('P1', 'P2'))
    ok = rel <= 1e-8 and p <= 1e-10 and elapsed < 10
    report(4, 'homogeneous cell', ok,
           f'|A - D|/|D| {rel:.1e}, max |P| {p:.1e}, {elapsed:.2f} s')


def test_05_layered_cell(report):
    k = run_engine(data_path('layered_micro.json'))['K']
    across = abs(k[0, 0] - 20 / 11) / (20 / 11)
    along = abs(k[1, 1] - 5.5) / 5.5
    report(5, 'layered cell', across <= 1e-6 and along <= 1e-6,
           f'across {k[0, 0]:.10f} (rel {across:.1e}), along {k[1, 1]:.10f} '
           f'(rel {along:.1e})')


def test_06_piezo_micro(report, tmp_path):
    conf_path = data_path('piezo_micro.json')
    t = time.perf_counter()
    r1 = run_engine(conf_path, n_workers=1)
    elapsed = time.perf_counter() - t
    r4 = run_engine(conf_path, n_workers=4)
    digest = config_digest(parse_problem(conf_path))
    c1, c4 = tmp_path / 'w1.json', tmp_path / 'w4.json'
    write_cache(str(c1), r1, digest)
    write_cache(str(c4), r4, digest)
    a = r1['A']
    asym = np.abs(a - a.T).max() / np.abs(a).max()
    lam = np.linalg.eigvalsh(0.5 * (a + a.T)).min()
    finite = all(np.isfinite(r1[k]).all() for k in ('P1', 'P2'))
    same = c1.read_bytes() == c4.read_bytes()
    ok = a.shape == (6, 6) and asym <= 1e-8 and lam > 0 and finite and same \
        and elapsed < 60
    report(6, 'piezo micro cell', ok,
           f'asymmetry {asym:.1e}, min eigenvalue {lam:.3e}, P finite {finite}, '
           f'caches identical {same}, {elapsed:.2f} s')


def test_07_macro_response(report, tmp_path):
    for name in ('piezo_micro.json', 'piezo_macro.json'):
        shutil.copy(data_path(name), tmp_path / name)
    base = _data('piezo_macro.json')

    def solve(phi):
        data = json.loads(json.dumps(base))
        spec = data['materials']['hom']['homogenized']
        spec['phi'] = list(phi)
        spec['cache'] = str(tmp_path / 'coefs.json')
        conf = config_from_dict(data, base_dir=str(tmp_path))
        return solve_declarative(conf, write=False).final_state

    phi = np.array([1e4, -1e4])
    u1, u2, u0 = solve(phi), solve(2 * phi), solve(0 * phi)
    m1, m2 = np.abs(u1).max(), np.abs(u2).max()
    scale = abs(m2 - 2 * m1) / (2 * m1)
    field = np.abs(u2 - 2 * u1).max() / np.abs(u2).max()
    ok = m1 > 0 and not u0.any() and scale <= 1e-10 and field <= 1e-10
    report(7, 'macro piezo response', ok,
           f'max |u| {m1:.3e} at +-1e4, zero at phi=0 {not u0.any()}, '
           f'doubling rel error {scale:.1e}')


def test_08_constraint_algebra(report):
    rng = np.random.default_rng(2024)
    failures = 0
    for _ in range(1000):
        n = int(rng.integers(1, 51))
        pairs = [tuple(map(int, p)) for p in
                 rng.integers(0, n, size=(int(rng.integers(0, n + 1)), 2))]
        fixed = rng.choice(n, size=int(rng.integers(0, n + 1)), replace=False)
        roots = tie_classes(n, pairs)
        val = {r: rng.standard_normal() for r in np.unique(roots)}
        ebcs = {int(d): val[roots[d]] for d in fixed}
        red = build_reduction(n, ebcs, pairs)
        x_r = rng.standard_normal(red.n_reduced)
        x = red.prolong(x_r)
        ok = np.array_equal(red.restrict(x), x_r)
        ok &= all(x[a] == x[b] for a, b in pairs)
        ok &= np.array_equal(x[red.fixed], red.u_fixed[red.fixed])
        order = rng.permutation(len(pairs))
        shuffled = [pairs[i][::-1] if rng.random() < 0.5 else pairs[i]
                    for i in order]
        other = build_reduction(n, ebcs, shuffled)
        ok &= np.array_equal(other.master, red.master)
        ok &= (other.prolongation != red.prolongation).nnz == 0
        ok &= np.array_equal(other.u_fixed, red.u_fixed)
        failures += not ok
    report(8, 'constraint algebra', failures == 0,
           f'{1000 - failures}/1000 random reductions exact')


def test_09_parser(report):
    rnd = random.Random(11)
    trips = 0
    for _ in range(200):
        eq = parse_equation(random_equation(rnd), check_terms=False)
        trips += parse_equation(format_equation(eq), check_terms=False) == eq
    documented = 0
    for text, lhs, rhs in DOCUMENTED_EQUATIONS.values():
        eq = parse_equation(text)
        documented += ([call_shape(c) for c in eq.lhs] == lhs
                       and [call_shape(c) for c in eq.rhs] == rhs)
    for expected in DOCUMENTED_CALLS.values():
        text = '{}.{}.{}({})'.format(*expected[1:4], ', '.join(expected[4]))
        documented += call_shape(parse_call(text)) == expected
    n_doc = len(DOCUMENTED_EQUATIONS) + len(DOCUMENTED_CALLS)
    report(9, 'parser', trips == 200 and documented == n_doc,
           f'{trips}/200 round trips, {documented}/{n_doc} documented strings')


def _laplace_errors(order, sizes):
    errs = []
    for n in sizes:
        pb = scalar_problem(
            (1.0, 1.0), (n + 1, n + 1), 'dw_laplace.i.Omega(m.c, v, u) = 0',
            functions={'g': 'exp(x) * sin(y)'},
            regions={'Gamma': ['all', 'facet']},
            ebcs={'b': ['Gamma', {'u.0': 'g'}]}, order=order,
            integrals={'i': 2 * order, 'hi': 8})
        out = solve_declarative(pb.conf, write=False)
        mp = out.problem.mapping('Omega', order, 'hi')
        dm = out.problem.variable('u').field.dofmap
        errs.append(l2_error(mp, dm, out.final_state,
                             lambda x: np.exp(x[:, 0]) * np.sin(x[:, 1])))
    errs = np.array(errs)
    return np.log2(errs[:-1] / errs[1:])


def test_10_convergence(report):
    sizes = (4, 8, 16, 32)
    r1, r2 = _laplace_errors(1, sizes), _laplace_errors(2, sizes)
    ok = r1.min() >= 1.9 and r2.min() >= 2.9
    report(10, 'convergence order', ok,
           f'order 1 rates {np.round(r1, 3).tolist()}, order 2 rates '
           f'{np.round(r2, 3).tolist()}')
