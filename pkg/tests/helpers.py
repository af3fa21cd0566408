"""Small builders shared by the test modules."""
import numpy as np

from homfem import Problem, config_from_dict


def block(dims, shape, centre=None):
    centre = centre if centre is not None else [0.5 * d for d in dims]
    return {'generate': {'dims': list(dims), 'shape': list(shape),
                         'centre': list(centre)}}


def mixed_problem(dims=(1.0, 1.0, 1.0), shape=(3, 3, 3), materials=None,
                  order=1, registry=None, integral=2, **extra):
    """Problem with a scalar (p/q/P1/P2) and a vector (u/v/U1/U2) space."""
    data = {
        'mesh': block(dims, shape),
        'regions': {'Omega': 'all'},
        'fields': {'s': ['real', 'scalar', 'Omega', order],
                   'w': ['real', 'vector', 'Omega', order]},
        'variables': {
            'u': ['unknown field', 'w', 0],
            'v': ['test field', 'w', 'u'],
            'p': ['unknown field', 's', 1],
            'q': ['test field', 's', 'p'],
            'U1': ['parameter field', 'w', '(set-to-None)'],
            'U2': ['parameter field', 'w', '(set-to-None)'],
            'P1': ['parameter field', 's', '(set-to-None)'],
            'P2': ['parameter field', 's', '(set-to-None)'],
        },
        'materials': materials or {'m': {'c': 1.0}},
        'integrals': {'i': integral, 'hi': integral + 2},
    }
    data.update(extra)
    return Problem(config_from_dict(data, registry=registry), registry=registry)


def dense_matrix(problem, expr):
    """Globally assembled matrix of one term call (test rows, unknown cols)."""
    from homfem.assembly import SparseSystem, assemble

    blocks = problem.evaluate(expr, mode='matrix')
    names = sorted(_vars(expr), key=lambda n: problem.variable(n).kind != 'test')
    n_r, n_c = (problem.variable(n).n_dofs for n in names)
    sys = SparseSystem(max(n_r, n_c))
    for lb in blocks:
        assemble(sys, lb.data, lb.rows, lb.cols)
    return sys.matrix().toarray()[:n_r, :n_c]


def _vars(expr):
    args = expr[expr.index('(') + 1:expr.rindex(')')].split(',')
    return [a.strip() for a in args if '.' not in a]


def sym_basis(dim):
    from homfem.terms import SYM_PAIRS

    return SYM_PAIRS[dim]


def nodal(problem, field_var, fun):
    """DOF vector of ``fun(coors)`` (n_nodes, n_comp) on a variable's field."""
    dm = problem.variable(field_var).field.dofmap
    return np.asarray(fun(dm.node_coors), dtype=np.float64).ravel()


def scalar_problem(dims, shape, equation, materials=None, ebcs=None, ics=None,
                   solvers=None, functions=None, regions=None, registry=None,
                   integral=2, **extra):
    """Single scalar unknown ``u`` with test ``v`` on a generated block."""
    data = {
        'mesh': block(dims, shape, extra.pop('centre', None)),
        'regions': {'Omega': 'all', **(regions or {})},
        'fields': {'f': ['real', 'scalar', 'Omega', extra.pop('order', 1)]},
        'variables': {'u': ['unknown field', 'f', 0, 1],
                      'v': ['test field', 'f', 'u']},
        'materials': materials or {'m': {'c': 1.0}},
        'integrals': {'i': integral},
        'equations': {'eq': equation},
    }
    for key, val in (('ebcs', ebcs), ('ics', ics), ('solvers', solvers),
                     ('functions', functions)):
        if val is not None:
            data[key] = val
    data.update(extra)
    return Problem(config_from_dict(data, registry=registry), registry=registry)


def decay_problem(dt, n_steps=10, c=1.0 / 3.0):
    """One line cell of length 2 whose antisymmetric mode obeys u' = -u.

    Mass and stiffness eigenvalues of the mode are L/6 and 2c/L, so the
    decay rate is 12 c / L**2 = 1.
    """
    return scalar_problem(
        (2.0,), (2,),
        'dw_volume_dot.i.Omega(v, du/dt) + dw_laplace.i.Omega(m.c, v, u) = 0',
        centre=(0.0,), materials={'m': {'c': c}}, functions={'ic': 'x'},
        ics={'ic': ['Omega', {'u.0': 'ic'}]},
        solvers={'ts': {'kind': 'simple', 't0': 0.0, 't1': n_steps * dt,
                        'dt': dt},
                 'newton': {'eps_a': 1e-30, 'eps_r': 1e-14}})


# Equation strings of the bundled problems with
# the expected (sign, name, integral, region, args) of each side.
def _c(sign, name, integral, region, *args):
    return (sign, name, integral, region, args)


DOCUMENTED_EQUATIONS = {
    'heat': ('dw_volume_dot.i.Omega(v, du/dt)\n'
             '                     + dw_laplace.i.Omega(m.c, v, u) = 0',
             [_c(1, 'dw_volume_dot', 'i', 'Omega', 'v', 'du/dt'),
              _c(1, 'dw_laplace', 'i', 'Omega', 'm.c', 'v', 'u')], []),
    'balance_of_forces': (
        'dw_lin_elastic.i2.Omega(hom.A, v, u)\n'
        '                        = - dw_lin_prestress.i2.Omega(hom.Pf, v)',
        [_c(1, 'dw_lin_elastic', 'i2', 'Omega', 'hom.A', 'v', 'u')],
        [_c(-1, 'dw_lin_prestress', 'i2', 'Omega', 'hom.Pf', 'v')]),
    'omega_ij.eq1': (
        'dw_lin_elastic.i2.Ymc(elastic.D, v, u)\n'
        '                    - dw_piezo_coupling.i2.Ym(piezo.g, v, r)\n'
        '                   = -dw_lin_elastic.i2.Ymc(elastic.D, v, Pi_u)',
        [_c(1, 'dw_lin_elastic', 'i2', 'Ymc', 'elastic.D', 'v', 'u'),
         _c(-1, 'dw_piezo_coupling', 'i2', 'Ym', 'piezo.g', 'v', 'r')],
        [_c(-1, 'dw_lin_elastic', 'i2', 'Ymc', 'elastic.D', 'v', 'Pi_u')]),
    'omega_ij.eq2': (
        'dw_piezo_coupling.i2.Ym(piezo.g, u, s)\n'
        '                    + dw_diffusion.i2.Ym(piezo.d, s, r)\n'
        '                   = -dw_piezo_coupling.i2.Ym(piezo.g, Pi_u, s)',
        [_c(1, 'dw_piezo_coupling', 'i2', 'Ym', 'piezo.g', 'u', 's'),
         _c(1, 'dw_diffusion', 'i2', 'Ym', 'piezo.d', 's', 'r')],
        [_c(-1, 'dw_piezo_coupling', 'i2', 'Ym', 'piezo.g', 'Pi_u', 's')]),
    'omega_k.eq1': (
        'dw_lin_elastic.i2.Ymc(elastic.D, v, u)\n'
        '                    - dw_piezo_coupling.i2.Ym(piezo.g, v, r) = 0',
        [_c(1, 'dw_lin_elastic', 'i2', 'Ymc', 'elastic.D', 'v', 'u'),
         _c(-1, 'dw_piezo_coupling', 'i2', 'Ym', 'piezo.g', 'v', 'r')], []),
    'omega_k.eq2': (
        'dw_piezo_coupling.i2.Ym(piezo.g, u, s)\n'
        '                    + dw_diffusion.i2.Ym(piezo.d, s, r) = 0',
        [_c(1, 'dw_piezo_coupling', 'i2', 'Ym', 'piezo.g', 'u', 's'),
         _c(1, 'dw_diffusion', 'i2', 'Ym', 'piezo.d', 's', 'r')], []),
}

DOCUMENTED_CALLS = {
    'A1': _c(1, 'dw_lin_elastic', 'i2', 'Ymc', 'elastic.D', 'U1', 'U2'),
    'A2': _c(1, 'dw_diffusion', 'i2', 'Ym', 'piezo.d', 'R1', 'R2'),
    'P1_2': _c(1, 'dw_piezo_coupling', 'i2', 'Ym', 'piezo.g', 'U1', 'R1'),
}


def call_shape(call):
    return (call.sign, call.name, call.integral, call.region,
            tuple(str(a) for a in call.args))


def random_equation(rnd):
    """A grammar-valid equation string drawn with ``random.Random`` ``rnd``."""
    letters = 'abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_'

    def ident():
        tail = ''.join(rnd.choice(letters + '0123456789')
                       for _ in range(rnd.randint(0, 6)))
        return rnd.choice(letters) + tail

    def arg():
        kind = rnd.randrange(3)
        if kind == 0:
            return f'{ident()}.{ident()}'
        if kind == 1:
            return f'd{ident()}/dt'
        return ident()

    def product():
        call = '{}.{}.{}({})'.format(ident(), ident(), ident(), ', '.join(
            arg() for _ in range(rnd.randint(1, 4))))
        if rnd.random() < 0.3:
            return f'{rnd.uniform(1e-6, 1e6)!r} * {call}'
        return call

    def side():
        if rnd.random() < 0.2:
            return '0'
        n = rnd.randint(1, 3)
        text = ('- ' if rnd.random() < 0.3 else '') + product()
        for _ in range(n - 1):
            text += f' {rnd.choice("+-")} {product()}'
        return text

    return f'{side()} = {side()}'
