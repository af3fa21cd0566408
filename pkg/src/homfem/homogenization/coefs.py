"""Requirement (corrector) and coefficient definitions and their evaluators."""
from dataclasses import dataclass
import itertools

import numpy as np

from ..config import check_equation
from ..equations import parse_call, parse_equation
from ..errors import ConfigError, EngineError, HomfemError
from ..expressions import coefficient_formula
from ..terms import SYM_PAIRS

REQUIREMENT_CLASSES = ('ShapeDimDim', 'ShapeDim', 'CorrDimDim', 'CorrDim',
                       'CorrOne')
COEFFICIENT_CLASSES = ('CoefSymSym', 'CoefSym', 'CoefDimDim', 'CoefDim',
                       'CoefEval')

# Multi-index family produced by each requirement class.
INDEX_KIND = {'ShapeDimDim': 'dimdim', 'CorrDimDim': 'dimdim',
              'ShapeDim': 'dim', 'CorrDim': 'dim', 'CorrOne': 'one'}


def coef_node(name):
    return f'c.{name}'


@dataclass(frozen=True)
class Substitution:
    """``target`` parameter variable receives the sum of ``sources[*][key]``."""

    target: str
    sources: tuple
    key: str


@dataclass(frozen=True)
class RequirementDef:
    name: str
    cls: str
    requires: tuple = ()
    variables: tuple = ()
    equations: dict = None
    ebcs: tuple = ()
    epbcs: tuple = ()
    set_variables: tuple = ()
    dump_variables: tuple = ()

    @property
    def index_kind(self):
        return INDEX_KIND[self.cls]

    @property
    def node(self):
        return self.name


@dataclass(frozen=True)
class CoefficientDef:
    name: str
    cls: str
    requires: tuple = ()
    expression: str = ''
    set_variables: tuple = ()
    volume: str = None

    @property
    def node(self):
        return coef_node(self.name)


def _names(val, key):
    if val is None:
        return ()
    if isinstance(val, str):
        val = [val]
    if not isinstance(val, (list, tuple)) or not all(isinstance(v, str) for v in val):
        raise ConfigError('must be a list of names', key=key)
    return tuple(val)


def _substitutions(val, key, variables, kind='parameter'):
    out = []
    for i, entry in enumerate(val or ()):
        k = f'{key}[{i}]'
        if not (isinstance(entry, (list, tuple)) and len(entry) == 3):
            raise ConfigError('must be [target, source(s), key]', key=k)
        target, sources, skey = entry
        sources = _names(sources, k)
        if not sources:
            raise ConfigError('needs at least one source', key=k)
        var = variables.get(target)
        if var is None or var.kind != kind:
            raise ConfigError(f'target {target!r} is not a {kind} variable',
                              key=k)
        out.append(Substitution(target, sources, skey))
    return tuple(out)


def parse_requirement(name, raw, conf):
    key = f'requirements.{name}'
    if not isinstance(raw, dict):
        raise ConfigError('must be an object', key=key)
    cls = raw.get('class')
    if cls not in REQUIREMENT_CLASSES:
        raise ConfigError(f'unknown requirement class {cls!r}; known: '
                          f'{", ".join(REQUIREMENT_CLASSES)}', key=key)
    allowed = {'class', 'requires', 'variables', 'equations', 'ebcs', 'epbcs',
               'set_variables', 'dump_variables'}
    extra = set(raw) - allowed
    if extra:
        raise ConfigError(f'unknown keys {sorted(extra)}', key=key)
    requires = _names(raw.get('requires'), f'{key}.requires')
    if cls.startswith('Shape'):
        variables = _names(raw.get('variables'), f'{key}.variables')
        if len(variables) != 1 or variables[0] not in conf.variables:
            raise ConfigError('needs exactly one known variable in "variables"',
                              key=key)
        return RequirementDef(name, cls, requires, variables)

    eqs = raw.get('equations')
    if not isinstance(eqs, dict) or not eqs:
        raise ConfigError('needs an "equations" map', key=key)
    equations = {}
    for ename, text in eqs.items():
        ek = f'{key}.equations.{ename}'
        try:
            eq = parse_equation(text)
        except ConfigError as exc:
            raise ConfigError(str(exc), key=ek) from None
        check_equation(eq, ek, conf.regions, conf.variables, conf.materials,
                       conf.integrals)
        equations[ename] = eq
    ebcs = _names(raw.get('ebcs'), f'{key}.ebcs')
    epbcs = _names(raw.get('epbcs'), f'{key}.epbcs')
    for n in ebcs:
        if n not in conf.ebcs:
            raise ConfigError(f'unknown essential condition {n!r}', key=key)
    for n in epbcs:
        if n not in conf.epbcs:
            raise ConfigError(f'unknown periodic condition {n!r}', key=key)
    subs = _substitutions(raw.get('set_variables'), f'{key}.set_variables',
                          conf.variables)
    for s in subs:
        for src in s.sources:
            if src not in requires:
                raise ConfigError(f'substitution source {src!r} is not listed '
                                  f'in "requires"', key=key)
    dump = _names(raw.get('dump_variables'), f'{key}.dump_variables')
    for v in dump:
        if v not in conf.variables or conf.variables[v].kind != 'unknown':
            raise ConfigError(f'dump variable {v!r} is not an unknown', key=key)
    return RequirementDef(name, cls, requires, (), equations, ebcs, epbcs, subs,
                          dump)


def parse_coefficient(name, raw, conf):
    key = f'coefs.{name}'
    if not isinstance(raw, dict):
        raise ConfigError('must be an object', key=key)
    cls = raw.get('class')
    if cls not in COEFFICIENT_CLASSES:
        raise ConfigError(f'unknown coefficient class {cls!r}; known: '
                          f'{", ".join(COEFFICIENT_CLASSES)}', key=key)
    extra = set(raw) - {'class', 'requires', 'expression', 'set_variables',
                        'volume'}
    if extra:
        raise ConfigError(f'unknown keys {sorted(extra)}', key=key)
    requires = _names(raw.get('requires'), f'{key}.requires')
    expr = raw.get('expression')
    if not isinstance(expr, str):
        raise ConfigError('needs an "expression" string', key=key)
    if cls == 'CoefEval':
        formula = coefficient_formula(expr)
        for op in formula.operands:
            if coef_node(op) not in requires:
                raise ConfigError(f'operand c.{op} is not listed in "requires"',
                                  key=key)
        return CoefficientDef(name, cls, requires, expr)
    try:
        call = parse_call(expr)
    except ConfigError as exc:
        raise ConfigError(str(exc), key=f'{key}.expression') from None
    _check_call(call, conf, key)
    subs = _substitutions(raw.get('set_variables'), f'{key}.set_variables',
                          conf.variables)
    for s in subs:
        for src in s.sources:
            if src not in requires:
                raise ConfigError(f'substitution source {src!r} is not listed '
                                  f'in "requires"', key=key)
    volume = raw.get('volume')
    if volume is not None and volume not in conf.regions:
        raise ConfigError(f'unknown volume region {volume!r}', key=key)
    return CoefficientDef(name, cls, requires, expr, subs, volume)


def _check_call(call, conf, key):
    from ..equations import Equation

    check_equation(Equation((call,), ()), key, conf.regions, conf.variables,
                   conf.materials, conf.integrals)


def parse_definitions(conf):
    """Requirement and coefficient definitions of a micro configuration."""
    if not conf.coefs:
        raise ConfigError('micro configuration defines no coefficients',
                          key='coefs')
    reqs = {n: parse_requirement(n, r, conf) for n, r in conf.requirements.items()}
    coefs = {n: parse_coefficient(n, c, conf) for n, c in conf.coefs.items()}
    return reqs, coefs


# -- multi-index helpers -------------------------------------------------

def index_set(kind, dim):
    if kind == 'dimdim':
        return list(itertools.product(range(dim), repeat=2))
    if kind == 'dim':
        return [(i,) for i in range(dim)]
    return [()]


def _pick(store, src, idx):
    entries = store[src]
    if idx in entries:
        return entries[idx]
    if () in entries:
        return entries[()]
    raise EngineError(f'source {src!r} has no entry for multi-index {idx}')


def substituted(store, sub, idx, n_dofs):
    """Sum of the substitution sources at multi-index ``idx``."""
    total = np.zeros(n_dofs)
    for src in sub.sources:
        entry = _pick(store, src, idx)
        if sub.key not in entry:
            raise EngineError(f'source {src!r} does not store {sub.key!r}')
        vec = entry[sub.key]
        if len(vec) != n_dofs:
            raise EngineError(f'{src}[{sub.key!r}] has {len(vec)} DOFs, '
                              f'{sub.target!r} needs {n_dofs}')
        total += vec
    return total


# -- requirement evaluators ---------------------------------------------

def eval_shape_dim_dim(field):
    """Nodal data ``Pi^{ij}_k = y_j delta_ik`` for every pair (i, j)."""
    dm = field.dofmap
    dim = field.mesh.dim
    if dm.n_components != dim:
        raise EngineError(f'ShapeDimDim needs a vector field, {field.name!r} '
                          f'has {dm.n_components} component(s)')
    out = {}
    for i, j in index_set('dimdim', dim):
        vals = np.zeros((dm.n_nodes, dim))
        vals[:, i] = dm.node_coors[:, j]
        out[(i, j)] = vals.ravel()
    return out


def eval_shape_dim(field):
    """Nodal data ``Pi^i = y_i`` of a scalar field."""
    dm = field.dofmap
    if dm.n_components != 1:
        raise EngineError(f'ShapeDim needs a scalar field, {field.name!r} has '
                          f'{dm.n_components} components')
    return {(i,): dm.node_coors[:, i].copy() for i in range(field.mesh.dim)}


def solve_requirement(rdef, problem, store):
    """Evaluate a requirement; returns ``({index: {var: dofs}}, n_solves)``.

    ``store`` maps each required name to its own entries. For DimDim
    correctors only the pairs with ``i <= j`` are solved; ``(j, i)`` shares
    the result because the loads enter through symmetric gradients only.
    """
    dim = problem.mesh.dim
    if rdef.cls in ('ShapeDimDim', 'ShapeDim'):
        var = problem.variable(rdef.variables[0])
        fun = eval_shape_dim_dim if rdef.cls == 'ShapeDimDim' else eval_shape_dim
        return {idx: {var.name: v} for idx, v in fun(var.field).items()}, 0

    sub = problem.copy(equations=rdef.equations, ebcs=rdef.ebcs,
                       epbcs=rdef.epbcs)
    dump = rdef.dump_variables or tuple(v.name for v in sub.unknowns)
    for v in dump:
        sub.unknown_offset(v)
    out = {}
    n_solves = 0
    t0 = sub.solver_config.ts.t0
    for idx in index_set(rdef.index_kind, dim):
        if rdef.index_kind == 'dimdim' and idx[0] > idx[1]:
            continue
        for s in rdef.set_variables:
            n = sub.variable(s.target).n_dofs
            sub.set_parameter(s.target, substituted(store, s, idx, n))
        try:
            u, _ = sub.solve_step(t0, None, None)
        except HomfemError as exc:
            where = f' at multi-index {idx}' if idx else ''
            raise type(exc)(f'{rdef.name}{where}: {exc}') from None
        n_solves += 1
        state = sub.split_state(u)
        out[idx] = {v: state[v].copy() for v in dump}
    if rdef.index_kind == 'dimdim':
        for i, j in index_set('dimdim', dim):
            if i > j:
                out[(i, j)] = out[(j, i)]
    return out, n_solves


# -- coefficient evaluators ---------------------------------------------

_SIDE_KINDS = {'CoefSymSym': ('sym', 'sym'), 'CoefDimDim': ('dim', 'dim'),
               'CoefSym': ('sym', 'one'), 'CoefDim': ('dim', 'one')}


def _side_kind(sub, kinds):
    found = {kinds[s] for s in sub.sources}
    if 'dimdim' in found and 'dim' in found:
        raise EngineError(f'{sub.target!r} mixes DimDim and Dim sources')
    if 'dimdim' in found:
        return 'sym'
    if 'dim' in found:
        return 'dim'
    return 'one'


def _side_indices(kind, dim):
    if kind == 'sym':
        return list(SYM_PAIRS[dim])
    if kind == 'dim':
        return [(i,) for i in range(dim)]
    return [()]


def eval_coefficient(cdef, problem, store, kinds, coefs, volume):
    """Evaluate a coefficient from finished requirements and coefficients.

    ``kinds`` maps requirement names to their index kind; ``coefs`` holds
    the values of already computed coefficients.
    """
    if cdef.cls == 'CoefEval':
        return eval_coef_eval(cdef.expression, coefs)
    dim = problem.mesh.dim
    call = parse_call(cdef.expression)
    var_args = [a.name for a in call.args if not a.is_material]
    if len(var_args) != 2:
        raise EngineError(f'{cdef.name}: expression must take two variables')
    subs = {s.target: s for s in cdef.set_variables}
    sides = []
    for name in var_args:
        s = subs.get(name)
        if s is None:
            raise EngineError(f'{cdef.name}: no substitution for variable '
                              f'{name!r}')
        kind = _side_kind(s, kinds)
        n = problem.variable(name).n_dofs
        idxs = _side_indices(kind, dim)
        mat = np.column_stack([substituted(store, s, idx, n) for idx in idxs])
        sides.append((kind, mat))
    want = _SIDE_KINDS[cdef.cls]
    got = tuple(k for k, _ in sides)
    if sorted(got) != sorted(want):
        raise EngineError(f'{cdef.name}: {cdef.cls} needs argument families '
                          f'{want}, got {got}')
    if volume <= 0:
        raise EngineError(f'{cdef.name}: nonpositive normalization volume')
    val = problem.eval_bilinear(call, sides[0][1], sides[1][1]) / volume
    if want[1] == 'one':
        val = val[:, 0] if got[1] == 'one' else val[0, :]
    return np.ascontiguousarray(val)


def eval_coef_eval(expression, coefs):
    """Element-wise formula over ``c.<name>`` operands of equal shape."""
    formula = coefficient_formula(expression)
    ops = {}
    for name in formula.operands:
        if name not in coefs:
            raise EngineError(f'unknown operand c.{name} in {expression!r}')
        ops[name] = np.asarray(coefs[name], dtype=np.float64)
    shapes = {a.shape for a in ops.values() if a.ndim}
    if len(shapes) > 1:
        raise EngineError(f'operand shapes {sorted(shapes)} differ in '
                          f'{expression!r}')
    out = np.asarray(formula(ops), dtype=np.float64)
    if shapes:
        out = np.broadcast_to(out, shapes.pop())
    return np.array(out)
