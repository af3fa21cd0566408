"""Declarative problem configuration: JSON loading and cross-checking.

See the README for the schema. :func:`parse_problem` returns a
:class:`ProblemConfig` whose entries are normalized into small dataclasses
and whose cross references (regions, fields, variables, materials,
integrals, functions) have all been verified.
"""
from dataclasses import dataclass, field, replace
import copy
import json
import os

from .equations import parse_equation
from .errors import ConfigError, ParseError
from .expressions import space_time_function
from .regions import KINDS, parse_predicate, parse_selector
from .solvers import LinearConfig, NewtonConfig, SolverConfig, TimeConfig

TOP_LEVEL_KEYS = ('mesh', 'regions', 'fields', 'variables', 'materials', 'ebcs',
                  'epbcs', 'ics', 'integrals', 'equations', 'solvers',
                  'functions', 'constants', 'options', 'coefs', 'requirements')

MATERIAL_HELPERS = ('stiffness_from_youngpoisson',)


@dataclass(frozen=True)
class MeshSpec:
    file: str = None
    generate: dict = None
    groups: tuple = ()


@dataclass(frozen=True)
class RegionDef:
    name: str
    selector: str
    kind: str = None


@dataclass(frozen=True)
class FieldDef:
    name: str
    n_components: object  # 1, 'scalar', 'vector' or an integer
    region: str
    order: int = 1
    dtype: str = 'real'


@dataclass(frozen=True)
class VariableDef:
    name: str
    kind: str  # 'unknown' | 'test' | 'parameter'
    field: str
    order_in_vector: int = 0
    history: int = 0
    primary: str = None
    source: str = None


@dataclass(frozen=True)
class MaterialDef:
    name: str
    values: object  # dict of parameters, or a function name


@dataclass(frozen=True)
class DofSpec:
    variable: str
    component: object  # int or 'all'
    value: object


@dataclass(frozen=True)
class EbcDef:
    name: str
    region: str
    dofs: tuple


@dataclass(frozen=True)
class EpbcDef:
    name: str
    master: str
    slave: str
    dofs: tuple  # ((variable, component), ...)
    match: object


@dataclass(frozen=True)
class IcDef:
    name: str
    region: str
    dofs: tuple


@dataclass(frozen=True)
class ProblemConfig:
    mesh: MeshSpec
    regions: dict
    fields: dict
    variables: dict
    materials: dict
    ebcs: dict
    epbcs: dict
    ics: dict
    integrals: dict
    equations: dict
    solvers: SolverConfig
    functions: dict
    constants: dict
    options: dict
    coefs: dict
    requirements: dict
    base_dir: str = '.'
    source: str = None
    raw: dict = field(default=None, repr=False, compare=False)

    def with_overrides(self, **kw):
        return replace(self, **kw)


def _require(cond, msg, key):
    if not cond:
        raise ConfigError(msg, key=key)


def _load_text(text):
    if not text.strip():
        return {}
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f'invalid JSON: {exc.msg}', text=text, pos=exc.pos,
                         line=exc.lineno, column=exc.colno) from None
    _require(isinstance(data, dict), 'top level must be a JSON object', None)
    return data


def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _parse_mesh(data):
    _require('mesh' in data, 'missing mesh source (give "mesh": {"file": ...} '
             'or {"generate": ...})', 'mesh')
    m = data['mesh']
    if isinstance(m, str):
        m = {'file': m}
    _require(isinstance(m, dict), 'must be an object', 'mesh')
    unknown = set(m) - {'file', 'generate', 'groups'}
    _require(not unknown, f'unknown keys {sorted(unknown)}', 'mesh')
    has_file, has_gen = 'file' in m, 'generate' in m
    _require(has_file != has_gen, 'give exactly one of "file" or "generate"',
             'mesh')
    gen = None
    if has_gen:
        gen = m['generate']
        _require(isinstance(gen, dict) and {'dims', 'shape'} <= set(gen),
                 'needs "dims" and "shape"', 'mesh.generate')
        gen = {'dims': list(gen['dims']), 'shape': list(gen['shape']),
               'centre': list(gen.get('centre', [0.0] * len(gen['dims'])))}
    else:
        _require(isinstance(m['file'], str), 'must be a path string', 'mesh.file')
    groups = []
    for i, entry in enumerate(m.get('groups', [])):
        key = f'mesh.groups[{i}]'
        _require(isinstance(entry, (list, tuple)) and len(entry) == 2
                 and isinstance(entry[0], int) and isinstance(entry[1], str),
                 'must be [group_id, predicate]', key)
        try:
            parse_predicate(entry[1])
        except ConfigError as exc:
            raise ConfigError(str(exc), key=key) from None
        groups.append((entry[0], entry[1]))
    return MeshSpec(m.get('file'), gen, tuple(groups))


def _parse_regions(data):
    out = {}
    for name, val in data.get('regions', {}).items():
        key = f'regions.{name}'
        kind = None
        if isinstance(val, (list, tuple)):
            _require(len(val) == 2 and all(isinstance(v, str) for v in val),
                     'must be "selector" or ["selector", kind]', key)
            val, kind = val
            _require(kind in KINDS, f'unknown kind {kind!r}', key)
        _require(isinstance(val, str), 'selector must be a string', key)
        try:
            parse_selector(val)
        except ConfigError as exc:
            raise ConfigError(str(exc), key=key) from None
        out[name] = RegionDef(name, val, kind)
    return out


def _parse_fields(data, regions):
    out = {}
    for name, val in data.get('fields', {}).items():
        key = f'fields.{name}'
        _require(isinstance(val, (list, tuple)) and len(val) in (3, 4),
                 'must be ["real", n_components, region, order]', key)
        dtype, ncomp, region = val[:3]
        order = val[3] if len(val) == 4 else 1
        _require(dtype == 'real', 'only "real" fields are supported', key)
        _require(ncomp in ('scalar', 'vector') or (isinstance(ncomp, int)
                                                    and ncomp >= 1),
                 f'bad component count {ncomp!r}', key)
        _require(region in regions, f'unknown region {region!r}', key)
        _require(order in (1, 2), 'order must be 1 or 2', key)
        out[name] = FieldDef(name, ncomp, region, order, dtype)
    return out


def _parse_variables(data, fields):
    out = {}
    for name, val in data.get('variables', {}).items():
        key = f'variables.{name}'
        _require(isinstance(val, (list, tuple)) and len(val) >= 2,
                 'must be [kind, field, ...]', key)
        kind, fname = val[0], val[1]
        _require(fname in fields, f'unknown field {fname!r}', key)
        if kind == 'unknown field':
            order = val[2] if len(val) > 2 else 0
            history = val[3] if len(val) > 3 else 0
            _require(isinstance(order, int) and order >= 0,
                     'order in vector must be a nonnegative integer', key)
            _require(history in (0, 1), 'history size must be 0 or 1', key)
            out[name] = VariableDef(name, 'unknown', fname, order, history)
        elif kind == 'test field':
            _require(len(val) == 3, 'needs the primary unknown name', key)
            out[name] = VariableDef(name, 'test', fname, primary=val[2])
        elif kind == 'parameter field':
            src = val[2] if len(val) > 2 else '(set-to-None)'
            out[name] = VariableDef(name, 'parameter', fname, source=src)
        else:
            raise ConfigError(f'unknown variable kind {kind!r}', key=key)
    for v in out.values():
        if v.kind == 'test':
            key = f'variables.{v.name}'
            prim = out.get(v.primary)
            _require(prim is not None and prim.kind == 'unknown',
                     f'primary variable {v.primary!r} is not an unknown', key)
    return out


def _check_value(val, functions, key, registry):
    """Constant, nested list or function reference."""
    if _is_number(val):
        return
    if isinstance(val, str):
        _require(val in functions or val in registry,
                 f'unknown function {val!r}', key)
        return
    if isinstance(val, list):
        return
    raise ConfigError(f'unsupported value {val!r}', key=key)


def _parse_materials(data, regions, functions, registry):
    out = {}
    for name, val in data.get('materials', {}).items():
        key = f'materials.{name}'
        if isinstance(val, list) and len(val) == 1:
            val = val[0]
        if isinstance(val, str):
            _require(val in registry or val in functions,
                     f'unknown material function {val!r}', key)
            out[name] = MaterialDef(name, val)
            continue
        _require(isinstance(val, dict), 'must be an object of parameters', key)
        if 'homogenized' in val:
            hom = val['homogenized']
            _require(isinstance(hom, dict) and 'micro' in hom,
                     'needs a "micro" config path', f'{key}.homogenized')
            out[name] = MaterialDef(name, {'homogenized': dict(hom)})
            continue
        for pname, pval in val.items():
            pkey = f'{key}.{pname}'
            if isinstance(pval, dict):
                _check_param_dict(pval, regions, functions, registry, pkey)
            else:
                _check_value(pval, functions, pkey, registry)
        out[name] = MaterialDef(name, copy.deepcopy(val))
    return out


def _check_param_dict(pval, regions, functions, registry, key):
    keys = set(pval)
    if keys & set(MATERIAL_HELPERS):
        _require(len(keys) == 1, 'helper must be the only key', key)
        return
    if 'value' in keys:
        _require(keys <= {'value', 'scale'}, 'allowed keys: value, scale', key)
        return
    for rname, rval in pval.items():
        _require(rname in regions, f'unknown region {rname!r}', key)
        if isinstance(rval, dict):
            _check_param_dict(rval, regions, functions, registry,
                              f'{key}.{rname}')
        else:
            _check_value(rval, functions, f'{key}.{rname}', registry)


def _dof_specs(spec, variables, key, functions, registry, values=True):
    _require(isinstance(spec, dict) and spec, 'needs a {"var.comp": value} map',
             key)
    out = []
    for dkey, val in spec.items():
        var, _, comp = dkey.partition('.')
        _require(var in variables, f'unknown variable {var!r}', key)
        _require(variables[var].kind == 'unknown',
                 f'{var!r} is not an unknown variable', key)
        if comp != 'all':
            _require(comp.isdigit(), f'bad component in {dkey!r}', key)
            comp = int(comp)
        if values:
            _check_value(val, functions, f'{key}.{dkey}', registry)
        out.append(DofSpec(var, comp, val))
    return tuple(out)


def _parse_ebcs(data, regions, variables, functions, registry):
    out = {}
    for name, val in data.get('ebcs', {}).items():
        key = f'ebcs.{name}'
        _require(isinstance(val, (list, tuple)) and len(val) == 2,
                 'must be [region, {"var.comp": value}]', key)
        _require(val[0] in regions, f'unknown region {val[0]!r}', key)
        out[name] = EbcDef(name, val[0], _dof_specs(val[1], variables, key,
                                                    functions, registry))
    return out


def _parse_epbcs(data, regions, variables):
    out = {}
    for name, val in data.get('epbcs', {}).items():
        key = f'epbcs.{name}'
        _require(isinstance(val, (list, tuple)) and len(val) == 3,
                 'must be [[master, slave], {"var.comp": "var.comp"}, match]',
                 key)
        pair, spec, match = val
        _require(isinstance(pair, (list, tuple)) and len(pair) == 2,
                 'needs a [master, slave] region pair', key)
        for r in pair:
            _require(r in regions, f'unknown region {r!r}', key)
        specs = _dof_specs(spec, variables, key, {}, {}, values=False)
        for s in specs:
            _require(s.value == f'{s.variable}.{s.component}',
                     'periodic DOFs must tie a component to itself', key)
        _require(isinstance(match, str) or (isinstance(match, list)
                                            and all(map(_is_number, match))),
                 'match must be a matcher name or a translation vector', key)
        out[name] = EpbcDef(name, pair[0], pair[1],
                            tuple((s.variable, s.component) for s in specs),
                            tuple(match) if isinstance(match, list) else match)
    return out


def _parse_ics(data, regions, variables, functions, registry):
    out = {}
    for name, val in data.get('ics', {}).items():
        key = f'ics.{name}'
        _require(isinstance(val, (list, tuple)) and len(val) == 2,
                 'must be [region, {"var.comp": value}]', key)
        _require(val[0] in regions, f'unknown region {val[0]!r}', key)
        out[name] = IcDef(name, val[0], _dof_specs(val[1], variables, key,
                                                   functions, registry))
    return out


def _parse_integrals(data):
    out = {}
    for name, val in data.get('integrals', {}).items():
        key = f'integrals.{name}'
        if isinstance(val, dict):
            val = val.get('order')
        _require(isinstance(val, int) and val >= 1,
                 'quadrature order must be a positive integer', key)
        out[name] = val
    return out


def check_equation(eq, key, regions, variables, materials, integrals):
    """Verify the names used by a parsed equation."""
    for call in eq.terms:
        _require(call.integral in integrals,
                 f'unknown integral {call.integral!r} in {call.call_str()}', key)
        _require(call.region in regions,
                 f'unknown region {call.region!r} in {call.call_str()}', key)
        for a in call.args:
            if a.is_material:
                _require(a.name in materials,
                         f'unknown material {a.name!r} in {call.call_str()}', key)
            else:
                _require(a.name in variables,
                         f'unknown variable {a.name!r} in {call.call_str()}', key)
                if a.kind == 'dt':
                    v = variables[a.name]
                    _require(v.kind == 'unknown' and v.history >= 1,
                             f'd{a.name}/dt needs an unknown with history '
                             f'size 1', key)


def _parse_equations(data, regions, variables, materials, integrals):
    out = {}
    for name, text in data.get('equations', {}).items():
        key = f'equations.{name}'
        try:
            eq = parse_equation(text)
        except ParseError as exc:
            raise ParseError(f'{key}: {exc}', text=text, pos=exc.pos) from None
        check_equation(eq, key, regions, variables, materials, integrals)
        out[name] = eq
    return out


def _parse_solvers(data):
    s = data.get('solvers', {})
    _require(isinstance(s, dict), 'must be an object', 'solvers')
    unknown = set(s) - {'ts', 'newton', 'linear'}
    _require(not unknown, f'unknown keys {sorted(unknown)}', 'solvers')
    try:
        return SolverConfig(linear=LinearConfig(**s.get('linear', {})),
                            newton=NewtonConfig(**s.get('newton', {})),
                            ts=TimeConfig(**s.get('ts', {})))
    except TypeError as exc:
        raise ConfigError(str(exc), key='solvers') from None


def _parse_functions(data, constants):
    out = {}
    for name, text in data.get('functions', {}).items():
        key = f'functions.{name}'
        _require(isinstance(text, str), 'must be an expression string', key)
        try:
            out[name] = space_time_function(text, constants)
        except ConfigError as exc:
            raise ConfigError(str(exc), key=key) from None
    return out


def config_from_dict(data, base_dir='.', source=None, registry=None):
    """Validate a configuration mapping and build a :class:`ProblemConfig`.

    ``registry`` maps names to host-side callables usable wherever a
    function name is accepted.
    """
    registry = registry or {}
    unknown = set(data) - set(TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f'unknown top-level key(s) {sorted(unknown)}; allowed: '
                          f'{", ".join(TOP_LEVEL_KEYS)}')
    mesh = _parse_mesh(data)
    constants = dict(data.get('constants', {}))
    for k, v in constants.items():
        _require(_is_number(v), 'constants must be numbers', f'constants.{k}')
    functions = _parse_functions(data, constants)
    regions = _parse_regions(data)
    fields = _parse_fields(data, regions)
    variables = _parse_variables(data, fields)
    materials = _parse_materials(data, regions, functions, registry)
    ebcs = _parse_ebcs(data, regions, variables, functions, registry)
    epbcs = _parse_epbcs(data, regions, variables)
    ics = _parse_ics(data, regions, variables, functions, registry)
    integrals = _parse_integrals(data)
    equations = _parse_equations(data, regions, variables, materials, integrals)
    solvers = _parse_solvers(data)
    options = dict(data.get('options', {}))
    return ProblemConfig(mesh, regions, fields, variables, materials, ebcs,
                         epbcs, ics, integrals, equations, solvers, functions,
                         constants, options, dict(data.get('coefs', {})),
                         dict(data.get('requirements', {})), base_dir, source,
                         data)


def read_config_text(path):
    try:
        with open(path) as fd:
            return fd.read()
    except FileNotFoundError:
        raise ConfigError(f'config not found: {path}') from None
    except OSError as exc:
        raise ConfigError(f'cannot read config {path}: {exc}') from None


def parse_problem(path, registry=None):
    """Parse a JSON problem configuration file and cross-check its references."""
    text = read_config_text(path)
    data = _load_text(text)
    base = os.path.dirname(os.path.abspath(path))
    return config_from_dict(data, base_dir=base, source=os.path.abspath(path),
                            registry=registry)


def parse_problem_text(text, base_dir='.', registry=None):
    """Parse configuration text (JSON) without a file."""
    return config_from_dict(_load_text(text), base_dir=base_dir,
                            registry=registry)
