"""Problem assembly and the declarative solve driver."""
from dataclasses import dataclass, field
import copy
import logging
import os
import threading

import numpy as np

from .assembly import SparseSystem, assemble
from .config import ProblemConfig, parse_problem
from .constraints import build_reduction, match_periodic
from .equations import Arg, TermCall, parse_call
from .errors import (ConfigError, HomfemError, PhaseError, SolverError,
                     TermError)
from .fields import Field, build_mapping
from .mesh import generate_block_mesh
from .regions import predicate_cells, select_region
from .solvers import (factorize, newton, run_implicit,
                      run_stationary, solve_linear)
from .terms import eval_bilinear_values, eval_strain, eval_term_local
from .terms import SYM_PAIRS, stiffness_from_youngpoisson
from .vtk import read_vtk, write_vtk

log = logging.getLogger(__name__)


def load_mesh(spec, base_dir='.'):
    """Build the mesh described by a :class:`MeshSpec`."""
    if spec.generate is not None:
        g = spec.generate
        mesh = generate_block_mesh(g['dims'], g['shape'], g['centre'])
    else:
        path = spec.file
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        mesh = read_vtk(path)
    if spec.groups:
        ids = np.array(mesh.cell_group_ids, copy=True)
        for gid, pred in spec.groups:
            ids[predicate_cells(mesh, pred)] = gid
        mesh = mesh.with_groups(ids)
    return mesh


@dataclass(frozen=True, eq=False)
class Variable:
    name: str
    kind: str
    field: Field
    order_in_vector: int = 0
    history: int = 0
    primary: str = None
    source: str = None

    @property
    def n_dofs(self):
        return self.field.dofmap.n_dofs


def _as_array(val):
    arr = np.asarray(val, dtype=np.float64)
    return arr


def resolve_value(spec, coors, t, functions, registry):
    """Evaluate one material entry at points.

    Constants return their array as is; functions return an array whose
    first axis runs over ``coors``.
    """
    if isinstance(spec, str):
        if spec in registry:
            out = np.asarray(registry[spec](coors, t), dtype=np.float64)
        elif spec in functions:
            out = functions[spec](coors, t)
        else:
            raise ConfigError(f'unregistered function {spec!r}')
        if out.ndim == 0 or out.shape[0] != len(coors):
            raise TermError(f'function {spec!r} returned shape {out.shape} for '
                            f'{len(coors)} points')
        return out, True
    if isinstance(spec, dict):
        if 'stiffness_from_youngpoisson' in spec:
            return stiffness_from_youngpoisson(
                *spec['stiffness_from_youngpoisson']), False
        if 'value' in spec:
            return _as_array(spec['value']) * spec.get('scale', 1.0), False
        raise TermError(f'cannot evaluate material entry {spec!r} here')
    return _as_array(spec), False


def resolve_materials(conf, time, coors, registry=None):
    """Evaluate every region-independent material parameter at points.

    Returns ``{"mat.param": array}`` with arrays of shape (n_point, ...).
    """
    registry = registry or {}
    coors = np.atleast_2d(np.asarray(coors, dtype=np.float64))
    out = {}
    for mname, mdef in conf.materials.items():
        if not isinstance(mdef.values, dict) or 'homogenized' in mdef.values:
            continue
        for pname, spec in mdef.values.items():
            if isinstance(spec, dict) and not ({'value', 'stiffness_from_youngpoisson'}
                                               & set(spec)):
                continue
            val, per_point = resolve_value(spec, coors, time, conf.functions,
                                           registry)
            if not per_point:
                val = np.broadcast_to(val, (len(coors),) + val.shape).copy()
            out[f'{mname}.{pname}'] = val
    return out


class _Context:
    """Term evaluation context with optional value overrides."""

    def __init__(self, problem, t=0.0, values=None):
        self.problem = problem
        self.t = t
        self.overrides = values or {}

    def variable(self, name):
        return self.problem.variable(name)

    def values(self, name):
        if name in self.overrides:
            return self.overrides[name]
        return self.problem.variable_values(name)

    def mapping(self, region, fld, integral):
        return self.problem.mapping(region, fld.order, integral)

    def material(self, mat, param, region, blk):
        return self.problem.material_values(mat, param, region, blk, self.t)


class Problem:
    """A discretized problem built from a :class:`ProblemConfig`.

    ``registry`` maps function names to host callables ``f(coors, t)``; a
    callable used as a whole material returns a dict of parameter arrays.
    """

    def __init__(self, conf, registry=None, mesh=None):
        if not isinstance(conf, ProblemConfig):
            raise ConfigError('Problem needs a parsed ProblemConfig')
        self.conf = conf
        self.registry = dict(registry or {})
        self.mesh = mesh if mesh is not None else load_mesh(conf.mesh, conf.base_dir)
        self.regions = {}
        for name, rdef in conf.regions.items():
            try:
                self.regions[name] = select_region(self.mesh, name, rdef.selector,
                                                   rdef.kind)
            except HomfemError as exc:
                raise type(exc)(f'regions.{name}: {exc}') from None
        self.fields = {}
        for name, fdef in conf.fields.items():
            nc = fdef.n_components
            nc = {'scalar': 1, 'vector': self.mesh.dim}.get(nc, nc)
            if nc not in (1, self.mesh.dim):
                raise ConfigError(f'{nc} components in a {self.mesh.dim}D mesh',
                                  key=f'fields.{name}')
            self.fields[name] = Field(name, nc, self.regions[fdef.region],
                                      fdef.order)
        self.variables = {
            name: Variable(name, v.kind, self.fields[v.field], v.order_in_vector,
                           v.history, v.primary, v.source)
            for name, v in conf.variables.items()}
        self.equations = dict(conf.equations)
        self.active_ebcs = list(conf.ebcs)
        self.active_epbcs = list(conf.epbcs)
        self.solver_config = conf.solvers
        self.homog_info = {}
        self._params = {}
        self._state = {}
        self._lock = threading.RLock()
        self._mappings = {}
        self._materials = {}
        self._homog = {}
        self._assembled = {}
        self._factors = {}
        self._pairs = None
        self._pversion = 0
        self._check_components()

    def _check_components(self):
        groups = [('ebcs', self.conf.ebcs), ('ics', self.conf.ics)]
        for kind, defs in groups:
            for name, d in defs.items():
                for ds in d.dofs:
                    nc = self.variables[ds.variable].field.n_components
                    if ds.component != 'all' and ds.component >= nc:
                        raise ConfigError(
                            f'component {ds.component} of {ds.variable!r} out '
                            f'of range', key=f'{kind}.{name}')

    # -- configuration views -------------------------------------------
    def copy(self, equations=None, ebcs=None, epbcs=None):
        """Shallow copy sharing geometry caches, with its own conditions."""
        other = copy.copy(self)
        other.equations = dict(self.equations if equations is None else equations)
        other.active_ebcs = list(self.active_ebcs if ebcs is None else ebcs)
        other.active_epbcs = list(self.active_epbcs if epbcs is None else epbcs)
        other._params = dict(self._params)
        other._state = {}
        other._assembled = {}
        other._factors = {}
        other._pairs = None
        for name in other.active_ebcs:
            if name not in self.conf.ebcs:
                raise ConfigError(f'unknown essential condition {name!r}')
        for name in other.active_epbcs:
            if name not in self.conf.epbcs:
                raise ConfigError(f'unknown periodic condition {name!r}')
        return other

    def variable(self, name):
        try:
            return self.variables[name]
        except KeyError:
            raise ConfigError(f'unknown variable {name!r}') from None

    @property
    def unknowns(self):
        """Unknown variables used by the active equations, in vector order."""
        names = set()
        for eq in self.equations.values():
            for call in eq.terms:
                for a in call.args:
                    if a.is_material:
                        continue
                    v = self.variable(a.name)
                    if v.kind == 'unknown':
                        names.add(v.name)
                    elif v.kind == 'test':
                        names.add(v.primary)
        vs = [self.variables[n] for n in names]
        return sorted(vs, key=lambda v: (v.order_in_vector, v.name))

    @property
    def offsets(self):
        offs = [0]
        for v in self.unknowns:
            offs.append(offs[-1] + v.n_dofs)
        return np.array(offs, dtype=np.int64)

    @property
    def n_dofs(self):
        return int(self.offsets[-1])

    def unknown_offset(self, name):
        for v, off in zip(self.unknowns, self.offsets):
            if v.name == name:
                return int(off)
        raise ConfigError(f'{name!r} is not an unknown of the active equations')

    @property
    def has_time_derivative(self):
        return any(call.dt_args for eq in self.equations.values()
                   for call in eq.terms)

    def split_state(self, u):
        """Map a stacked DOF vector to ``{unknown name: DOF vector}``."""
        u = np.asarray(u, dtype=np.float64)
        offs = self.offsets
        return {v.name: u[offs[i]:offs[i + 1]] for i, v in enumerate(self.unknowns)}

    def set_parameter(self, name, values):
        """Set the DOF vector of a parameter (or frozen unknown) variable."""
        var = self.variable(name)
        values = np.asarray(values, dtype=np.float64).ravel()
        if len(values) != var.n_dofs:
            raise ConfigError(f'{name!r} needs {var.n_dofs} values, got '
                              f'{len(values)}')
        self._params[name] = values
        self._pversion += 1

    def set_state(self, u):
        self._state = self.split_state(u)

    def variable_values(self, name):
        if name in self._params:
            return self._params[name]
        if name in self._state:
            return self._state[name]
        raise ConfigError(f'variable {name!r} has no values set')

    # -- geometry and materials ----------------------------------------
    def mapping(self, region, order, integral):
        if integral not in self.conf.integrals:
            raise ConfigError(f'unknown integral {integral!r}')
        if region not in self.regions:
            raise ConfigError(f'unknown region {region!r}')
        key = (region, order, integral)
        with self._lock:
            mp = self._mappings.get(key)
            if mp is None:
                mp = build_mapping(self.mesh, self.regions[region], order,
                                   self.conf.integrals[integral])
                self._mappings[key] = mp
        return mp

    def _homogenized(self, name, spec):
        from .homogenization.cache import get_homog_coefs_linear

        with self._lock:
            if name not in self._homog:
                micro = spec['micro']
                if not os.path.isabs(micro):
                    micro = os.path.join(self.conf.base_dir, micro)
                cache = spec.get('cache')
                if cache and not os.path.isabs(cache):
                    cache = os.path.join(self.conf.base_dir, cache)
                coefs, info = get_homog_coefs_linear(
                    micro, cache, n_workers=spec.get('workers'),
                    registry=self.registry, return_info=True)
                self.homog_info[name] = info
                self._homog[name] = coefs
            return self._homog[name]

    def material_values(self, mat, param, region, blk, t=0.0):
        """Material parameter values on a mapping block.

        Returns an array (n_cell or 1, n_qp or 1, ...).
        """
        if mat not in self.conf.materials:
            raise ConfigError(f'unknown material {mat!r}')
        mdef = self.conf.materials[mat]
        tkey = t if self._time_dependent(mdef) else None
        key = (mat, param, region, blk.cell_type, id(blk), tkey)
        with self._lock:
            val = self._materials.get(key)
        if val is not None:
            return val
        val = self._material_values(mdef, param, blk, t)
        with self._lock:
            self._materials[key] = val
        return val

    def _time_dependent(self, mdef):
        def walk(v):
            if isinstance(v, str):
                return True
            if isinstance(v, dict):
                return any(walk(x) for x in v.values())
            return False
        return walk(mdef.values) and not (isinstance(mdef.values, dict)
                                          and 'homogenized' in mdef.values)

    def _material_values(self, mdef, param, blk, t):
        n_cell, n_qp = blk.dv.shape
        coors = blk.qp_coors.reshape(-1, self.mesh.dim)
        values = mdef.values
        if isinstance(values, dict) and 'homogenized' in values:
            from .homogenization.cache import macro_material_bridge

            spec = values['homogenized']
            coefs = self._homogenized(mdef.name, spec)
            phi = spec.get('phi')
            if phi is None:
                raise ConfigError('homogenized material needs "phi"',
                                  key=f'materials.{mdef.name}')
            out = macro_material_bridge(coefs, phi, len(coors))
            if param not in out:
                raise TermError(f'material {mdef.name!r} has no parameter '
                                f'{param!r} (available: {sorted(out)})')
            arr = out[param]
            return arr.reshape((n_cell, n_qp) + arr.shape[1:])
        if isinstance(values, str):
            fun = self.registry.get(values)
            if fun is None:
                raise ConfigError(f'unregistered material function {values!r}')
            out = fun(coors, t)
            if not isinstance(out, dict) or param not in out:
                raise TermError(f'material function {values!r} did not return '
                                f'parameter {param!r}')
            arr = np.asarray(out[param], dtype=np.float64)
            if arr.ndim == 0 or arr.shape[0] != len(coors):
                raise TermError(f'material function {values!r} returned shape '
                                f'{arr.shape} for {len(coors)} points')
            return arr.reshape((n_cell, n_qp) + arr.shape[1:])
        if param not in values:
            raise TermError(f'material {mdef.name!r} has no parameter {param!r}')
        return self._param_on_cells(values[param], blk.cells,
                                    blk.qp_coors, t, f'{mdef.name}.{param}')

    def _param_on_cells(self, spec, cells, qp_coors, t, what):
        n_cell, n_qp = qp_coors.shape[:2]
        region_keyed = (isinstance(spec, dict) and not
                        ({'value', 'stiffness_from_youngpoisson'} & set(spec)))
        if not region_keyed:
            val, per_point = resolve_value(spec, qp_coors.reshape(-1, self.mesh.dim),
                                           t, self.conf.functions, self.registry)
            if per_point:
                return val.reshape((n_cell, n_qp) + val.shape[1:])
            return val.reshape((1, 1) + val.shape)
        out = None
        done = np.zeros(n_cell, dtype=bool)
        for rname, sub in spec.items():
            region = self.regions[rname]
            if region.kind != 'cell':
                raise TermError(f'{what}: region {rname!r} is not a cell region')
            mask = np.isin(cells, region.ids) & ~done
            if not mask.any():
                continue
            val = self._param_on_cells(sub, cells[mask], qp_coors[mask], t, what)
            val = np.broadcast_to(val, (mask.sum(), n_qp) + val.shape[2:])
            if out is None:
                out = np.zeros((n_cell, n_qp) + val.shape[2:])
            elif out.shape[2:] != val.shape[2:]:
                raise TermError(f'{what}: region values have different shapes')
            out[mask] = val
            done |= mask
        if not done.all():
            raise TermError(f'{what}: {int((~done).sum())} cell(s) are not '
                            f'covered by the region-wise values')
        return out

    # -- constraints ----------------------------------------------------
    def _node_values(self, spec, coors, t, n_comp, what):
        if isinstance(spec, (int, float)) and not isinstance(spec, bool):
            return np.full((len(coors), n_comp), float(spec))
        if isinstance(spec, list):
            arr = np.asarray(spec, dtype=np.float64)
            return np.broadcast_to(arr, (len(coors), n_comp)).copy()
        try:
            val, _ = resolve_value(spec, coors, t, self.conf.functions,
                                   self.registry)
        except HomfemError as exc:
            raise type(exc)(f'{what}: {exc}') from None
        val = val.reshape(len(coors), -1)
        if val.shape[1] not in (1, n_comp):
            raise TermError(f'{what}: function returned {val.shape[1]} '
                            f'components, expected 1 or {n_comp}')
        return np.broadcast_to(val, (len(coors), n_comp)).copy()

    def _dof_values(self, region_name, dofspecs, t, what):
        """Stacked DOF indices and values for ebc/ic specifications."""
        region = self.regions[region_name]
        dofs, vals = [], []
        for ds in dofspecs:
            var = self.variable(ds.variable)
            dm = var.field.dofmap
            nc = dm.n_components
            comps = list(range(nc)) if ds.component == 'all' else [ds.component]
            if max(comps) >= nc:
                raise ConfigError(f'component {ds.component} of {var.name!r} '
                                  f'out of range', key=what)
            nodes = dm.nodes_of_region(region)
            if not len(nodes):
                continue
            nv = self._node_values(ds.value, dm.node_coors[nodes], t, len(comps),
                                   what)
            off = self.unknown_offset(var.name)
            dofs.append(off + dm.node_dofs(nodes, comps))
            vals.append(nv.ravel())
        if not dofs:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        return np.concatenate(dofs), np.concatenate(vals)

    def periodic_pairs(self):
        if self._pairs is None:
            pairs = [np.zeros((0, 2), dtype=np.int64)]
            active = set(v.name for v in self.unknowns)
            for name in self.active_epbcs:
                ep = self.conf.epbcs[name]
                for var_name, comp in ep.dofs:
                    if var_name not in active:
                        continue
                    var = self.variable(var_name)
                    try:
                        p = match_periodic(self.mesh, var.field,
                                           self.regions[ep.master],
                                           self.regions[ep.slave], ep.match)
                    except HomfemError as exc:
                        raise type(exc)(f'epbcs.{name}: {exc}') from None
                    nc = var.field.n_components
                    if comp != 'all':
                        p = p[p[:, 0] % nc == comp]
                    pairs.append(p + self.unknown_offset(var_name))
            self._pairs = np.concatenate(pairs)
        return self._pairs

    def reduction(self, t=0.0):
        active = set(v.name for v in self.unknowns)
        dofs, vals = [np.zeros(0, dtype=np.int64)], [np.zeros(0)]
        for name in self.active_ebcs:
            eb = self.conf.ebcs[name]
            specs = [d for d in eb.dofs if d.variable in active]
            d, v = self._dof_values(eb.region, specs, t, f'ebcs.{name}')
            dofs.append(d)
            vals.append(v)
        try:
            return build_reduction(self.n_dofs,
                                   (np.concatenate(dofs), np.concatenate(vals)),
                                   self.periodic_pairs())
        except HomfemError as exc:
            raise type(exc)(f'constraints: {exc}') from None

    def initial_state(self):
        """Stacked DOF vector with the initial conditions applied."""
        u = np.zeros(self.n_dofs)
        for name, ic in self.conf.ics.items():
            specs = [d for d in ic.dofs
                     if d.variable in {v.name for v in self.unknowns}]
            d, v = self._dof_values(ic.region, specs, self.conf.solvers.ts.t0,
                                    f'ics.{name}')
            u[d] = v
        return u

    # -- assembly -------------------------------------------------------
    def _eq_calls(self):
        for ename, eq in self.equations.items():
            for factor, call in eq.residual_terms():
                yield ename, factor, call

    def _time_key(self, t):
        dep = any(self._time_dependent(m) for m in self.conf.materials.values())
        return t if dep else None

    def assemble(self, t=0.0, dt=None):
        """Matrices ``K``, ``M_dt`` and vector ``f`` of the residual.

        The residual of a step is ``K u - f - M_dt u_prev``; time-derivative
        terms contribute ``M / dt`` to both ``K`` and ``M_dt``. Matrices are
        cached independently of parameter values.
        """
        n, offs = self.n_dofs, self.offsets
        if n == 0:
            raise ConfigError('the active equations define no unknowns')
        mkey = ('m', self._time_key(t), dt)
        vkey = ('v', self._time_key(t), dt, self._pversion)
        need_m = mkey not in self._assembled
        need_v = vkey not in self._assembled
        if need_m or need_v:
            sys_k = SparseSystem(n, offs)
            sys_m = SparseSystem(n, offs)
            ctx = _Context(self, t)
            for ename, factor, call in self._eq_calls():
                try:
                    self._assemble_call(sys_k, sys_m, ctx, factor, call, dt,
                                        need_m, need_v)
                except HomfemError as exc:
                    raise type(exc)(f'equations.{ename}: {call.call_str()}: '
                                    f'{exc}') from None
            if need_m:
                self._assembled[mkey] = (sys_k.matrix(), sys_m.matrix())
            if need_v:
                self._assembled = {k: v for k, v in self._assembled.items()
                                   if k[0] == 'm'}
                self._assembled[vkey] = -sys_k.rhs
        k, m = self._assembled[mkey]
        return k, m, self._assembled[vkey]

    def _assemble_call(self, sys_k, sys_m, ctx, factor, call, dt, matrices=True,
                       vectors=True):
        roles = {}
        plain_args = []
        for a in call.args:
            if a.is_material:
                plain_args.append(a)
                continue
            v = self.variable(a.name)
            roles.setdefault(v.kind if a.kind != 'dt' else 'dt', []).append(a)
            plain_args.append(Arg('variable', a.name))
        tests = roles.get('test', [])
        if len(tests) != 1:
            raise TermError('each term needs exactly one test variable')
        test = self.variable(tests[0].name)
        row_off = self.unknown_offset(test.primary)
        plain = TermCall(call.name, call.integral, call.region,
                         tuple(plain_args), call.sign, call.coef)
        unknowns = roles.get('unknown', []) + roles.get('dt', [])
        if len(unknowns) > 1:
            raise TermError('a term may contain one unknown variable')
        if unknowns:
            uname = unknowns[0].name
            col_off = self.unknown_offset(uname)
            scale = factor
            if unknowns[0].kind == 'dt':
                if dt is None:
                    raise ConfigError(f'd{uname}/dt in a stationary solve')
                scale = factor / dt
            if not matrices:
                return
            for lb in eval_term_local(plain, 'matrix', ctx):
                assemble(sys_k, lb.data, lb.rows + row_off, lb.cols + col_off,
                         scale)
                if unknowns[0].kind == 'dt':
                    assemble(sys_m, lb.data, lb.rows + row_off,
                             lb.cols + col_off, scale)
        elif vectors:
            for lb in eval_term_local(plain, 'vector', ctx):
                # Known contributions move to the right-hand side.
                assemble(sys_k, lb.data, lb.rows + row_off, None, factor)

    def residual(self, u, t=0.0, dt=None, u_prev=None):
        """Full residual vector ``K u - f - M_dt u_prev``."""
        k, m, f = self.assemble(t, dt)
        r = k @ u - f
        if dt is not None and u_prev is not None:
            r -= m @ u_prev
        return r

    def solve_step(self, t, dt, u_prev, cfg=None):
        """Solve one stationary or backward-Euler step; returns (u, report)."""
        cfg = cfg or self.solver_config
        k, m, f = self.assemble(t, dt)
        if dt is not None:
            if u_prev is None:
                raise ConfigError('time step without a previous state')
            f = f + m @ u_prev
        red = self.reduction(t)
        # The prolongation depends only on which DOFs are fixed or tied, so
        # the reduced matrix can be shared by all steps and parameters.
        fkey = (self._time_key(t), dt, cfg.linear)
        entry = self._factors.get(fkey)
        if entry is None:
            a_r = (red.prolongation.T @ k @ red.prolongation).tocsr()
            entry = [a_r, None]
            self._factors[fkey] = entry
        a_r = entry[0]
        b_r = red.prolongation.T @ (f - k @ red.u_fixed)
        guess = self.initial_state() if u_prev is None else u_prev
        x0 = red.restrict(guess)
        lin = cfg.linear

        def solve(a, b):
            if lin.method != 'direct':
                return solve_linear(a, b, lin)
            if entry[1] is None:
                entry[1] = factorize(a_r, lin)
            return entry[1].solve(b)

        x, rep = newton(lambda x: a_r @ x - b_r, lambda x: a_r, x0, cfg.newton,
                        solve=solve)
        self.last_reduction = red
        return red.prolong(x), rep

    # -- evaluation helpers --------------------------------------------
    def evaluate(self, expression, mode='eval', t=0.0, **values):
        """Evaluate a single term call string with given variable values."""
        call = parse_call(expression) if isinstance(expression, str) else expression
        ctx = _Context(self, t, {k: np.asarray(v, dtype=np.float64)
                                 for k, v in values.items()})
        out = eval_term_local(call, mode, ctx)
        if mode == 'eval':
            return float(sum(b.data.sum() for b in out))
        return out

    def eval_bilinear(self, call, left, right=None, t=0.0):
        """Batched form values, see :func:`eval_bilinear_values`."""
        call = parse_call(call) if isinstance(call, str) else call
        return eval_bilinear_values(call, _Context(self, t), left, right)

    # -- output ---------------------------------------------------------
    def point_data(self, u):
        """Nodal vertex arrays of every unknown (zero off the field)."""
        out = {}
        for name, vals in self.split_state(u).items():
            var = self.variables[name]
            dm = var.field.dofmap
            nc = dm.n_components
            arr = np.zeros((self.mesh.n_vertex, nc))
            per_node = vals.reshape(-1, nc)
            for vid in var.field.region.vertices:
                arr[vid] = per_node[dm.key_to_node[(int(vid),)]]
            out[name] = arr[:, 0] if nc == 1 else arr
        return out

    def cell_data(self, u):
        """Cell-averaged strain and its magnitude for vector unknowns."""
        out = {}
        integral = next(iter(self.conf.integrals), None)
        if integral is None:
            return out
        for name, vals in self.split_state(u).items():
            var = self.variables[name]
            if var.field.n_components == 1 or self.mesh.dim == 1:
                continue
            mp = self.mapping(var.field.region.name, var.field.order, integral)
            strains = eval_strain(vals, mp, var.field.dofmap)
            sym = strains[0].shape[-1]
            cell = np.zeros((self.mesh.n_cell, sym))
            for blk, e in zip(mp.blocks, strains):
                w = blk.dv / blk.dv.sum(axis=1, keepdims=True)
                cell[blk.cells] = np.einsum('cq,cqp->cp', w, e)
            for k, (i, j) in enumerate(SYM_PAIRS[self.mesh.dim]):
                out[f'{name}_strain_{i + 1}{j + 1}'] = cell[:, k]
            out[f'{name}_strain_magnitude'] = np.linalg.norm(cell, axis=1)
        return out

    def save_state(self, path, u, title=None):
        write_vtk(path, self.mesh, self.point_data(u), self.cell_data(u),
                  title=title or os.path.basename(path))


@dataclass
class SolveOutput:
    problem: object
    steps: list
    files: list = field(default_factory=list)

    @property
    def final_state(self):
        return self.steps[-1].state


def _phase(phase, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except PhaseError:
        raise
    except HomfemError as exc:
        raise PhaseError(phase, exc) from exc


def solve_declarative(conf, output_dir=None, registry=None, write=True,
                      echo=None, prefix=None):
    """Parse (if needed), assemble and solve a problem, writing VTK output.

    ``conf`` is a :class:`ProblemConfig` or a path. ``echo`` receives one
    summary line per step. Errors are re-raised as :class:`PhaseError`
    tagged parse/assemble/solve/output.
    """
    if not isinstance(conf, ProblemConfig):
        conf = _phase('parse', parse_problem, conf, registry)
    problem = _phase('assemble', Problem, conf, registry)
    ts = conf.solvers.ts
    dt = ts.dt if problem.has_time_derivative else None
    if problem.has_time_derivative and ts.kind != 'simple':
        raise PhaseError('parse', ConfigError(
            'equations with time derivatives need solvers.ts.kind = "simple"',
            key='solvers.ts.kind'))
    _phase('assemble', problem.assemble, ts.t0, dt)
    _phase('assemble', problem.reduction, ts.t0)

    if output_dir is None:
        output_dir = conf.options.get('output_dir', conf.base_dir)
        if not os.path.isabs(output_dir):
            output_dir = os.path.join(conf.base_dir, output_dir)
    if prefix is None:
        prefix = conf.options.get('output_prefix')
        if prefix is None:
            prefix = (os.path.splitext(os.path.basename(conf.source))[0]
                      if conf.source else 'output')
    files = []

    def on_step(res):
        if echo:
            echo(f'step = {res.step} time = {res.time:.10g} '
                 f'iterations = {res.report.iterations} '
                 f'residual = {res.report.final_residual:.6e}')
        if write:
            path = os.path.join(output_dir, f'{prefix}.{res.step:04d}.vtk')
            _phase('output', _write_step, problem, path, res)
            files.append(path)

    if write:
        try:
            os.makedirs(output_dir, exist_ok=True)
        except OSError as exc:
            raise PhaseError('output', HomfemError(
                f'cannot create output directory {output_dir}: {exc}')) from exc

    def run():
        try:
            if problem.has_time_derivative:
                return run_implicit(problem, callback=on_step)
            res = run_stationary(problem)
            on_step(res)
            return [res]
        except PhaseError:
            raise
        except SolverError as exc:
            raise PhaseError('solve', exc) from exc
        except HomfemError as exc:
            raise PhaseError('assemble', exc) from exc

    steps = run()
    return SolveOutput(problem, steps, files)


def _write_step(problem, path, res):
    problem.save_state(path, res.state, title=f'step {res.step} t = {res.time!r}')
