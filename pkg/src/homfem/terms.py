"""The term table: local weak-form integrals evaluated cell by cell.

Every supported term is a bilinear form ``B(a, b) = int op_a(a) . M op_b(b)``
or a linear form ``L(a) = int op_a(a) . m``. Depending on the roles of its
variable arguments a term is evaluated

* in ``matrix`` mode (one test and one unknown): per-cell dense blocks whose
  rows belong to the test variable;
* in ``vector`` mode (one test, other arguments known): per-cell vectors;
* in ``eval`` mode (no test variable): one scalar per cell.

Symmetric tensors are stored as sym-vectors ordered 11, 22, 33, 12, 13, 23
(11, 22, 12 in 2D) with doubled shear strains.
"""
from dataclasses import dataclass

import numpy as np

from .errors import TermError

SYM_PAIRS = {
    1: ((0, 0),),
    2: ((0, 0), (1, 1), (0, 1)),
    3: ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)),
}


def sym_size(dim):
    return dim * (dim + 1) // 2


def stiffness_from_youngpoisson(dim, young, poisson):
    """Isotropic elasticity matrix in sym storage (plane strain in 2D)."""
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    mu = young / (2.0 * (1.0 + poisson))
    sym = sym_size(dim)
    out = np.zeros((sym, sym))
    out[:dim, :dim] = lam
    out[np.arange(dim), np.arange(dim)] += 2.0 * mu
    out[np.arange(dim, sym), np.arange(dim, sym)] = mu
    return out


# Operators acting on a field basis: each returns an array of shape
# (n_cell, n_qp, p, n_basis * n_components).

def op_value(blk, n_comp):
    bf = blk.bf
    n_b, n_qp = bf.shape
    out = np.zeros((n_qp, n_comp, n_b, n_comp))
    for k in range(n_comp):
        out[:, k, :, k] = bf.T
    out = out.reshape(n_qp, n_comp, n_b * n_comp)
    return np.broadcast_to(out, (len(blk.cells),) + out.shape)


def op_grad(blk, n_comp):
    if n_comp != 1:
        raise TermError('gradient operator needs a scalar field')
    return np.swapaxes(blk.gbf, 2, 3)


def op_strain(blk, n_comp):
    gbf = blk.gbf
    n_cell, n_qp, n_b, dim = gbf.shape
    if n_comp != dim:
        raise TermError('strain operator needs a vector field')
    pairs = SYM_PAIRS[dim]
    out = np.zeros((n_cell, n_qp, len(pairs), n_b, dim))
    for ii, (i, j) in enumerate(pairs):
        out[:, :, ii, :, i] += gbf[:, :, :, j]
        if i != j:
            out[:, :, ii, :, j] += gbf[:, :, :, i]
    return out.reshape(n_cell, n_qp, len(pairs), n_b * dim)


OPERATORS = {'val': op_value, 'grad': op_grad, 'strain': op_strain}


def _scalar_material(mat, dim, name):
    if mat.shape[2:] not in ((), (1,), (1, 1)):
        raise TermError(f'{name}: material must be scalar, got shape '
                        f'{mat.shape[2:]}')
    return mat.reshape(mat.shape[:2])


def _mat_scalar_identity(n):
    def build(mat, dim, name):
        c = _scalar_material(mat, dim, name)
        return c[:, :, None, None] * np.eye(n(dim))
    return build


def _mat_matrix(shape_fn, transpose=False):
    def build(mat, dim, name):
        shape = shape_fn(dim)
        if mat.shape[2:] != shape:
            raise TermError(f'{name}: material shape {mat.shape[2:]} does not '
                            f'match the required {shape}')
        return np.swapaxes(mat, 2, 3) if transpose else mat
    return build


def _mat_vector(shape_fn):
    def build(mat, dim, name):
        shape = shape_fn(dim)
        if mat.shape[2:] == shape + (1,):
            mat = mat[..., 0]
        if mat.shape[2:] != shape:
            raise TermError(f'{name}: material shape {mat.shape[2:]} does not '
                            f'match the required {shape}')
        return mat
    return build


@dataclass(frozen=True)
class TermDef:
    """Entry of the term table.

    ``ops`` lists the operator of each variable argument; ``n_material``
    is the allowed number(s) of material arguments; ``material`` turns the
    material array into the kernel ``M`` (bilinear) or ``m`` (linear).
    ``n_comp`` constrains the component count of each variable argument
    (``'dim'``, ``1`` or ``None`` for any).
    """

    name: str
    ops: tuple
    n_material: tuple
    material: object
    n_comp: tuple

    @property
    def is_linear(self):
        return len(self.ops) == 1

    @property
    def arities(self):
        return tuple(m + len(self.ops) for m in self.n_material)


def _unit_volume_dot(mat, dim, name):
    return mat


TERMS = {t.name: t for t in [
    TermDef('dw_volume_dot', ('val', 'val'), (0, 1), _unit_volume_dot,
            (None, None)),
    TermDef('dw_laplace', ('grad', 'grad'), (1,),
            _mat_scalar_identity(lambda d: d), (1, 1)),
    TermDef('dw_diffusion', ('grad', 'grad'), (1,),
            _mat_matrix(lambda d: (d, d)), (1, 1)),
    TermDef('dw_lin_elastic', ('strain', 'strain'), (1,),
            _mat_matrix(lambda d: (sym_size(d), sym_size(d))), ('dim', 'dim')),
    TermDef('dw_piezo_coupling', ('strain', 'grad'), (1,),
            _mat_matrix(lambda d: (d, sym_size(d)), transpose=True),
            ('dim', 1)),
    TermDef('dw_lin_prestress', ('strain',), (1,),
            _mat_vector(lambda d: (sym_size(d),)), ('dim',)),
]}


def get_term(name):
    try:
        return TERMS[name]
    except KeyError:
        raise TermError(f'unknown term {name!r}; known terms: '
                        f'{", ".join(sorted(TERMS))}') from None


def check_arity(name, n_args):
    """Raise :class:`TermError` unless a term accepts ``n_args`` arguments."""
    term = get_term(name)
    if n_args not in term.arities:
        allowed = ' or '.join(map(str, term.arities))
        raise TermError(f'{name} takes {allowed} arguments, got {n_args}')
    return term


def _kernel(term, blk, mat, dim):
    """Material kernel broadcast to (n_cell, n_qp, ...)."""
    n_cell, n_qp = blk.dv.shape
    if term.name == 'dw_volume_dot':
        if mat is None:
            return None
        return _scalar_material(np.broadcast_to(mat, (n_cell, n_qp) + mat.shape[2:]),
                                dim, term.name)
    if mat is None:
        raise TermError(f'{term.name} needs a material argument')
    mat = np.broadcast_to(mat, (n_cell, n_qp) + mat.shape[2:])
    return term.material(mat, dim, term.name)


def local_bilinear(term, blk, mat, n_comps, dim):
    """Per-cell blocks ``K[c, i, j] = B(phi_i, phi_j)`` (first arg on rows)."""
    left = OPERATORS[term.ops[0]](blk, n_comps[0])
    right = OPERATORS[term.ops[1]](blk, n_comps[1])
    kern = _kernel(term, blk, mat, dim)
    if kern is None:
        weighted = left * blk.dv[:, :, None, None]
        return np.einsum('cqpi,cqpj->cij', weighted, right)
    if kern.ndim == 2:
        weighted = left * (blk.dv * kern)[:, :, None, None]
        return np.einsum('cqpi,cqpj->cij', weighted, right)
    mr = np.einsum('cqpr,cqrj->cqpj', kern, right)
    weighted = left * blk.dv[:, :, None, None]
    return np.einsum('cqpi,cqpj->cij', weighted, mr)


def local_linear(term, blk, mat, n_comp, dim):
    """Per-cell vectors ``f[c, i] = L(phi_i)``."""
    op = OPERATORS[term.ops[0]](blk, n_comp)
    kern = _kernel(term, blk, mat, dim)
    return np.einsum('cq,cqpi,cqp->ci', blk.dv, op, kern)


def check_components(term, n_comps, dim, var_names):
    if term.ops == ('val', 'val') and n_comps[0] != n_comps[1]:
        raise TermError(f'{term.name}: {var_names[0]!r} and {var_names[1]!r} '
                        f'have different component counts')
    for want, got, var in zip(term.n_comp, n_comps, var_names):
        if want == 'dim' and got != dim:
            raise TermError(f'{term.name}: variable {var!r} must be a vector '
                            f'field')
        if want == 1 and got != 1:
            raise TermError(f'{term.name}: variable {var!r} must be a scalar '
                            f'field')


def eval_strain(values, mapping, dofmap):
    """Sym-vector strain of a nodal vector field at the quadrature points.

    Returns one array (n_cell, n_qp, sym) per mapping block.
    """
    nc = dofmap.n_components
    dim = mapping.region.mesh.dim
    if nc != dim:
        raise TermError('eval_strain needs a vector field')
    values = np.asarray(values, dtype=np.float64).ravel()
    out = []
    for blk in mapping.blocks:
        dofs = dofmap.cell_dofs(blk.cell_type, blk.cells)
        op = op_strain(blk, nc)
        out.append(np.einsum('cqpi,ci->cqp', op, values[dofs]))
    return out


@dataclass(frozen=True)
class LocalBlocks:
    """Result of :func:`eval_term_local` on one mapping block.

    ``data`` is (n_cell, n_row, n_col) in matrix mode, (n_cell, n_row) in
    vector mode and (n_cell,) in eval mode.
    """

    cells: np.ndarray
    data: np.ndarray
    rows: np.ndarray = None
    cols: np.ndarray = None


def eval_term_local(call, mode, context):
    """Evaluate a term call on every cell of its region.

    ``context`` provides ``variable(name)`` (objects with ``kind``,
    ``field``), ``values(name)`` (DOF vector of a known variable),
    ``mapping(region_name, field, integral_name)`` and
    ``material(mat_name, param_name, region_name, block)``.

    Returns a list of :class:`LocalBlocks`, one per cell type.
    """
    term = check_arity(call.name, len(call.args))
    n_mat = len(call.args) - len(term.ops)
    mat_args, var_args = call.args[:n_mat], call.args[n_mat:]
    for a in mat_args:
        if not a.is_material:
            raise TermError(f'{call.name}: argument {a} must be a material '
                            f'parameter')
    for a in var_args:
        if a.is_material:
            raise TermError(f'{call.name}: argument {a} must be a variable')
    names = [a.variable for a in var_args]
    variables = [context.variable(n) for n in names]
    dim = None
    tests = [i for i, v in enumerate(variables) if v.kind == 'test']
    unknowns = [i for i, v in enumerate(variables) if v.kind == 'unknown']

    if mode == 'matrix':
        if len(tests) != 1 or len(unknowns) != 1 or term.is_linear:
            raise TermError(f'{call.name}: matrix mode needs one test and one '
                            f'unknown variable')
    elif mode == 'vector':
        if len(tests) != 1:
            raise TermError(f'{call.name}: vector mode needs one test variable')
    elif mode == 'eval':
        if tests:
            raise TermError(f'{call.name}: eval mode takes no test variable')
    else:
        raise TermError(f'unknown evaluation mode {mode!r}')

    fields = [v.field for v in variables]
    mesh = fields[0].mesh
    dim = mesh.dim
    n_comps = [f.n_components for f in fields]
    check_components(term, n_comps, dim, names)
    order = max(f.order for f in fields)
    if any(f.order != order for f in fields):
        raise TermError(f'{call.name}: mixing field orders in one term is not '
                        f'supported')
    mapping = context.mapping(call.region, fields[0], call.integral)

    known = {}
    for i, v in enumerate(variables):
        if mode == 'matrix' and i in tests + unknowns:
            continue
        if v.kind != 'test':
            known[i] = np.asarray(context.values(names[i]), dtype=np.float64)

    out = []
    for blk in mapping.blocks:
        mat = None
        if mat_args:
            a = mat_args[0]
            mat = context.material(a.material, a.parameter, call.region, blk)
        dofs = [f.dofmap.cell_dofs(blk.cell_type, blk.cells) for f in fields]
        if term.is_linear:
            vec = local_linear(term, blk, mat, n_comps[0], dim)
            if mode == 'vector':
                out.append(LocalBlocks(blk.cells, vec, dofs[0]))
            else:
                out.append(LocalBlocks(blk.cells, np.einsum(
                    'ci,ci->c', vec, known[0][dofs[0]])))
            continue
        kmat = local_bilinear(term, blk, mat, n_comps, dim)
        if mode == 'matrix':
            if tests[0] == 1:
                kmat = np.swapaxes(kmat, 1, 2)
            out.append(LocalBlocks(blk.cells, kmat, dofs[tests[0]],
                                   dofs[unknowns[0]]))
        elif mode == 'vector':
            other = 1 - tests[0]
            if tests[0] == 1:
                kmat = np.swapaxes(kmat, 1, 2)
            vec = np.einsum('cij,cj->ci', kmat, known[other][dofs[other]])
            out.append(LocalBlocks(blk.cells, vec, dofs[tests[0]]))
        else:
            val = np.einsum('ci,cij,cj->c', known[0][dofs[0]], kmat,
                            known[1][dofs[1]])
            out.append(LocalBlocks(blk.cells, val))
    return out


def eval_bilinear_values(call, context, left, right=None):
    """Evaluate a term on many argument pairs at once.

    ``left`` (n_dofs_a, n_left) and ``right`` (n_dofs_b, n_right) hold DOF
    vectors for the first and second variable argument in their columns.
    Returns the (n_left, n_right) matrix of form values summed over the
    term region; a linear term returns the (n_left,) vector.
    """
    term = check_arity(call.name, len(call.args))
    n_mat = len(call.args) - len(term.ops)
    mat_args, var_args = call.args[:n_mat], call.args[n_mat:]
    fields = [context.variable(a.variable).field for a in var_args]
    dim = fields[0].mesh.dim
    n_comps = [f.n_components for f in fields]
    check_components(term, n_comps, dim, [a.variable for a in var_args])
    mapping = context.mapping(call.region, fields[0], call.integral)
    left = np.asarray(left, dtype=np.float64)
    total = None
    for blk in mapping.blocks:
        mat = None
        if mat_args:
            a = mat_args[0]
            mat = context.material(a.material, a.parameter, call.region, blk)
        dofs = [f.dofmap.cell_dofs(blk.cell_type, blk.cells) for f in fields]
        la = left[dofs[0]]
        if term.is_linear:
            vec = local_linear(term, blk, mat, n_comps[0], dim)
            val = np.einsum('cil,ci->l', la, vec)
        else:
            kmat = local_bilinear(term, blk, mat, n_comps, dim)
            rb = np.asarray(right, dtype=np.float64)[dofs[1]]
            kr = np.einsum('cij,cjr->cir', kmat, rb)
            val = np.einsum('cil,cir->lr', la, kr)
        total = val if total is None else total + val
    return total
