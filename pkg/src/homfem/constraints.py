"""Essential and periodic constraints applied by DOF elimination.

All constraints are composed into one :class:`ConstraintReduction`. Tied
DOFs (periodic pairs, chained arbitrarily) form equivalence classes whose
representative is the smallest DOF index. A fixed value on any member fixes
the whole class.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import ConstraintError

FIXED_VALUE_TOL = 1e-12


def default_tolerance(mesh):
    lo, hi = mesh.bounding_box
    return 1e-8 * max(float(np.linalg.norm(hi - lo)), 1.0e-300)


def plane_translation(axis, master_coors, slave_coors):
    """Translation along ``axis`` between the planes of two node sets."""
    t = np.zeros(master_coors.shape[1])
    t[axis] = slave_coors[:, axis].mean() - master_coors[:, axis].mean()
    return t


MATCHERS = {'match_x_plane': 0, 'match_y_plane': 1, 'match_z_plane': 2,
            'match_x_line': 0, 'match_y_line': 1}


def match_periodic(mesh, field, master, slave, translation, tol=None):
    """Pair the field DOFs of two regions related by a translation.

    ``translation`` is a vector or one of the names in ``MATCHERS``, which
    derive the translation from the mean plane coordinates. Returns an
    integer array (n_pair, 2) of ``(master_dof, slave_dof)`` rows, one per
    node and component.
    """
    dofmap = field.dofmap
    mn = dofmap.nodes_of_region(master)
    sn = dofmap.nodes_of_region(slave)
    if len(mn) != len(sn):
        raise ConstraintError(f'periodic regions {master.name!r} and '
                              f'{slave.name!r} have {len(mn)} and {len(sn)} '
                              f'nodes')
    if not len(mn):
        raise ConstraintError(f'periodic region {master.name!r} has no nodes')
    mc = dofmap.node_coors[mn]
    sc = dofmap.node_coors[sn]
    if isinstance(translation, str):
        if translation not in MATCHERS:
            raise ConstraintError(f'unknown matching function {translation!r}')
        axis = MATCHERS[translation]
        if axis >= mesh.dim:
            raise ConstraintError(f'{translation} needs a mesh of dimension '
                                  f'> {axis}')
        translation = plane_translation(axis, mc, sc)
    translation = np.asarray(translation, dtype=np.float64).ravel()
    if translation.shape != (mesh.dim,):
        raise ConstraintError(f'translation must have {mesh.dim} components')
    tol = default_tolerance(mesh) if tol is None else float(tol)

    dist, idx = cKDTree(sc).query(mc + translation)
    bad = np.flatnonzero(dist > tol)
    if len(bad):
        raise ConstraintError(f'{len(bad)} node(s) of {master.name!r} have no '
                              f'match in {slave.name!r} within tol {tol:g} '
                              f'(first at {mc[bad[0]].tolist()})')
    if len(np.unique(idx)) != len(idx):
        raise ConstraintError(f'periodic matching {master.name!r} -> '
                              f'{slave.name!r} is not one-to-one')
    mdofs = dofmap.node_dofs(mn)
    sdofs = dofmap.node_dofs(sn[idx])
    return np.stack([mdofs, sdofs], axis=1)


def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        parent[i], i = root, parent[i]
    return root


def tie_classes(n_dofs, pairs):
    """Representative (smallest member) of each DOF's tie class."""
    parent = np.arange(n_dofs)
    for a, b in np.asarray(pairs, dtype=np.int64).reshape(-1, 2):
        ra, rb = _find(parent, a), _find(parent, b)
        if ra != rb:
            lo, hi = (ra, rb) if ra < rb else (rb, ra)
            parent[hi] = lo
    return np.array([_find(parent, i) for i in range(n_dofs)], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class ConstraintReduction:
    """Elimination of fixed and tied DOFs.

    ``prolong(x_r) = P @ x_r + u_fixed`` maps reduced vectors to full ones
    satisfying every constraint; ``restrict(x) = x[retained]`` inverts it on
    the reduced space.
    """

    n_dofs: int
    retained: np.ndarray
    master: np.ndarray
    fixed: np.ndarray
    u_fixed: np.ndarray
    reduced_index: np.ndarray
    prolongation: sp.csr_matrix

    @property
    def n_reduced(self):
        return len(self.retained)

    @property
    def slaves(self):
        free = ~self.fixed
        return np.flatnonzero(free & (self.master != np.arange(self.n_dofs)))

    def prolong(self, x_r, with_fixed=True):
        x_r = np.asarray(x_r, dtype=np.float64)
        out = self.prolongation @ x_r
        return out + self.u_fixed if with_fixed else out

    def restrict(self, x):
        return np.asarray(x, dtype=np.float64)[self.retained]

    def with_fixed_values(self, u_fixed):
        """Copy with new fixed values on the same fixed DOF set."""
        u_fixed = np.where(self.fixed, u_fixed, 0.0)
        return ConstraintReduction(self.n_dofs, self.retained, self.master,
                                   self.fixed, u_fixed, self.reduced_index,
                                   self.prolongation)


def build_reduction(n_dofs, ebcs=None, epbcs=None):
    """Compose essential values and periodic ties into one reduction.

    ``ebcs`` maps DOF index to value (a dict, or a pair of arrays
    ``(dofs, values)``); ``epbcs`` is an array of ``(master, slave)`` DOF
    pairs. Tied DOFs given different fixed values raise
    :class:`ConstraintError`.
    """
    n_dofs = int(n_dofs)
    if ebcs is None:
        fdofs, fvals = np.zeros(0, dtype=np.int64), np.zeros(0)
    elif isinstance(ebcs, dict):
        fdofs = np.fromiter(ebcs.keys(), dtype=np.int64, count=len(ebcs))
        fvals = np.fromiter(ebcs.values(), dtype=np.float64, count=len(ebcs))
    else:
        fdofs = np.asarray(ebcs[0], dtype=np.int64).ravel()
        fvals = np.asarray(ebcs[1], dtype=np.float64).ravel()
    pairs = (np.zeros((0, 2), dtype=np.int64) if epbcs is None
             else np.asarray(epbcs, dtype=np.int64).reshape(-1, 2))
    for arr in (fdofs, pairs):
        if arr.size and (arr.min() < 0 or arr.max() >= n_dofs):
            raise ConstraintError(f'constraint DOF index out of range for '
                                  f'{n_dofs} DOFs')

    master = tie_classes(n_dofs, pairs)
    class_value = {}
    for dof, val in zip(fdofs.tolist(), fvals.tolist()):
        root = int(master[dof])
        old = class_value.get(root)
        if old is not None and abs(old - val) > FIXED_VALUE_TOL:
            raise ConstraintError(f'contradictory fixed values {old!r} and '
                                  f'{val!r} on tied DOFs (DOF {dof}, class '
                                  f'{root})')
        class_value[root] = val

    fixed = np.zeros(n_dofs, dtype=bool)
    u_fixed = np.zeros(n_dofs)
    if class_value:
        roots = np.fromiter(class_value.keys(), dtype=np.int64)
        vals = np.fromiter(class_value.values(), dtype=np.float64)
        value_of = np.full(n_dofs, np.nan)
        value_of[roots] = vals
        member_vals = value_of[master]
        fixed = ~np.isnan(member_vals)
        u_fixed[fixed] = member_vals[fixed]

    is_root = master == np.arange(n_dofs)
    retained = np.flatnonzero(is_root & ~fixed)
    reduced_index = np.full(n_dofs, -1, dtype=np.int64)
    reduced_index[retained] = np.arange(len(retained))
    free = np.flatnonzero(~fixed)
    cols = reduced_index[master[free]]
    prol = sp.csr_matrix((np.ones(len(free)), (free, cols)),
                         shape=(n_dofs, len(retained)))
    for arr in (retained, master, fixed, u_fixed, reduced_index):
        arr.flags.writeable = False
    return ConstraintReduction(n_dofs, retained, master, fixed, u_fixed,
                               reduced_index, prol)


def reduce_system(matrix, rhs, red):
    """Reduced matrix ``P^T A P`` and right-hand side ``P^T (b - A u_fixed)``."""
    n = matrix.shape[0]
    if matrix.shape != (n, n) or len(rhs) != n or n != red.n_dofs:
        raise ConstraintError(f'system of size {matrix.shape} and rhs '
                              f'{len(rhs)} do not match {red.n_dofs} DOFs')
    p = red.prolongation
    a_r = (p.T @ sp.csr_matrix(matrix) @ p).tocsr()
    b_r = p.T @ (np.asarray(rhs, dtype=np.float64) - matrix @ red.u_fixed)
    return a_r, b_r
