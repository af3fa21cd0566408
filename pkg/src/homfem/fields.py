"""Lagrange fields, DOF numbering and reference-to-physical mappings."""
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np

from .basis import eval_basis, node_entities
from .errors import InvertedCellError, MeshError, SelectorError
from .mesh import CELL_DIM, facet_entity_keys
from .quadrature import QuadratureRule, get_quadrature


@dataclass(frozen=True, eq=False)
class Field:
    """A nodal Lagrange space on a cell region.

    ``n_components`` is 1 for scalar fields and the mesh dimension for
    vector fields.
    """

    name: str
    n_components: int
    region: object
    order: int = 1
    dtype: str = 'real'

    def __post_init__(self):
        if self.region.kind != 'cell':
            raise SelectorError(f'field {self.name!r} needs a cell region, '
                                f'got {self.region.kind!r} region '
                                f'{self.region.name!r}')
        if self.order not in (1, 2):
            raise MeshError(f'field {self.name!r}: order must be 1 or 2')
        dim = self.region.mesh.dim
        if self.n_components not in (1, dim):
            raise MeshError(f'field {self.name!r}: n_components must be 1 '
                            f'or {dim}')
        if self.dtype != 'real':
            raise MeshError(f'field {self.name!r}: only real fields exist')

    @property
    def mesh(self):
        return self.region.mesh

    @property
    def is_vector(self):
        return self.n_components > 1

    @cached_property
    def dofmap(self):
        return build_dofmap(self, self.mesh)


@dataclass(eq=False)
class DofMap:
    """Global node and DOF numbering of a field.

    ``cell_nodes[ct]`` holds the global node ids of the cells ``cells[ct]``
    (sorted global cell ids) in local basis order. The DOF of node ``n`` and
    component ``c`` is ``n * n_components + c``.
    """

    n_components: int
    cells: dict
    cell_nodes: dict
    node_keys: list
    node_coors: np.ndarray
    key_to_node: dict = dc_field(repr=False)

    @property
    def n_nodes(self):
        return len(self.node_keys)

    @property
    def n_dofs(self):
        return self.n_nodes * self.n_components

    def cell_dofs(self, cell_type, cells=None):
        """Interleaved DOF indices, shape (n_cell, n_basis * n_components)."""
        nodes = self.cell_nodes[cell_type]
        if cells is not None:
            nodes = nodes[self.local_cell_index(cell_type, cells)]
        nc = self.n_components
        dofs = nodes[:, :, None] * nc + np.arange(nc)
        return dofs.reshape(len(nodes), -1)

    def local_cell_index(self, cell_type, cells):
        """Row positions of global ``cells`` within ``self.cells[cell_type]``."""
        own = self.cells.get(cell_type)
        cells = np.asarray(cells, dtype=np.int64)
        if own is None:
            raise SelectorError(f'field has no {cell_type} cells')
        pos = np.searchsorted(own, cells)
        pos = np.minimum(pos, len(own) - 1)
        if np.any(own[pos] != cells):
            raise SelectorError('integration region is not contained in the '
                                'field region')
        return pos

    def nodes_of_region(self, region):
        """Sorted field nodes lying on a region (vertex, facet or cell)."""
        if region.kind == 'facet':
            keys = facet_entity_keys(region.facets)
            nodes = [self.key_to_node[k] for k in keys if k in self.key_to_node]
        elif region.kind == 'cell':
            nodes = []
            for ct, cells in region.mesh.cell_type_of(region.ids).items():
                nodes.append(self.cell_nodes[ct][
                    self.local_cell_index(ct, cells)].ravel())
            nodes = np.concatenate(nodes) if nodes else []
        else:
            vset = set(region.ids.tolist())
            nodes = [i for i, k in enumerate(self.node_keys)
                     if all(v in vset for v in k)]
        return np.unique(np.asarray(nodes, dtype=np.int64))

    def node_dofs(self, nodes, components=None):
        """DOFs of ``nodes`` for the given components (default: all)."""
        nodes = np.asarray(nodes, dtype=np.int64)
        comps = range(self.n_components) if components is None else components
        comps = np.asarray(list(comps), dtype=np.int64)
        return (nodes[:, None] * self.n_components + comps).ravel()


def build_dofmap(field, mesh=None):
    """Number the nodes and DOFs of ``field``.

    Vertex nodes come first in ascending vertex order, followed by the
    higher-order nodes of order-2 fields sorted by their entity key.
    """
    mesh = field.mesh if mesh is None else mesh
    groups = mesh.cell_type_of(field.region.ids)
    vertex_keys = set()
    other_keys = set()
    local = {}
    for ct, cells in groups.items():
        if CELL_DIM[ct] != mesh.dim:
            raise MeshError(f'field {field.name!r}: {ct} cells are not volume '
                            f'cells of the {mesh.dim}D mesh')
        conn = mesh.cell_connectivity(cells)
        ents = node_entities(ct, field.order)
        keys = []
        for ent in ents:
            sub = np.sort(conn[:, list(ent)], axis=1)
            keys.append(sub)
            target = vertex_keys if len(ent) == 1 else other_keys
            target.update(map(tuple, sub.tolist()))
        local[ct] = (cells, keys)

    ordered = sorted(vertex_keys) + sorted(other_keys, key=lambda k: (len(k), k))
    key_to_node = {k: i for i, k in enumerate(ordered)}
    cell_nodes, cell_ids = {}, {}
    for ct, (cells, keys) in local.items():
        nodes = np.empty((len(cells), len(keys)), dtype=np.int64)
        for j, sub in enumerate(keys):
            nodes[:, j] = [key_to_node[k] for k in map(tuple, sub.tolist())]
        nodes.flags.writeable = False
        cell_nodes[ct] = nodes
        cell_ids[ct] = cells
    coors = np.array([mesh.vertices[list(k)].mean(axis=0) for k in ordered])
    coors = coors.reshape(len(ordered), mesh.dim)
    coors.flags.writeable = False
    return DofMap(field.n_components, cell_ids, cell_nodes, ordered, coors,
                  key_to_node)


@dataclass(eq=False)
class MappingBlock:
    """Mapping data of the cells of one type.

    Shapes: ``dv`` (n_cell, n_qp); ``bf`` (n_basis, n_qp); ``gbf`` (n_cell,
    n_qp, n_basis, dim); ``qp_coors`` (n_cell, n_qp, dim).
    """

    cell_type: str
    cells: np.ndarray
    rule: QuadratureRule
    dv: np.ndarray
    bf: np.ndarray
    gbf: np.ndarray
    qp_coors: np.ndarray

    @property
    def n_qp(self):
        return self.rule.n_point


@dataclass(eq=False)
class RefMapping:
    """Per-cell-type mapping blocks of a region for one field basis."""

    region: object
    order: int
    blocks: list

    @property
    def volume(self):
        return float(sum(b.dv.sum() for b in self.blocks))

    @property
    def n_qp_total(self):
        return sum(b.dv.size for b in self.blocks)

    def qp_coors(self):
        """All quadrature point coordinates, blocks concatenated."""
        return np.concatenate([b.qp_coors.reshape(-1, b.qp_coors.shape[-1])
                               for b in self.blocks])


def _geometry(mesh, cell_type, cells, points):
    """Jacobians (n_cell, n_qp, dim, dim), their determinants and qp coors."""
    conn = mesh.cell_connectivity(cells)
    x = mesh.vertices[conn]
    gv, gg = eval_basis(cell_type, 1, points)
    jac = np.einsum('cia,iqb->cqab', x, gg)
    det = np.linalg.det(jac)
    coors = np.einsum('cia,iq->cqa', x, gv)
    return jac, det, coors


def build_mapping(mesh, region, field_order, quadrature):
    """Map the basis of the given order to the physical cells of ``region``.

    ``quadrature`` is a polynomial order or a :class:`QuadratureRule`.
    Raises :class:`InvertedCellError` for cells with a non-positive Jacobian
    determinant.
    """
    if region.kind != 'cell':
        raise SelectorError(f'mapping needs a cell region, got {region.kind!r}')
    if isinstance(field_order, Field):
        field_order = field_order.order
    blocks = []
    for ct, cells in mesh.cell_type_of(region.ids).items():
        if isinstance(quadrature, QuadratureRule):
            rule = quadrature
            if rule.cell_type != ct:
                raise SelectorError(f'{rule.cell_type} rule used on {ct} cells')
        else:
            rule = get_quadrature(ct, quadrature)
        jac, det, coors = _geometry(mesh, ct, cells, rule.points)
        bad = np.flatnonzero(np.any(det <= 0.0, axis=1))
        if len(bad):
            raise InvertedCellError(f'{len(bad)} inverted or degenerate {ct} '
                                    f'cell(s), first id {int(cells[bad[0]])}')
        bf, g_ref = eval_basis(ct, field_order, rule.points)
        inv = np.linalg.inv(jac)
        gbf = np.einsum('cqba,nqb->cqna', inv, g_ref)
        dv = det * rule.weights
        blocks.append(MappingBlock(ct, cells, rule, dv, bf, gbf, coors))
    return RefMapping(region, field_order, blocks)


def cell_volumes(mesh, cells):
    """Volumes of the given volume cells."""
    cells = np.asarray(cells, dtype=np.int64)
    out = np.empty(len(cells))
    for ct, sel in mesh.cell_type_of(cells).items():
        rule = get_quadrature(ct, 3)
        _, det, _ = _geometry(mesh, ct, sel, rule.points)
        vol = np.abs(det) @ rule.weights
        out[_positions(cells, sel)] = vol
    return out


def _positions(cells, sel):
    order = np.argsort(cells, kind='stable')
    return order[np.searchsorted(cells[order], sel)]


def interpolate_at_qp(mapping, dofmap, values):
    """Evaluate a nodal field at the quadrature points of each block.

    Returns a list of arrays (n_cell, n_qp, n_components).
    """
    values = np.asarray(values, dtype=np.float64).reshape(-1, dofmap.n_components)
    out = []
    for blk in mapping.blocks:
        nodes = dofmap.cell_nodes[blk.cell_type][
            dofmap.local_cell_index(blk.cell_type, blk.cells)]
        out.append(np.einsum('cnk,nq->cqk', values[nodes], blk.bf))
    return out


def l2_error(mapping, dofmap, values, exact):
    """L2 norm of ``values - exact`` where ``exact(coors)`` is vectorized."""
    total = 0.0
    for blk, uh in zip(mapping.blocks, interpolate_at_qp(mapping, dofmap, values)):
        ex = np.asarray(exact(blk.qp_coors.reshape(-1, blk.qp_coors.shape[-1])))
        ex = ex.reshape(uh.shape)
        total += float(np.einsum('cqk,cq->', (uh - ex) ** 2, blk.dv))
    return np.sqrt(total)
