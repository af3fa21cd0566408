"""Mesh representation and a structured block mesh generator.

Cells are stored in blocks of a single cell type. Global cell ids run over
the blocks in order, so the first block holds cells ``0 .. n0 - 1`` and so
on. Vertex ordering within cells follows the legacy VTK conventions.
"""
from functools import cached_property

import numpy as np

from .errors import MeshError

# Topological dimension, vertex count and VTK code of each cell type.
CELL_DIM = {'line2': 1, 'tri3': 2, 'quad4': 2, 'tet4': 3, 'hex8': 3}
CELL_NV = {'line2': 2, 'tri3': 3, 'quad4': 4, 'tet4': 4, 'hex8': 8}
VTK_CODES = {'line2': 3, 'tri3': 5, 'quad4': 9, 'tet4': 10, 'hex8': 12}
VTK_TYPES = {v: k for k, v in VTK_CODES.items()}

# Local facets, oriented outwards for positively oriented cells.
CELL_FACETS = {
    'line2': [(0,), (1,)],
    'tri3': [(0, 1), (1, 2), (2, 0)],
    'quad4': [(0, 1), (1, 2), (2, 3), (3, 0)],
    'tet4': [(0, 2, 1), (0, 1, 3), (1, 2, 3), (0, 3, 2)],
    'hex8': [(0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4),
             (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7)],
}

CELL_EDGES = {
    'line2': [(0, 1)],
    'tri3': [(0, 1), (1, 2), (2, 0)],
    'quad4': [(0, 1), (1, 2), (2, 3), (3, 0)],
    'tet4': [(0, 1), (1, 2), (2, 0), (0, 3), (1, 3), (2, 3)],
    'hex8': [(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4),
             (0, 4), (1, 5), (2, 6), (3, 7)],
}

TENSOR_CELLS = {1: 'line2', 2: 'quad4', 3: 'hex8'}


class Mesh:
    """An unstructured mesh made of blocks of cells.

    Parameters
    ----------
    vertices : array_like, shape (n_vertex, dim)
    cell_blocks : list of (cell_type, connectivity)
    cell_group_ids : array_like of int, optional
        One id per cell over all blocks; defaults to zeros.
    """

    def __init__(self, vertices, cell_blocks, cell_group_ids=None, name='mesh'):
        vertices = np.array(vertices, dtype=np.float64)
        if vertices.ndim == 1:
            vertices = vertices[:, None]
        if vertices.ndim != 2 or vertices.shape[1] not in (1, 2, 3):
            raise MeshError(f'vertices must be (n, dim) with dim in 1..3, '
                            f'got shape {vertices.shape}')
        self.name = name
        self.vertices = vertices
        self.vertices.flags.writeable = False
        self.dim = vertices.shape[1]

        blocks = []
        for cell_type, conn in cell_blocks:
            if cell_type not in CELL_NV:
                raise MeshError(f'unsupported cell type: {cell_type!r}')
            conn = np.array(conn, dtype=np.int64).reshape(-1, CELL_NV[cell_type])
            if CELL_DIM[cell_type] > self.dim:
                raise MeshError(f'{cell_type} cells in a {self.dim}D mesh')
            if conn.size and (conn.min() < 0 or conn.max() >= len(vertices)):
                raise MeshError(f'{cell_type} connectivity index out of range')
            srt = np.sort(conn, axis=1)
            if np.any(srt[:, 1:] == srt[:, :-1]):
                raise MeshError(f'{cell_type} cell with repeated vertices')
            conn.flags.writeable = False
            blocks.append((cell_type, conn))
        self.cell_blocks = blocks

        n_cell = sum(len(conn) for _, conn in blocks)
        if cell_group_ids is None:
            cell_group_ids = np.zeros(n_cell, dtype=np.int64)
        cell_group_ids = np.array(cell_group_ids, dtype=np.int64).ravel()
        if len(cell_group_ids) != n_cell:
            raise MeshError(f'{len(cell_group_ids)} group ids for {n_cell} cells')
        self.cell_group_ids = cell_group_ids
        self.cell_group_ids.flags.writeable = False

    def __repr__(self):
        blocks = ', '.join(f'{t}: {len(c)}' for t, c in self.cell_blocks)
        return f'Mesh(dim={self.dim}, n_vertex={self.n_vertex}, {blocks})'

    @property
    def n_vertex(self):
        return len(self.vertices)

    @property
    def n_cell(self):
        return len(self.cell_group_ids)

    @cached_property
    def block_offsets(self):
        sizes = [len(conn) for _, conn in self.cell_blocks]
        return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)

    def iter_blocks(self):
        """Yield ``(cell_type, global_cell_ids, connectivity)`` per block."""
        for ib, (cell_type, conn) in enumerate(self.cell_blocks):
            off = self.block_offsets[ib]
            yield cell_type, np.arange(off, off + len(conn)), conn

    @cached_property
    def volume_cells(self):
        """Global ids of cells whose topological dimension equals ``dim``."""
        out = [ids for ct, ids, _ in self.iter_blocks()
               if CELL_DIM[ct] == self.dim]
        if not out:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(out)

    def cell_type_of(self, cells):
        """Group global cell ids by cell type, returning a dict of arrays."""
        cells = np.asarray(cells, dtype=np.int64)
        out = {}
        for ib, (ct, conn) in enumerate(self.cell_blocks):
            lo, hi = self.block_offsets[ib], self.block_offsets[ib + 1]
            sel = cells[(cells >= lo) & (cells < hi)]
            if len(sel):
                out.setdefault(ct, []).append(sel)
        return {ct: np.concatenate(v) for ct, v in out.items()}

    def cell_connectivity(self, cells):
        """Connectivity rows of cells that share one cell type."""
        cells = np.asarray(cells, dtype=np.int64)
        if not len(cells):
            return np.zeros((0, 0), dtype=np.int64)
        ib = np.searchsorted(self.block_offsets, cells, side='right') - 1
        types = {self.cell_blocks[i][0] for i in np.unique(ib)}
        if len(types) > 1:
            raise MeshError('cells of different types requested together')
        nv = CELL_NV[types.pop()]
        out = np.empty((len(cells), nv), dtype=np.int64)
        for i in np.unique(ib):
            sel = ib == i
            out[sel] = self.cell_blocks[i][1][cells[sel] - self.block_offsets[i]]
        return out

    def cell_vertices(self, cells):
        """Unique sorted vertex ids used by the given cells."""
        groups = self.cell_type_of(cells)
        if not groups:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate(
            [self.cell_connectivity(c).ravel() for c in groups.values()]))

    @cached_property
    def cell_centroids(self):
        out = np.empty((self.n_cell, self.dim))
        for _, ids, conn in self.iter_blocks():
            out[ids] = self.vertices[conn].mean(axis=1)
        return out

    @cached_property
    def bounding_box(self):
        return np.array([self.vertices.min(axis=0), self.vertices.max(axis=0)])

    def boundary_facets(self):
        """Facets of volume cells that belong to exactly one volume cell.

        Returns a list of vertex tuples. Each facet keeps the orientation of
        its owning cell, rotated so that the smallest vertex id comes first.
        The list is sorted by the sorted vertex tuple.
        """
        return list(self._boundary_facets)

    @cached_property
    def _boundary_facets(self):
        count = {}
        first = {}
        for cell_type, _, conn in self.iter_blocks():
            if CELL_DIM[cell_type] != self.dim:
                continue
            for local in CELL_FACETS[cell_type]:
                for facet in conn[:, local].tolist():
                    key = tuple(sorted(facet))
                    count[key] = count.get(key, 0) + 1
                    first.setdefault(key, facet)
        out = []
        for key in sorted(count):
            if count[key] != 1:
                continue
            facet = first[key]
            i = facet.index(min(facet))
            out.append(tuple(facet[i:] + facet[:i]))
        return tuple(out)

    def with_groups(self, cell_group_ids):
        """Copy of the mesh with new cell group ids."""
        return Mesh(self.vertices, self.cell_blocks, cell_group_ids, self.name)


def boundary_facets(mesh):
    """Boundary facets of ``mesh``, see :meth:`Mesh.boundary_facets`."""
    return mesh.boundary_facets()


def generate_block_mesh(dims, shape, centre, name='block'):
    """Structured line2/quad4/hex8 mesh of an axis-aligned block.

    Parameters
    ----------
    dims : sequence of float
        Block side lengths.
    shape : sequence of int
        Number of vertices along each axis (at least 2).
    centre : sequence of float
        Coordinates of the block centre.
    """
    dims = np.atleast_1d(np.asarray(dims, dtype=np.float64))
    shape = np.atleast_1d(np.asarray(shape)).astype(np.int64)
    centre = np.atleast_1d(np.asarray(centre, dtype=np.float64))
    dim = len(dims)
    if not (len(shape) == len(centre) == dim) or dim not in (1, 2, 3):
        raise MeshError('dims, shape and centre must have equal length 1..3')
    if np.any(shape < 2):
        raise MeshError(f'every shape entry must be >= 2, got {shape.tolist()}')
    if np.any(dims <= 0):
        raise MeshError(f'every dims entry must be > 0, got {dims.tolist()}')

    axes = [np.linspace(c - 0.5 * d, c + 0.5 * d, n)
            for d, n, c in zip(dims, shape, centre)]
    # x varies fastest.
    grid = np.meshgrid(*axes, indexing='ij')
    coors = np.stack([g.ravel(order='F') for g in grid], axis=1)

    def vid(*idx):
        out = 0
        stride = 1
        for i, n in zip(idx, shape):
            out = out + i * stride
            stride *= n
        return out

    ranges = [np.arange(n - 1) for n in shape]
    cidx = np.meshgrid(*ranges, indexing='ij')
    cidx = [c.ravel(order='F') for c in cidx]
    if dim == 1:
        (i,) = cidx
        conn = np.stack([vid(i), vid(i + 1)], axis=1)
    elif dim == 2:
        i, j = cidx
        conn = np.stack([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1),
                         vid(i, j + 1)], axis=1)
    else:
        i, j, k = cidx
        conn = np.stack([vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j + 1, k),
                         vid(i, j + 1, k), vid(i, j, k + 1),
                         vid(i + 1, j, k + 1), vid(i + 1, j + 1, k + 1),
                         vid(i, j + 1, k + 1)], axis=1)
    return Mesh(coors, [(TENSOR_CELLS[dim], conn)], name=name)


def entity_key(vertex_ids):
    """Orientation-free key of a mesh entity given by its vertices."""
    return tuple(sorted(vertex_ids))


def facet_entity_keys(facets):
    """Keys of all sub-entities (vertices, edges, the facet) of facets."""
    keys = set()
    for facet in facets:
        n = len(facet)
        for v in facet:
            keys.add((v,))
        if n == 2:
            keys.add(entity_key(facet))
        elif n > 2:
            for a, b in zip(facet, facet[1:] + facet[:1]):
                keys.add(entity_key((a, b)))
            keys.add(entity_key(facet))
    return keys
