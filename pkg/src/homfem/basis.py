"""Nodal Lagrange bases of order 1 and 2 on the reference cells.

Order 2 uses the full tensor-product space on line/quad/hex (including face
and centre nodes) and P2 on simplices. Nodes are listed as vertices, then
edge midpoints, then face centres, then the cell centre. Each node is
identified by the tuple of local cell vertices spanning its entity.
"""
from functools import lru_cache

import numpy as np

from .errors import QuadratureError
from .mesh import CELL_EDGES, CELL_FACETS

REF_VERTICES = {
    'line2': np.array([[-1.0], [1.0]]),
    'quad4': np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]),
    'hex8': np.array([[-1.0, -1.0, -1.0], [1.0, -1.0, -1.0], [1.0, 1.0, -1.0],
                      [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0], [1.0, -1.0, 1.0],
                      [1.0, 1.0, 1.0], [-1.0, 1.0, 1.0]]),
    'tri3': np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    'tet4': np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0],
                      [0.0, 0.0, 1.0]]),
}
TENSOR = ('line2', 'quad4', 'hex8')
ORDERS = (1, 2)


@lru_cache(maxsize=None)
def node_entities(cell_type, order):
    """Local vertex tuples defining the nodes of a cell, in basis order."""
    if order not in ORDERS:
        raise QuadratureError(f'basis order {order} not supported (1 or 2)')
    nv = len(REF_VERTICES[cell_type])
    nodes = [(i,) for i in range(nv)]
    if order == 2:
        nodes += [tuple(e) for e in CELL_EDGES[cell_type]]
        if cell_type == 'hex8':
            nodes += [tuple(f) for f in CELL_FACETS['hex8']]
        if cell_type in ('quad4', 'hex8'):
            nodes.append(tuple(range(nv)))
    return tuple(nodes)


@lru_cache(maxsize=None)
def node_coordinates(cell_type, order):
    """Reference coordinates of the basis nodes."""
    ref = REF_VERTICES[cell_type]
    return np.array([ref[list(n)].mean(axis=0)
                     for n in node_entities(cell_type, order)])


def _lagrange_1d(order, x):
    """1D Lagrange values/derivatives at x for nodes -1, 1 (and 0)."""
    x = np.asarray(x)
    if order == 1:
        val = np.stack([0.5 * (1 - x), 0.5 * (1 + x)])
        der = np.stack([-0.5 * np.ones_like(x), 0.5 * np.ones_like(x)])
    else:
        val = np.stack([0.5 * x * (x - 1), 0.5 * x * (x + 1), 1 - x * x])
        der = np.stack([x - 0.5, x + 0.5, -2 * x])
    return val, der


def _tensor_basis(cell_type, order, points):
    nodes = node_coordinates(cell_type, order)
    dim = nodes.shape[1]
    # Index of each node coordinate within the 1D node list (-1, 1, 0).
    idx = np.where(nodes < -0.5, 0, np.where(nodes > 0.5, 1, 2))
    vals, ders = [], []
    for d in range(dim):
        v, g = _lagrange_1d(order, points[:, d])
        vals.append(v)
        ders.append(g)
    n_b, n_p = len(nodes), len(points)
    values = np.ones((n_b, n_p))
    grads = np.ones((n_b, n_p, dim))
    for d in range(dim):
        vd = vals[d][idx[:, d]]
        gd = ders[d][idx[:, d]]
        values *= vd
        for e in range(dim):
            grads[:, :, e] *= gd if e == d else vd
    return values, grads


def _simplex_basis(cell_type, order, points):
    dim = points.shape[1]
    lam = np.concatenate([1.0 - points.sum(axis=1, keepdims=True), points],
                         axis=1).T
    dlam = np.zeros((dim + 1, dim))
    dlam[0] = -1.0
    dlam[1:] = np.eye(dim)
    n_p = len(points)
    if order == 1:
        values = lam
        grads = np.broadcast_to(dlam[:, None, :], (dim + 1, n_p, dim)).copy()
        return values, grads
    ents = node_entities(cell_type, 2)
    values = np.empty((len(ents), n_p))
    grads = np.empty((len(ents), n_p, dim))
    for i, ent in enumerate(ents):
        if len(ent) == 1:
            a = ent[0]
            values[i] = lam[a] * (2 * lam[a] - 1)
            grads[i] = (4 * lam[a] - 1)[:, None] * dlam[a]
        else:
            a, b = ent
            values[i] = 4 * lam[a] * lam[b]
            grads[i] = 4 * (lam[b][:, None] * dlam[a] + lam[a][:, None] * dlam[b])
    return values, grads


def eval_basis(cell_type, order, points):
    """Values (n_basis, n_point) and reference gradients (n_basis, n_point, dim)."""
    if cell_type not in REF_VERTICES:
        raise QuadratureError(f'no basis for cell type {cell_type!r}')
    if order not in ORDERS:
        raise QuadratureError(f'basis order {order} not supported on {cell_type}')
    dim = REF_VERTICES[cell_type].shape[1]
    points = np.asarray(points, dtype=np.float64).reshape(-1, dim)
    if cell_type in TENSOR:
        return _tensor_basis(cell_type, order, points)
    return _simplex_basis(cell_type, order, points)
