"""Gauss-type quadrature rules on the reference cells.

Tensor reference cells span [-1, 1]^d; tri and tet are unit simplices
with a vertex at the origin. Tensor cells use tensor products of
Gauss-Legendre rules, simplices use collapsed (conical product)
Gauss-Jacobi rules.
"""
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy.special import roots_jacobi

from .errors import QuadratureError

MAX_ORDER = 15

REF_MEASURE = {'line2': 2.0, 'quad4': 4.0, 'hex8': 8.0,
               'tri3': 0.5, 'tet4': 1.0 / 6.0}


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    cell_type: str
    order: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def n_point(self):
        return len(self.weights)


def _gauss_jacobi01(n, alpha):
    """n-point rule on [0, 1] for the weight (1 - u)**alpha."""
    t, w = roots_jacobi(n, alpha, 0.0)
    return 0.5 * (1.0 + t), w / 2.0 ** (alpha + 1)


def _n_points(order):
    return max(1, math.ceil((order + 1) / 2))


@lru_cache(maxsize=None)
def _rule(cell_type, order):
    n = _n_points(order)
    if cell_type in ('line2', 'quad4', 'hex8'):
        dim = {'line2': 1, 'quad4': 2, 'hex8': 3}[cell_type]
        x, w = np.polynomial.legendre.leggauss(n)
        grids = np.meshgrid(*([x] * dim), indexing='ij')
        wgrids = np.meshgrid(*([w] * dim), indexing='ij')
        # First coordinate varies fastest.
        points = np.stack([g.ravel(order='F') for g in grids], axis=1)
        weights = np.prod([g.ravel(order='F') for g in wgrids], axis=0)
    elif cell_type == 'tri3':
        u, wu = _gauss_jacobi01(n, 1.0)
        v, wv = _gauss_jacobi01(n, 0.0)
        uu, vv = np.meshgrid(u, v, indexing='ij')
        ww = np.outer(wu, wv)
        points = np.stack([uu.ravel(), (vv * (1.0 - uu)).ravel()], axis=1)
        weights = ww.ravel()
    elif cell_type == 'tet4':
        u, wu = _gauss_jacobi01(n, 2.0)
        v, wv = _gauss_jacobi01(n, 1.0)
        s, ws = _gauss_jacobi01(n, 0.0)
        uu, vv, ss = np.meshgrid(u, v, s, indexing='ij')
        ww = wu[:, None, None] * wv[None, :, None] * ws[None, None, :]
        points = np.stack([uu.ravel(), (vv * (1.0 - uu)).ravel(),
                           (ss * (1.0 - uu) * (1.0 - vv)).ravel()], axis=1)
        weights = ww.ravel()
    else:
        raise QuadratureError(f'no quadrature for cell type {cell_type!r}')
    points.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureRule(cell_type, order, points, weights)


def get_quadrature(cell_type, order):
    """Quadrature rule integrating polynomials of degree ``order`` exactly."""
    if not isinstance(order, (int, np.integer)) or order < 1:
        raise QuadratureError(f'quadrature order must be an integer >= 1, '
                              f'got {order!r}')
    if order > MAX_ORDER:
        raise QuadratureError(f'quadrature order {order} exceeds the table '
                              f'maximum {MAX_ORDER}')
    return _rule(cell_type, int(order))
