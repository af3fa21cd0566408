"""Global sparse assembly of per-cell blocks."""
import numpy as np
import scipy.sparse as sp

from .errors import TermError


class SparseSystem:
    """Accumulates triplets and a right-hand side.

    ``offsets`` holds the first DOF of each unknown variable block in the
    stacked vector; the last entry equals the total size.
    """

    def __init__(self, n, offsets=None):
        self.n = int(n)
        self.offsets = (np.array([0, self.n], dtype=np.int64) if offsets is None
                        else np.asarray(offsets, dtype=np.int64))
        if self.offsets[-1] != self.n or np.any(np.diff(self.offsets) <= 0):
            raise TermError('block offsets must increase strictly up to n')
        self._rows, self._cols, self._vals = [], [], []
        self.rhs = np.zeros(self.n)

    def add_matrix(self, rows, cols, vals):
        self._rows.append(np.asarray(rows, dtype=np.int64).ravel())
        self._cols.append(np.asarray(cols, dtype=np.int64).ravel())
        self._vals.append(np.asarray(vals, dtype=np.float64).ravel())

    def matrix(self):
        """The assembled matrix in CSR format (duplicates summed)."""
        if self._rows:
            rows = np.concatenate(self._rows)
            cols = np.concatenate(self._cols)
            vals = np.concatenate(self._vals)
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0)
        mtx = sp.coo_matrix((vals, (rows, cols)), shape=(self.n, self.n))
        return mtx.tocsr()


def assemble(system, blocks, rows, cols=None, sign=1.0):
    """Add per-cell blocks into ``system``.

    ``blocks`` is (n_cell, n_row, n_col) with ``cols`` given, or (n_cell,
    n_row) for right-hand side contributions. Indices outside the system
    raise :class:`TermError`.
    """
    blocks = np.asarray(blocks, dtype=np.float64)
    rows = np.asarray(rows, dtype=np.int64)
    for name, idx in (('row', rows), ('column', cols)):
        if idx is None or not np.size(idx):
            continue
        idx = np.asarray(idx)
        if idx.min() < 0 or idx.max() >= system.n:
            raise TermError(f'{name} index out of range for a system of size '
                            f'{system.n}')
    if cols is None:
        if blocks.shape != rows.shape:
            raise TermError(f'vector blocks {blocks.shape} do not match row '
                            f'indices {rows.shape}')
        np.add.at(system.rhs, rows.ravel(), sign * blocks.ravel())
        return
    cols = np.asarray(cols, dtype=np.int64)
    n_cell, n_row, n_col = blocks.shape
    if rows.shape != (n_cell, n_row) or cols.shape != (n_cell, n_col):
        raise TermError('matrix blocks do not match row/column indices')
    rr = np.broadcast_to(rows[:, :, None], blocks.shape)
    cc = np.broadcast_to(cols[:, None, :], blocks.shape)
    system.add_matrix(rr, cc, sign * blocks)
