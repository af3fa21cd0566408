"""ASCII legacy VTK (version 3.0) unstructured grid reading and writing.

Cell group ids are stored as the integer CELL_DATA array ``mat_id``; it is
written only when some id is nonzero. Floats are written with 17
significant digits so that a write/read cycle is exact.
"""
import numpy as np

from .errors import MeshError
from .mesh import CELL_DIM, CELL_NV, VTK_CODES, VTK_TYPES, Mesh

_KEYWORDS = {'POINTS', 'CELLS', 'CELL_TYPES', 'CELL_DATA', 'POINT_DATA',
             'SCALARS', 'VECTORS', 'LOOKUP_TABLE', 'FIELD', 'TENSORS',
             'NORMALS', 'METADATA'}


def _fmt(x):
    return format(float(x), '.17g')


def _check_len(name, arr, n, what):
    if len(arr) != n:
        raise MeshError(f'{name}: length {len(arr)} does not match {n} {what}')


def write_vtk(path, mesh, point_data=None, cell_data=None, title='homfem output'):
    """Write ``mesh`` and optional named arrays to an ASCII legacy VTK file.

    Scalar arrays have shape (n,); vector arrays (n, dim) are padded to three
    components. Integer arrays are written with the ``int`` type.
    """
    point_data = point_data or {}
    cell_data = dict(cell_data or {})
    dim = mesh.dim
    lines = ['# vtk DataFile Version 3.0', title.replace('\n', ' ')[:255],
             'ASCII', 'DATASET UNSTRUCTURED_GRID']

    coors = np.zeros((mesh.n_vertex, 3))
    coors[:, :dim] = mesh.vertices
    lines.append(f'POINTS {mesh.n_vertex} double')
    lines.extend(' '.join(_fmt(v) for v in row) for row in coors)

    size = sum(len(conn) * (CELL_NV[ct] + 1) for ct, conn in mesh.cell_blocks)
    lines.append(f'CELLS {mesh.n_cell} {size}')
    for ct, conn in mesh.cell_blocks:
        nv = CELL_NV[ct]
        lines.extend(f'{nv} ' + ' '.join(map(str, row)) for row in conn.tolist())
    lines.append(f'CELL_TYPES {mesh.n_cell}')
    for ct, conn in mesh.cell_blocks:
        lines.extend([str(VTK_CODES[ct])] * len(conn))

    if 'mat_id' not in cell_data and np.any(mesh.cell_group_ids != 0):
        cell_data = {'mat_id': mesh.cell_group_ids, **cell_data}
    if cell_data:
        lines.append(f'CELL_DATA {mesh.n_cell}')
        for name, arr in cell_data.items():
            arr = np.asarray(arr)
            _check_len(name, arr, mesh.n_cell, 'cells')
            lines.extend(_data_block(name, arr, dim))
    if point_data:
        lines.append(f'POINT_DATA {mesh.n_vertex}')
        for name, arr in point_data.items():
            arr = np.asarray(arr)
            _check_len(name, arr, mesh.n_vertex, 'vertices')
            lines.extend(_data_block(name, arr, dim))

    try:
        with open(path, 'w', newline='\n') as fd:
            fd.write('\n'.join(lines) + '\n')
    except OSError as exc:
        raise MeshError(f'cannot write {path}: {exc}') from exc


def _data_block(name, arr, dim):
    is_int = np.issubdtype(arr.dtype, np.integer)
    vtype = 'int' if is_int else 'double'
    fmt = str if is_int else _fmt
    if arr.ndim == 1:
        out = [f'SCALARS {name} {vtype} 1', 'LOOKUP_TABLE default']
        out.extend(fmt(v) for v in arr.tolist())
        return out
    if arr.ndim == 2 and arr.shape[1] in (2, 3) and arr.shape[1] <= max(dim, 2):
        vec = np.zeros((len(arr), 3), dtype=arr.dtype)
        vec[:, :arr.shape[1]] = arr
        out = [f'VECTORS {name} {vtype}']
        out.extend(' '.join(fmt(v) for v in row) for row in vec.tolist())
        return out
    if arr.ndim == 2 and 1 <= arr.shape[1] <= 4:
        out = [f'SCALARS {name} {vtype} {arr.shape[1]}', 'LOOKUP_TABLE default']
        out.extend(' '.join(fmt(v) for v in row) for row in arr.tolist())
        return out
    raise MeshError(f'{name}: unsupported data shape {arr.shape}')


class _Tokens:
    def __init__(self, text):
        self.lines = text.splitlines()
        self.toks = []
        for iline, line in enumerate(self.lines[4:], start=5):
            for tok in line.split():
                self.toks.append((tok, iline))
        self.i = 0

    def done(self):
        return self.i >= len(self.toks)

    def peek(self):
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def next(self):
        if self.i >= len(self.toks):
            raise MeshError('unexpected end of file')
        tok = self.toks[self.i]
        self.i += 1
        return tok[0]

    def numbers(self, n, conv, what):
        out = []
        for _ in range(n):
            tok = self.peek()
            if tok is None or tok.upper() in _KEYWORDS:
                raise MeshError(f'count mismatch: expected {n} values for '
                                f'{what}, found {len(out)}')
            try:
                out.append(conv(tok))
            except ValueError:
                raise MeshError(f'bad value {tok!r} in {what}') from None
            self.i += 1
        return out


def _conv_for(vtype):
    return int if vtype.lower() in ('int', 'long', 'short', 'unsigned_int',
                                    'unsigned_long', 'unsigned_short',
                                    'char', 'unsigned_char', 'vtkidtype') else float


def read_vtk_with_data(path):
    """Read an ASCII legacy VTK unstructured grid.

    Returns ``(mesh, point_data, cell_data)`` where the data dicts map array
    names to numpy arrays. Vectors are truncated to the mesh dimension.
    """
    try:
        with open(path) as fd:
            text = fd.read()
    except OSError as exc:
        raise MeshError(f'cannot read {path}: {exc}') from exc
    head = text.splitlines()[:4]
    if len(head) < 4 or not head[0].startswith('# vtk DataFile'):
        raise MeshError('malformed header: missing "# vtk DataFile" line')
    if head[2].strip().upper() != 'ASCII':
        raise MeshError('only ASCII legacy VTK files are supported')
    if ' '.join(head[3].split()).upper() != 'DATASET UNSTRUCTURED_GRID':
        raise MeshError('malformed header: expected DATASET UNSTRUCTURED_GRID')

    tk = _Tokens(text)
    points = cells = types = None
    point_data, cell_data = {}, {}
    current, n_current = None, 0
    while not tk.done():
        kw = tk.next().upper()
        if kw == 'POINTS':
            n = int(tk.next())
            tk.next()
            points = np.array(tk.numbers(3 * n, float, 'POINTS')).reshape(n, 3)
        elif kw == 'CELLS':
            n, size = int(tk.next()), int(tk.next())
            flat = tk.numbers(size, int, 'CELLS')
            cells, i = [], 0
            for _ in range(n):
                if i >= len(flat):
                    raise MeshError('count mismatch in CELLS')
                nv = flat[i]
                cells.append(flat[i + 1:i + 1 + nv])
                i += nv + 1
            if i != size:
                raise MeshError('count mismatch: CELLS size does not match')
        elif kw == 'CELL_TYPES':
            n = int(tk.next())
            types = tk.numbers(n, int, 'CELL_TYPES')
        elif kw in ('CELL_DATA', 'POINT_DATA'):
            current = cell_data if kw == 'CELL_DATA' else point_data
            n_current = int(tk.next())
        elif kw == 'SCALARS':
            name, vtype = tk.next(), tk.next()
            ncomp = 1
            if tk.peek() is not None and tk.peek().isdigit():
                ncomp = int(tk.next())
            if tk.peek() is not None and tk.peek().upper() == 'LOOKUP_TABLE':
                tk.next()
                tk.next()
            vals = tk.numbers(n_current * ncomp, _conv_for(vtype), name)
            arr = np.array(vals)
            current[name] = arr if ncomp == 1 else arr.reshape(-1, ncomp)
        elif kw in ('VECTORS', 'NORMALS'):
            name, vtype = tk.next(), tk.next()
            vals = tk.numbers(3 * n_current, _conv_for(vtype), name)
            current[name] = np.array(vals).reshape(-1, 3)
        elif kw == 'FIELD':
            tk.next()
            narr = int(tk.next())
            for _ in range(narr):
                name = tk.next()
                ncomp, ntup, vtype = int(tk.next()), int(tk.next()), tk.next()
                vals = np.array(tk.numbers(ncomp * ntup, _conv_for(vtype), name))
                current[name] = vals if ncomp == 1 else vals.reshape(ntup, ncomp)
        elif kw == 'METADATA':
            # Trailing metadata carries nothing homfem reads.
            break
        else:
            raise MeshError(f'unexpected token {kw!r}')

    if points is None or cells is None or types is None:
        raise MeshError('missing POINTS, CELLS or CELL_TYPES section')
    if len(types) != len(cells):
        raise MeshError('count mismatch between CELLS and CELL_TYPES')

    blocks = []
    for ic, (code, conn) in enumerate(zip(types, cells)):
        if code not in VTK_TYPES:
            raise MeshError(f'unsupported VTK cell type code {code}')
        ct = VTK_TYPES[code]
        if len(conn) != CELL_NV[ct]:
            raise MeshError(f'cell {ic}: {ct} needs {CELL_NV[ct]} vertices')
        if not blocks or blocks[-1][0] != ct:
            blocks.append((ct, []))
        blocks[-1][1].append(conn)

    dim = max(CELL_DIM[ct] for ct, _ in blocks)
    if np.any(points[:, dim:] != 0.0):
        raise MeshError(f'{dim}D cells with nonzero coordinates beyond axis {dim}')
    groups = None
    if 'mat_id' in cell_data:
        groups = np.asarray(cell_data['mat_id']).astype(np.int64).ravel()
    mesh = Mesh(points[:, :dim], blocks, groups)

    for data, n in ((point_data, mesh.n_vertex), (cell_data, mesh.n_cell)):
        for name, arr in list(data.items()):
            if len(arr) != n:
                raise MeshError(f'count mismatch in data array {name!r}')
            if arr.ndim == 2 and arr.shape[1] == 3 and dim < 3:
                data[name] = arr[:, :max(dim, 2)] if dim == 2 else arr[:, :1]
    return mesh, point_data, cell_data


def read_vtk(path):
    """Read a mesh from an ASCII legacy VTK unstructured grid file."""
    return read_vtk_with_data(path)[0]
