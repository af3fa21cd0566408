"""Named mesh entity subsets and the selector mini-language.

Selector grammar::

    selector   := "all" | "vertices in (" predicate ")" | "cells of group " integer
    predicate  := comparison { ("&" | "|") comparison }
    comparison := coord ("<" | ">" | "<=" | ">=") number
    coord      := "x" | "y" | "z"

``&`` binds tighter than ``|``. The numbers in comparisons are used verbatim,
there is no hidden tolerance.
"""
from dataclasses import dataclass
import operator
import re

import numpy as np

from .errors import EmptyRegionError, ParseError, SelectorError
from .mesh import CELL_DIM

KINDS = ('cell', 'facet', 'vertex')
COORDS = ('x', 'y', 'z')
_OPS = {'<': operator.lt, '>': operator.gt, '<=': operator.le, '>=': operator.ge}

_NUMBER = r'[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?'
_CMP_RE = re.compile(rf'^\s*([A-Za-z_]\w*)\s*(<=|>=|<|>)\s*({_NUMBER})\s*$')
_GROUP_RE = re.compile(r'^cells\s+of\s+group\s+([-+]?\d+)$')
_VERTS_RE = re.compile(r'^vertices\s+in\s*\((.*)\)$', re.S)


@dataclass(frozen=True)
class Comparison:
    coord: str
    op: str
    value: float

    def __str__(self):
        return f'{self.coord} {self.op} {self.value!r}'


@dataclass(frozen=True)
class Predicate:
    """Disjunction of conjunctions of coordinate comparisons."""

    terms: tuple  # tuple of tuples of Comparison

    def __str__(self):
        return ' | '.join(' & '.join(str(c) for c in conj) for conj in self.terms)

    @property
    def coords(self):
        return {c.coord for conj in self.terms for c in conj}

    def evaluate(self, coors):
        """Boolean mask of the rows of ``coors`` satisfying the predicate."""
        coors = np.atleast_2d(coors)
        dim = coors.shape[1]
        for name in self.coords:
            if COORDS.index(name) >= dim:
                raise SelectorError(
                    f'coordinate {name!r} is not defined in {dim}D')
        out = np.zeros(len(coors), dtype=bool)
        for conj in self.terms:
            mask = np.ones(len(coors), dtype=bool)
            for c in conj:
                mask &= _OPS[c.op](coors[:, COORDS.index(c.coord)], c.value)
            out |= mask
        return out


@dataclass(frozen=True)
class RegionSelector:
    """Parsed selector: ``kind`` is one of all/vertices/group."""

    kind: str
    predicate: Predicate = None
    group: int = None
    text: str = ''

    def __str__(self):
        if self.kind == 'all':
            return 'all'
        if self.kind == 'group':
            return f'cells of group {self.group}'
        return f'vertices in ({self.predicate})'


def parse_predicate(text):
    """Parse a predicate such as ``x < 0.1 & y > 0 | z >= 1``."""
    if not text.strip():
        raise ParseError('empty predicate', text=text)
    terms = []
    for disj in text.split('|'):
        conj = []
        for part in disj.split('&'):
            m = _CMP_RE.match(part)
            if m is None:
                raise ParseError(f'malformed comparison {part.strip()!r}',
                                 text=text)
            name, op, value = m.groups()
            if name not in COORDS:
                raise SelectorError(f'unknown coordinate name {name!r}')
            conj.append(Comparison(name, op, float(value)))
        terms.append(tuple(conj))
    return Predicate(tuple(terms))


def parse_selector(text):
    """Parse a region selector string into a :class:`RegionSelector`."""
    if isinstance(text, RegionSelector):
        return text
    norm = ' '.join(text.split())
    if norm == 'all':
        return RegionSelector('all', text=text)
    m = _GROUP_RE.match(norm)
    if m:
        return RegionSelector('group', group=int(m.group(1)), text=text)
    m = _VERTS_RE.match(norm)
    if m:
        return RegionSelector('vertices', predicate=parse_predicate(m.group(1)),
                              text=text)
    raise ParseError(f'unrecognized region selector {text!r}', text=text)


@dataclass(frozen=True, eq=False)
class Region:
    """A named, sorted set of cells, boundary facets or vertices of a mesh.

    Facet ids index into ``mesh.boundary_facets()``.
    """

    name: str
    kind: str
    ids: np.ndarray
    mesh: object

    def __post_init__(self):
        self.ids.flags.writeable = False

    def __len__(self):
        return len(self.ids)

    def __repr__(self):
        return f'Region({self.name!r}, kind={self.kind!r}, n={len(self.ids)})'

    @property
    def vertices(self):
        """Sorted vertex ids touched by the region."""
        if self.kind == 'vertex':
            return self.ids
        if self.kind == 'cell':
            return self.mesh.cell_vertices(self.ids)
        facets = self.mesh.boundary_facets()
        if not len(self.ids):
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate([facets[i] for i in self.ids]))

    @property
    def facets(self):
        if self.kind != 'facet':
            raise SelectorError(f'region {self.name!r} is not a facet region')
        all_facets = self.mesh.boundary_facets()
        return [all_facets[i] for i in self.ids]

    def measure(self):
        """Volume of a cell region."""
        from .fields import cell_volumes

        if self.kind != 'cell':
            raise SelectorError('measure() needs a cell region')
        return float(cell_volumes(self.mesh, self.ids).sum())


def select_region(mesh, name, selector, kind=None):
    """Evaluate ``selector`` on ``mesh`` and return the named :class:`Region`.

    ``kind`` defaults to 'cell' for "all"/"cells of group" and 'vertex' for
    vertex predicates. An empty selection raises :class:`EmptyRegionError`.
    """
    sel = parse_selector(selector)
    if kind is None:
        kind = 'vertex' if sel.kind == 'vertices' else 'cell'
    if kind not in KINDS:
        raise SelectorError(f'unknown region kind {kind!r}')

    if sel.kind == 'all':
        if kind == 'cell':
            ids = mesh.volume_cells
        elif kind == 'facet':
            ids = np.arange(len(mesh.boundary_facets()))
        else:
            ids = np.arange(mesh.n_vertex)
    elif sel.kind == 'group':
        if kind != 'cell':
            raise SelectorError('"cells of group" selects cells only')
        cells = mesh.volume_cells
        ids = cells[mesh.cell_group_ids[cells] == sel.group]
    else:
        vmask = sel.predicate.evaluate(mesh.vertices)
        if kind == 'vertex':
            ids = np.flatnonzero(vmask)
        elif kind == 'facet':
            facets = mesh.boundary_facets()
            ids = np.array([i for i, f in enumerate(facets)
                            if vmask[list(f)].all()], dtype=np.int64)
        else:
            ids = [gids[vmask[conn].all(axis=1)]
                   for ct, gids, conn in mesh.iter_blocks()
                   if CELL_DIM[ct] == mesh.dim]
            ids = np.concatenate(ids) if ids else []

    ids = np.unique(np.asarray(ids, dtype=np.int64))
    if not len(ids):
        raise EmptyRegionError(f'region {name!r} ({selector!r}, {kind}) is empty')
    return Region(name, kind, ids, mesh)


def predicate_cells(mesh, predicate):
    """Volume cells whose centroid satisfies a predicate string."""
    pred = parse_predicate(predicate) if isinstance(predicate, str) else predicate
    cells = mesh.volume_cells
    return cells[pred.evaluate(mesh.cell_centroids[cells])]
