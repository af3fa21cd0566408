import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from homfem import Mesh, generate_block_mesh, read_vtk, read_vtk_with_data, write_vtk
from homfem.errors import EmptyRegionError, MeshError, ParseError, SelectorError
from homfem.mesh import boundary_facets
from homfem.regions import parse_selector, predicate_cells, select_region


class TestGenerate:
    def test_line(self):
        m = generate_block_mesh((1,), (3,), (0,))
        np.testing.assert_allclose(m.vertices[:, 0], [-0.5, 0.0, 0.5])
        assert m.cell_blocks[0][0] == 'line2' and m.n_cell == 2

    def test_single_quad(self):
        m = generate_block_mesh((2, 2), (2, 2), (0, 0))
        assert m.n_cell == 1 and m.cell_blocks[0][0] == 'quad4'
        assert set(map(tuple, m.vertices.tolist())) == {
            (-1, -1), (1, -1), (1, 1), (-1, 1)}

    def test_cube(self):
        m = generate_block_mesh((1, 1, 1), (3, 3, 3), (0.5, 0.5, 0.5))
        assert m.n_vertex == 27 and m.n_cell == 8
        assert set(np.unique(m.vertices)) == {0.0, 0.5, 1.0}
        assert np.all(m.cell_group_ids == 0)

    @pytest.mark.parametrize('args', [
        ((1, 1), (3,), (0, 0)),
        ((1,), (1,), (0,)),
        ((0,), (2,), (0,)),
        ((1,) * 4, (2,) * 4, (0,) * 4),
    ])
    def test_bad_arguments(self, args):
        with pytest.raises(MeshError):
            generate_block_mesh(*args)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.integers(2, 5), min_size=1, max_size=3))
    def test_counts(self, shape):
        dim = len(shape)
        m = generate_block_mesh([1.0] * dim, shape, [0.0] * dim)
        assert m.n_vertex == np.prod(shape)
        assert m.n_cell == np.prod(np.array(shape) - 1)


class TestMeshInvariants:
    def test_index_out_of_range(self):
        with pytest.raises(MeshError):
            Mesh([[0, 0], [1, 0], [0, 1]], [('tri3', [[0, 1, 3]])])

    def test_repeated_vertex(self):
        with pytest.raises(MeshError):
            Mesh([[0, 0], [1, 0], [0, 1]], [('tri3', [[0, 1, 1]])])

    def test_cell_dim_above_space_dim(self):
        with pytest.raises(MeshError):
            Mesh([[0, 0], [1, 0], [0, 1], [1, 1]], [('tet4', [[0, 1, 2, 3]])])


HAND_TRI = """# vtk DataFile Version 3.0
hand written
ASCII
DATASET UNSTRUCTURED_GRID
POINTS 3 double
0 0 0
1 0 0
0 1 0
CELLS 1 4
3 0 1 2
CELL_TYPES 1
5
"""


class TestVtk:
    def test_hand_fixture(self, tmp_path):
        path = tmp_path / 'tri.vtk'
        path.write_text(HAND_TRI)
        m = read_vtk(str(path))
        assert m.dim == 2 and m.cell_blocks[0][0] == 'tri3'
        np.testing.assert_array_equal(m.cell_blocks[0][1], [[0, 1, 2]])
        assert np.all(m.cell_group_ids == 0)

    def test_points_count_mismatch(self, tmp_path):
        path = tmp_path / 'bad.vtk'
        path.write_text(HAND_TRI.replace('POINTS 3', 'POINTS 4'))
        with pytest.raises(MeshError, match='count mismatch'):
            read_vtk(str(path))

    def test_unsupported_cell_code(self, tmp_path):
        path = tmp_path / 'bad.vtk'
        path.write_text(HAND_TRI.replace('CELL_TYPES 1\n5', 'CELL_TYPES 1\n7'))
        with pytest.raises(MeshError, match='unsupported'):
            read_vtk(str(path))

    def test_malformed_header(self, tmp_path):
        path = tmp_path / 'bad.vtk'
        path.write_text(HAND_TRI.replace('UNSTRUCTURED_GRID', 'POLYDATA'))
        with pytest.raises(MeshError, match='header'):
            read_vtk(str(path))

    @pytest.mark.parametrize('shape', [(4,), (3, 4), (3, 2, 4)])
    def test_round_trip(self, tmp_path, shape):
        dim = len(shape)
        m = generate_block_mesh([0.3] * dim, shape, [0.1] * dim)
        m = m.with_groups(np.arange(m.n_cell) % 3)
        path = str(tmp_path / 'm.vtk')
        u = np.linspace(0, 1, m.n_vertex)
        write_vtk(path, m, {'u': u}, {'mat_id': m.cell_group_ids})
        back, pdata, _ = read_vtk_with_data(path)
        np.testing.assert_allclose(back.vertices, m.vertices, atol=1e-12)
        for (t0, c0), (t1, c1) in zip(m.cell_blocks, back.cell_blocks):
            assert t0 == t1
            np.testing.assert_array_equal(c0, c1)
        np.testing.assert_array_equal(back.cell_group_ids, m.cell_group_ids)
        np.testing.assert_array_equal(pdata['u'], u)

    def test_geometry_only(self, tmp_path):
        m = generate_block_mesh((1, 1), (2, 2), (0, 0))
        path = tmp_path / 'g.vtk'
        write_vtk(str(path), m)
        text = path.read_text()
        assert text.startswith('# vtk DataFile Version 3.0')
        assert 'POINT_DATA' not in text and 'CELL_DATA' not in text

    def test_scalar_block(self, tmp_path):
        m = generate_block_mesh((1,), (3,), (0,))
        path = tmp_path / 's.vtk'
        write_vtk(str(path), m, {'u': [1.0, 2.0, 3.0]})
        text = path.read_text()
        assert 'POINT_DATA 3' in text and 'SCALARS u double 1' in text

    def test_vector_padding_2d(self, tmp_path):
        m = generate_block_mesh((1, 1), (2, 2), (0, 0))
        vec = np.arange(8.0).reshape(4, 2) + 1
        path = tmp_path / 'v.vtk'
        write_vtk(str(path), m, {'w': vec})
        lines = path.read_text().splitlines()
        i = lines.index('VECTORS w double')
        rows = [list(map(float, ln.split())) for ln in lines[i + 1:i + 5]]
        np.testing.assert_array_equal(np.array(rows)[:, 2], 0.0)
        np.testing.assert_array_equal(np.array(rows)[:, :2], vec)

    def test_length_mismatch(self, tmp_path):
        m = generate_block_mesh((1,), (3,), (0,))
        with pytest.raises(MeshError):
            write_vtk(str(tmp_path / 'x.vtk'), m, {'u': [1.0, 2.0]})

    def test_unwritable(self, tmp_path):
        m = generate_block_mesh((1,), (3,), (0,))
        with pytest.raises(MeshError):
            write_vtk(str(tmp_path / 'missing' / 'x.vtk'), m)

    def test_deterministic_bytes(self, tmp_path):
        m = generate_block_mesh((1, 1), (3, 3), (0, 0))
        u = np.sin(m.vertices[:, 0] * 7.1)
        a, b = tmp_path / 'a.vtk', tmp_path / 'b.vtk'
        write_vtk(str(a), m, {'u': u})
        write_vtk(str(b), m, {'u': u})
        assert a.read_bytes() == b.read_bytes()


class TestRegions:
    def test_all_cells(self):
        m = generate_block_mesh((1, 1), (3, 4), (0, 0))
        r = select_region(m, 'Omega', 'all')
        assert r.kind == 'cell'
        np.testing.assert_array_equal(r.ids, np.arange(m.n_cell))

    def test_facets_at_x0(self):
        m = generate_block_mesh((0.1,) * 3, (3, 3, 3), (0.05,) * 3)
        r = select_region(m, 'Left', 'vertices in (x < 0.00001)', 'facet')
        assert len(r) == 4
        for facet in r.facets:
            assert np.all(m.vertices[list(facet), 0] == 0.0)

    def test_empty(self):
        m = generate_block_mesh((1,), (3,), (0,))
        with pytest.raises(EmptyRegionError):
            select_region(m, 'Far', 'vertices in (x > 1e9)')

    def test_unknown_coordinate(self):
        m = generate_block_mesh((1,), (3,), (0,))
        with pytest.raises(SelectorError):
            select_region(m, 'R', 'vertices in (y < 0)')

    def test_bad_selector(self):
        with pytest.raises(ParseError):
            parse_selector('vertices of surface')

    def test_and_or_precedence(self):
        m = generate_block_mesh((2, 2), (3, 3), (0, 0))
        r = select_region(m, 'R', 'vertices in (x < -0.5 & y < -0.5 | x > 0.5)')
        got = {tuple(v) for v in m.vertices[r.ids].tolist()}
        assert got == {(-1, -1), (1, -1), (1, 0), (1, 1)}

    def test_groups(self):
        m = generate_block_mesh((1, 1), (3, 3), (0.5, 0.5))
        m = m.with_groups([0, 1, 1, 2])
        r = select_region(m, 'G', 'cells of group 1')
        np.testing.assert_array_equal(r.ids, [1, 2])

    def test_predicate_cells(self):
        m = generate_block_mesh((1, 1), (3, 3), (0.5, 0.5))
        np.testing.assert_array_equal(predicate_cells(m, 'x > 0.5'), [1, 3])

    def test_idempotent(self):
        m = generate_block_mesh((1, 1, 1), (3, 3, 3), (0, 0, 0))
        a = select_region(m, 'R', 'vertices in (z > 0.1)', 'facet')
        b = select_region(m, 'R', 'vertices in (z > 0.1)', 'facet')
        np.testing.assert_array_equal(a.ids, b.ids)
        assert np.all(np.diff(a.ids) > 0)

    def test_cell_measure(self):
        m = generate_block_mesh((2, 3), (3, 4), (0, 0))
        assert select_region(m, 'O', 'all').measure() == pytest.approx(6.0)


class TestBoundaryFacets:
    def test_single_hex(self):
        m = generate_block_mesh((1, 1, 1), (2, 2, 2), (0, 0, 0))
        assert len(boundary_facets(m)) == 6

    def test_line(self):
        m = generate_block_mesh((1,), (3,), (0,))
        assert sorted(boundary_facets(m)) == [(0,), (2,)]

    def test_2x2x2(self):
        m = generate_block_mesh((1, 1, 1), (3, 3, 3), (0, 0, 0))
        assert len(boundary_facets(m)) == 24

    @settings(max_examples=20, deadline=None)
    @given(st.lists(st.integers(2, 5), min_size=2, max_size=3))
    def test_count_formula(self, shape):
        cells = np.array(shape) - 1
        dim = len(shape)
        m = generate_block_mesh([1.0] * dim, shape, [0.0] * dim)
        expected = sum(2 * np.prod(np.delete(cells, a)) for a in range(dim))
        assert len(boundary_facets(m)) == expected

    def test_facets_outward(self):
        # Outward normal of each boundary quad points away from the centre.
        m = generate_block_mesh((1, 1, 1), (3, 3, 3), (0, 0, 0))
        for facet in boundary_facets(m):
            p = m.vertices[list(facet)]
            n = np.cross(p[1] - p[0], p[2] - p[0])
            assert n @ p.mean(axis=0) > 0
