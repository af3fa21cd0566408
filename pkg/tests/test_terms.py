import numpy as np
import pytest

from homfem.equations import parse_call
from homfem.assembly import SparseSystem, assemble
from homfem.errors import ConfigError, TermError
from homfem.terms import SYM_PAIRS, eval_strain, stiffness_from_youngpoisson

from helpers import dense_matrix, mixed_problem, nodal

D3 = stiffness_from_youngpoisson(3, 10.0, 0.3)
G3 = np.arange(18.0).reshape(3, 6) / 7.0 - 1.0
DIFF3 = np.array([[2.0, 0.3, 0.1], [0.3, 1.0, 0.2], [0.1, 0.2, 3.0]])


@pytest.fixture(scope='module')
def cube():
    mats = {'m': {'c': 2.5, 'zero': 0.0, 'D': D3.tolist(), 'g': G3.tolist(),
                  'd': (2.5 * np.eye(3)).tolist(), 'dd': DIFF3.tolist(),
                  'eye': np.eye(6).tolist()}}
    # A skewed but affine block keeps the checks nontrivial.
    return mixed_problem(dims=(1.0, 0.7, 0.4), shape=(3, 3, 2), materials=mats)


def _sym_err(a):
    return np.abs(a - a.T).max() / np.abs(a).max()


class TestLocalEvaluation:
    def test_zero_coefficient(self, cube):
        for lb in cube.evaluate('dw_laplace.i.Omega(m.zero, q, p)', 'matrix'):
            assert not lb.data.any()

    @pytest.mark.parametrize('length', [1.0, 0.3])
    def test_line_mass_matrix(self, length):
        pb = mixed_problem(dims=(length,), shape=(2,))
        (lb,) = pb.evaluate('dw_volume_dot.i.Omega(q, p)', 'matrix')
        np.testing.assert_allclose(lb.data[0], length / 6 * np.array([[2, 1], [1, 2]]),
                                   rtol=1e-14)

    def test_diffusion_equals_laplace(self, cube):
        a = dense_matrix(cube, 'dw_laplace.i.Omega(m.c, q, p)')
        b = dense_matrix(cube, 'dw_diffusion.i.Omega(m.d, q, p)')
        np.testing.assert_allclose(a, b, atol=1e-13)

    def test_lin_elastic_quadratic_form(self, cube):
        # Affine displacement: constant strain, so u^T K u = |Omega| e.e for D = I.
        grad = np.array([[0.1, 0.2, -0.3], [0.05, -0.1, 0.4], [0.2, 0.0, 0.3]])
        u = nodal(cube, 'u', lambda x: x @ grad.T)
        k = dense_matrix(cube, 'dw_lin_elastic.i.Omega(m.eye, v, u)')
        e = np.array([grad[i, j] + grad[j, i] if i != j else grad[i, i]
                      for i, j in SYM_PAIRS[3]])
        assert u @ k @ u == pytest.approx(0.28 * e @ e, rel=1e-12)

    def test_matches_high_order_quadrature(self, cube):
        for expr in ('dw_lin_elastic.{}.Omega(m.D, v, u)',
                     'dw_laplace.{}.Omega(m.c, q, p)',
                     'dw_volume_dot.{}.Omega(v, u)',
                     'dw_piezo_coupling.{}.Omega(m.g, v, p)'):
            lo = dense_matrix(cube, expr.format('i'))
            hi = dense_matrix(cube, expr.format('hi'))
            np.testing.assert_allclose(lo, hi, atol=1e-12 * np.abs(hi).max())

    def test_unknown_term(self, cube):
        call = parse_call('dw_nothing.i.Omega(q, p)', check_terms=False)
        with pytest.raises(TermError, match='unknown term'):
            cube.evaluate(call, 'matrix')

    def test_wrong_arity(self, cube):
        call = parse_call('dw_laplace.i.Omega(q, p)', check_terms=False)
        with pytest.raises(TermError, match='arguments'):
            cube.evaluate(call, 'matrix')

    def test_material_shape_mismatch(self, cube):
        with pytest.raises(TermError, match='shape'):
            cube.evaluate('dw_lin_elastic.i.Omega(m.d, v, u)', 'matrix')

    def test_scalar_field_in_elastic_term(self, cube):
        with pytest.raises(TermError):
            cube.evaluate('dw_lin_elastic.i.Omega(m.D, q, p)', 'matrix')

    def test_matrix_mode_needs_unknown(self, cube):
        with pytest.raises(TermError):
            cube.evaluate('dw_laplace.i.Omega(m.c, q, P1)', 'matrix')

    def test_eval_mode_is_bilinear_value(self, cube, rng):
        a = rng.standard_normal(cube.variable('P1').n_dofs)
        b = rng.standard_normal(cube.variable('P2').n_dofs)
        k = dense_matrix(cube, 'dw_diffusion.i.Omega(m.dd, q, p)')
        val = cube.evaluate('dw_diffusion.i.Omega(m.dd, P1, P2)', P1=a, P2=b)
        assert val == pytest.approx(a @ k @ b, rel=1e-12)

    def test_unregistered_function(self):
        with pytest.raises(ConfigError):
            mixed_problem(materials={'m': {'c': 'nowhere'}})


class TestGlobalProperties:
    @pytest.mark.parametrize('expr', [
        'dw_laplace.i.Omega(m.c, q, p)',
        'dw_volume_dot.i.Omega(v, u)',
        'dw_volume_dot.i.Omega(q, p)',
        'dw_lin_elastic.i.Omega(m.D, v, u)',
        'dw_diffusion.i.Omega(m.dd, q, p)',
    ])
    def test_symmetry(self, cube, expr):
        assert _sym_err(dense_matrix(cube, expr)) <= 1e-12

    def test_piezo_adjointness(self, cube):
        k_vr = dense_matrix(cube, 'dw_piezo_coupling.i.Omega(m.g, v, p)')
        k_us = dense_matrix(cube, 'dw_piezo_coupling.i.Omega(m.g, u, q)')
        np.testing.assert_allclose(k_vr, k_us.T, atol=1e-12 * np.abs(k_vr).max())

    def test_prestress_consistency(self):
        def w(x):
            return np.stack([x[:, 0] ** 2, x[:, 0] * x[:, 1], x[:, 2]], axis=1)

        def strain(x):
            e = np.zeros((len(x), 6))
            e[:, 0] = 2 * x[:, 0]
            e[:, 1] = x[:, 0]
            e[:, 2] = 1.0
            e[:, 3] = x[:, 1]
            return e

        registry = {'s0': lambda x, t: strain(x) @ D3.T}
        pb = mixed_problem(dims=(1, 1, 1), shape=(2, 3, 2), order=2,
                           materials={'m': {'D': D3.tolist(), 's0': 's0'}},
                           registry=registry)
        k = dense_matrix(pb, 'dw_lin_elastic.i.Omega(m.D, v, u)')
        wv = nodal(pb, 'u', w)
        f = np.zeros(len(wv))
        for lb in pb.evaluate('dw_lin_prestress.i.Omega(m.s0, v)', 'vector'):
            np.add.at(f, lb.rows.ravel(), lb.data.ravel())
        np.testing.assert_allclose(f, k @ wv, rtol=0, atol=1e-10 * np.abs(f).max())


class TestAssembly:
    def test_zero_block(self):
        sys = SparseSystem(3)
        assemble(sys, np.ones((1, 2, 2)), [[0, 1]], [[0, 1]])
        before = sys.matrix().toarray()
        assemble(sys, np.zeros((1, 2, 2)), [[1, 2]], [[1, 2]])
        np.testing.assert_array_equal(sys.matrix().toarray(), before)

    def test_shared_node_additivity(self):
        sys = SparseSystem(3)
        assemble(sys, [[[1.0, 2.0], [3.0, 4.0]], [[5.0, 6.0], [7.0, 8.0]]],
                 [[0, 1], [1, 2]], [[0, 1], [1, 2]])
        assert sys.matrix()[1, 1] == 4.0 + 5.0

    def test_repeat_doubles(self):
        sys = SparseSystem(2)
        blk = np.array([[[1.0, -1.0], [-1.0, 1.0]]])
        assemble(sys, blk, [[0, 1]], [[0, 1]])
        assemble(sys, blk, [[0, 1]], [[0, 1]])
        np.testing.assert_array_equal(sys.matrix().toarray(), 2 * blk[0])

    def test_two_cell_line_laplacian(self):
        pb = mixed_problem(dims=(1.0,), shape=(3,))
        k = dense_matrix(pb, 'dw_laplace.i.Omega(m.c, q, p)')
        np.testing.assert_allclose(k, [[2, -2, 0], [-2, 4, -2], [0, -2, 2]],
                                   atol=1e-14)

    def test_index_out_of_range(self):
        sys = SparseSystem(2)
        with pytest.raises(TermError):
            assemble(sys, np.ones((1, 2, 2)), [[0, 2]], [[0, 1]])

    def test_bad_offsets(self):
        with pytest.raises(TermError):
            SparseSystem(4, [0, 2, 2, 4])

    def test_rhs(self):
        sys = SparseSystem(3)
        assemble(sys, [[1.0, 2.0], [3.0, 4.0]], [[0, 1], [1, 2]], sign=-1)
        np.testing.assert_array_equal(sys.rhs, [-1, -5, -4])


class TestStrain:
    @pytest.fixture(scope='class')
    @staticmethod
    def setup():
        pb = mixed_problem(dims=(1, 1, 1), shape=(3, 2, 2))
        var = pb.variable('u')
        mp = pb.mapping('Omega', 1, 'i')
        return pb, var, mp

    def _strain(self, setup, fun):
        pb, var, mp = setup
        vals = nodal(pb, 'u', fun)
        return np.concatenate([e.reshape(-1, 6) for e in
                               eval_strain(vals, mp, var.field.dofmap)])

    def test_translation(self, setup):
        e = self._strain(setup, lambda x: np.tile([1.0, -2.0, 3.0], (len(x), 1)))
        np.testing.assert_allclose(e, 0.0, atol=1e-14)

    def test_uniaxial(self, setup):
        e = self._strain(setup, lambda x: np.stack(
            [x[:, 0], 0 * x[:, 0], 0 * x[:, 0]], axis=1))
        np.testing.assert_allclose(e, np.tile([1, 0, 0, 0, 0, 0], (len(e), 1)),
                                   atol=1e-14)

    def test_engineering_shear(self, setup):
        e = self._strain(setup, lambda x: np.stack(
            [x[:, 1], x[:, 0], 0 * x[:, 0]], axis=1))
        np.testing.assert_allclose(e, np.tile([0, 0, 0, 2, 0, 0], (len(e), 1)),
                                   atol=1e-14)

    def test_scalar_field_rejected(self, setup):
        pb, _, mp = setup
        with pytest.raises(TermError):
            eval_strain(np.zeros(12), mp, pb.variable('p').field.dofmap)


def test_stiffness_helper_2d():
    d = stiffness_from_youngpoisson(2, 1.0, 0.25)
    lam, mu = 0.4, 0.4
    np.testing.assert_allclose(d, [[lam + 2 * mu, lam, 0], [lam, lam + 2 * mu, 0],
                                   [0, 0, mu]])
