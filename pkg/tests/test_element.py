import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from fibernet.assembly import Assembler, HingeStates
from fibernet.beam import FiberSection, bulk_stiffness, internal_force, reference_fiber
from fibernet.element import (ElementGeometry, SchemeConfig, apply_rupture, condense_monolithic,
                              element_response, hybrid_beta, hybrid_stiffness, k_min, local_triad,
                              staggered_stiffness, submatrices, to_global, transformation)
from fibernet.errors import InvalidGeometryError, SingularCondensationError
from fibernet.hinge import HingeState
from fibernet.network import NetworkModel

UNIT = FiberSection(E=1.0, G_shear=1.0, k_shear=1.0, A=1.0, J=1.0, I11=1.0, I22=1.0, N_bar=1.0,
                    H_soft=-0.5)
X1 = ElementGeometry.from_coords([0, 0, 0], [1, 0, 0])


def section(EA=1.0, H=-0.5, N_bar=1.0):
    return FiberSection(E=EA, G_shear=0.7, k_shear=0.8, A=1.0, J=0.3, I11=0.2, I22=0.25,
                        N_bar=N_bar, H_soft=H)


class TestGeometry:
    def test_triad_for_x_axis(self):
        np.testing.assert_allclose(local_triad([2, 0, 0]), np.eye(3), atol=1e-15)

    def test_triad_for_z_axis_uses_fallback(self):
        lam = local_triad([0, 0, 1])
        np.testing.assert_allclose(lam @ lam.T, np.eye(3), atol=1e-15)
        assert np.linalg.det(lam) == pytest.approx(1.0)

    def test_rejects_non_orthonormal(self):
        with pytest.raises(InvalidGeometryError):
            ElementGeometry((0, 1), 1.0, 2 * np.eye(3))

    def test_rejects_reflection(self):
        with pytest.raises(InvalidGeometryError):
            ElementGeometry((0, 1), 1.0, np.diag([1.0, 1.0, -1.0]))

    def test_rejects_zero_length(self):
        with pytest.raises(InvalidGeometryError):
            ElementGeometry.from_coords([1, 1, 0], [1, 1, 0])


class TestSubmatrices:
    def test_axial_entries(self):
        s = submatrices(UNIT, X1, True)
        assert s.K_dd[0, 0] == 1.0
        assert s.K_dxi[0, 0] == 1.0
        assert s.K_xixi[0, 0] == pytest.approx(0.5)

    def test_inactive_has_no_softening(self):
        s = submatrices(UNIT, X1, False)
        assert s.K_xixi[0, 0] == 1.0

    def test_axial_block_of_kdd(self):
        K = submatrices(UNIT, X1, False).K_dd
        assert K[0, 0] == K[6, 6] == 1.0 and K[0, 6] == -1.0

    def test_non_axial_jump_rows_vanish(self):
        s = submatrices(section(), X1, True)
        np.testing.assert_allclose(s.K_xid[1:], 0.0, atol=1e-14)


class TestCondensation:
    def test_inactive_is_kdd(self):
        s = submatrices(UNIT, X1, False)
        np.testing.assert_array_equal(condense_monolithic(s), s.K_dd)

    def test_series_spring(self):
        K = condense_monolithic(submatrices(UNIT, X1, True))
        assert K[0, 0] == pytest.approx(-1.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.1, 10), st.floats(0.05, 0.95), st.floats(0.1, 3.0))
    def test_axial_equals_full(self, EA, frac, absH):
        l_e = frac * EA / absH
        geom = ElementGeometry((0, 1), l_e, np.eye(3))
        s = submatrices(section(EA, -absH), geom, True)
        np.testing.assert_allclose(condense_monolithic(s), condense_monolithic(s, full=True),
                                   rtol=1e-10, atol=1e-12 * np.abs(s.K_dd).max())
        k = EA / l_e
        assert condense_monolithic(s)[0, 0] == pytest.approx(k * -absH / (k - absH), rel=1e-10)

    def test_singular_pivot(self):
        geom = ElementGeometry((0, 1), 2.0, np.eye(3))  # EA/l_e + H = 0
        with pytest.raises(SingularCondensationError):
            condense_monolithic(submatrices(UNIT, geom, True))

    def test_snap_back_regime_pivot_negative(self):
        s = submatrices(section(1.0, -2.0), X1, True)
        assert s.K_xixi[0, 0] == pytest.approx(-1.0)


class TestStaggered:
    def test_is_kdd(self):
        s = submatrices(UNIT, X1, True)
        np.testing.assert_array_equal(staggered_stiffness(s), s.K_dd)
        assert staggered_stiffness(s)[0, 0] == 1.0

    def test_fiber_axial(self):
        geom = ElementGeometry((0, 1), 2.5, np.eye(3))
        assert staggered_stiffness(submatrices(reference_fiber(), geom, True))[0, 0] == pytest.approx(0.728)

    def test_rank(self):
        ev = np.linalg.eigvalsh(staggered_stiffness(submatrices(reference_fiber(), X1, True)))
        tol = 1e-10 * ev.max()
        assert np.sum(np.abs(ev) < tol) == 6 and np.sum(ev > tol) == 6


class TestHybridBeta:
    def test_above_floor(self):
        assert hybrid_beta(0.5, 1.0, 0.01) == 1.0

    def test_floor(self):
        beta = hybrid_beta(-1.0, 1.0, 0.01)
        assert beta == pytest.approx(0.495)
        assert beta * -1.0 + (1 - beta) * 1.0 == pytest.approx(0.01)

    def test_continuity(self):
        beta = hybrid_beta(0.01, 1.0, 0.01)
        assert beta * 0.01 + (1 - beta) * 1.0 == pytest.approx(0.01)

    def test_precondition(self):
        with pytest.raises(AssertionError):
            hybrid_beta(-1.0, 0.01, 0.01)


class TestHybridStiffness:
    def test_staggered_config(self):
        s = submatrices(UNIT, X1, True)
        t = hybrid_stiffness(s, SchemeConfig("staggered"), UNIT, X1)
        assert t.beta_used == 0.0
        np.testing.assert_array_equal(t.K, s.K_dd)

    def test_monolithic_elastic(self):
        s = submatrices(UNIT, X1, False)
        t = hybrid_stiffness(s, SchemeConfig("monolithic"), UNIT, X1)
        assert t.beta_used == 1.0
        np.testing.assert_array_equal(t.K, s.K_dd)

    def test_floor_value(self):
        t = hybrid_stiffness(submatrices(UNIT, X1, True), SchemeConfig("hybrid", 0.01), UNIT, X1)
        assert t.K[0, 0] == pytest.approx(0.01, rel=1e-12)
        assert t.k_min_active

    def test_elastic_coincidence(self):
        s = submatrices(section(), X1, False)
        Ks = [hybrid_stiffness(s, SchemeConfig(name), section(), X1).K
              for name in ("monolithic", "staggered", "hybrid")]
        np.testing.assert_array_equal(Ks[0], Ks[1])
        np.testing.assert_array_equal(Ks[0], Ks[2])

    def test_mixture_of_limits(self):
        s = submatrices(UNIT, X1, True)
        t = hybrid_stiffness(s, SchemeConfig("hybrid", 0.1), UNIT, X1)
        b = t.beta_used
        np.testing.assert_array_equal(t.K, b * condense_monolithic(s) + (1 - b) * s.K_dd)
        # the two endpoints of the mixture are the other schemes
        np.testing.assert_array_equal(1.0 * condense_monolithic(s) + 0.0 * s.K_dd,
                                      hybrid_stiffness(s, SchemeConfig("monolithic"), UNIT, X1).K)
        np.testing.assert_array_equal(0.0 * condense_monolithic(s) + 1.0 * s.K_dd,
                                      hybrid_stiffness(s, SchemeConfig("staggered"), UNIT, X1).K)

    def test_softening_never_above_floor_branch(self):
        # with H < 0 the condensed axial stiffness is negative, so β < 1 always
        s = submatrices(UNIT, ElementGeometry((0, 1), 0.1, np.eye(3)), True)
        assert condense_monolithic(s)[0, 0] < 0


class TestRupture:
    def test_passthrough(self):
        K, f = np.arange(144.0).reshape(12, 12), np.arange(12.0)
        K2, f2 = apply_rupture(K, f, 0.01, ruptured=False)
        assert K2 is K and f2 is f

    def test_deletion(self):
        rng = np.random.default_rng(3)
        A = rng.normal(size=(12, 12))
        K = A + A.T
        f = rng.normal(size=12)
        K2, f2 = apply_rupture(K, f, 0.01)
        assert K2[0, 4] == K2[4, 0] == 0.0
        assert K2[0, 0] == K2[6, 6] == 0.01
        assert f2[0] == f2[6] == 0.0
        keep = [i for i in range(12) if i not in (0, 6)]
        np.testing.assert_array_equal(K2[np.ix_(keep, keep)], K[np.ix_(keep, keep)])
        np.testing.assert_array_equal(f2[keep], f[keep])


class TestToGlobal:
    def test_identity(self):
        K = bulk_stiffness(UNIT, 1.0)
        f = np.arange(12.0)
        K2, f2 = to_global(K, f, X1)
        np.testing.assert_array_equal(K2, K)
        np.testing.assert_array_equal(f2, f)

    def test_quarter_turn(self):
        geom = ElementGeometry.from_coords([0, 0, 0], [0, 1, 0])
        _, f = to_global(np.eye(12), internal_force([1, 0, 0, 0, 0, 0], 1.0), geom)
        expected = np.zeros(12)
        expected[1], expected[7] = -1.0, 1.0
        np.testing.assert_allclose(f, expected, atol=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_eigenvalues_preserved(self, seed):
        lam = Rotation.random(random_state=seed).as_matrix()
        geom = ElementGeometry((0, 1), 1.0, lam)
        K = bulk_stiffness(reference_fiber(), 1.0)
        Kg, _ = to_global(K, np.zeros(12), geom)
        np.testing.assert_allclose(np.linalg.eigvalsh(Kg), np.linalg.eigvalsh(K), atol=1e-10 * K.max())

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_tension_rotation_invariant(self, seed):
        axis = Rotation.random(random_state=seed).apply([1.0, 0.0, 0.0])
        geom = ElementGeometry.from_coords([0, 0, 0], axis)
        d = np.zeros(12)
        d[6:9] = 1.2 * axis
        r = element_response(UNIT, geom, d, HingeState(), SchemeConfig("hybrid"))
        assert r.update.N == pytest.approx(0.8, abs=1e-10)
        np.testing.assert_allclose(r.f_int[6:9], 0.8 * axis, atol=1e-10)


def _random_model(rng, n_el):
    pts = rng.uniform(0, 1, size=(n_el + 1, 3))
    pts[:, 2] = rng.choice([0.0, 0.3], size=n_el + 1)
    elems = np.column_stack([np.arange(n_el), np.arange(1, n_el + 1)])
    secs = [section(1.0, -0.3), section(2.0, -0.5, 1.5)]
    return NetworkModel(nodes=pts, elements=elems, element_section=rng.integers(0, 2, n_el),
                        element_fiber=np.zeros(n_el, int), sections=secs, fixed=[0], moving=[n_el],
                        width=1.0, height=1.0, thickness=1.0, planar=False)


class TestBatchedAgainstReference:
    @pytest.mark.parametrize("scheme", ["monolithic", "staggered", "hybrid:0.01", "hybrid:0.1"])
    @pytest.mark.parametrize("history", [False, True])
    def test_matches_element_response(self, scheme, history):
        rng = np.random.default_rng(11)
        model = _random_model(rng, 25)
        cfg = SchemeConfig.parse(scheme)
        asm = Assembler(model, cfg)
        d = rng.normal(scale=0.3, size=asm.n_dof)
        n = model.n_elements
        alpha = rng.uniform(0, 1.0, n)
        rupt = rng.random(n) < 0.2
        alpha[rupt] = 10.0
        states = HingeStates(alpha.copy(), alpha.copy(), rupt, rng.random(n) < 0.5)
        ev = asm.evaluate(d, states, tangent_from_history=history)
        Ke = asm.element_matrices(ev)
        for e in range(n):
            sec = model.sections[model.element_section[e]]
            a, b = model.elements[e]
            geom = ElementGeometry.from_coords(model.nodes[a], model.nodes[b], (a, b))
            st_n = HingeState(alpha[e], alpha[e], bool(rupt[e]), bool(states.loading[e]))
            ref = element_response(sec, geom, d[asm.dofs[e]], st_n, cfg, tangent_from_history=history)
            scale = np.abs(ref.K).max()
            np.testing.assert_allclose(Ke[e], ref.K, rtol=1e-10, atol=1e-12 * scale)
            np.testing.assert_allclose(ev.f_elem[e], ref.f_int, rtol=1e-10, atol=1e-12 * max(scale, 1))
            assert ev.states.ruptured[e] == ref.update.state.ruptured
            assert ev.N[e] == pytest.approx(ref.update.N, rel=1e-12, abs=1e-14)
            # the batch reports β only for softening elements
            if not np.isnan(ev.beta[e]):
                assert ev.beta[e] == pytest.approx(ref.beta, rel=1e-12)

    def test_k_min_formula(self):
        geom = ElementGeometry((0, 1), 0.5, np.eye(3))
        assert k_min(section(2.0), geom, 0.1) == pytest.approx(0.4)

    def test_transformation_blocks(self):
        T = transformation(np.eye(3))
        np.testing.assert_array_equal(T, np.eye(12))
