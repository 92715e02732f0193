import math

import pytest
import sympy
from hypothesis import given, settings, strategies as st

from qgdecay.transfer import (
    ComplexSpectrumError,
    TransferMatrix,
    eig2,
    ladder_antisym_transfer,
    match_shared_eigenvector,
    millipede_transfer,
    vertex_edge_transfer,
)


def residual(t: TransferMatrix, lam: float, vec) -> float:
    ax, ay = t.apply(vec)
    vnorm = math.hypot(*vec)
    return math.hypot(ax - lam * vec[0], ay - lam * vec[1]) / (
        t.norm() * vnorm
    )


class TestVertexEdgeTransfer:
    def test_identity_at_zero(self):
        t = vertex_edge_transfer(0.0, 1.0)
        assert (t.t11, t.t12, t.t21, t.t22) == (1.0, 0.0, 0.0, 1.0)

    def test_tree_matrix_det(self):
        for b in (2, 3, 5):
            t = vertex_edge_transfer(1.0, 1.0 / b)
            assert abs(t.det() - 1.0 / b) < 1e-14

    def test_half_line_eigenvalues(self):
        pair = eig2(vertex_edge_transfer(1.0, 1.0))
        assert math.isclose(pair.lam_small, math.exp(-1.0), rel_tol=1e-14)
        assert math.isclose(pair.lam_large, math.exp(1.0), rel_tol=1e-14)

    @settings(max_examples=200, deadline=None)
    @given(
        kl=st.floats(min_value=0.0, max_value=2.0),
        p=st.floats(min_value=1e-6, max_value=1.0),
    )
    def test_det_equals_p_moderate_kl(self, kl, p):
        t = vertex_edge_transfer(kl, p)
        assert abs(t.det() - p) <= 1e-14 * p

    @settings(max_examples=200, deadline=None)
    @given(
        kl=st.floats(min_value=0.0, max_value=5.0),
        p=st.floats(min_value=1e-6, max_value=1.0),
    )
    def test_det_equals_p_scale_aware(self, kl, p):
        # beyond kL ~ 2.5 the rounded cosh/sinh entries alone carry a
        # determinant error of order eps * cosh(kL)^2, so the achievable
        # bound is relative to the matrix scale
        t = vertex_edge_transfer(kl, p)
        assert abs(t.det() - p) <= 1e-14 * (1.0 + t.norm() ** 2)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            vertex_edge_transfer(-0.1, 0.5)
        with pytest.raises(ValueError):
            vertex_edge_transfer(1.0, 0.0)
        with pytest.raises(ValueError):
            vertex_edge_transfer(1.0, 1.5)


class TestMillipedeTransfer:
    def test_det_is_one_symbolically(self):
        d = sympy.symbols("d", nonnegative=True)
        c2, s2 = sympy.cosh(2), sympy.sinh(2)
        det = c2 * (c2 + d * s2) - s2 * (s2 + d * c2)
        assert sympy.simplify(det) == 1

    def test_det_is_one_numerically(self):
        for delta in [0.0, 1e-3, 0.01, 0.1, 0.5, 1.0, 2.0]:
            assert abs(millipede_transfer(delta).det() - 1.0) < 1e-12

    def test_delta_zero_is_circulant(self):
        t = millipede_transfer(0.0)
        assert t.t11 == t.t22 == math.cosh(2.0)
        assert t.t12 == t.t21 == math.sinh(2.0)
        assert math.isclose(eig2(t).lam_small, math.exp(-2.0), rel_tol=1e-13)

    def test_small_delta_expansion(self):
        # independent oracle: the explicit quadratic-formula root
        delta = 0.1
        m = math.cosh(2.0) + delta * math.sinh(2.0) / 2.0
        lam_oracle = m - math.sqrt(m * m - 1.0)
        lam = eig2(millipede_transfer(delta)).lam_small
        assert math.isclose(lam, lam_oracle, rel_tol=1e-12)
        assert abs(math.log(lam) + 2.0 + delta / 2.0) < 0.2 * delta**2

    def test_negative_delta_rejected(self):
        with pytest.raises(ValueError):
            millipede_transfer(-0.1)


class TestLadderTransfer:
    def test_det_and_trace(self):
        for w in [0.25, 0.5, 1.0, 2.0, 4.0]:
            t = ladder_antisym_transfer(w)
            gamma = math.sinh(1.0) / math.tanh(w / 2.0)
            assert abs(t.det() - 1.0) < 1e-12
            assert math.isclose(
                t.trace(), 2.0 * math.cosh(1.0) + gamma, rel_tol=1e-14
            )

    def test_large_w_limit(self):
        t = ladder_antisym_transfer(50.0)
        assert math.isclose(
            t.trace() - 2.0 * math.cosh(1.0), math.sinh(1.0), rel_tol=1e-12
        )

    def test_w1_beats_half_line(self):
        lam = eig2(ladder_antisym_transfer(1.0)).lam_small
        assert lam < math.exp(-1.0)

    def test_monotone_decreasing_in_gamma(self):
        ws = [0.25 * i for i in range(1, 17)]
        by_gamma = sorted(
            (math.sinh(1.0) / math.tanh(w / 2.0), w) for w in ws
        )
        lams = [eig2(ladder_antisym_transfer(w)).lam_small for _, w in by_gamma]
        assert all(a > b for a, b in zip(lams, lams[1:]))

    def test_nonpositive_w_rejected(self):
        with pytest.raises(ValueError):
            ladder_antisym_transfer(0.0)


class TestEig2:
    def test_identity(self):
        pair = eig2(TransferMatrix(1.0, 0.0, 0.0, 1.0))
        assert pair.lam_small == pair.lam_large == 1.0

    def test_tree_closed_form(self):
        # b = 2, kL = 1, against the explicit radical
        c = math.cosh(1.0)
        lam_closed = (0.5 + 0.25) * c - math.sqrt((0.75 * c) ** 2 - 0.5)
        pair = eig2(vertex_edge_transfer(1.0, 0.5))
        assert math.isclose(pair.lam_small, lam_closed, rel_tol=1e-12)
        assert pair.lam_small < 1.0 / (2.0 * c)

    def test_root_pairing_against_characteristic_polynomial(self):
        t = vertex_edge_transfer(3.0, 0.01)
        pair = eig2(t)
        for lam in (pair.lam_small, pair.lam_large):
            value = lam * lam - t.trace() * lam + t.det()
            assert abs(value) <= 1e-12 * max(abs(t.trace() * lam), abs(t.det()))

    @settings(max_examples=200, deadline=None)
    @given(
        a=st.floats(min_value=0.1, max_value=50.0),
        b=st.floats(min_value=0.01, max_value=50.0),
        c=st.floats(min_value=0.01, max_value=50.0),
        d=st.floats(min_value=0.1, max_value=50.0),
    )
    def test_random_positive_matrices(self, a, b, c, d):
        # positive off-diagonal product keeps the spectrum real
        t = TransferMatrix(a, b, c, d)
        pair = eig2(t)
        assert pair.lam_small <= pair.lam_large
        tr, det = t.trace(), t.det()
        assert abs(pair.lam_small + pair.lam_large - tr) <= 1e-12 * abs(tr)
        assert abs(pair.lam_small * pair.lam_large - det) <= 1e-12 * max(
            abs(det), 1e-30
        )
        assert residual(t, pair.lam_small, pair.vec_small) <= 1e-10
        assert residual(t, pair.lam_large, pair.vec_large) <= 1e-10

    def test_complex_spectrum_raises_with_discriminant(self):
        rot = TransferMatrix(0.0, -1.0, 1.0, 0.0)
        with pytest.raises(ComplexSpectrumError, match="discriminant"):
            eig2(rot)

    def test_lower_triangular_alternate_normalization(self):
        t = TransferMatrix(2.0, 0.0, 3.0, 5.0)
        pair = eig2(t)
        assert residual(t, pair.lam_small, pair.vec_small) <= 1e-12
        assert residual(t, pair.lam_large, pair.vec_large) <= 1e-12


def quoted_equation_sides(p1: float, kl1: float, kl2: float):
    """The two sides of the matching equation, coded verbatim from the
    radical form (independent of the solver's stable evaluation)."""
    c1, s1 = math.cosh(kl1), math.sinh(kl1)
    c2, s2 = math.cosh(kl2), math.sinh(kl2)
    lhs = (
        p1 * c1 - c1 - math.sqrt((c1 + p1 * c1) ** 2 - 4 * p1)
    ) / (2 * s1)
    q = 1.0 - p1
    rhs = (
        q * c2 - c2 - math.sqrt((c2 + q * c2) ** 2 - 4 * q)
    ) / (2 * s2)
    return lhs, rhs


class TestMatchSharedEigenvector:
    def test_equal_lengths_give_half(self):
        for kl in (0.5, 1.0, 2.0):
            m = match_shared_eigenvector(kl, kl)
            assert abs(m.p1 - 0.5) <= 1e-12

    def test_unequal_lengths_cross_check(self):
        m = match_shared_eigenvector(1.0, 2.0)
        assert 0.0 < m.p1 < 1.0
        lhs, rhs = quoted_equation_sides(m.p1, 1.0, 2.0)
        assert abs(lhs - rhs) <= 1e-10
        # w agrees with both eigenvector slopes
        c1, s1 = math.cosh(1.0), math.sinh(1.0)
        c2, s2 = math.cosh(2.0), math.sinh(2.0)
        assert abs(m.w - (m.lam - c1) / s1) <= 1e-10
        assert abs(m.w - (m.mu - c2) / s2) <= 1e-10

    def test_both_eigenvalues_contract(self):
        for kl1, kl2 in [(0.5, 1.0), (1.0, 2.0), (0.5, 2.0), (2.0, 0.5)]:
            m = match_shared_eigenvector(kl1, kl2)
            assert 0.0 < m.lam < 1.0
            assert 0.0 < m.mu < 1.0

    def test_shared_vector_is_eigenvector_of_both_steps(self):
        m = match_shared_eigenvector(1.0, 2.0)
        t1 = vertex_edge_transfer(1.0, m.p1)
        t2 = vertex_edge_transfer(2.0, 1.0 - m.p1)
        vec = (1.0, m.w)
        assert residual(t1, m.lam, vec) <= 1e-10
        assert residual(t2, m.mu, vec) <= 1e-10

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            match_shared_eigenvector(0.0, 1.0)
        with pytest.raises(ValueError):
            match_shared_eigenvector(1.0, -1.0)

    @settings(max_examples=50, deadline=None)
    @given(
        kl1=st.floats(min_value=0.1, max_value=3.0),
        kl2=st.floats(min_value=0.1, max_value=3.0),
    )
    def test_solution_in_open_interval(self, kl1, kl2):
        m = match_shared_eigenvector(kl1, kl2)
        assert 0.0 < m.p1 < 1.0
        lhs, rhs = quoted_equation_sides(m.p1, kl1, kl2)
        assert abs(lhs - rhs) <= 1e-9


class TestTreeBound:
    def test_strict_bound_small_grid(self):
        for b in (2, 5, 10):
            for kl in (0.1, 1.0, 3.0):
                lam = eig2(vertex_edge_transfer(kl, 1.0 / b)).lam_small
                assert lam < 1.0 / (b * math.cosh(kl))

    def test_uniqueness_direction_grows(self):
        # the complementary eigenvalue exceeds 1/sqrt(b), so the multiplied
        # L2 series along the complementary direction diverges
        for b in (2, 3, 7):
            pair = eig2(vertex_edge_transfer(1.0, 1.0 / b))
            assert pair.lam_large > 1.0 / math.sqrt(b)
