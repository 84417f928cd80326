import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from conftest import central_diff, fd_close, golden_section
from tensagg.aggregation import ScenarioSpec
from tensagg.core import Factors
from tensagg.evaluation import make_synthetic
from tensagg.kernels import (FitTerm, KronPair, directions, exact_step,
                             gradient, khatri_rao, khatri_rao_count,
                             line_costs, line_update, reset_khatri_rao_count)
from tensagg.prema import _Views, _terms, coupled_cost, coupled_gradients


class TestKhatriRao:
    def test_rank1_hand_case(self):
        out = khatri_rao(np.array([[1.0], [2.0]]), np.array([[3.0], [4.0]]))
        assert_array_equal(out, [[3.0], [4.0], [6.0], [8.0]])

    def test_identity_pair(self):
        out = khatri_rao(np.eye(2), np.eye(2))
        assert_array_equal(out, [[1.0, 0], [0, 0], [0, 0], [0, 1.0]])

    def test_matches_column_kron_oracle(self):
        rng = np.random.default_rng(0)
        m1 = rng.standard_normal((3, 2))
        m2 = rng.standard_normal((4, 2))
        out = khatri_rao(m1, m2)
        for r in range(2):
            assert_allclose(out[:, r], np.kron(m1[:, r], m2[:, r]))

    def test_column_mismatch(self):
        with pytest.raises(ValueError, match="column counts"):
            khatri_rao(np.ones((2, 2)), np.ones((2, 3)))


class TestKronPair:
    def test_matches_dense_kron(self):
        rng = np.random.default_rng(1)
        u = rng.standard_normal((2, 4))
        v = rng.standard_normal((3, 5))
        pair = KronPair(u, v)
        m = rng.standard_normal((20, 3))
        assert_allclose(pair @ m, np.kron(v, u) @ m, atol=1e-13)
        r = rng.standard_normal((6, 3))
        assert_allclose(pair.T @ r, np.kron(v, u).T @ r, atol=1e-13)


def _random_problem(seed, dims=(6, 5, 8), rank=2, scenario="A", group2=1,
                    missing=0.3):
    spec = ScenarioSpec(scenario=scenario, window=2, group_size_1=2,
                        group_size_2=group2, missing_t=missing,
                        missing_c=missing, seed=seed)
    return make_synthetic(dims, rank, spec)


class TestGradients:
    def test_exact_fit_is_stationary(self):
        p = _random_problem(2, missing=0.0)
        for g in coupled_gradients(p.y_t, p.mask_t, p.y_c, p.mask_c, p.op, p.factors):
            assert np.abs(g).max() < 1e-10

    def test_matches_finite_differences(self):
        p = _random_problem(3)
        rng = np.random.default_rng(33)
        f = Factors(*(rng.standard_normal((n, 2)) for n in (6, 5, 8)))
        lam = 1.3
        grads = coupled_gradients(p.y_t, p.mask_t, p.y_c, p.mask_c, p.op, f, lam)
        cost = lambda: coupled_cost(p.y_t, p.mask_t, p.y_c, p.mask_c, p.op, f, lam)
        for g, mat in zip(grads, (f.A, f.B, f.C)):
            assert fd_close(g, central_diff(cost, mat), 1e-6)

    def test_zero_mask_zero_gradient(self):
        p = _random_problem(4, missing=0.0)
        rng = np.random.default_rng(5)
        f = Factors(*(rng.standard_normal((n, 2)) for n in (6, 5, 8)))
        zt, zc = np.zeros_like(p.mask_t), np.zeros_like(p.mask_c)
        for g in coupled_gradients(p.y_t * 0, zt, p.y_c * 0, zc, p.op, f):
            assert_array_equal(g, np.zeros_like(g))

    def test_identity_v_matches_explicit_identity(self):
        # scenario A stores V as identity; forcing the multiply must not change B's gradient
        p = _random_problem(6, missing=0.0)
        rng = np.random.default_rng(7)
        f = Factors(*(rng.standard_normal((n, 2)) for n in (6, 5, 8)))
        _, g_b, _ = coupled_gradients(p.y_t, p.mask_t, p.y_c, p.mask_c, p.op, f)
        views = _Views(p.y_t, p.mask_t, p.y_c, p.mask_c)
        terms = _terms("B", views, p.op, f, 1.0)
        assert terms[1].agg is None
        forced = [FitTerm(terms[0].y, terms[0].mask, terms[0].left),
                  FitTerm(terms[1].y, terms[1].mask, terms[1].left,
                          agg=np.eye(f.B.shape[0]))]
        assert_allclose(gradient(forced, f.B), g_b, atol=1e-12)

    def test_identity_w_reduces_to_plain_cpd_gradient(self):
        # with W = I the temporal term's C-gradient is the plain masked CPD one
        rng = np.random.default_rng(8)
        f = Factors(*(rng.standard_normal((n, 2)) for n in (4, 3, 5)))
        truth = Factors(*(rng.standard_normal((n, 2)) for n in (4, 3, 5)))
        from tensagg.core import reconstruct, unfold
        y = reconstruct(truth)
        mask = (rng.random((4, 3, 5)) > 0.3).astype(float)
        term = FitTerm(unfold(y, 3), unfold(mask, 3), khatri_rao(f.B, f.A))
        g = gradient([term], f.C)
        e = unfold(mask, 3) * (khatri_rao(f.B, f.A) @ f.C.T - unfold(y, 3))
        assert_allclose(g, 2.0 * e.T @ khatri_rao(f.B, f.A), atol=1e-12)


class TestExactStep:
    def test_matched_direction_gives_unit_step(self):
        rng = np.random.default_rng(9)
        e = rng.standard_normal((4, 3))
        term = FitTerm(np.zeros((4, 3)), np.ones((4, 3)), np.zeros((4, 2)))
        term.resid = e
        assert exact_step([term], [e.copy()]) == 1.0

    def test_negative_alignment_clamps_to_zero(self):
        rng = np.random.default_rng(10)
        e = rng.standard_normal((4, 3))
        term = FitTerm(np.zeros((4, 3)), np.ones((4, 3)), np.zeros((4, 2)))
        term.resid = e
        assert exact_step([term], [-e]) == 0.0

    def test_zero_direction_guard(self):
        term = FitTerm(np.zeros((4, 3)), np.ones((4, 3)), np.zeros((4, 2)))
        term.resid = np.ones((4, 3))
        assert exact_step([term], [np.zeros((4, 3))]) == 0.0

    @pytest.mark.parametrize("block", ["A", "B", "C"])
    def test_matches_golden_section_oracle(self, block):
        p = _random_problem(11, missing=0.2)
        rng = np.random.default_rng(12)
        f = Factors(*(rng.standard_normal((n, 2)) for n in (6, 5, 8)))
        views = _Views(p.y_t, p.mask_t, p.y_c, p.mask_c)
        terms = _terms(block, views, p.op, f, 1.0)
        mat = {"A": f.A, "B": f.B, "C": f.C}[block]
        g = gradient(terms, mat)
        dirs = directions(terms, g)
        step = exact_step(terms, dirs)

        def cost_at(alpha):
            trial = f.copy()
            setattr(trial, block, mat - alpha * g)
            return coupled_cost(p.y_t, p.mask_t, p.y_c, p.mask_c, p.op, trial)

        oracle = golden_section(cost_at, 0.0, max(4 * step, 1e-3))
        assert abs(step - oracle) < 1e-8

    def test_step_never_increases_cost(self):
        for seed in range(5):
            p = _random_problem(20 + seed)
            rng = np.random.default_rng(seed)
            f = Factors(*(rng.standard_normal((n, 2)) for n in (6, 5, 8)))
            views = _Views(p.y_t, p.mask_t, p.y_c, p.mask_c)
            for block in ("A", "B", "C"):
                terms = _terms(block, views, p.op, f, 1.0)
                mat = {"A": f.A, "B": f.B, "C": f.C}[block]
                _, step, c0, c1 = line_update(mat, terms)
                assert c1 <= c0 * (1 + 1e-12)


class TestDirectionalTerms:
    def test_zero_gradient_zero_directions(self):
        p = _random_problem(13, missing=0.0)
        views = _Views(p.y_t, p.mask_t, p.y_c, p.mask_c)
        terms = _terms("A", views, p.op, p.factors, 1.0)
        gradient(terms, p.factors.A)
        for d in directions(terms, np.zeros_like(p.factors.A)):
            assert_array_equal(d, np.zeros_like(d))

    def test_exact_step_dominates_random_probes(self):
        p = _random_problem(14)
        rng = np.random.default_rng(15)
        f = Factors(*(rng.standard_normal((n, 2)) for n in (6, 5, 8)))
        views = _Views(p.y_t, p.mask_t, p.y_c, p.mask_c)
        terms = _terms("A", views, p.op, f, 1.0)
        g = gradient(terms, f.A)
        dirs = directions(terms, g)
        step = exact_step(terms, dirs)
        _, best = line_costs(terms, dirs, step)
        c0, _ = line_costs(terms, dirs, 0.0)
        assert best <= c0 * (1 + 1e-12)
        for probe in rng.uniform(0, 3 * step + 1e-3, size=20):
            _, c = line_costs(terms, dirs, probe)
            assert best <= c * (1 + 1e-12)

    def test_degenerate_coupling_matches_single_tensor(self):
        # identical duplicated term: the coupled step equals the single-term step
        rng = np.random.default_rng(16)
        from tensagg.core import reconstruct, unfold
        truth = Factors(*(rng.standard_normal((n, 2)) for n in (4, 3, 5)))
        y3, m3 = unfold(reconstruct(truth), 3), np.ones((12, 5))
        f = Factors(*(rng.standard_normal((n, 2)) for n in (4, 3, 5)))
        single = [FitTerm(y3, m3, khatri_rao(f.B, f.A))]
        double = [FitTerm(y3, m3, khatri_rao(f.B, f.A)),
                  FitTerm(y3, m3, khatri_rao(f.B, f.A))]
        gs = gradient(single, f.C)
        gd = gradient(double, f.C)
        assert_allclose(gd, 2 * gs, atol=1e-13)
        step_s = exact_step(single, directions(single, gs))
        step_d = exact_step(double, directions(double, gd))
        # doubled term doubles the gradient, halving the optimal step
        assert np.isclose(step_d, step_s / 2)


class TestReuse:
    def test_two_khatri_rao_evaluations_per_factor_update(self):
        p = _random_problem(17)
        views = _Views(p.y_t, p.mask_t, p.y_c, p.mask_c)
        f = p.factors
        for block in ("A", "B", "C"):
            reset_khatri_rao_count()
            terms = _terms(block, views, p.op, f, 1.0)
            mat = {"A": f.A, "B": f.B, "C": f.C}[block]
            g = gradient(terms, mat)
            directions(terms, g)
            assert khatri_rao_count() == 2
