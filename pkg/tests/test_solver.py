import numpy as np
import pytest

from projcore.errors import InitError, ParameterError
from projcore.geometry import AffineFlat, PointSet, dists_to_flat
from projcore.losses import LossSpec, RegressionInstance, regression_objective
from projcore.solver import (
    FlatSet,
    SolveConfig,
    _run_em_once,
    approximation_error,
    clustering_cost,
    em_projective,
    fit_flat_weighted,
    robust_regression_solve,
)


def x_axis_flat():
    return AffineFlat(np.array([[1.0], [0.0]]), np.zeros(2))


class TestClusteringCost:
    def test_zero_on_flat(self):
        pts = np.array([[0.0, 0], [3, 0], [-2, 0]])
        F = FlatSet((x_axis_flat(),))
        assert clustering_cost(pts, None, F, 2.0) == pytest.approx(0.0, abs=1e-20)
        assert clustering_cost(pts, None, F, LossSpec("cauchy")) == pytest.approx(0.0, abs=1e-20)

    def test_k_means_hand_checked(self):
        # k=1, j=0, z=2 about the origin: sum of squared norms
        pts = np.array([[1.0, 0], [0, 2], [-1, 1], [3, 4], [0, 0]])
        F = FlatSet((AffineFlat(np.zeros((2, 0)), np.zeros(2)),))
        expect = 1 + 4 + 2 + 25 + 0
        assert clustering_cost(pts, None, F, 2.0) == pytest.approx(expect, abs=1e-10)

    def test_weight_linearity(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(20, 2))
        w = rng.uniform(0.5, 2.0, size=20)
        F = FlatSet((x_axis_flat(),))
        c1 = clustering_cost(pts, w, F, 2.0)
        c2 = clustering_cost(pts, 2 * w, F, 2.0)
        assert c2 == pytest.approx(2 * c1)

    def test_min_over_flats(self):
        vertical = AffineFlat(np.array([[0.0], [1.0]]), np.zeros(2))
        F = FlatSet((x_axis_flat(), vertical))
        # (1, 5): distance 5 to x-axis, 1 to y-axis -> takes the min
        assert clustering_cost(np.array([[1.0, 5.0]]), None, F, 1.0) == pytest.approx(1.0)


class TestFitFlatWeighted:
    def test_points_on_flat_recovered(self):
        rng = np.random.default_rng(1)
        basis, _ = np.linalg.qr(rng.normal(size=(4, 2)))
        v = rng.normal(size=4)
        pts = rng.normal(size=(30, 2)) @ basis.T + v
        fit = fit_flat_weighted(pts, None, 2, 2.0)
        assert not fit.degenerate
        assert dists_to_flat(pts, fit.flat).max() <= 1e-9

    def test_weighted_centroid(self):
        pts = np.array([[0.0], [4.0]])
        with pytest.raises(ParameterError):
            fit_flat_weighted(pts, [1.0, 3.0], 1, 2.0)  # j must be < d
        fit = fit_flat_weighted(pts, [1.0, 3.0], 0, 2.0)
        assert fit.flat.offset[0] == pytest.approx(3.0)

    def test_irls_huber_resists_outlier(self):
        rng = np.random.default_rng(2)
        t = np.linspace(-5, 5, 60)
        clean_dir = np.array([1.0, 0.0])
        pts = np.stack([t, rng.normal(size=60) * 0.01], axis=1)
        pts = np.vstack([pts, [[4.0, 15.0]]])  # gross off-center outlier
        ls = fit_flat_weighted(pts, None, 1, 2.0)
        rob = fit_flat_weighted(pts, None, 1, LossSpec("huber", lam=0.1))

        def angle(flat):
            cosine = abs(flat.basis[:, 0] @ clean_dir)
            return np.arccos(np.clip(cosine, -1, 1))

        assert angle(rob.flat) < angle(ls.flat)

    def test_degenerate_padding(self):
        pts = np.array([[1.0, 1.0, 1.0]] * 4)
        fit = fit_flat_weighted(pts, None, 2, 2.0)
        assert fit.degenerate
        assert fit.flat.dim == 2
        assert dists_to_flat(pts, fit.flat).max() <= 1e-12

    def test_z2_refit_beats_random_perturbations(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(40, 3)) * np.array([5.0, 2.0, 0.5])
        w = rng.uniform(0.5, 3.0, size=40)
        fit = fit_flat_weighted(pts, w, 1, 2.0)
        base = clustering_cost(pts, w, FlatSet((fit.flat,)), 2.0)
        for _ in range(1000):
            g = rng.normal(size=(3, 1)) * 0.2
            q, _ = np.linalg.qr(fit.flat.basis + g)
            cand = AffineFlat(q[:, :1], fit.flat.offset + rng.normal(size=3) * 0.1)
            assert clustering_cost(pts, w, FlatSet((cand,)), 2.0) >= base - 1e-9


class TestEmProjective:
    def test_planted_flats_found(self):
        rng = np.random.default_rng(4)
        t = rng.uniform(-10, 10, size=(50, 1))
        lineA = np.hstack([t, 0 * t]) + np.array([0.0, 50.0])
        lineB = np.hstack([0 * t, t]) + np.array([-50.0, 0.0])
        P = PointSet(np.vstack([lineA, lineB]))
        F = em_projective(P, None, 1, 2, 2.0, SolveConfig(restarts=20, em_steps=8, rng_seed=5))
        assert clustering_cost(P, None, F, 2.0) <= 1e-9

    def test_k1_j0_z2_exact_centroid(self):
        rng = np.random.default_rng(6)
        pts = rng.normal(size=(25, 2))
        w = rng.uniform(0.5, 2.0, size=25)
        F = em_projective(PointSet(pts), w, 0, 1, 2.0, SolveConfig(restarts=3, rng_seed=1))
        centroid = (w[:, None] * pts).sum(axis=0) / w.sum()
        assert np.allclose(F.flats[0].offset, centroid, atol=1e-9)

    def test_determinism(self):
        rng = np.random.default_rng(7)
        P = PointSet(rng.normal(size=(40, 2)))
        cfg = SolveConfig(restarts=4, em_steps=4, rng_seed=11)
        f1 = em_projective(P, None, 1, 2, 2.0, cfg)
        f2 = em_projective(P, None, 1, 2, 2.0, cfg)
        for a, b in zip(f1.flats, f2.flats):
            assert np.array_equal(a.basis, b.basis)
            assert np.array_equal(a.offset, b.offset)

    def test_monotone_cost_for_z2(self):
        rng = np.random.default_rng(8)
        pts = rng.normal(size=(60, 2)) * 3
        _, _, history = _run_em_once(pts, np.ones(60), 1, 2, 2.0,
                                     SolveConfig(restarts=1, em_steps=10, rng_seed=2),
                                     np.random.default_rng(2))
        diffs = np.diff(history)
        assert np.all(diffs <= 1e-9)

    def test_init_error(self):
        P = PointSet(np.zeros((3, 2)) + np.arange(3)[:, None])
        with pytest.raises(InitError):
            em_projective(P, None, 1, 2, 2.0)


class TestRobustRegression:
    def test_exact_recovery(self):
        rng = np.random.default_rng(9)
        A = rng.normal(size=(50, 3))
        w_star = np.array([2.0, -1.0, 0.5])
        inst = RegressionInstance(PointSet(A), A @ w_star)
        for kind in ("cauchy", "huber", "welsch"):
            sol = robust_regression_solve(inst, None, LossSpec(kind), SolveConfig(restarts=2, rng_seed=3))
            assert sol.objective <= 1e-9
            assert np.allclose(sol.w, w_star, atol=1e-6)

    def test_matches_normal_equations_for_z2(self):
        A = np.array([[1.0], [2.0], [3.0]])
        b = np.array([1.0, 2.5, 2.0])
        inst = RegressionInstance(PointSet(A), b)
        sol = robust_regression_solve(inst, None, LossSpec("power", z=2.0),
                                      SolveConfig(restarts=1, rng_seed=0))
        expect = np.linalg.lstsq(A, b, rcond=None)[0]
        assert np.allclose(sol.w, expect, atol=1e-9)

    def test_cauchy_beats_ls_under_cauchy_objective(self):
        rng = np.random.default_rng(10)
        A = rng.normal(size=(80, 2))
        w_star = np.array([1.0, 2.0])
        b = A @ w_star
        b[:8] += 200.0  # planted outliers
        inst = RegressionInstance(PointSet(A), b)
        spec = LossSpec("cauchy")
        sol = robust_regression_solve(inst, None, spec, SolveConfig(restarts=4, rng_seed=4))
        w_ls = np.linalg.lstsq(A, b, rcond=None)[0]
        assert sol.objective <= regression_objective(inst, spec, w_ls) + 1e-12

    def test_deterministic(self):
        rng = np.random.default_rng(11)
        A = rng.normal(size=(30, 2))
        inst = RegressionInstance(PointSet(A), rng.normal(size=30))
        cfg = SolveConfig(restarts=3, rng_seed=21)
        s1 = robust_regression_solve(inst, None, LossSpec("tukey"), cfg)
        s2 = robust_regression_solve(inst, None, LossSpec("tukey"), cfg)
        assert np.array_equal(s1.w, s2.w)


class TestApproximationError:
    def test_zero_for_reference_solution(self):
        pts = np.array([[0.0, 1], [1, -1], [2, 0.5]])
        F = FlatSet((x_axis_flat(),))
        ref = clustering_cost(pts, None, F, 2.0)
        assert approximation_error(pts, F, ref, 2.0) == pytest.approx(0.0)

    def test_ratio_definition(self):
        pts = np.array([[0.0, 2.0]])
        F = FlatSet((x_axis_flat(),))
        # cost 4 against reference 2 -> error 1.0
        assert approximation_error(pts, F, 2.0, 2.0) == pytest.approx(1.0)

    def test_zero_reference_reports_absolute(self):
        pts = np.array([[0.0, 3.0]])
        F = FlatSet((x_axis_flat(),))
        with pytest.warns(RuntimeWarning):
            val = approximation_error(pts, F, 0.0, 2.0)
        assert val == pytest.approx(9.0)

    def test_regression_solution_path(self):
        rng = np.random.default_rng(12)
        A = rng.normal(size=(20, 2))
        inst = RegressionInstance(PointSet(A), A @ np.array([1.0, 1.0]))
        spec = LossSpec("cauchy")
        ref = regression_objective(inst, spec, np.array([0.0, 0.0]))
        err = approximation_error(inst, np.array([0.0, 0.0]), ref, spec)
        assert err == pytest.approx(0.0)
