import numpy as np
import pytest

from quotient.common import InvalidInputException, RankDeficiencyException, random_orthogonal
from quotient.frechet import (
    credible_radius,
    frechet_mean,
    frechet_objective,
    frechet_variation,
    pairwise_quotient_distances,
    procrustes_mean,
    quotient_medoid,
)
from quotient.geometry import gram_of_factor, horizontal_project, procrustes_align, quotient_distance
from quotient.models import DrawSet, FrechetConfig, FrechetResult


def result_with_distances(distances):
    distances = np.asarray(distances, dtype=float)
    Y = np.array([[1.0], [-1.0]])
    return FrechetResult(
        mean_factor=Y,
        mean_gram=gram_of_factor(Y),
        variation=float(np.mean(distances ** 2)),
        iterations=1,
        converged=True,
        per_draw_distances=distances,
    )


class TestFrechetMean:
    """Test the intrinsic mean and its stopping rule"""

    @pytest.fixture
    def rng(self):
        return np.random.default_rng(2024)

    @pytest.fixture
    def truth(self, rng):
        Y = rng.standard_normal((12, 2)) * np.array([2.0, 1.0])
        return Y - Y.mean(axis=0)

    @pytest.fixture
    def rotated_copies(self, rng, truth):
        return DrawSet.build(np.stack([truth @ random_orthogonal(2, rng) for _ in range(50)]))

    @pytest.fixture
    def dispersed(self, rng, truth):
        configurations = [
            (truth + 0.3 * rng.standard_normal(truth.shape)) @ random_orthogonal(2, rng)
            for _ in range(40)
        ]
        return DrawSet.from_configurations(configurations)

    # ============= TEST 1: Identical draws =============
    def test_identical_draws(self, truth):
        """✅ Test: Identical draws give their own Gram and zero variation"""
        draws = DrawSet.build(np.stack([truth] * 5))

        result = frechet_mean(draws)

        assert np.allclose(result.mean_gram, truth @ truth.T, atol=1e-10)
        assert result.variation < 1e-20
        assert result.converged
        assert result.iterations <= 2

    # ============= TEST 2: Rotated copies =============
    def test_rotated_copies_recover_generating_point(self, rotated_copies, truth):
        """✅ Test: Draws equal up to rotation average to that point"""
        result = frechet_mean(rotated_copies)

        assert quotient_distance(result.mean_factor, truth) < 1e-8
        assert np.allclose(result.mean_gram, truth @ truth.T, atol=1e-8)

    # ============= TEST 3: One-dimensional oracle =============
    def test_scalar_case_matches_grid(self):
        """✅ Test: Draws y and 3y average to 2y (r = 1 reduces to a sign)"""
        y = np.array([[1.0], [-1.0], [2.0], [-2.0]])
        draws = DrawSet.build(np.stack([y, 3.0 * y]))

        result = frechet_mean(draws)

        grid = np.arange(-4.0, 4.0, 1e-4)
        objective = 0.5 * (
            np.minimum((grid - 1.0) ** 2, (grid + 1.0) ** 2)
            + np.minimum((grid - 3.0) ** 2, (grid + 3.0) ** 2)
        )
        best = abs(grid[np.argmin(objective)])
        assert best == pytest.approx(2.0, abs=1e-3)
        assert np.allclose(np.abs(result.mean_factor), 2.0 * np.abs(y), atol=1e-6)

    # ============= TEST 4: Minimality spot-check =============
    def test_variation_not_above_any_draw(self, dispersed):
        """✅ Test: Objective at the mean is no larger than at any single draw"""
        result = frechet_mean(dispersed)

        for factor in dispersed.factors:
            assert result.variation <= frechet_objective(factor, dispersed) + 1e-12
        assert frechet_variation(result) == pytest.approx(result.variation)

    # ============= TEST 5: Monotone objective =============
    def test_objective_trace_non_increasing(self, dispersed):
        """✅ Test: Every accepted step lowers the objective"""
        result = frechet_mean(dispersed)

        assert np.all(np.diff(result.objective_trace) <= 1e-12)
        assert result.objective_trace[-1] == pytest.approx(result.variation, rel=1e-12)

    # ============= TEST 6: Stationarity =============
    def test_converged_mean_is_stationary(self, dispersed):
        """✅ Test: Horizontal mean of aligned residuals vanishes at the result"""
        config = FrechetConfig(tolerance=1e-8)

        result = frechet_mean(dispersed, config)

        Y = result.mean_factor
        aligned = np.stack([f @ procrustes_align(Y, f)[0] for f in dispersed.factors])
        gradient = horizontal_project(Y, aligned.mean(axis=0) - Y)
        assert result.converged
        assert np.linalg.norm(gradient) < 10 * config.tolerance * max(1.0, np.linalg.norm(Y))

    # ============= TEST 7: Canonicality =============
    def test_independent_rotations_do_not_change_mean(self, rng, dispersed):
        """✅ Test: Rotating each draw leaves mean Gram and variation unchanged"""
        rotated = DrawSet.build(np.stack([f @ random_orthogonal(2, rng) for f in dispersed.factors]))

        first = frechet_mean(dispersed)
        second = frechet_mean(rotated)

        assert np.allclose(first.mean_gram, second.mean_gram, atol=1e-8)
        assert first.variation == pytest.approx(second.variation, abs=1e-8)

    # ============= TEST 8: Thread count =============
    def test_threads_do_not_change_result(self, dispersed):
        """✅ Test: Output is bit-identical for 1 and 4 threads"""
        single = frechet_mean(dispersed, FrechetConfig(threads=1))
        pooled = frechet_mean(dispersed, FrechetConfig(threads=4))

        assert np.array_equal(single.mean_factor, pooled.mean_factor)
        assert single.variation == pooled.variation

    # ============= TEST 9: Restarts and explicit init =============
    def test_restarts_keep_lowest_objective(self, dispersed):
        """✅ Test: Extra starts are reported and the best one is kept"""
        result = frechet_mean(dispersed, FrechetConfig(restarts=2, seed=5))

        assert len(result.start_objectives) == 3
        assert result.variation == pytest.approx(min(result.start_objectives), rel=1e-12)

        from_draw = frechet_mean(dispersed, FrechetConfig(init=2))
        assert from_draw.init == "draw-2"

    # ============= TEST 10: Bad init index =============
    def test_init_out_of_range(self, dispersed):
        """❌ Test: Unknown draw index for init is invalid input"""
        with pytest.raises(InvalidInputException):
            frechet_mean(dispersed, FrechetConfig(init=99))

    # ============= TEST 11: Rank-deficient draws =============
    def test_rank_deficient_draws_raise(self):
        """❌ Test: Draws below rank r cannot be averaged on the smooth stratum"""
        y = np.array([[1.0], [-1.0], [2.0], [-2.0]])
        factor = np.hstack([y, np.zeros_like(y)])
        draws = DrawSet.build(np.stack([factor, 2.0 * factor]))

        with pytest.raises(RankDeficiencyException):
            frechet_mean(draws)


class TestCredibleRadius:
    """Test variation and credible radius arithmetic"""

    # ============= TEST 1: Interpolated quantile =============
    def test_quantiles(self):
        """✅ Test: Median of {1..5} is 3; level 1 is the maximum"""
        result = result_with_distances([1.0, 2.0, 3.0, 4.0, 5.0])

        assert credible_radius(result, 0.5) == pytest.approx(3.0)
        assert credible_radius(result, 1.0) == pytest.approx(5.0)

    # ============= TEST 2: Variation =============
    def test_variation_of_unit_distances(self):
        """✅ Test: Draws at distance 1 give variation 1"""
        assert frechet_variation(result_with_distances([1.0, 1.0])) == pytest.approx(1.0)
        assert credible_radius(result_with_distances([0.0, 0.0]), 0.9) == 0.0

    # ============= TEST 3: Level range =============
    def test_invalid_level(self):
        """❌ Test: Levels outside (0, 1] are rejected"""
        result = result_with_distances([1.0, 2.0])

        with pytest.raises(InvalidInputException):
            credible_radius(result, 0.0)
        with pytest.raises(InvalidInputException):
            credible_radius(result, 1.5)

    # ============= TEST 4: Result consistency =============
    def test_result_rejects_inconsistent_variation(self):
        """❌ Test: Variation must agree with the per-draw distances"""
        Y = np.array([[1.0], [-1.0]])
        with pytest.raises(ValueError):
            FrechetResult(
                mean_factor=Y,
                mean_gram=gram_of_factor(Y),
                variation=7.0,
                iterations=1,
                converged=True,
                per_draw_distances=np.array([1.0, 1.0]),
            )


class TestBaselines:
    """Test the medoid and fixed-reference Procrustes means"""

    @pytest.fixture
    def rng(self):
        return np.random.default_rng(99)

    @pytest.fixture
    def y(self):
        return np.array([[1.0], [-1.0], [2.0], [-2.0]])

    # ============= TEST 1: Medoid =============
    def test_medoid(self, y):
        """✅ Test: Middle draw wins; single and identical draws give 0"""
        assert quotient_medoid(DrawSet.build(np.stack([y, 2.0 * y, 3.0 * y]))) == 1
        assert quotient_medoid(DrawSet.build(y[None])) == 0
        assert quotient_medoid(DrawSet.build(np.stack([y, y, y]))) == 0

    # ============= TEST 2: Pairwise table =============
    def test_pairwise_table_matches_direct(self, rng):
        """✅ Test: Batched closed form agrees with per-pair alignment"""
        configurations = [rng.standard_normal((7, 2)) for _ in range(6)]
        draws = DrawSet.from_configurations(configurations)

        table = pairwise_quotient_distances(draws)

        for a in range(6):
            for b in range(6):
                expected = 0.0 if a == b else quotient_distance(draws.factors[a], draws.factors[b])
                assert table[a, b] == pytest.approx(expected, abs=1e-8)

    # ============= TEST 3: Concentrated draws =============
    def test_procrustes_mean_of_rotated_copies(self, rng):
        """✅ Test: Any reference and either orientation gives the common Gram"""
        Y = rng.standard_normal((9, 2))
        Y -= Y.mean(axis=0)
        draws = DrawSet.build(np.stack([Y @ random_orthogonal(2, rng) for _ in range(8)]))

        for reference in (0, 5):
            _, fixed = procrustes_mean(draws, reference)
            _, shuffled = procrustes_mean(draws, reference, randomize_orientation=True, seed=3)
            assert np.allclose(fixed, Y @ Y.T, atol=1e-8)
            assert np.allclose(shuffled, fixed, atol=1e-8)

    # ============= TEST 4: Reference dependence =============
    def test_references_disagree_on_dispersed_draws(self, rng):
        """✅ Test: Different references give different Procrustes means"""
        Y = rng.standard_normal((9, 2))
        draws = DrawSet.from_configurations([Y + 0.5 * rng.standard_normal(Y.shape) for _ in range(10)])

        _, first = procrustes_mean(draws, 0)
        _, second = procrustes_mean(draws, 1)

        assert np.linalg.norm(first - second) > 1e-6

    # ============= TEST 5: Bad reference =============
    def test_reference_out_of_range(self, y):
        """❌ Test: Reference index must name a draw"""
        with pytest.raises(InvalidInputException):
            procrustes_mean(DrawSet.build(y[None]), 1)
