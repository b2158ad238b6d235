import numpy as np
import pytest
from scipy.special import expit

from quotient.common import InvalidInputException, random_orthogonal
from quotient.frechet import procrustes_mean
from quotient.geometry import gram_of
from quotient.links import LinkFunction, get_link
from quotient.models import DrawSet
from quotient.summaries import (
    all_pairs,
    dyad_summaries,
    dyad_type_summary,
    edge_density,
    edge_probabilities,
    group_summary,
    node_centrality,
    node_uncertainty,
    nodewise_loss,
    pair_distance_draws,
    posterior_predictive,
    reference_sensitivity,
)


def two_node_draws(distances, intercepts=None):
    factors = np.stack([[[d / 2.0], [-d / 2.0]] for d in distances])
    return DrawSet.build(factors, intercepts)


class TestDyadSummaries:
    """Test dyad distance and edge probability summaries"""

    @pytest.fixture
    def rng(self):
        return np.random.default_rng(5)

    @pytest.fixture
    def draws(self, rng):
        X = rng.standard_normal((10, 2))
        configurations = [X + 0.3 * rng.standard_normal(X.shape) for _ in range(25)]
        return DrawSet.from_configurations(configurations, intercepts=rng.normal(1.0, 0.2, 25))

    # ============= TEST 1: Arithmetic oracle =============
    def test_four_draw_summary(self):
        """✅ Test: D ∈ {1,2,3,4} gives mean 2.5 and variance 5/3"""
        summary = dyad_summaries(two_node_draws([1.0, 2.0, 3.0, 4.0]), [(0, 1)])[0]

        assert summary.mean_distance == pytest.approx(2.5)
        assert summary.median_distance == pytest.approx(2.5)
        assert summary.var_distance == pytest.approx(5.0 / 3.0)
        assert summary.ci_lo == pytest.approx(1.075)
        assert summary.ci_hi == pytest.approx(3.925)
        assert summary.mean_probability is None

    # ============= TEST 2: Single draw =============
    def test_single_draw_has_zero_variance(self):
        """✅ Test: M = 1 gives zero variance and a degenerate interval"""
        summary = dyad_summaries(two_node_draws([2.0]), [(0, 1)])[0]

        assert summary.var_distance == 0.0
        assert summary.ci_lo == summary.ci_hi == pytest.approx(2.0)

    # ============= TEST 3: Edge probabilities =============
    def test_edge_probabilities(self):
        """✅ Test: Probabilities follow g(alpha - D) draw by draw"""
        draws = two_node_draws([1.0, 2.0, 3.0], intercepts=[0.5, 1.0, 1.5])

        summary = dyad_summaries(draws, [(0, 1)], link=get_link("logistic"), threshold=1.5)[0]

        effects = np.array([-0.5, -1.0, -1.5])
        assert summary.mean_probability == pytest.approx(float(np.mean(expit(effects))))
        assert summary.mean_link_effect == pytest.approx(-1.0)
        assert summary.tail_probability == pytest.approx(2.0 / 3.0)
        assert 0.0 <= summary.ci_prob_lo <= summary.ci_prob_hi <= 1.0

    # ============= TEST 4: Probit and custom links =============
    def test_other_links(self):
        """✅ Test: Probit and custom links give probabilities in [0, 1]"""
        draws = two_node_draws([1.0, 2.0], intercepts=[1.0, 1.0])
        custom = LinkFunction(kind="custom", function=lambda eta: 0.5 + 0.0 * eta)

        probit = dyad_summaries(draws, [(0, 1)], link=get_link("probit"))[0]
        flat = dyad_summaries(draws, [(0, 1)], link=custom)[0]

        assert 0.0 < probit.mean_probability < 0.5
        assert flat.mean_probability == pytest.approx(0.5)

    # ============= TEST 5: Invalid requests =============
    def test_invalid_requests(self, draws):
        """❌ Test: Self dyads, out-of-range nodes, bad levels and missing intercepts"""
        with pytest.raises(InvalidInputException):
            dyad_summaries(draws, [(3, 3)])
        with pytest.raises(InvalidInputException):
            dyad_summaries(draws, [(0, 10)])
        with pytest.raises(InvalidInputException):
            dyad_summaries(draws, [(0, 1)], level=0.0)
        with pytest.raises(InvalidInputException):
            dyad_summaries(two_node_draws([1.0]), [(0, 1)], link=get_link("logistic"))

    # ============= TEST 6: Canonicality =============
    def test_rotations_leave_summaries_unchanged(self, rng, draws):
        """✅ Test: Rotating each draw changes no dyad summary field"""
        rotated = DrawSet.build(
            np.stack([f @ random_orthogonal(2, rng) for f in draws.factors]), draws.intercepts
        )
        pairs = all_pairs(10)
        link = get_link("logistic")

        before = dyad_summaries(draws, pairs, link=link)
        after = dyad_summaries(rotated, pairs, link=link)

        for a, b in zip(before, after):
            for field, value in a.model_dump().items():
                assert getattr(b, field) == pytest.approx(value, abs=1e-8)

    # ============= TEST 7: Pair distances =============
    def test_pair_distance_draws(self, draws):
        """✅ Test: Gram-based distances match coordinates"""
        distances = pair_distance_draws(draws, [(0, 4), (2, 7)])

        direct = np.linalg.norm(draws.factors[:, 0] - draws.factors[:, 4], axis=1)
        assert distances.shape == (25, 2)
        assert np.allclose(distances[:, 0], direct, atol=1e-10)


class TestNodeSummaries:
    """Test node uncertainty U_i and node-wise loss L_i"""

    @pytest.fixture
    def rng(self):
        return np.random.default_rng(8)

    @pytest.fixture
    def truth_configuration(self, rng):
        return rng.standard_normal((12, 2)) * 2.0

    # ============= TEST 1: Definition =============
    def test_monte_carlo_uncertainty_definition(self, rng, truth_configuration):
        """✅ Test: U_i averages empirical dyad variances over j ≠ i"""
        draws = DrawSet.from_configurations(
            [truth_configuration + 0.2 * rng.standard_normal((12, 2)) for _ in range(30)]
        )

        values = node_uncertainty(draws).values

        distances = np.linalg.norm(draws.factors[:, :, None, :] - draws.factors[:, None, :, :], axis=3)
        variances = np.var(distances, axis=0, ddof=1)
        assert values[3] == pytest.approx(np.sum(np.delete(variances[3], 3)) / 11, rel=1e-10)
        assert all(v >= 0 for v in values)

    # ============= TEST 2: Quadratic scaling =============
    def test_uncertainty_scales_quadratically(self, rng, truth_configuration):
        """✅ Test: Shrinking the spread by 10 shrinks max U_i by about 100"""
        noise = rng.standard_normal((40, 12, 2))

        def max_u(s):
            draws = DrawSet.from_configurations(truth_configuration + s * noise)
            return max(node_uncertainty(draws).values)

        assert max_u(1e-2) / max_u(1e-3) == pytest.approx(100.0, rel=0.1)

    # ============= TEST 3: Delta method =============
    def test_delta_method_close_to_monte_carlo(self, rng, truth_configuration):
        """✅ Test: Both methods agree for a concentrated posterior"""
        draws = DrawSet.from_configurations(
            [(truth_configuration + 1e-3 * rng.standard_normal((12, 2))) @ random_orthogonal(2, rng)
             for _ in range(100)]
        )

        monte_carlo = np.array(node_uncertainty(draws, "monte-carlo").values)
        delta = node_uncertainty(draws, "delta")

        assert delta.method == "delta"
        assert np.allclose(np.array(delta.values) / monte_carlo, 1.0, atol=0.1)

    # ============= TEST 4: Canonicality =============
    def test_rotations_leave_u_and_l_unchanged(self, rng, truth_configuration):
        """✅ Test: U_i and L_i ignore per-draw rotations"""
        draws = DrawSet.from_configurations(
            [truth_configuration + 0.3 * rng.standard_normal((12, 2)) for _ in range(20)]
        )
        rotated = DrawSet.build(np.stack([f @ random_orthogonal(2, rng) for f in draws.factors]))
        truth = gram_of(truth_configuration)

        assert np.allclose(node_uncertainty(draws).values, node_uncertainty(rotated).values, atol=1e-8)
        assert np.allclose(nodewise_loss(draws, truth), nodewise_loss(rotated, truth), atol=1e-8)

    # ============= TEST 5: Loss at the truth =============
    def test_loss_vanishes_at_truth(self, rng, truth_configuration):
        """✅ Test: Draws equal to the truth up to rotation have zero loss"""
        draws = DrawSet.from_configurations(
            [truth_configuration @ random_orthogonal(2, rng) for _ in range(5)]
        )

        loss = nodewise_loss(draws, gram_of(truth_configuration))

        assert np.max(loss) < 1e-20

    # ============= TEST 6: Invalid requests =============
    def test_invalid_requests(self, truth_configuration):
        """❌ Test: One draw, unknown methods and mismatched truths are rejected"""
        single = DrawSet.from_configurations([truth_configuration])
        pair = DrawSet.from_configurations([truth_configuration, 1.1 * truth_configuration])

        with pytest.raises(InvalidInputException):
            node_uncertainty(single)
        with pytest.raises(InvalidInputException):
            node_uncertainty(pair, "bootstrap")
        with pytest.raises(InvalidInputException):
            nodewise_loss(pair, gram_of(truth_configuration[:5]))


class TestReferenceSensitivity:
    """Test the S_ref diagnostic of fixed-reference Procrustes means"""

    @pytest.fixture
    def rng(self):
        return np.random.default_rng(13)

    # ============= TEST 1: Concentrated draws =============
    def test_concentrated_draws(self, rng):
        """✅ Test: Draws equal up to rotation give S_ref ≈ 0"""
        Y = rng.standard_normal((10, 2))
        draws = DrawSet.from_configurations([Y @ random_orthogonal(2, rng) for _ in range(12)])

        result = reference_sensitivity(draws, K=10, seed=1)

        assert result.s_ref < 1e-6
        assert len(result.pairwise_gaps) == 45
        assert len(set(result.reference_indices)) == 10

    # ============= TEST 2: Two references =============
    def test_two_references_cross_checked(self, rng):
        """✅ Test: K = 2 gives the single gap between the two Procrustes means"""
        Y = rng.standard_normal((10, 2))
        draws = DrawSet.from_configurations([Y + 0.5 * rng.standard_normal(Y.shape) for _ in range(8)])

        result = reference_sensitivity(draws, K=2, seed=4)

        children = np.random.SeedSequence(4).spawn(2)
        grams = [
            procrustes_mean(draws, k, randomize_orientation=True, seed=child)[1]
            for k, child in zip(result.reference_indices, children)
        ]
        assert result.s_ref == pytest.approx(np.linalg.norm(grams[0] - grams[1]), rel=1e-12)
        assert result.s_ref == result.pairwise_gaps[0]
        assert result.s_ref > 0

    # ============= TEST 3: Determinism =============
    def test_seeded(self, rng):
        """✅ Test: Same seed, same references and index"""
        draws = DrawSet.from_configurations([rng.standard_normal((6, 2)) for _ in range(15)])

        first = reference_sensitivity(draws, K=5, seed=9)
        second = reference_sensitivity(draws, K=5, seed=9)

        assert first == second

    # ============= TEST 4: K range =============
    def test_k_out_of_range(self, rng):
        """❌ Test: K must be between 2 and M"""
        draws = DrawSet.from_configurations([rng.standard_normal((6, 2)) for _ in range(4)])

        with pytest.raises(InvalidInputException):
            reference_sensitivity(draws, K=5)
        with pytest.raises(InvalidInputException):
            reference_sensitivity(draws, K=1)


class TestPredictiveAndGraphs:
    """Test posterior predictive replicates and graph summaries"""

    @pytest.fixture
    def draws(self):
        rng = np.random.default_rng(21)
        configurations = [rng.standard_normal((8, 2)) for _ in range(3)]
        return DrawSet.from_configurations(configurations, intercepts=[0.0, 0.5, 1.0])

    # ============= TEST 1: Replicate shape =============
    def test_replicates_are_simple_graphs(self, draws):
        """✅ Test: Symmetric 0/1 matrices with empty diagonals"""
        replicates = posterior_predictive(draws, get_link("logistic"), count=7, seed=3)

        assert replicates.shape == (7, 8, 8)
        for A in replicates:
            assert np.array_equal(A, A.T)
            assert np.all(np.diag(A) == 0)
            assert set(np.unique(A)) <= {0, 1}

    # ============= TEST 2: Determinism =============
    def test_replicates_seeded(self, draws):
        """✅ Test: Same seed gives the same replicates"""
        link = get_link("logistic")

        assert np.array_equal(
            posterior_predictive(draws, link, 5, seed=1), posterior_predictive(draws, link, 5, seed=1)
        )

    # ============= TEST 3: Saturated intercepts =============
    def test_extreme_intercepts(self, draws):
        """✅ Test: Huge alpha gives complete graphs, very negative alpha empty ones"""
        link = get_link("logistic")
        full = DrawSet.build(draws.factors, [60.0, 60.0, 60.0])
        empty = DrawSet.build(draws.factors, [-60.0, -60.0, -60.0])

        assert all(edge_density(A) == 1.0 for A in posterior_predictive(full, link, 3))
        assert all(edge_density(A) == 0.0 for A in posterior_predictive(empty, link, 3))

    # ============= TEST 4: Invalid requests =============
    def test_invalid_requests(self, draws):
        """❌ Test: Count must be positive and intercepts present"""
        link = get_link("logistic")

        with pytest.raises(InvalidInputException):
            posterior_predictive(draws, link, 0)
        with pytest.raises(InvalidInputException):
            posterior_predictive(DrawSet.build(draws.factors), link, 2)

    # ============= TEST 5: Constant edge probability =============
    def test_half_probability_density(self):
        """✅ Test: p = 0.5 everywhere on 20 nodes gives mean density 0.5 over 500 replicates"""
        coincident = DrawSet.build(np.zeros((4, 20, 2)), [0.0, 0.0, 0.0, 0.0])

        replicates = posterior_predictive(coincident, get_link("logistic"), count=500, seed=8)

        assert np.mean([edge_density(A) for A in replicates]) == pytest.approx(0.5, abs=0.02)

    # ============= TEST 6: Unbiased density =============
    def test_density_unbiased_for_mean_probability(self, draws):
        """✅ Test: Replicate density is within 3 standard errors of the averaged edge probability"""
        link = get_link("logistic")
        upper = np.triu_indices(8, 1)
        expected = np.mean([edge_probabilities(draws, link, m)[upper].mean() for m in range(draws.M)])

        densities = np.array([edge_density(A) for A in posterior_predictive(draws, link, count=600, seed=9)])

        standard_error = densities.std(ddof=1) / np.sqrt(densities.shape[0])
        assert abs(densities.mean() - expected) < 3.0 * standard_error

    # ============= TEST 7: Centrality =============
    def test_star_centrality(self):
        """✅ Test: Star centre has full degree and betweenness 1"""
        A = np.zeros((5, 5), dtype=int)
        A[0, 1:] = A[1:, 0] = 1

        centrality = node_centrality(A)

        assert centrality["degree"].tolist() == [4.0, 1.0, 1.0, 1.0, 1.0]
        assert centrality["betweenness"][0] == pytest.approx(1.0)
        assert centrality["betweenness"][1] == pytest.approx(0.0)

    # ============= TEST 8: Group summary =============
    def test_group_summary(self):
        """✅ Test: Per-label mean and sd in first-seen order"""
        summary = group_summary([1.0, 2.0, 3.0, 4.0], ["b", "a", "b", "a"])

        assert list(summary) == ["b", "a"]
        assert summary["b"]["mean"] == pytest.approx(2.0)
        assert summary["a"]["sd"] == pytest.approx(np.sqrt(2.0))
        with pytest.raises(InvalidInputException):
            group_summary([1.0], ["a", "b"])

    # ============= TEST 9: Dyad types =============
    def test_dyad_type_summary(self, draws):
        """✅ Test: Dyads are classed by primary tie, secondary-only tie, or neither"""
        summaries = dyad_summaries(draws, [(0, 1), (0, 2), (1, 2), (3, 4)])
        primary = np.zeros((8, 8), dtype=int)
        secondary = np.zeros((8, 8), dtype=int)
        primary[0, 1] = primary[1, 0] = 1
        secondary[0, 1] = secondary[1, 0] = secondary[0, 2] = secondary[2, 0] = 1

        table = dyad_type_summary(summaries, primary, secondary)

        assert table["primary"]["count"] == 1
        assert table["secondary-only"]["count"] == 1
        assert table["neither"]["count"] == 2
        assert table["primary"]["mean_distance"] == pytest.approx(summaries[0].mean_distance)
