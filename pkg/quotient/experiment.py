"""
Desk-scale regime study: simulate a template and a graph, sample the
posterior, and compare quotient summaries with fixed-reference Procrustes
baselines against the known truth.
"""
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import pearsonr

from quotient.display import embed_mean
from quotient.frechet import frechet_mean, procrustes_mean, quotient_medoid
from quotient.geometry import gram_of, quotient_distance
from quotient.models import DrawSet, FrechetConfig, FrechetResult, ReplicateSummary, SamplerConfig, SimulationSpec
from quotient.sampler import mh_sample
from quotient.simulation import calibrate_intercept, simulate_graph, simulate_template
from quotient.summaries import group_summary, node_uncertainty, nodewise_loss, reference_sensitivity

logger = logging.getLogger(__name__)

DESK_GROUP_SIZES = (24, 12, 24)


def desk_sampler_config(seed: int = 0) -> SamplerConfig:
    return SamplerConfig(burn_in=2000, thin=10, draws=200, seed=seed)


def estimate_errors(draws: DrawSet, result: FrechetResult, truth) -> Dict[str, float]:
    """Quotient distance to the truth of the Fréchet mean and both Procrustes baselines."""
    truth_factor = embed_mean(truth, draws.r)
    first, _ = procrustes_mean(draws, 0)
    medoid, _ = procrustes_mean(draws, quotient_medoid(draws))
    return {
        "frechet_error": quotient_distance(truth_factor, result.mean_factor),
        "first_draw_error": quotient_distance(truth_factor, first),
        "medoid_error": quotient_distance(truth_factor, medoid),
    }


def _child_seeds(seed: int, count: int) -> List[int]:
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(count)]


def run_replicate(
    regime: str,
    seed: int,
    group_sizes: Sequence[int] = DESK_GROUP_SIZES,
    sampler_config: Optional[SamplerConfig] = None,
    frechet_config: Optional[FrechetConfig] = None,
    rank: int = 2,
    K: int = 10,
) -> ReplicateSummary:
    spec = SimulationSpec.preset(regime, group_sizes)
    template_seed, graph_seed, sampler_seed = _child_seeds(seed, 3)

    X, labels = simulate_template(spec, template_seed)
    alpha = calibrate_intercept(X, spec.target_density)
    A = simulate_graph(X, alpha, seed=graph_seed)

    config = (sampler_config or desk_sampler_config()).model_copy(update={"seed": sampler_seed})
    sampled = mh_sample(A, rank, config)
    draws = sampled.draws

    result = frechet_mean(draws, frechet_config)
    sensitivity = reference_sensitivity(draws, K=min(K, draws.M), seed=seed)
    truth = gram_of(X)
    uncertainty = np.array(node_uncertainty(draws).values)
    loss = nodewise_loss(draws, truth)
    errors = estimate_errors(draws, result, truth)

    u_groups = group_summary(uncertainty, labels)
    l_groups = group_summary(loss, labels)
    summary = ReplicateSummary(
        regime=regime,
        seed=seed,
        alpha=alpha,
        s_ref=sensitivity.s_ref,
        corr_u_l=float(pearsonr(uncertainty, loss)[0]),
        group_mean_u={label: stats["mean"] for label, stats in u_groups.items()},
        group_mean_l={label: stats["mean"] for label, stats in l_groups.items()},
        variation=result.variation,
        acceptance_position=sampled.acceptance_position,
        **errors,
    )
    logger.info(
        f"Replicate {regime}/{seed}: S_ref={summary.s_ref:.4g}, corr(U,L)={summary.corr_u_l:.3f}"
    )
    return summary


def run_study(regime: str, replicates: int, seed: int = 0, **kwargs) -> List[ReplicateSummary]:
    """Independent replicates with seeds derived from (seed, replicate index)."""
    return [run_replicate(regime, child, **kwargs) for child in _child_seeds(seed, replicates)]


def summarize_study(summaries: Sequence[ReplicateSummary]) -> Dict[str, float]:
    """Medians across replicates and how often the bridge group is the most uncertain."""
    bridge_top = [
        s.group_mean_u["B"] > max(s.group_mean_u["L"], s.group_mean_u["R"]) for s in summaries
    ]
    return {
        "replicates": len(summaries),
        "median_s_ref": float(np.median([s.s_ref for s in summaries])),
        "median_corr_u_l": float(np.median([s.corr_u_l for s in summaries])),
        "bridge_most_uncertain": int(np.sum(bridge_top)),
        "median_frechet_error": float(np.median([s.frechet_error for s in summaries])),
        "median_first_draw_error": float(np.median([s.first_draw_error for s in summaries])),
        "median_medoid_error": float(np.median([s.medoid_error for s in summaries])),
    }
