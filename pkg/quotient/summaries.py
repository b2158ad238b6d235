"""
Canonical posterior summaries built from intrinsic quantities only:
dyad distances and edge probabilities, posterior predictive replicates,
node uncertainty U_i, node-wise loss L_i and the reference-sensitivity
index S_ref of the non-canonical Procrustes baseline.
"""
import logging
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from quotient.common import InvalidInputException, child_generators
from quotient.frechet import frechet_mean, procrustes_mean
from quotient.geometry import distances_from_gram, validate_gram
from quotient.links import LinkFunction
from quotient.models import (
    DrawSet,
    DyadSummary,
    FrechetConfig,
    NodeUncertainty,
    SensitivityResult,
    TangentSample,
)
from quotient.tangent import delta_variance_matrix, tangent_residuals

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


def all_pairs(n: int) -> List[Pair]:
    return list(combinations(range(n), 2))


def _validate_pairs(pairs: Sequence[Pair], n: int) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    if np.any(pairs[:, 0] == pairs[:, 1]):
        raise InvalidInputException("dyads need two distinct nodes (i = j given)")
    if np.any(pairs < 0) or np.any(pairs >= n):
        raise InvalidInputException(f"dyad indices must lie in [0, {n})")
    return pairs


def pair_distance_draws(draws: DrawSet, pairs: Sequence[Pair]) -> np.ndarray:
    """D_ij^(m) = sqrt(B_ii + B_jj - 2B_ij) per draw, shape (M, P)."""
    pairs = _validate_pairs(pairs, draws.n)
    rows_i = draws.factors[:, pairs[:, 0], :]
    rows_j = draws.factors[:, pairs[:, 1], :]
    b_ii = np.sum(rows_i * rows_i, axis=2)
    b_jj = np.sum(rows_j * rows_j, axis=2)
    b_ij = np.sum(rows_i * rows_j, axis=2)
    return np.sqrt(np.maximum(b_ii + b_jj - 2.0 * b_ij, 0.0))


def distance_draws(draws: DrawSet) -> np.ndarray:
    """Full distance matrices per draw, shape (M, n, n)."""
    return np.stack([distances_from_gram(gram) for gram in draws.grams()])


def _interval(values: np.ndarray, level: float) -> Tuple[float, float]:
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(values, [tail, 1.0 - tail])
    return float(lo), float(hi)


def _sample_variance(values: np.ndarray) -> float:
    return float(np.var(values, ddof=1)) if values.shape[0] > 1 else 0.0


def dyad_summaries(
    draws: DrawSet,
    pairs: Sequence[Pair],
    level: float = 0.95,
    link: Optional[LinkFunction] = None,
    threshold: Optional[float] = None,
) -> List[DyadSummary]:
    """
    Monte Carlo summaries of D_ij and, with a link, of p_ij = g(alpha - D_ij).
    Intervals are equal-tailed interpolated quantiles; variances use M - 1.
    """
    if not 0.0 < level <= 1.0:
        raise InvalidInputException(f"credible level must be in (0, 1], got {level}")
    pairs = _validate_pairs(pairs, draws.n)
    alphas = draws.require_intercepts() if link is not None else None
    distances = pair_distance_draws(draws, pairs)

    summaries = []
    for column, (i, j) in enumerate(pairs):
        values = distances[:, column]
        ci_lo, ci_hi = _interval(values, level)
        fields = dict(
            i=int(i),
            j=int(j),
            mean_distance=float(np.mean(values)),
            median_distance=float(np.median(values)),
            var_distance=_sample_variance(values),
            ci_lo=ci_lo,
            ci_hi=ci_hi,
        )
        if threshold is not None:
            fields["tail_probability"] = float(np.mean(values > threshold))
        if link is not None:
            effects = alphas - values
            probabilities = link(effects)
            prob_lo, prob_hi = _interval(probabilities, level)
            fields.update(
                mean_probability=float(np.mean(probabilities)),
                ci_prob_lo=prob_lo,
                ci_prob_hi=prob_hi,
                mean_link_effect=float(np.mean(effects)),
            )
        summaries.append(DyadSummary(**fields))
    return summaries


def dyad_variance_matrix(draws: DrawSet) -> np.ndarray:
    """Empirical Var{D_ij} (denominator M - 1) for every dyad."""
    if draws.M < 2:
        raise InvalidInputException("dyad variances need at least 2 draws")
    return np.var(distance_draws(draws), axis=0, ddof=1)


def node_uncertainty(
    draws: DrawSet,
    method: str = "monte-carlo",
    sample: Optional[TangentSample] = None,
    frechet_config: Optional[FrechetConfig] = None,
) -> NodeUncertainty:
    """U_i = (1/(n-1)) Σ_{j≠i} Var{D_ij}, by empirical or delta-method variances."""
    if draws.M < 2:
        raise InvalidInputException(f"node uncertainty needs at least 2 draws, got {draws.M}")
    if method == "monte-carlo":
        variances = dyad_variance_matrix(draws)
    elif method == "delta":
        if sample is None:
            result = frechet_mean(draws, frechet_config)
            sample = tangent_residuals(result.mean_factor, draws)
        variances, _ = delta_variance_matrix(sample)
    else:
        raise InvalidInputException(f"Unknown method: {method}. Must be monte-carlo or delta.")
    np.fill_diagonal(variances, 0.0)
    values = variances.sum(axis=1) / (draws.n - 1)
    return NodeUncertainty(values=[float(v) for v in values], method=method)


def nodewise_loss(draws: DrawSet, truth) -> np.ndarray:
    """L_i = (1/(n-1)) Σ_{j≠i} (D̄_ij - D_ij(B*))² with D̄ the posterior mean distance."""
    truth = validate_gram(truth)
    if truth.shape != (draws.n, draws.n):
        raise InvalidInputException(f"truth is {truth.shape}, draws have n = {draws.n}")
    mean_distances = distance_draws(draws).mean(axis=0)
    errors = (mean_distances - distances_from_gram(truth)) ** 2
    np.fill_diagonal(errors, 0.0)
    return errors.sum(axis=1) / (draws.n - 1)


def reference_sensitivity(draws: DrawSet, K: int = 10, seed: int = 0) -> SensitivityResult:
    """
    S_ref: mean Frobenius gap between Procrustes-mean Grams under K references
    drawn uniformly without replacement.
    """
    if not 2 <= K <= draws.M:
        raise InvalidInputException(f"K must be in [2, {draws.M}], got {K}")
    rng = np.random.default_rng(seed)
    references = [int(k) for k in rng.choice(draws.M, size=K, replace=False)]
    children = np.random.SeedSequence(seed).spawn(K)
    grams = [
        procrustes_mean(draws, reference, randomize_orientation=True, seed=child)[1]
        for reference, child in zip(references, children)
    ]
    gaps = [float(np.linalg.norm(grams[k] - grams[l])) for k, l in combinations(range(K), 2)]
    s_ref = float(np.mean(gaps))
    logger.info(f"S_ref = {s_ref:.6g} over {K} references")
    return SensitivityResult(
        s_ref=s_ref, K=K, reference_indices=references, pairwise_gaps=gaps, seed=seed
    )


def edge_probabilities(draws: DrawSet, link: LinkFunction, m: int) -> np.ndarray:
    """p_ij^(m) as an n×n matrix with zero diagonal."""
    alphas = draws.require_intercepts()
    distances = distances_from_gram(draws.factors[m] @ draws.factors[m].T)
    probabilities = link(alphas[m] - distances)
    np.fill_diagonal(probabilities, 0.0)
    return probabilities


def posterior_predictive(draws: DrawSet, link: LinkFunction, count: int, seed: int = 0) -> np.ndarray:
    """Replicate networks; replicate t uses draw t mod M and its own sub-seed."""
    draws.require_intercepts()
    if count < 1:
        raise InvalidInputException(f"count must be >= 1, got {count}")
    n = draws.n
    upper = np.triu_indices(n, 1)
    replicates = np.zeros((count, n, n), dtype=np.int8)
    for t, rng in enumerate(child_generators(seed, count)):
        probabilities = edge_probabilities(draws, link, t % draws.M)[upper]
        edges = (rng.random(probabilities.shape[0]) < probabilities).astype(np.int8)
        replicates[t][upper] = edges
        replicates[t] = replicates[t] + replicates[t].T
    return replicates


def edge_density(A) -> float:
    A = np.asarray(A)
    upper = np.triu_indices(A.shape[0], 1)
    return float(np.mean(A[upper]))


def node_centrality(A) -> Dict[str, np.ndarray]:
    """Degree and betweenness of each node of an adjacency matrix."""
    graph = nx.from_numpy_array(np.asarray(A))
    n = graph.number_of_nodes()
    betweenness = nx.betweenness_centrality(graph)
    return {
        "degree": np.array([graph.degree(v) for v in range(n)], dtype=float),
        "betweenness": np.array([betweenness[v] for v in range(n)]),
    }


def group_summary(values, labels) -> Dict[str, Dict[str, float]]:
    """Mean and sample sd of values per group label, in first-seen label order."""
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    if values.shape[0] != labels.shape[0]:
        raise InvalidInputException("values and labels differ in length")
    summary = {}
    for label in dict.fromkeys(labels.tolist()):
        group = values[labels == label]
        summary[str(label)] = {
            "count": int(group.shape[0]),
            "mean": float(np.mean(group)),
            "sd": _sample_variance(group) ** 0.5,
        }
    return summary


def dyad_type_summary(summaries: Sequence[DyadSummary], primary, secondary) -> Dict[str, Dict[str, float]]:
    """
    Compare dyads tied in a primary network, tied only in a secondary one,
    and tied in neither, by mean posterior distance and distance variance.
    """
    primary = np.asarray(primary)
    secondary = np.asarray(secondary)
    classes: Dict[str, List[DyadSummary]] = {"primary": [], "secondary-only": [], "neither": []}
    for summary in summaries:
        if primary[summary.i, summary.j]:
            classes["primary"].append(summary)
        elif secondary[summary.i, summary.j]:
            classes["secondary-only"].append(summary)
        else:
            classes["neither"].append(summary)
    table = {}
    for name, members in classes.items():
        if not members:
            continue
        table[name] = {
            "count": len(members),
            "mean_distance": float(np.mean([s.mean_distance for s in members])),
            "mean_variance": float(np.mean([s.var_distance for s in members])),
        }
    return table
