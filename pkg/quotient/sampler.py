"""
Component-wise random-walk Metropolis sampler for the Euclidean latent
space model. It substitutes for external fitting software at desk scale;
it does not replicate any particular package's sampler.
"""
import logging
from typing import Optional

import networkx as nx
import numpy as np
from scipy.spatial.distance import pdist, squareform

from quotient.common import InvalidInputException, as_finite_matrix
from quotient.links import LinkFunction
from quotient.models import DrawSet, SamplerConfig, SamplerResult
from quotient.simulation import validate_adjacency

logger = logging.getLogger(__name__)


def _dyad_log_likelihood(edges: np.ndarray, eta: np.ndarray, link: LinkFunction) -> float:
    return float(np.sum(np.where(edges == 1, link.log_prob(eta), link.log_one_minus(eta))))


def log_posterior(X, alpha: float, A, config: SamplerConfig, link: Optional[LinkFunction] = None) -> float:
    """
    Σ_{i<j} [A_ij log g(alpha - d_ij) + (1 - A_ij) log(1 - g(alpha - d_ij))]
    plus Gaussian log-priors on every coordinate and on alpha, dropping
    their normalizing constants.
    """
    X = as_finite_matrix(X, "configuration")
    A = validate_adjacency(A)
    if X.shape[0] != A.shape[0]:
        raise InvalidInputException(f"configuration has {X.shape[0]} rows, adjacency has {A.shape[0]}")
    link = link or LinkFunction(kind=config.link)
    upper = np.triu_indices(A.shape[0], 1)
    likelihood = _dyad_log_likelihood(A[upper], alpha - pdist(X), link)
    prior = -0.5 * float(np.sum(X * X)) / config.prior_sd_position ** 2
    prior -= 0.5 * ((alpha - config.prior_mean_alpha) / config.prior_sd_alpha) ** 2
    return likelihood + prior


def _initial_positions(A: np.ndarray, r: int, rng: np.random.Generator) -> np.ndarray:
    """Classical MDS of shortest-path lengths, jittered; unreachable pairs get max + 1."""
    n = A.shape[0]
    paths = nx.floyd_warshall_numpy(nx.from_numpy_array(A))
    finite = np.isfinite(paths)
    longest = float(np.max(paths[finite])) if np.any(finite) else 1.0
    paths = np.where(finite, paths, longest + 1.0)
    squared = paths ** 2
    B = -0.5 * (squared - squared.mean(axis=0) - squared.mean(axis=1)[:, None] + squared.mean())
    eigenvalues, vectors = np.linalg.eigh((B + B.T) / 2.0)
    top = np.argsort(eigenvalues)[::-1][:r]
    X = vectors[:, top] * np.sqrt(np.maximum(eigenvalues[top], 0.0))
    if X.shape[1] < r:
        X = np.hstack([X, np.zeros((n, r - X.shape[1]))])
    return X + 0.1 * rng.standard_normal((n, r))


def mh_sample(
    A,
    r: int,
    config: SamplerConfig = None,
    link: Optional[LinkFunction] = None,
    initial_positions=None,
) -> SamplerResult:
    """
    Each sweep proposes a Gaussian move for every node in turn, then one
    alpha move (unless alpha is fixed). After burn_in sweeps every thin-th
    state is kept, centered, until `draws` states are stored.
    """
    config = config or SamplerConfig()
    A = validate_adjacency(A)
    if r < 1:
        raise InvalidInputException(f"latent dimension must be >= 1, got {r}")
    link = link or LinkFunction(kind=config.link)
    n = A.shape[0]
    rng = np.random.default_rng(config.seed)

    if initial_positions is not None:
        X = as_finite_matrix(initial_positions, "initial positions").copy()
        if X.shape != (n, r):
            raise InvalidInputException(f"initial positions must have shape ({n}, {r})")
    else:
        X = _initial_positions(A, r, rng)
    alpha_free = config.fixed_alpha is None
    alpha = config.prior_mean_alpha if alpha_free else float(config.fixed_alpha)

    D = squareform(pdist(X))
    upper = np.triu_indices(n, 1)
    edges_upper = A[upper]
    precision_x = 1.0 / config.prior_sd_position ** 2
    precision_alpha = 1.0 / config.prior_sd_alpha ** 2
    others = [np.arange(n) != i for i in range(n)]

    total_sweeps = config.burn_in + config.thin * config.draws
    factors = np.empty((config.draws, n, r))
    intercepts = np.empty(config.draws)
    trace = []
    accepted_x = 0
    accepted_alpha = 0
    kept = 0

    for sweep in range(total_sweeps):
        for i in range(n):
            proposal = X[i] + config.proposal_sd_position * rng.standard_normal(r)
            mask = others[i]
            new_row = np.sqrt(np.sum((X - proposal) ** 2, axis=1))
            edges = A[i, mask]
            delta = _dyad_log_likelihood(edges, alpha - new_row[mask], link)
            delta -= _dyad_log_likelihood(edges, alpha - D[i, mask], link)
            delta -= 0.5 * precision_x * (proposal @ proposal - X[i] @ X[i])
            if np.log(rng.random()) < delta:
                X[i] = proposal
                new_row[i] = 0.0
                D[i, :] = new_row
                D[:, i] = new_row
                accepted_x += 1

        if alpha_free:
            proposal_alpha = alpha + config.proposal_sd_alpha * rng.standard_normal()
            distances = D[upper]
            delta = _dyad_log_likelihood(edges_upper, proposal_alpha - distances, link)
            delta -= _dyad_log_likelihood(edges_upper, alpha - distances, link)
            delta -= 0.5 * precision_alpha * (
                (proposal_alpha - config.prior_mean_alpha) ** 2 - (alpha - config.prior_mean_alpha) ** 2
            )
            if np.log(rng.random()) < delta:
                alpha = proposal_alpha
                accepted_alpha += 1

        if sweep >= config.burn_in and (sweep - config.burn_in + 1) % config.thin == 0:
            factors[kept] = X - X.mean(axis=0, keepdims=True)
            intercepts[kept] = alpha
            trace.append(log_posterior(X, alpha, A, config, link))
            kept += 1

    rate_x = accepted_x / (total_sweeps * n) if total_sweeps else 0.0
    rate_alpha = (accepted_alpha / total_sweeps if total_sweeps else 0.0) if alpha_free else None
    logger.info(
        f"✅ Sampled {kept} draws (n={n}, r={r}); acceptance positions {rate_x:.3f}"
        + (f", alpha {rate_alpha:.3f}" if rate_alpha is not None else "")
    )
    return SamplerResult(
        draws=DrawSet.build(factors, intercepts),
        acceptance_position=rate_x,
        acceptance_alpha=rate_alpha,
        log_posterior_trace=trace,
        seed=config.seed,
    )
