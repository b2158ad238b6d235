"""
Sample Fréchet mean on the quotient of centered factors, its variation and
credible radius, plus the fixed-reference Procrustes means used as baselines.
"""
import logging
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, eigh

from quotient.common import (
    EIGEN_TOL,
    InvalidInputException,
    NumericalException,
    parallel_map,
    random_orthogonal,
)
from quotient.geometry import gram_of_factor, horizontal_project, procrustes_align, retract
from quotient.models import DrawSet, FrechetConfig, FrechetResult

logger = logging.getLogger(__name__)

ARMIJO_C = 1e-4


def _align_all(Y: np.ndarray, factors: np.ndarray, threads: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Align every draw to Y; returns the aligned stack and the quotient distances."""

    def align(factor):
        rotation, residual = procrustes_align(Y, factor)
        return factor @ rotation, residual

    results = parallel_map(align, factors, threads)
    aligned = np.stack([item[0] for item in results])
    distances = np.array([item[1] for item in results])
    return aligned, distances


def frechet_objective(Y, draws: DrawSet, threads: int = 1) -> float:
    """(1/M) Σ d²(Y, Y^(m))."""
    _, distances = _align_all(np.asarray(Y, dtype=float), draws.factors, threads)
    return float(np.mean(distances ** 2))


def pairwise_quotient_distances(draws: DrawSet) -> np.ndarray:
    """
    M×M table of quotient distances, one batched r×r SVD per row.
    Uses the closed form d² = ||Y1||² + ||Y2||² - 2 tr Σ.
    """
    factors = draws.factors
    norms_sq = np.einsum("mnr,mnr->m", factors, factors)
    table = np.zeros((draws.M, draws.M))
    for a in range(draws.M):
        cross = np.einsum("bnr,ns->brs", factors, factors[a])
        try:
            singular = np.linalg.svd(cross, compute_uv=False)
        except np.linalg.LinAlgError as e:
            raise NumericalException(f"Batched SVD failed for draw {a}: {str(e)}")
        squared = norms_sq[a] + norms_sq - 2.0 * singular.sum(axis=1)
        table[a] = np.sqrt(np.maximum(squared, 0.0))
    table = (table + table.T) / 2.0
    np.fill_diagonal(table, 0.0)
    return table


def quotient_medoid(draws: DrawSet) -> int:
    """Draw minimizing total squared quotient distance; smallest index wins ties."""
    if draws.M == 1:
        return 0
    totals = np.sum(pairwise_quotient_distances(draws) ** 2, axis=1)
    best = totals.min()
    ties = np.flatnonzero(totals <= best + 1e-12 * max(1.0, abs(best)))
    return int(ties[0])


def _mean_gram_factor(draws: DrawSet) -> Optional[np.ndarray]:
    """Rank-r factor of (1/M) Σ B^(m), or None when its r-th eigenvalue vanishes."""
    n, r = draws.n, draws.r
    mean_gram = np.einsum("mir,mjr->ij", draws.factors, draws.factors) / draws.M
    mean_gram = (mean_gram + mean_gram.T) / 2.0
    try:
        eigenvalues, vectors = eigh(mean_gram, subset_by_index=[n - r, n - 1])
    except LinAlgError as e:
        raise NumericalException(f"Eigendecomposition of the mean Gram matrix failed: {str(e)}")
    trace = float(np.trace(mean_gram))
    if trace <= 0.0 or eigenvalues[0] <= EIGEN_TOL * trace:
        return None
    order = np.argsort(eigenvalues)[::-1]
    factor = vectors[:, order] * np.sqrt(eigenvalues[order])
    return factor - factor.mean(axis=0, keepdims=True)


def _initial_factor(draws: DrawSet, config: FrechetConfig) -> Tuple[str, np.ndarray]:
    if config.init == "mean-gram-eigen":
        factor = _mean_gram_factor(draws)
        if factor is not None:
            return "mean-gram-eigen", factor
        index = quotient_medoid(draws)
        logger.warning(f"Mean Gram matrix is rank deficient; starting from medoid draw {index}")
        return f"medoid-{index}", draws.factors[index].copy()
    index = int(config.init)
    if not 0 <= index < draws.M:
        raise InvalidInputException(f"init draw index {index} out of range [0, {draws.M})")
    return f"draw-{index}", draws.factors[index].copy()


def _descend(factors: np.ndarray, start: np.ndarray, config: FrechetConfig):
    """
    Riemannian gradient descent with Armijo halving of the step.
    Returns (factor, iterations, converged, objective trace).
    """
    Y = start.copy()
    aligned, distances = _align_all(Y, factors, config.threads)
    objective = float(np.mean(distances ** 2))
    trace = [objective]
    converged = False
    iterations = 0

    for iterations in range(1, config.max_iterations + 1):
        Z = aligned.mean(axis=0) - Y
        Z_hor = horizontal_project(Y, Z)
        scale = max(1.0, float(np.linalg.norm(Y)))
        eta = config.step_size

        if np.linalg.norm(eta * Z_hor) < config.tolerance * scale:
            converged = True
            break

        # gradient of the objective is -2 Z_hor
        slope = 2.0 * float(np.sum(Z_hor * Z_hor))
        accepted = False
        for _ in range(config.max_halvings + 1):
            candidate = retract(Y, eta * Z_hor)
            c_aligned, c_distances = _align_all(candidate, factors, config.threads)
            c_objective = float(np.mean(c_distances ** 2))
            if not config.backtracking or c_objective <= objective - ARMIJO_C * eta * slope:
                accepted = True
                break
            eta *= 0.5

        if not accepted:
            # no measurable decrease left; stationary up to rounding
            converged = bool(np.linalg.norm(Z_hor) < np.sqrt(config.tolerance) * scale)
            logger.warning(
                f"Line search stalled at iteration {iterations} "
                f"(|Z_hor| = {np.linalg.norm(Z_hor):.3e})"
            )
            break

        Y, aligned, distances, objective = candidate, c_aligned, c_distances, c_objective
        trace.append(objective)

    return Y, iterations, converged, trace


def frechet_mean(draws: DrawSet, config: FrechetConfig = None) -> FrechetResult:
    """
    Sample Fréchet mean B̂_F = ŶŶᵀ of the draws under the quotient distance.

    Only a local minimizer is promised; with restarts > 0 extra starts from
    randomly chosen draws are tried and the lowest objective is kept.
    """
    config = config or FrechetConfig()
    if draws is None or draws.M < 1:
        raise InvalidInputException("Fréchet mean needs at least one draw")

    starts: List[Tuple[str, np.ndarray]] = [_initial_factor(draws, config)]
    if config.restarts:
        rng = np.random.default_rng(config.seed)
        picks = rng.choice(draws.M, size=min(config.restarts, draws.M), replace=False)
        starts.extend((f"draw-{int(k)}", draws.factors[int(k)].copy()) for k in picks)

    best = None
    start_objectives = []
    for label, start in starts:
        Y, iterations, converged, trace = _descend(draws.factors, start, config)
        start_objectives.append(trace[-1])
        logger.info(
            f"Fréchet start {label}: objective {trace[-1]:.6g} after {iterations} iterations "
            f"(converged={converged})"
        )
        if best is None or trace[-1] < best[4][-1]:
            best = (label, Y, iterations, converged, trace)

    label, Y, iterations, converged, trace = best
    if not converged:
        logger.warning(f"Fréchet mean did not converge in {config.max_iterations} iterations")

    _, distances = _align_all(Y, draws.factors, config.threads)
    return FrechetResult(
        mean_factor=Y,
        mean_gram=gram_of_factor(Y),
        variation=float(np.mean(distances ** 2)),
        iterations=iterations,
        converged=converged,
        per_draw_distances=distances,
        objective_trace=trace,
        start_objectives=start_objectives,
        init=label,
    )


def frechet_variation(result: FrechetResult) -> float:
    """(1/M) Σ d²(B̂_F, B^(m)), the attained minimum of the objective."""
    return float(np.mean(result.per_draw_distances ** 2))


def credible_radius(result: FrechetResult, level: float) -> float:
    """Radius of the intrinsic ball holding `level` of the draws (interpolated quantile)."""
    if not 0.0 < level <= 1.0:
        raise InvalidInputException(f"credible level must be in (0, 1], got {level}")
    return float(np.quantile(result.per_draw_distances, level))


def procrustes_mean(
    draws: DrawSet,
    reference: int,
    randomize_orientation: bool = False,
    seed: Union[int, np.random.SeedSequence] = 0,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Fixed-reference Procrustes mean: align every draw to one reference draw
    and average coordinates. Returns (aligned mean factor, its Gram).

    Orientation randomization right-multiplies each draw by an independent
    Haar rotation; it leaves every B^(m) unchanged.
    """
    if not 0 <= reference < draws.M:
        raise InvalidInputException(f"reference index {reference} out of range [0, {draws.M})")
    factors = draws.factors
    if randomize_orientation:
        rng = np.random.default_rng(seed)
        factors = np.stack([factor @ random_orthogonal(draws.r, rng) for factor in factors])
    target = factors[reference]
    aligned, _ = _align_all(target, factors)
    mean_factor = aligned.mean(axis=0)
    return mean_factor, gram_of_factor(mean_factor)
