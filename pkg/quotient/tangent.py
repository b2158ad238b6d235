"""
Second-order posterior analysis at the Fréchet mean: tangent residuals,
their empirical covariance, principal directions and delta-method
variances of dyad distances.
"""
import logging
from typing import List, Tuple

import numpy as np
from scipy.linalg import LinAlgError, eigh

from quotient.common import EIGEN_TOL, InvalidInputException, NumericalException, parallel_map
from quotient.geometry import horizontal_project, is_full_rank, log_lift, require_full_rank, validate_factor
from quotient.models import DeltaVariance, DrawSet, TangentCovariance, TangentSample

logger = logging.getLogger(__name__)


def degenerate_distance_threshold(base: np.ndarray) -> float:
    """δ_D = 1e-8 · sqrt(trace(B̂)/n)."""
    n = base.shape[0]
    return 1e-8 * float(np.sqrt(np.sum(base * base) / n))


def tangent_residuals(base, draws: DrawSet, threads: int = 1) -> TangentSample:
    """Log lifts of every full-rank draw at the base factor."""
    base = validate_factor(base, "base factor")
    require_full_rank(base, "base factor")
    if base.shape != (draws.n, draws.r):
        raise InvalidInputException(f"base shape {base.shape} does not match draws ({draws.n}, {draws.r})")

    def lift(index):
        factor = draws.factors[index]
        if not is_full_rank(factor):
            return None
        return log_lift(base, factor)

    lifted = parallel_map(lift, range(draws.M), threads)
    retained = [m for m, residual in enumerate(lifted) if residual is not None]
    excluded = draws.M - len(retained)
    if excluded:
        logger.warning(f"Excluded {excluded} rank-deficient draws from the tangent sample")
    residuals = (
        np.stack([lifted[m] for m in retained])
        if retained
        else np.zeros((0, draws.n, draws.r))
    )
    return TangentSample(base=base, residuals=residuals, retained=retained, excluded=excluded)


def _sign_convention(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so each one's largest-magnitude entry is positive."""
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def tangent_covariance(sample: TangentSample) -> TangentCovariance:
    """Σ̂ = (1/(M-1)) Σ vec(ξ) vec(ξ)ᵀ in factor coordinates, with its eigensystem."""
    if sample.M < 2:
        raise InvalidInputException(f"tangent covariance needs at least 2 residuals, got {sample.M}")
    n, r = sample.base.shape
    vectors = sample.residuals.reshape(sample.M, n * r)
    matrix = vectors.T @ vectors / (sample.M - 1)
    matrix = (matrix + matrix.T) / 2.0
    try:
        eigenvalues, eigenvectors = eigh(matrix)
    except LinAlgError as e:
        raise NumericalException(f"Eigendecomposition of tangent covariance failed: {str(e)}")
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.maximum(eigenvalues[order], 0.0)
    eigenvectors = _sign_convention(eigenvectors[:, order])
    return TangentCovariance(
        base=sample.base,
        matrix=matrix,
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        effective_dim=n * r - r * (r + 1) // 2,
    )


def significant_rank(cov: TangentCovariance) -> int:
    trace = float(np.sum(cov.eigenvalues))
    if trace <= 0.0:
        return 0
    return int(np.sum(cov.eigenvalues > EIGEN_TOL * trace))


def principal_directions(cov: TangentCovariance, k: int) -> List[Tuple[float, np.ndarray]]:
    """Top-k (eigenvalue, n×r horizontal tangent) pairs."""
    n, r = cov.base.shape
    if not 1 <= k <= n * r:
        raise InvalidInputException(f"k must be in [1, {n * r}], got {k}")
    directions = []
    for index in range(k):
        tangent = cov.eigenvectors[:, index].reshape(n, r)
        directions.append((float(cov.eigenvalues[index]), horizontal_project(cov.base, tangent)))
    return directions


def _linearized_squared_distance(sample: TangentSample, i: int, j: int) -> np.ndarray:
    """dD²_ij[E(ξ)] = E_ii + E_jj - 2E_ij with E(ξ) = ξŶᵀ + Ŷξᵀ, one value per residual."""
    base = sample.base
    xi_i = sample.residuals[:, i, :]
    xi_j = sample.residuals[:, j, :]
    e_ii = 2.0 * xi_i @ base[i]
    e_jj = 2.0 * xi_j @ base[j]
    e_ij = xi_i @ base[j] + xi_j @ base[i]
    return e_ii + e_jj - 2.0 * e_ij


def delta_variance_distance(sample: TangentSample, i: int, j: int) -> DeltaVariance:
    """
    ∇D_ijᵀ Σ̂ ∇D_ij evaluated as (1/(M-1)) Σ ℓ(ξ)² over residuals.

    When D_ij(B̂_F) is at or below δ_D the linearization is taken on D²_ij
    instead and the result is flagged as squared-scale.
    """
    n = sample.base.shape[0]
    if i == j:
        raise InvalidInputException("delta variance needs two distinct nodes")
    if not (0 <= i < n and 0 <= j < n):
        raise InvalidInputException(f"node indices ({i}, {j}) out of range for n = {n}")
    if sample.M < 2:
        raise InvalidInputException("delta variance needs at least 2 residuals")

    difference = sample.base[i] - sample.base[j]
    distance = float(np.sqrt(difference @ difference))
    linear = _linearized_squared_distance(sample, i, j)
    squared_scale = distance <= degenerate_distance_threshold(sample.base)
    if squared_scale:
        logger.warning(f"Dyad ({i}, {j}) is degenerate at the mean; using the squared-distance scale")
    else:
        linear = linear / (2.0 * distance)
    variance = float(np.sum(linear ** 2) / (sample.M - 1))
    return DeltaVariance(i=i, j=j, variance=variance, squared_scale=squared_scale)


def delta_variance_matrix(sample: TangentSample) -> Tuple[np.ndarray, np.ndarray]:
    """
    Delta-method variances for all dyads at once.
    Returns (n×n variance matrix, n×n squared-scale mask).
    """
    if sample.M < 2:
        raise InvalidInputException("delta variance needs at least 2 residuals")
    base = sample.base
    n = base.shape[0]
    diffs = base[:, None, :] - base[None, :, :]
    distances = np.sqrt(np.sum(diffs ** 2, axis=2))
    squared_scale = distances <= degenerate_distance_threshold(base)
    np.fill_diagonal(squared_scale, False)
    denominator = np.where(squared_scale, 1.0, 2.0 * distances)
    np.fill_diagonal(denominator, 1.0)

    accumulated = np.zeros((n, n))
    for xi in sample.residuals:
        inner = xi @ base.T
        E = inner + inner.T
        diag = np.diag(E)
        linear = (diag[:, None] + diag[None, :] - 2.0 * E) / denominator
        accumulated += linear ** 2
    variance = accumulated / (sample.M - 1)
    np.fill_diagonal(variance, 0.0)
    if np.any(squared_scale):
        logger.warning(f"{int(np.sum(squared_scale)) // 2} dyads use the squared-distance scale")
    return variance, squared_scale
