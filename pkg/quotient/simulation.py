"""Three-group latent templates, intercept calibration and graph simulation."""
import logging
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import bisect
from scipy.spatial.distance import pdist

from quotient.common import CalibrationException, InvalidInputException
from quotient.geometry import validate_configuration
from quotient.links import LinkFunction
from quotient.models import SimulationSpec

logger = logging.getLogger(__name__)

GROUP_LABELS = ("L", "B", "R")
ALPHA_BRACKET = (-50.0, 50.0)


def validate_adjacency(A) -> np.ndarray:
    """Symmetric 0/1 matrix with zero diagonal."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 2:
        raise InvalidInputException(f"adjacency must be square with n >= 2, got shape {A.shape}")
    if not np.all((A == 0) | (A == 1)):
        raise InvalidInputException("adjacency entries must be 0 or 1")
    if not np.array_equal(A, A.T):
        raise InvalidInputException("adjacency must be symmetric")
    if np.any(np.diag(A) != 0):
        raise InvalidInputException("adjacency must have a zero diagonal (no self-loops)")
    return A.astype(np.int8)


def simulate_template(spec: SimulationSpec, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """x_i ~ Normal(mu_g, sigma_g² I_2), nodes ordered L-block, B-block, R-block."""
    rng = np.random.default_rng(seed)
    blocks = []
    labels = []
    for label, size, mean, sd in zip(GROUP_LABELS, spec.group_sizes, spec.group_means, spec.group_sds):
        blocks.append(np.asarray(mean) + sd * rng.standard_normal((size, 2)))
        labels.extend([label] * size)
    return np.vstack(blocks), np.array(labels)


def expected_density(X, alpha: float, link: Optional[LinkFunction] = None) -> float:
    """(2/(n(n-1))) Σ_{i<j} g(alpha - d_ij)."""
    link = link or LinkFunction()
    return float(np.mean(link(alpha - pdist(np.asarray(X, dtype=float)))))


def calibrate_intercept(
    X,
    target_density: float,
    link: Optional[LinkFunction] = None,
    bracket: Tuple[float, float] = ALPHA_BRACKET,
) -> float:
    """
    Solve expected_density(X, alpha) = target by bisection.
    The density is continuous and strictly increasing in alpha.
    """
    if not 0.0 < target_density < 1.0:
        raise InvalidInputException(f"target density must be in (0, 1), got {target_density}")
    X = validate_configuration(X)
    link = link or LinkFunction()
    distances = pdist(X)

    def gap(alpha):
        return float(np.mean(link(alpha - distances))) - target_density

    lo, hi = bracket
    if gap(lo) > 0 or gap(hi) < 0:
        raise CalibrationException(
            f"target density {target_density} not reachable for alpha in [{lo}, {hi}]"
        )
    alpha = bisect(gap, lo, hi, xtol=1e-13, rtol=8.9e-16, maxiter=500)
    logger.info(f"Calibrated alpha* = {alpha:.10g} for density {target_density}")
    return float(alpha)


def simulate_graph(X, alpha: float, link: Optional[LinkFunction] = None, seed: int = 0) -> np.ndarray:
    """Independent Bernoulli(g(alpha - d_ij)) edges over i < j."""
    X = validate_configuration(X)
    link = link or LinkFunction()
    n = X.shape[0]
    upper = np.triu_indices(n, 1)
    probabilities = link(alpha - pdist(X))
    rng = np.random.default_rng(seed)
    A = np.zeros((n, n), dtype=np.int8)
    A[upper] = rng.random(probabilities.shape[0]) < probabilities
    return A + A.T
