"""
Centered Gram representation and quotient geometry of fixed-rank factors.

A configuration X (n×r) is identified with its centered Gram matrix
B = HXXᵀH. Factors Y with zero column sums represent B = YYᵀ up to
right-multiplication by O(r); every operation here works on factors and
never materializes the centering matrix H.
"""
import logging
from typing import NamedTuple, Tuple

import numpy as np
from scipy.linalg import LinAlgError, eigh, orthogonal_procrustes, svdvals

from quotient.common import (
    EIGEN_TOL,
    LYAPUNOV_TOL,
    RANK_TOL,
    SYMMETRY_TOL,
    InvalidInputException,
    NumericalException,
    RankDeficiencyException,
    as_finite_matrix,
)

logger = logging.getLogger(__name__)


class DoubleCentered(NamedTuple):
    """Result of classical MDS double centering."""

    gram: np.ndarray
    min_eigenvalue: float

    @property
    def is_euclidean(self) -> bool:
        scale = max(1.0, float(np.trace(self.gram)))
        return self.min_eigenvalue >= -EIGEN_TOL * scale


def validate_configuration(X) -> np.ndarray:
    X = as_finite_matrix(X, "configuration")
    n, r = X.shape
    if n < 2 or r < 1:
        raise InvalidInputException(f"configuration needs n >= 2 and r >= 1, got {X.shape}")
    return X


def is_centered(Y: np.ndarray) -> bool:
    n = Y.shape[0]
    scale = max(float(np.max(np.abs(Y), initial=0.0)), 1.0)
    return bool(np.all(np.abs(Y.sum(axis=0)) <= 1e-10 * n * scale))


def validate_factor(Y, name: str = "factor") -> np.ndarray:
    Y = as_finite_matrix(Y, name)
    if not is_centered(Y):
        raise InvalidInputException(f"{name} columns must sum to zero")
    return Y


def validate_gram(B, rank_bound: int = None) -> np.ndarray:
    """Check the GramMatrix invariants and return B as a float array."""
    B = as_finite_matrix(B, "gram matrix")
    n = B.shape[0]
    if B.shape != (n, n):
        raise InvalidInputException(f"gram matrix must be square, got {B.shape}")
    scale = max(1.0, float(np.max(np.abs(B), initial=0.0)))
    if np.max(np.abs(B - B.T), initial=0.0) > SYMMETRY_TOL * scale:
        raise InvalidInputException("gram matrix is not symmetric")
    if np.max(np.abs(B.sum(axis=1)), initial=0.0) > SYMMETRY_TOL * n * scale:
        raise InvalidInputException("gram matrix rows must sum to zero")
    eigenvalues = np.linalg.eigvalsh((B + B.T) / 2.0)
    trace = max(float(np.trace(B)), 0.0)
    if eigenvalues[0] < -EIGEN_TOL * max(trace, 1.0):
        raise InvalidInputException(
            f"gram matrix is not positive semidefinite (min eigenvalue {eigenvalues[0]:.3e})"
        )
    if rank_bound is not None:
        rank = int(np.sum(eigenvalues > EIGEN_TOL * trace)) if trace > 0 else 0
        if rank > rank_bound:
            raise InvalidInputException(f"gram matrix has rank {rank} > bound {rank_bound}")
    return B


def center_configuration(X) -> np.ndarray:
    """Subtract the column-means row; equivalent to HX without forming H."""
    X = validate_configuration(X)
    return X - X.mean(axis=0, keepdims=True)


def gram_of(X) -> np.ndarray:
    """Centered Gram matrix B = YYᵀ with symmetry enforced by averaging."""
    Y = center_configuration(X)
    B = Y @ Y.T
    return (B + B.T) / 2.0


def gram_of_factor(Y: np.ndarray) -> np.ndarray:
    B = Y @ Y.T
    return (B + B.T) / 2.0


def distances_from_gram(B, squared: bool = False) -> np.ndarray:
    """Pairwise (squared) distances B_ii + B_jj - 2B_ij, clamped at zero."""
    B = np.asarray(B, dtype=float)
    diag = np.diag(B)
    sq = diag[:, None] + diag[None, :] - 2.0 * B
    sq = np.maximum(sq, 0.0)
    np.fill_diagonal(sq, 0.0)
    sq = (sq + sq.T) / 2.0
    return sq if squared else np.sqrt(sq)


def gram_from_squared_distances(delta) -> DoubleCentered:
    """
    Classical MDS identity B = -1/2 H Δ H.

    Non-Euclidean Δ gives an indefinite B; it is returned as-is with its most
    negative eigenvalue so the caller can decide what to do.
    """
    delta = as_finite_matrix(delta, "squared distance matrix")
    n = delta.shape[0]
    if delta.shape != (n, n):
        raise InvalidInputException(f"squared distance matrix must be square, got {delta.shape}")
    row_means = delta.mean(axis=1, keepdims=True)
    col_means = delta.mean(axis=0, keepdims=True)
    B = -0.5 * (delta - row_means - col_means + delta.mean())
    B = (B + B.T) / 2.0
    min_eigenvalue = float(np.linalg.eigvalsh(B)[0])
    result = DoubleCentered(B, min_eigenvalue)
    if not result.is_euclidean:
        logger.warning(f"Squared distances are not Euclidean (min eigenvalue {min_eigenvalue:.3e})")
    return result


def _check_pair(Y1: np.ndarray, Y2: np.ndarray):
    if Y1.shape != Y2.shape:
        raise InvalidInputException(f"factor shapes differ ({Y1.shape} vs {Y2.shape})")


def procrustes_align(Y1, Y2) -> Tuple[np.ndarray, float]:
    """
    Rotation R minimizing ||Y1 - Y2 R||_F and the attained residual.

    R = UVᵀ from the SVD of Y2ᵀY1. When Y2ᵀY1 is rank deficient R is not
    unique; only the residual is.
    """
    Y1 = np.asarray(Y1, dtype=float)
    Y2 = np.asarray(Y2, dtype=float)
    _check_pair(Y1, Y2)
    try:
        rotation, _ = orthogonal_procrustes(Y2, Y1)
    except (LinAlgError, ValueError) as e:
        raise NumericalException(
            f"Procrustes SVD failed for shape {Y1.shape} "
            f"(norms {np.linalg.norm(Y1):.3e}, {np.linalg.norm(Y2):.3e}): {str(e)}"
        )
    residual = float(np.linalg.norm(Y1 - Y2 @ rotation))
    return rotation, residual


def quotient_distance(Y1, Y2) -> float:
    """min over R in O(r) of ||Y1 - Y2 R||_F."""
    return procrustes_align(Y1, Y2)[1]


def smallest_singular_ratio(Y: np.ndarray) -> float:
    values = svdvals(Y)
    if values[0] == 0.0:
        return 0.0
    return float(values[-1] / values[0])


def is_full_rank(Y: np.ndarray) -> bool:
    return smallest_singular_ratio(Y) > RANK_TOL


def require_full_rank(Y: np.ndarray, name: str = "factor"):
    ratio = smallest_singular_ratio(Y)
    if ratio <= RANK_TOL:
        raise RankDeficiencyException(
            f"{name} is rank deficient (sigma_min/sigma_max = {ratio:.3e}); "
            "the quotient is not smooth there",
            value=ratio,
        )


def solve_lyapunov(S, C) -> np.ndarray:
    """
    Skew-symmetric Ω with SΩ + ΩS = C for SPD S.

    Solved in the eigenbasis of S: (QᵀΩQ)_ij = (QᵀCQ)_ij / (λ_i + λ_j).
    """
    S = np.asarray(S, dtype=float)
    C = np.asarray(C, dtype=float)
    try:
        eigenvalues, Q = eigh((S + S.T) / 2.0)
    except LinAlgError as e:
        raise NumericalException(f"Eigendecomposition of Lyapunov operator failed: {str(e)}")
    trace = float(np.sum(eigenvalues))
    if trace <= 0.0 or eigenvalues[0] <= LYAPUNOV_TOL * trace:
        raise RankDeficiencyException(
            f"Lyapunov operator is near singular (smallest eigenvalue {eigenvalues[0]:.3e})",
            value=float(eigenvalues[0]),
        )
    C_rot = Q.T @ C @ Q
    omega_rot = C_rot / (eigenvalues[:, None] + eigenvalues[None, :])
    omega = Q @ omega_rot @ Q.T
    return (omega - omega.T) / 2.0


def horizontal_project(Y, Z) -> np.ndarray:
    """Remove the vertical component YΩ from Z so that Yᵀ(Z - YΩ) is symmetric."""
    Y = np.asarray(Y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    _check_pair(Y, Z)
    require_full_rank(Y, "base factor")
    S = Y.T @ Y
    YtZ = Y.T @ Z
    omega = solve_lyapunov(S, YtZ - YtZ.T)
    return Z - Y @ omega


def retract(Y, Z) -> np.ndarray:
    """Step Y + Z, then recenter."""
    Y = np.asarray(Y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    _check_pair(Y, Z)
    moved = Y + Z
    return moved - moved.mean(axis=0, keepdims=True)


def log_lift(Y1, Y2) -> np.ndarray:
    """
    Aligned difference Y2 R* - Y1, the tangent coordinate of Y2 at Y1.

    Its Frobenius norm equals the quotient distance on the rank-r stratum.
    """
    Y1 = np.asarray(Y1, dtype=float)
    rotation, _ = procrustes_align(Y1, Y2)
    difference = np.asarray(Y2, dtype=float) @ rotation - Y1
    # already horizontal in exact arithmetic
    return horizontal_project(Y1, difference)
