import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

# Relative thresholds shared by the geometry, tangent and display code
RANK_TOL = 1e-10
EIGEN_TOL = 1e-10
SYMMETRY_TOL = 1e-10
LYAPUNOV_TOL = 1e-12

logger = logging.getLogger(__name__)


class QuotientException(Exception):
    """Base exception for quotient summary errors"""
    pass


class InvalidInputException(QuotientException):
    """Bad shapes, non-finite values, out-of-range parameters"""
    pass


class NumericalException(QuotientException):
    """Decomposition failures (SVD, eigendecomposition)"""
    pass


class RankDeficiencyException(NumericalException):
    """Factor or operator below the rank threshold"""

    def __init__(self, message: str, value: float = float("nan")):
        super().__init__(message)
        self.value = value


class CalibrationException(NumericalException):
    """Target density cannot be reached inside the bisection bracket"""
    pass


class FileFormatException(QuotientException):
    """Malformed draws, adjacency or matrix files"""
    pass


class OutputException(QuotientException):
    """Report or table could not be written"""
    pass


def as_finite_matrix(values, name: str = "matrix") -> np.ndarray:
    """
    Convert input to a 2-D float array and reject NaN/inf early.
    STRATEGY: Validate early, fail with clear error messages.
    """
    array = np.asarray(values, dtype=float)
    if array.ndim != 2:
        raise InvalidInputException(f"{name} must be 2-D, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise InvalidInputException(f"{name} contains non-finite entries")
    return array


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """
    Apply func to every item, optionally on a thread pool.

    Executor.map yields results in input order, so callers that stack the
    output and reduce along axis 0 get the same bits for any thread count.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(func, items))


def child_generators(seed: int, count: int) -> List[np.random.Generator]:
    """Independent generators derived deterministically from (seed, index)."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(child) for child in children]


def random_orthogonal(r: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed r×r orthogonal matrix (QR of a Gaussian with sign fix)."""
    q, upper = np.linalg.qr(rng.standard_normal((r, r)))
    return q * np.sign(np.diag(upper))
