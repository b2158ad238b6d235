"""Representative embeddings for plotting; nothing here feeds a summary."""
import numpy as np
from scipy.linalg import LinAlgError, eigh

from quotient.common import NumericalException
from quotient.geometry import procrustes_align, validate_factor
from quotient.models import DrawSet


def embed_mean(B, r: int) -> np.ndarray:
    """
    X̂ = U_r Λ_r^{1/2} from the top-r eigenpairs of B, negative eigenvalues
    clamped at zero, each column's largest-magnitude entry made positive.
    """
    B = np.asarray(B, dtype=float)
    n = B.shape[0]
    r = min(r, n)
    try:
        eigenvalues, vectors = eigh((B + B.T) / 2.0, subset_by_index=[n - r, n - 1])
    except LinAlgError as e:
        raise NumericalException(f"Eigendecomposition for embedding failed: {str(e)}")
    order = np.argsort(eigenvalues)[::-1]
    coordinates = vectors[:, order] * np.sqrt(np.maximum(eigenvalues[order], 0.0))
    pivots = np.argmax(np.abs(coordinates), axis=0)
    signs = np.sign(coordinates[pivots, np.arange(r)])
    signs[signs == 0] = 1.0
    return coordinates * signs


def align_for_display(draws: DrawSet, mean_factor) -> np.ndarray:
    """Y^(m) R*_m for every draw, shape (M, n, r)."""
    mean_factor = validate_factor(mean_factor, "mean factor")
    return np.stack([factor @ procrustes_align(mean_factor, factor)[0] for factor in draws.factors])
