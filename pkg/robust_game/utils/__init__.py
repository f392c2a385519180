# robust_game/utils/__init__.py
import numpy as np

from robust_game.errors import ConfigurationError


def psd_sqrt(M: np.ndarray, clamp: float = 1e-10) -> np.ndarray:
    """
    Symmetric PSD square root via eigendecomposition.

    Eigenvalues in (-clamp, 0) are treated as rounding noise and set to zero.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    if w.min() < -clamp:
        raise ConfigurationError(f"Matrix is not positive semidefinite (min eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def spectral_abscissa(M: np.ndarray) -> float:
    """Largest real part among the eigenvalues of M."""
    return float(np.max(np.linalg.eigvals(np.atleast_2d(M)).real))


def is_hurwitz(M: np.ndarray, margin: float = 0.0) -> bool:
    return spectral_abscissa(M) < -margin


def numerical_rank(M: np.ndarray, rtol: float = 1e-8) -> int:
    """Rank with a singular-value cutoff relative to the largest singular value; complex input stays complex."""
    M = np.atleast_2d(np.asarray(M))
    if not np.iscomplexobj(M):
        M = M.astype(float)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def mask_columns(mask: np.ndarray) -> np.ndarray:
    """Indices of masked entries in the column-major vectorization of an nx x nx matrix."""
    return np.flatnonzero(np.asarray(mask, dtype=bool).flatten(order="F"))


def matrix_from_params(theta: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Place masked parameters back into a full matrix; unmasked entries are zero."""
    mask = np.asarray(mask, dtype=bool)
    flat = np.zeros(mask.size)
    flat[mask_columns(mask)] = np.asarray(theta, dtype=float).ravel()
    return flat.reshape(mask.shape, order="F")


def params_from_matrix(M: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Masked entries of M in column-major order."""
    return np.asarray(M, dtype=float).flatten(order="F")[mask_columns(mask)]
