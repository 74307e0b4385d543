"""
Dense matrix and tensor helpers shared by the factorization solvers.

Ordering conventions:
    khatri_rao(A, B)[i * B.shape[0] + n, j] == A[i, j] * B[n, j]
    mode_unfold(T, m) moves mode m to the front and flattens the rest in
    C order, so for T built from factors (W, B, C):
        mode_unfold(T, 0) == W @ khatri_rao(B, C).T
        mode_unfold(T, 1) == B @ khatri_rao(W, C).T
        mode_unfold(T, 2) == C @ khatri_rao(W, B).T
"""

import numpy as np

from src.core.exceptions import FactorizationError


def frobenius_norm(X) -> float:
    """sqrt of the sum of squared entries of a matrix or tensor."""
    return float(np.linalg.norm(np.asarray(X, dtype=float).ravel()))


def khatri_rao(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product of an (M x K) and an (N x K) matrix."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or B.ndim != 2:
        raise FactorizationError(f"khatri_rao needs matrices, got shapes {A.shape} and {B.shape}")
    if A.shape[1] != B.shape[1]:
        raise FactorizationError(
            f"khatri_rao column mismatch: {A.shape[1]} vs {B.shape[1]}",
            shape=(A.shape, B.shape),
        )
    return np.einsum("ik,nk->ink", A, B).reshape(A.shape[0] * B.shape[0], A.shape[1])


def mode_unfold(T: np.ndarray, mode: int) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    if T.ndim != 3 or mode not in (0, 1, 2):
        raise FactorizationError(f"invalid mode {mode} for tensor of shape {T.shape}")
    return np.moveaxis(T, mode, 0).reshape(T.shape[mode], -1)


def reconstruct_tensor(W: np.ndarray, L_M: np.ndarray, L_P: np.ndarray) -> np.ndarray:
    """Sum of rank-1 terms W[:, r] o L_M[r] o L_P[r]."""
    return np.einsum("ir,rj,rl->ijl", W, L_M, L_P)


def fit(T: np.ndarray, T_hat: np.ndarray) -> float:
    """1 - ||T - T_hat|| / ||T||; 1.0 for a zero tensor reproduced exactly."""
    norm = frobenius_norm(T)
    residual = frobenius_norm(np.asarray(T, dtype=float) - T_hat)
    if norm == 0.0:
        return 1.0 if residual == 0.0 else 0.0
    return 1.0 - residual / norm


def minmax_normalize(rows: np.ndarray) -> np.ndarray:
    """
    Map each row to [0, 1] with (x - min) / (max - min).

    Constant rows map to zeros.
    """
    X = np.atleast_2d(np.asarray(rows, dtype=float))
    lo = X.min(axis=1, keepdims=True)
    span = X.max(axis=1, keepdims=True) - lo
    out = np.zeros_like(X)
    np.divide(X - lo, span, out=out, where=span > 0)
    return out.reshape(np.shape(rows))
