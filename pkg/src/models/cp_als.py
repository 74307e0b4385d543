"""
CP decomposition of third-order activity tensors by alternating least squares

T (users x time x categories) ~= sum_r W[:, r] o L_M[r] o L_P[r]. Each sweep
solves the three least-squares subproblems in the order L_P, W, L_M through
their Khatri-Rao normal equations. The factors are unconstrained.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.core.exceptions import FactorizationError

from .nmf import component_names, read_labelled_csv
from .tensor_ops import frobenius_norm, khatri_rao, mode_unfold, reconstruct_tensor

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-5
DEFAULT_MAX_ITER = 200
# Singular values below this fraction of the largest are treated as zero
PINV_RTOL = 1e-10

InitMode = Literal["random", "singular_vector"]
INIT_MODES = ("random", "singular_vector")


@dataclass
class ActivityTensor:
    """User x time bucket x category counts."""

    values: np.ndarray
    user_keys: List[str]
    time_labels: List[str]
    category_labels: List[str]
    time_mode: str = "hour24"
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (len(self.user_keys), len(self.time_labels), len(self.category_labels))
        if self.values.shape != expected:
            raise FactorizationError(
                f"tensor shape {self.values.shape} does not match labels {expected}",
                shape=self.values.shape,
            )
        if np.any(self.values < 0):
            raise FactorizationError("activity tensor entries must be non-negative")

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.values.shape  # type: ignore[return-value]


@dataclass
class TensorFactorModel:
    """CP factors W (N x k), L_M (k x M), L_P (k x P) and the per-sweep error trace."""

    W: np.ndarray
    L_M: np.ndarray
    L_P: np.ndarray
    k: int
    fit_trace: List[float]
    seed: Optional[int]
    init_mode: str
    iterations: int
    tol: float = DEFAULT_TOL
    relative_tol: bool = False
    converged: bool = False
    tensor_norm: float = 0.0
    user_keys: List[str] = field(default_factory=list)
    time_labels: List[str] = field(default_factory=list)
    category_labels: List[str] = field(default_factory=list)

    @property
    def error(self) -> float:
        return self.fit_trace[-1]

    @property
    def relative_error(self) -> float:
        return self.error / self.tensor_norm if self.tensor_norm > 0 else self.error

    @property
    def fit(self) -> float:
        return 1.0 - self.relative_error

    def reconstruct(self) -> np.ndarray:
        return reconstruct_tensor(self.W, self.L_M, self.L_P)

    def meta(self) -> Dict[str, Any]:
        return {
            "model": "cp_als",
            "k": self.k,
            "tol": self.tol,
            "relative_tol": self.relative_tol,
            "seed": self.seed,
            "init": self.init_mode,
            "iterations": self.iterations,
            "converged": self.converged,
            "tensor_norm": self.tensor_norm,
            "final_error": self.error,
            "fit": self.fit,
            "fit_trace": self.fit_trace,
        }

    def save(self, directory: Union[str, Path]) -> Path:
        """Write W.csv, L_M.csv, L_P.csv and meta.json."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        names = component_names(self.k)

        def labels(given: List[str], n: int) -> List[str]:
            return given or [str(i) for i in range(n)]

        W = pd.DataFrame(self.W, index=labels(self.user_keys, self.W.shape[0]), columns=names)
        W.index.name = "user_id"
        W.to_csv(directory / "W.csv")
        for name, matrix, cols in (
            ("L_M", self.L_M, labels(self.time_labels, self.L_M.shape[1])),
            ("L_P", self.L_P, labels(self.category_labels, self.L_P.shape[1])),
        ):
            frame = pd.DataFrame(matrix, index=names, columns=cols)
            frame.index.name = "component"
            frame.to_csv(directory / f"{name}.csv")
        with open(directory / "meta.json", "w", encoding="utf-8") as f:
            json.dump(self.meta(), f, indent=2)
        return directory

    @classmethod
    def load(cls, directory: Union[str, Path]) -> "TensorFactorModel":
        directory = Path(directory)
        W = read_labelled_csv(directory / "W.csv")
        L_M = read_labelled_csv(directory / "L_M.csv")
        L_P = read_labelled_csv(directory / "L_P.csv")
        with open(directory / "meta.json", "r", encoding="utf-8") as f:
            meta = json.load(f)
        return cls(
            W=W.to_numpy(dtype=float),
            L_M=L_M.to_numpy(dtype=float),
            L_P=L_P.to_numpy(dtype=float),
            k=int(meta["k"]),
            fit_trace=[float(v) for v in meta["fit_trace"]],
            seed=meta.get("seed"),
            init_mode=meta["init"],
            iterations=int(meta["iterations"]),
            tol=float(meta["tol"]),
            relative_tol=bool(meta.get("relative_tol", False)),
            converged=bool(meta.get("converged", False)),
            tensor_norm=float(meta.get("tensor_norm", 0.0)),
            user_keys=[str(i) for i in W.index],
            time_labels=[str(c) for c in L_M.columns],
            category_labels=[str(c) for c in L_P.columns],
        )


def _solve(unfolded: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Least-squares factor for unfolded ~= X @ khatri_rao(A, B).T."""
    gram = (A.T @ A) * (B.T @ B)
    return unfolded @ khatri_rao(A, B) @ np.linalg.pinv(gram, rtol=PINV_RTOL, hermitian=True)


def _initial_factors(T: np.ndarray, k: int, init: str, rng: np.random.Generator):
    if init == "random":
        return tuple(rng.random((dim, k)) for dim in T.shape)
    factors = []
    for mode in range(3):
        U, _, _ = np.linalg.svd(mode_unfold(T, mode), full_matrices=False)
        factors.append(np.abs(U[:, :k]))
    return tuple(factors)


def _canonicalize(W: np.ndarray, B: np.ndarray, C: np.ndarray):
    """Unit-norm time/category factors with positive mass, components by descending norm of W."""
    for factor in (B, C):
        norms = np.linalg.norm(factor, axis=0)
        norms[norms == 0] = 1.0
        factor /= norms
        W *= norms
        signs = np.where(factor.sum(axis=0) < 0, -1.0, 1.0)
        factor *= signs
        W *= signs
    order = np.argsort(-np.linalg.norm(W, axis=0), kind="stable")
    return W[:, order], B[:, order], C[:, order]


def cp_als(T: Union[ActivityTensor, np.ndarray], k: int, tol: float = DEFAULT_TOL,
           max_iter: int = DEFAULT_MAX_ITER, init: InitMode = "singular_vector",
           seed: Optional[int] = None, relative_tol: bool = False) -> TensorFactorModel:
    """
    Rank-k CP decomposition by alternating least squares.

    Args:
        T: activity tensor or a bare 3-D array
        k: number of components, 2 <= k <= min(N, M, P)
        tol: stop once a sweep improves the residual norm by less than this
        max_iter: sweep cap
        init: 'random' (seeded uniform) or 'singular_vector' (|leading left
            singular vectors| of each unfolding)
        seed: seed for the random initialisation
        relative_tol: measure the improvement relative to ||T||

    Returns:
        TensorFactorModel; fit_trace[0] is the error of the initial factors

    Raises:
        FactorizationError: k out of range, bad init mode or non 3-D input
    """
    if isinstance(T, ActivityTensor):
        tensor = T
    else:
        values = np.asarray(T, dtype=float)
        if values.ndim != 3:
            raise FactorizationError(f"cp_als needs a 3-D tensor, got shape {values.shape}")
        tensor = ActivityTensor(
            values,
            [str(i) for i in range(values.shape[0])],
            [str(j) for j in range(values.shape[1])],
            [str(p) for p in range(values.shape[2])],
        )
    values = tensor.values
    N, M, P = values.shape
    if not isinstance(k, (int, np.integer)) or not 2 <= k <= min(N, M, P):
        raise FactorizationError(
            f"k must be in [2, {min(N, M, P)}], got {k}", k=k, shape=(N, M, P)
        )
    if init not in INIT_MODES:
        raise FactorizationError(f"init must be one of {INIT_MODES}, got {init!r}")

    norm_T = frobenius_norm(values)

    def model(W, B, C, trace, iterations, converged):
        return TensorFactorModel(
            W=W, L_M=B.T.copy(), L_P=C.T.copy(), k=int(k), fit_trace=trace, seed=seed,
            init_mode=init, iterations=iterations, tol=tol, relative_tol=relative_tol,
            converged=converged, tensor_norm=norm_T, user_keys=list(tensor.user_keys),
            time_labels=list(tensor.time_labels), category_labels=list(tensor.category_labels),
        )

    if norm_T == 0.0:
        logger.info("CP input tensor is all-zero; returning zero factors")
        return model(np.zeros((N, k)), np.zeros((M, k)), np.zeros((P, k)), [0.0], 0, True)

    rng = np.random.default_rng(seed)
    W, B, C = _initial_factors(values, k, init, rng)
    unfolded = [mode_unfold(values, mode) for mode in range(3)]

    trace = [frobenius_norm(values - reconstruct_tensor(W, B.T, C.T))]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        C = _solve(unfolded[2], W, B)
        W = _solve(unfolded[0], B, C)
        B = _solve(unfolded[1], W, C)

        error = frobenius_norm(values - reconstruct_tensor(W, B.T, C.T))
        improvement = trace[-1] - error
        trace.append(error)
        if relative_tol:
            improvement /= norm_T
        if improvement < tol:
            converged = True
            break

    W, B, C = _canonicalize(W, B, C)
    logger.info(
        f"CP-ALS k={k} ({init}) on {N}x{M}x{P}: fit {1.0 - trace[-1] / norm_T:.5f} "
        f"after {iterations} sweeps{'' if converged else ' (max_iter reached)'}"
    )
    return model(W, B, C, trace, iterations, converged)


def rank_sweep(T: Union[ActivityTensor, np.ndarray], ks: Iterable[int],
               **kwargs) -> Dict[int, TensorFactorModel]:
    """Fit one CP model per candidate k."""
    return {int(k): cp_als(T, int(k), **kwargs) for k in ks}
