"""
Non-negative matrix factorization for user activity matrices

A (users x dimensions) is approximated by W L with W, L >= 0, minimising
0.5 * ||A - W L||_F^2 with Lee-Seung multiplicative updates. Rows of L are
latent lifestyles (profiles over hours or categories); rows of W are the
per-user weights on those lifestyles.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import numpy as np
import pandas as pd

from src.core.exceptions import FactorizationError

from .tensor_ops import frobenius_norm

logger = logging.getLogger(__name__)

EPSILON = 1e-12
DEFAULT_TOL = 1e-5
DEFAULT_MAX_ITER = 500


def component_names(k: int) -> List[str]:
    return [f"component_{r}" for r in range(k)]


def read_labelled_csv(path: Union[str, Path]) -> pd.DataFrame:
    """Read a CSV whose first column holds string labels (ids keep leading zeros)."""
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    return frame.set_index(frame.columns[0])


@dataclass
class ActivityMatrix:
    """User x dimension count matrix with its row keys and column labels."""

    values: np.ndarray
    row_keys: List[str]
    col_labels: List[str]
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.row_keys = [str(r) for r in self.row_keys]
        self.col_labels = [str(c) for c in self.col_labels]
        if self.values.ndim != 2:
            raise FactorizationError(f"activity matrix must be 2-D, got shape {self.values.shape}")
        if self.values.shape != (len(self.row_keys), len(self.col_labels)):
            raise FactorizationError(
                f"shape {self.values.shape} does not match {len(self.row_keys)} rows "
                f"x {len(self.col_labels)} labels",
                shape=self.values.shape,
            )
        if len(set(self.row_keys)) != len(self.row_keys):
            raise FactorizationError("row keys must be unique")
        if len(set(self.col_labels)) != len(self.col_labels):
            raise FactorizationError("column labels must be unique")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise FactorizationError("activity matrix entries must be finite and non-negative")

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def M(self) -> int:
        return self.values.shape[1]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, index=self.row_keys, columns=self.col_labels)
        frame.index.name = "user_id"
        return frame

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path)

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "ActivityMatrix":
        frame = read_labelled_csv(path)
        return cls(
            values=frame.to_numpy(dtype=float),
            row_keys=[str(i) for i in frame.index],
            col_labels=[str(c) for c in frame.columns],
            provenance={"source": str(path)},
        )


@dataclass
class FactorModel:
    """NMF output: A ~= W @ L, components sorted by descending norm of W's columns."""

    W: np.ndarray
    L: np.ndarray
    k: int
    objective_trace: List[float]
    seed: Optional[int]
    iterations: int
    tol: float = DEFAULT_TOL
    converged: bool = False
    row_keys: List[str] = field(default_factory=list)
    col_labels: List[str] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    def reconstruct(self) -> np.ndarray:
        return self.W @ self.L

    def relative_error(self, A: Union[ActivityMatrix, np.ndarray]) -> float:
        values = A.values if isinstance(A, ActivityMatrix) else np.asarray(A, dtype=float)
        norm = frobenius_norm(values)
        residual = frobenius_norm(values - self.reconstruct())
        return residual / norm if norm > 0 else residual

    def meta(self) -> Dict[str, Any]:
        return {
            "model": "nmf",
            "k": self.k,
            "tol": self.tol,
            "seed": self.seed,
            "iterations": self.iterations,
            "converged": self.converged,
            "final_objective": self.objective,
            "objective_trace": self.objective_trace,
        }

    def save(self, directory: Union[str, Path]) -> Path:
        """Write W.csv, L.csv and meta.json."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        names = component_names(self.k)
        rows = self.row_keys or [str(i) for i in range(self.W.shape[0])]
        cols = self.col_labels or [str(j) for j in range(self.L.shape[1])]

        W = pd.DataFrame(self.W, index=rows, columns=names)
        W.index.name = "user_id"
        W.to_csv(directory / "W.csv")
        L = pd.DataFrame(self.L, index=names, columns=cols)
        L.index.name = "component"
        L.to_csv(directory / "L.csv")
        with open(directory / "meta.json", "w", encoding="utf-8") as f:
            json.dump(self.meta(), f, indent=2)
        return directory

    @classmethod
    def load(cls, directory: Union[str, Path]) -> "FactorModel":
        directory = Path(directory)
        W = read_labelled_csv(directory / "W.csv")
        L = read_labelled_csv(directory / "L.csv")
        with open(directory / "meta.json", "r", encoding="utf-8") as f:
            meta = json.load(f)
        return cls(
            W=W.to_numpy(dtype=float),
            L=L.to_numpy(dtype=float),
            k=int(meta["k"]),
            objective_trace=[float(v) for v in meta["objective_trace"]],
            seed=meta.get("seed"),
            iterations=int(meta["iterations"]),
            tol=float(meta.get("tol", DEFAULT_TOL)),
            converged=bool(meta.get("converged", False)),
            row_keys=[str(i) for i in W.index],
            col_labels=[str(c) for c in L.columns],
        )


def _objective(A: np.ndarray, W: np.ndarray, L: np.ndarray) -> float:
    return 0.5 * frobenius_norm(A - W @ L) ** 2


def _sort_components(W: np.ndarray, L: np.ndarray):
    order = np.argsort(-np.linalg.norm(W, axis=0), kind="stable")
    return W[:, order], L[order, :]


def nmf(A: Union[ActivityMatrix, np.ndarray], k: int, tol: float = DEFAULT_TOL,
        max_iter: int = DEFAULT_MAX_ITER, seed: Optional[int] = None) -> FactorModel:
    """
    Factor a non-negative matrix with multiplicative updates.

    Args:
        A: activity matrix (or a bare non-negative array)
        k: number of components, 1 <= k <= min(N, M)
        tol: stop once the relative objective improvement falls below this
        max_iter: hard iteration cap
        seed: seed of the uniform initialisation

    Returns:
        FactorModel whose objective trace starts with the initial objective

    Raises:
        FactorizationError: k out of range or negative entries
    """
    matrix = A if isinstance(A, ActivityMatrix) else ActivityMatrix(
        np.asarray(A, dtype=float),
        [str(i) for i in range(np.shape(A)[0])],
        [str(j) for j in range(np.shape(A)[1])],
    )
    values = matrix.values
    N, M = values.shape
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= min(N, M):
        raise FactorizationError(f"k must be in [1, {min(N, M)}], got {k}", k=k, shape=(N, M))

    def model(W, L, trace, iterations, converged):
        return FactorModel(
            W=W, L=L, k=int(k), objective_trace=trace, seed=seed, iterations=iterations,
            tol=tol, converged=converged, row_keys=list(matrix.row_keys),
            col_labels=list(matrix.col_labels),
        )

    if not values.any():
        logger.info("NMF input is all-zero; returning zero factors")
        return model(np.zeros((N, k)), np.zeros((k, M)), [0.0], 0, True)

    rng = np.random.default_rng(seed)
    scale = np.sqrt(values.mean() / k)
    # 1 - U[0, 1) lies in (0, 1]
    W = (1.0 - rng.random((N, k))) * scale
    L = (1.0 - rng.random((k, M))) * scale

    trace = [_objective(values, W, L)]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        L *= (W.T @ values) / (W.T @ W @ L + EPSILON)
        W *= (values @ L.T) / (W @ (L @ L.T) + EPSILON)

        current = _objective(values, W, L)
        previous = trace[-1]
        trace.append(current)
        if previous <= 0.0 or (previous - current) / previous < tol:
            converged = True
            break

    W, L = _sort_components(W, L)
    logger.info(
        f"NMF k={k} on {N}x{M}: objective {trace[-1]:.6g} after {iterations} iterations"
        f"{'' if converged else ' (max_iter reached)'}"
    )
    return model(W, L, trace, iterations, converged)


def nmf_rank_sweep(A: Union[ActivityMatrix, np.ndarray], ks: Iterable[int],
                   **kwargs) -> Dict[int, FactorModel]:
    """Fit one model per candidate k (same seed and stopping rule)."""
    return {int(k): nmf(A, int(k), **kwargs) for k in ks}
