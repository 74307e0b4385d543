"""
Lifestyle clustering of per-user preference vectors

k-means with k-means++ seeding and several restarts; cluster composition is
reported per demographic group with every user weighted by 1 / (users in
their city), so a large city does not dominate the shares.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from sklearn.cluster import kmeans_plusplus

from src.core.config import get_settings
from src.core.exceptions import AnalysisError
from src.core.models import UserProfile

logger = logging.getLogger(__name__)

MAX_ITER = 300


@dataclass
class LifestyleClusters:
    """Result of cluster_preferences."""

    centers: np.ndarray
    labels: np.ndarray
    assignments: Dict[str, int]
    composition: Dict[int, Dict[str, float]]
    city_composition: Dict[int, Dict[str, float]]
    sizes: List[int]
    inertia: float
    inertia_trace: List[float] = field(default_factory=list)
    restart: int = 0
    seed: Optional[int] = None

    @property
    def n_clusters(self) -> int:
        return self.centers.shape[0]

    def to_dict(self) -> Dict[str, object]:
        return {
            "n_clusters": self.n_clusters,
            "seed": self.seed,
            "restart": self.restart,
            "inertia": self.inertia,
            "inertia_trace": self.inertia_trace,
            "sizes": self.sizes,
            "centers": self.centers.tolist(),
            "composition": {str(c): shares for c, shares in self.composition.items()},
            "city_composition": {str(c): shares for c, shares in self.city_composition.items()},
            "assignments": self.assignments,
        }


def _squared_distances(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _relocate_empty(labels: np.ndarray, d2: np.ndarray, k: int) -> np.ndarray:
    """Move the points farthest from their centre into empty clusters."""
    counts = np.bincount(labels, minlength=k)
    empty = np.flatnonzero(counts == 0)
    if not empty.size:
        return labels
    logger.warning(f"k-means: {empty.size} empty clusters re-seeded")
    labels = labels.copy()
    assigned = d2[np.arange(len(labels)), labels]
    for cluster in empty:
        donors = np.flatnonzero(counts[labels] > 1)
        if not donors.size:
            break
        point = donors[np.argsort(-assigned[donors], kind="stable")[0]]
        counts[labels[point]] -= 1
        labels[point] = cluster
        counts[cluster] = 1
        assigned[point] = -np.inf
    return labels


def lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int = MAX_ITER,
          tol: float = 0.0) -> Tuple[np.ndarray, np.ndarray, List[float]]:
    """
    Lloyd iterations from the given centres.

    An empty cluster takes over the point farthest from its current centre.
    Stops when assignments repeat or the inertia stops improving.

    Returns:
        (centers, labels, inertia after each centre update)
    """
    centers = centers.astype(float).copy()
    k = centers.shape[0]
    labels: Optional[np.ndarray] = None
    trace: List[float] = []
    for _ in range(max_iter):
        d2 = _squared_distances(X, centers)
        new_labels = _relocate_empty(np.argmin(d2, axis=1), d2, k)
        repeated = labels is not None and np.array_equal(new_labels, labels)
        labels = new_labels

        for cluster in range(k):
            members = labels == cluster
            if members.any():
                centers[cluster] = X[members].mean(axis=0)
        inertia = float(((X - centers[labels]) ** 2).sum())
        stalled = bool(trace) and trace[-1] - inertia <= tol * max(trace[-1], 1e-300)
        trace.append(inertia)
        if repeated or stalled:
            break

    assert labels is not None
    return centers, labels, trace


def _single_run(X: np.ndarray, n_clusters: int, seed: int):
    seeds, _ = kmeans_plusplus(X, n_clusters, random_state=seed)
    return lloyd(X, seeds)


def _composition(labels: np.ndarray, n_clusters: int, users: Sequence[UserProfile],
                 key) -> Dict[int, Dict[str, float]]:
    city_sizes: Dict[str, int] = {}
    for user in users:
        city_sizes[user.city] = city_sizes.get(user.city, 0) + 1
    weights = np.array([1.0 / city_sizes[u.city] for u in users])
    groups = sorted({key(u) for u in users})

    composition: Dict[int, Dict[str, float]] = {}
    for cluster in range(n_clusters):
        members = np.flatnonzero(labels == cluster)
        total = weights[members].sum()
        shares = {}
        for group in groups:
            mass = sum(weights[i] for i in members if key(users[i]) == group)
            shares[group] = float(mass / total) if total > 0 else 0.0
        composition[cluster] = shares
    return composition


def cluster_preferences(W: np.ndarray, users: Sequence[UserProfile], n_clusters: int = 5,
                        seed: Optional[int] = None, restarts: int = 10,
                        normalize_rows: bool = False, n_jobs: Optional[int] = None) -> LifestyleClusters:
    """
    Cluster the rows of a weight matrix into lifestyle groups.

    Args:
        W: N x k preference matrix (rows aligned with `users`)
        users: profiles supplying city and gender for the composition
        n_clusters: number of clusters, at most N
        seed: root seed; restart r uses the r-th spawned child seed
        restarts: independent k-means++ runs; the lowest inertia wins,
            ties going to the earliest restart
        normalize_rows: L1-normalise rows before clustering
        n_jobs: parallel restarts (defaults to the THREADS setting)

    Raises:
        AnalysisError: empty input, misaligned users or n_clusters > N
    """
    X = np.asarray(W, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise AnalysisError("cluster_preferences needs a non-empty 2-D weight matrix")
    if len(users) != X.shape[0]:
        raise AnalysisError(f"{X.shape[0]} rows but {len(users)} user profiles")
    if not 1 <= n_clusters <= X.shape[0]:
        raise AnalysisError(f"n_clusters must be in [1, {X.shape[0]}], got {n_clusters}")
    if restarts < 1:
        raise AnalysisError(f"restarts must be >= 1, got {restarts}")

    if normalize_rows:
        sums = X.sum(axis=1, keepdims=True)
        X = np.divide(X, sums, out=np.zeros_like(X), where=sums > 0)

    children = np.random.SeedSequence(seed).spawn(restarts)
    run_seeds = [int(child.generate_state(1, dtype=np.uint32)[0]) for child in children]
    jobs = n_jobs if n_jobs is not None else get_settings().effective_threads

    runs = Parallel(n_jobs=jobs)(delayed(_single_run)(X, n_clusters, s) for s in run_seeds)
    best = min(range(restarts), key=lambda r: (runs[r][2][-1], r))
    centers, labels, trace = runs[best]

    composition = _composition(labels, n_clusters, users, lambda u: f"{u.city}/{u.gender.value}")
    city_composition = _composition(labels, n_clusters, users, lambda u: u.city)
    sizes = np.bincount(labels, minlength=n_clusters).tolist()

    logger.info(
        f"k-means: {n_clusters} clusters on {X.shape[0]} users, best restart {best} "
        f"of {restarts} (inertia {trace[-1]:.6g}), sizes {sizes}"
    )
    return LifestyleClusters(
        centers=centers,
        labels=labels,
        assignments={u.user_id: int(c) for u, c in zip(users, labels)},
        composition=composition,
        city_composition=city_composition,
        sizes=sizes,
        inertia=trace[-1],
        inertia_trace=trace,
        restart=best,
        seed=seed,
    )
