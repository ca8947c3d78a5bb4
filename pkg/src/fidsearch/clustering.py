"""Pool partitioning: identity-averaged features and seeded k-means.

Clustering operates on one point per identity (the mean of that
identity's image features). Lloyd iterations start from k-means++ centers
drawn from a seeded generator, so the partition is a pure function of
(points, k, seed, max_iter, tol).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError
from .features_io import FeatureTable, IdentityIndex, save_features

DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-4


@dataclass(eq=False)
class Clustering:
    """Identity-to-cluster partition with centroids and fit diagnostics.

    ``ids[i]`` is the identity whose point got ``labels[i]``; every cluster
    index in [0, k) has at least one member. ``inertia_history`` records the
    within-cluster sum of squared distances after each assignment step and
    is non-increasing.
    """

    ids: list[str]
    labels: np.ndarray
    centroids: np.ndarray
    sizes: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        k = self.centroids.shape[0]
        if len(self.ids) != self.labels.shape[0]:
            raise ValidationError("ids and labels length mismatch")
        if self.sizes.shape[0] != k:
            raise ValidationError("sizes and centroids length mismatch")
        if int(self.sizes.sum()) != len(self.ids):
            raise ValidationError("cluster sizes do not sum to the number of identities")
        if np.any(self.sizes < 1):
            raise ValidationError("empty cluster in final partition")

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def assignment(self) -> dict[str, int]:
        return {i: int(c) for i, c in zip(self.ids, self.labels)}

    def members(self, cluster: int) -> list[str]:
        """Identity IDs assigned to *cluster*, in ids order."""
        return [i for i, c in zip(self.ids, self.labels) if c == cluster]


def identity_features(
    table: FeatureTable, index: IdentityIndex
) -> tuple[list[str], np.ndarray]:
    """Per-identity mean feature rows, ordered lexicographically by identity.

    Row i of the returned matrix is the arithmetic mean of the feature rows
    of the i-th identity's images.
    """
    index.validate_against(table)
    identity_ids = sorted(index.identities)
    out = np.empty((len(identity_ids), table.dim), dtype=np.float64)
    for i, identity in enumerate(identity_ids):
        out[i] = table.rows_for(index.identities[identity]).mean(axis=0, dtype=np.float64)
    return identity_ids, out


def _pairwise_sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # ||x||^2 - 2 x.c + ||c||^2, clipped against round-off negatives
    d2 = (
        (points * points).sum(axis=1)[:, None]
        - 2.0 * points @ centers.T
        + (centers * centers).sum(axis=1)[None, :]
    )
    return np.clip(d2, 0.0, None)


def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    m = points.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(m)
    min_d2 = _pairwise_sq_dists(points, points[chosen[0]][None, :])[:, 0]
    taken = np.zeros(m, dtype=bool)
    taken[chosen[0]] = True
    for i in range(1, k):
        weights = np.where(taken, 0.0, min_d2)
        total = weights.sum()
        if total > 0:
            idx = int(rng.choice(m, p=weights / total))
        else:
            # all remaining points coincide with a center: pick any untaken one
            idx = int(rng.choice(np.flatnonzero(~taken)))
        chosen[i] = idx
        taken[idx] = True
        min_d2 = np.minimum(min_d2, _pairwise_sq_dists(points, points[idx][None, :])[:, 0])
    return points[chosen].copy()


def _repair_empty(
    points: np.ndarray,
    labels: np.ndarray,
    point_d2: np.ndarray,
    centroids: np.ndarray,
    k: int,
) -> None:
    """Reseed each empty cluster to the point farthest from its centroid.

    Mutates labels, point_d2, and centroids in place. Points are only taken
    from clusters that keep at least one member.
    """
    counts = np.bincount(labels, minlength=k)
    for empty in np.flatnonzero(counts == 0):
        for candidate in np.argsort(-point_d2):
            if counts[labels[candidate]] >= 2:
                counts[labels[candidate]] -= 1
                labels[candidate] = empty
                counts[empty] = 1
                centroids[empty] = points[candidate]
                point_d2[candidate] = 0.0
                break
        else:
            raise ValidationError("cannot repair empty cluster: fewer points than clusters")


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    ids: list[str] | None = None,
) -> Clustering:
    """Seeded k-means++ / Lloyd clustering of an m x d point matrix.

    Iterations stop when the largest centroid L2 shift drops to ``tol``
    times the RMS per-dimension spread of the points, or after *max_iter*
    rounds. Empty clusters are reseeded to the point currently farthest
    from its centroid, so every cluster ends non-empty.

    Args:
        points: m x d matrix, one row per identity.
        k: number of clusters, 1 <= k <= m.
        seed: generator seed; identical inputs and seed give an identical
            partition.
        max_iter: Lloyd iteration cap.
        tol: relative centroid-shift stopping threshold.
        ids: optional identity IDs for the rows; defaults to row indices.

    Raises:
        ValidationError: k out of range or non-finite points.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValidationError(f"expected an m x d matrix, got shape {points.shape}")
    m = points.shape[0]
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if k > m:
        raise ValidationError(f"k={k} exceeds the number of points ({m})")
    if not np.all(np.isfinite(points)):
        raise ValidationError("non-finite value in points")
    if ids is None:
        ids = [str(i) for i in range(m)]
    elif len(ids) != m:
        raise ValidationError(f"{len(ids)} ids for {m} points")

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(points, k, rng)
    scale = float(np.sqrt(np.mean(np.var(points, axis=0))))
    shift_threshold = tol * scale

    history: list[float] = []
    labels = np.zeros(m, dtype=np.int64)
    n_iter = 0
    for _ in range(max_iter):
        n_iter += 1
        d2 = _pairwise_sq_dists(points, centroids)
        labels = d2.argmin(axis=1)
        point_d2 = np.take_along_axis(d2, labels[:, None], axis=1)[:, 0]
        _repair_empty(points, labels, point_d2, centroids, k)
        history.append(float(point_d2.sum()))

        new_centroids = np.zeros_like(centroids)
        np.add.at(new_centroids, labels, points)
        counts = np.bincount(labels, minlength=k)
        new_centroids /= counts[:, None]
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift <= shift_threshold:
            break

    # final assignment against the last centroid update
    d2 = _pairwise_sq_dists(points, centroids)
    labels = d2.argmin(axis=1)
    point_d2 = np.take_along_axis(d2, labels[:, None], axis=1)[:, 0]
    _repair_empty(points, labels, point_d2, centroids, k)
    history.append(float(point_d2.sum()))
    sizes = np.bincount(labels, minlength=k)

    return Clustering(
        ids=list(ids),
        labels=labels,
        centroids=centroids,
        sizes=sizes,
        inertia=history[-1],
        n_iter=n_iter,
        inertia_history=history,
    )


# -- serialization -------------------------------------------------------


def save_clustering(clustering: Clustering, out_dir: str | Path) -> None:
    """Write ``assignments.tsv`` and a binary ``centroids.bin`` table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"{i}\t{c}" for i, c in zip(clustering.ids, clustering.labels)]
    (out_dir / "assignments.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    centroid_table = FeatureTable(
        ids=[str(c) for c in range(clustering.k)],
        data=clustering.centroids.astype(np.float32),
    )
    save_features(centroid_table, out_dir / "centroids.bin", format="binary")


def load_assignments(path: str | Path) -> dict[str, int]:
    """Read an ``identity_id<TAB>cluster`` file."""
    out: dict[str, int] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"{path}: line {lineno}: expected identity<TAB>cluster")
        try:
            out[parts[0]] = int(parts[1])
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: bad cluster index {parts[1]!r}") from None
    if not out:
        raise FormatError(f"{path}: no assignments")
    return out
