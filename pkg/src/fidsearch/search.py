"""Cluster scoring and training-set sampling.

Given a clustered pool and a target feature set, each cluster is scored by
the Frechet distance between its member image features and the target;
scores become sampling weights through a softmax of their negations, each
identity in cluster k carries mass ``w_k / |S_k|``, and identities are
drawn without replacement (renormalizing after every draw) until the
requested number of images is reached. One root seed deterministically
derives the clustering and sampling streams, so a search run is fully
reproducible.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clustering import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    Clustering,
    identity_features,
    kmeans,
)
from .errors import ValidationError
from .features_io import FeatureTable, IdentityIndex
from .fid import GaussianStats, fid, sqrt_psd, summarize

MANIFEST_VERSION = "1"
DEFAULT_MIN_CLUSTER_IMAGES = 2


@dataclass(eq=False)
class ClusterScores:
    """Per-cluster Frechet distances and the sampling weights they induce.

    ``fids[k] == inf`` marks a cluster too small to score; such clusters
    get weight exactly 0. Finite weights are a softmax of the negated
    distances and sum to 1.
    """

    fids: np.ndarray
    weights: np.ndarray

    @property
    def k(self) -> int:
        return self.fids.shape[0]


@dataclass
class SearchParams:
    """Tuning knobs and provenance paths for a search run."""

    max_iter: int = DEFAULT_MAX_ITER
    tol: float = DEFAULT_TOL
    min_cluster_images: int = DEFAULT_MIN_CLUSTER_IMAGES
    threads: int = 1
    pool_path: str | None = None
    identities_path: str | None = None
    target_path: str | None = None


@dataclass
class SearchManifest:
    """Selected image IDs with full provenance.

    Serializes to a versioned JSON document (keys ``version``, ``config``,
    ``cluster_fids``, ``weights``, ``selected_ids``, ``seed``,
    ``per_identity_weight``); unscorable clusters appear as ``null`` in
    ``cluster_fids``. The selected IDs can also be written as a plain
    newline-delimited list.
    """

    selected: list[str]
    per_identity_weight: dict[str, float]
    config: dict
    cluster_fids: list[float]
    weights: list[float]
    seed: int
    format_version: str = MANIFEST_VERSION

    def to_json(self) -> str:
        doc = {
            "version": self.format_version,
            "config": self.config,
            "cluster_fids": [None if not np.isfinite(v) else v for v in self.cluster_fids],
            "weights": self.weights,
            "selected_ids": self.selected,
            "seed": self.seed,
            "per_identity_weight": self.per_identity_weight,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    def write_id_list(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.selected) + "\n", encoding="utf-8")


def softmax_weights(fids: np.ndarray) -> np.ndarray:
    """softmax(-fids) with max-subtraction; +inf entries get weight 0.

    Raises:
        ValidationError: every entry is +inf (no scorable cluster).
    """
    fids = np.asarray(fids, dtype=np.float64)
    finite = np.isfinite(fids)
    if not finite.any():
        raise ValidationError("all clusters are unscorable (every FID is infinite)")
    z = -fids[finite]
    z = np.exp(z - z.max())
    weights = np.zeros_like(fids)
    weights[finite] = z / z.sum()
    return weights


def _cluster_fid(rows: np.ndarray, target: GaussianStats, target_sqrt: np.ndarray) -> float:
    """Frechet distance of one cluster's rows against precomputed target stats.

    Uses the Gram-matrix form of the cross term when the cluster has fewer
    rows than dimensions: the nonzero eigenvalues of
    C_t^(1/2) C_s C_t^(1/2) equal those of the m x m matrix A A^T with
    A = centered_rows @ C_t^(1/2) / sqrt(m-1). Falls back to the general
    (regularizing) path when the direct evaluation degenerates.
    """
    m, d = rows.shape
    rows64 = np.asarray(rows, dtype=np.float64)
    mu = rows64.mean(axis=0)
    centered = rows64 - mu
    trace_s = float((centered * centered).sum()) / (m - 1)
    trace_t = float(np.trace(target.cov))
    diff = mu - target.mean

    if m - 1 < d:
        a = centered @ target_sqrt / np.sqrt(m - 1)
        gram = a @ a.T
        gram = (gram + gram.T) / 2.0
        lam = np.linalg.eigvalsh(gram)
    else:
        cov_s = centered.T @ centered / (m - 1)
        cov_s = (cov_s + cov_s.T) / 2.0
        mmat = target_sqrt @ cov_s @ target_sqrt
        mmat = (mmat + mmat.T) / 2.0
        lam = np.linalg.eigvalsh(mmat)
    cross = float(np.sqrt(np.clip(lam, 0.0, None)).sum())
    value = float(diff @ diff) + trace_s + trace_t - 2.0 * cross

    tol = 1e-8 * max(1.0, trace_s + trace_t)
    if not np.isfinite(value) or value < -tol:
        return fid(target, summarize(rows64))
    return max(value, 0.0)


def score_clusters(
    target_rows: np.ndarray | FeatureTable,
    clustering: Clustering,
    table: FeatureTable,
    index: IdentityIndex,
    min_cluster_images: int = DEFAULT_MIN_CLUSTER_IMAGES,
    threads: int = 1,
) -> ClusterScores:
    """FID of every cluster against the target rows, plus sampling weights.

    Clusters with fewer than *min_cluster_images* member images receive an
    infinite distance and zero weight. Per-cluster distances are
    independent; with ``threads > 1`` they are computed concurrently and
    merged in cluster-index order, so results do not depend on the thread
    count.

    Raises:
        ValidationError: target smaller than 2 rows, or no scorable cluster.
    """
    if isinstance(target_rows, FeatureTable):
        target_rows = target_rows.data
    target = summarize(target_rows)
    if target.dim != table.dim:
        raise ValidationError(
            f"target dimension {target.dim} does not match pool dimension {table.dim}"
        )
    target_sqrt = sqrt_psd(target.cov)

    member_rows: list[list[int]] = [[] for _ in range(clustering.k)]
    lookup = table.row_of
    for identity, label in zip(clustering.ids, clustering.labels):
        rows = member_rows[label]
        for img in index.identities[identity]:
            rows.append(lookup[img])

    def score_one(rows: list[int]) -> float:
        if len(rows) < min_cluster_images:
            return np.inf
        return _cluster_fid(table.data[rows], target, target_sqrt)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fids = np.array(list(pool.map(score_one, member_rows)))
    else:
        fids = np.array([score_one(rows) for rows in member_rows])
    return ClusterScores(fids=fids, weights=softmax_weights(fids))


def draw_images(
    identity_ids: list[str],
    masses: np.ndarray,
    index: IdentityIndex,
    n: int,
    rng: np.random.Generator,
) -> tuple[list[str], dict[str, float]]:
    """Draw identities without replacement until *n* images are collected.

    Each draw picks an identity with probability proportional to its
    remaining mass, zeroes that mass (renormalizing the rest implicitly),
    and contributes all of the identity's images; the final identity
    contributes a random subset if needed to hit *n* exactly.

    Returns the selected image IDs and the initial mass of every drawn
    identity.
    """
    masses = np.asarray(masses, dtype=np.float64).copy()
    if np.any(masses < 0):
        raise ValidationError("negative sampling mass")
    available = sum(
        len(index.identities[i]) for i, w in zip(identity_ids, masses) if w > 0
    )
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if n > available:
        raise ValidationError(
            f"n={n} exceeds the {available} images available in positive-weight clusters"
        )

    selected: list[str] = []
    drawn: dict[str, float] = {}
    while len(selected) < n:
        cum = np.cumsum(masses)
        total = cum[-1]
        r = rng.random() * total
        idx = int(np.searchsorted(cum, r, side="right"))
        # guard the zero-width edge cases of searchsorted
        while idx >= len(masses) or masses[idx] <= 0:
            idx -= 1
        identity = identity_ids[idx]
        drawn[identity] = float(masses[idx])
        masses[idx] = 0.0
        images = index.identities[identity]
        need = n - len(selected)
        if len(images) <= need:
            selected.extend(images)
        else:
            keep = np.sort(rng.choice(len(images), size=need, replace=False))
            selected.extend(images[j] for j in keep)
    return selected, drawn


def sample_training_set(
    scores: ClusterScores,
    clustering: Clustering,
    index: IdentityIndex,
    n: int,
    seed: int,
) -> SearchManifest:
    """Sample the searched training set from cluster weights.

    Each identity in cluster k starts with mass ``weights[k] / sizes[k]``
    (cluster weight split evenly over the cluster's identities); draws are
    without replacement, deterministic given *seed*.

    Raises:
        ValidationError: n < 1 or n larger than the images available in
            positive-weight clusters.
    """
    if scores.k != clustering.k:
        raise ValidationError(
            f"scores cover {scores.k} clusters, clustering has {clustering.k}"
        )
    masses = scores.weights[clustering.labels] / clustering.sizes[clustering.labels]
    rng = np.random.default_rng(seed)
    selected, drawn = draw_images(clustering.ids, masses, index, n, rng)
    return SearchManifest(
        selected=selected,
        per_identity_weight=drawn,
        config={"k": clustering.k, "n": n, "seed": seed},
        cluster_fids=[float(v) for v in scores.fids],
        weights=[float(w) for w in scores.weights],
        seed=seed,
    )


def derive_seeds(seed: int, count: int = 2) -> list[int]:
    """Derive independent child seeds from one root seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)]


def run_search(
    pool_table: FeatureTable,
    pool_index: IdentityIndex,
    target_table: FeatureTable | np.ndarray,
    k: int,
    n: int,
    seed: int,
    params: SearchParams | None = None,
) -> SearchManifest:
    """End-to-end search: cluster the pool, score clusters, sample a set.

    Composes identity averaging, k-means, cluster scoring, and weighted
    sampling. The root *seed* deterministically derives separate clustering
    and sampling streams; the returned manifest echoes the full
    configuration so a run can be re-verified from the file alone.
    """
    params = params or SearchParams()
    kmeans_seed, sample_seed = derive_seeds(seed)
    identity_ids, feats = identity_features(pool_table, pool_index)
    clustering = kmeans(
        feats, k, seed=kmeans_seed, max_iter=params.max_iter, tol=params.tol, ids=identity_ids
    )
    scores = score_clusters(
        target_table,
        clustering,
        pool_table,
        pool_index,
        min_cluster_images=params.min_cluster_images,
        threads=params.threads,
    )
    manifest = sample_training_set(scores, clustering, pool_index, n, seed=sample_seed)
    manifest.seed = seed
    manifest.config = {
        "k": k,
        "n": n,
        "seed": seed,
        "max_iter": params.max_iter,
        "tol": params.tol,
        "min_cluster_images": params.min_cluster_images,
        "pool_path": params.pool_path,
        "identities_path": params.identities_path,
        "target_path": params.target_path,
    }
    return manifest
