"""Desk-scale strategy comparisons and cluster-count sweeps.

``compare_strategies`` pits the weighted search against uniform random
identity selection over a grid of set sizes and seeds; ``sweep_k`` traces
how the achieved distance to the target varies with the number of
clusters. Both reuse one clustering (and its cluster scores) across all
trials of a configuration: the expensive steps do not depend on the
sampling seed, so re-running them per trial would only add cost, and
holding them fixed isolates the sampling weights as the experimental
variable. Reports are byte-stable for a fixed seed set.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clustering import identity_features, kmeans
from .errors import ValidationError
from .features_io import FeatureTable, IdentityIndex
from .fid import fid, summarize
from .search import SearchParams, draw_images, sample_training_set, score_clusters

CSV_HEADER = ["strategy", "k", "n", "seed", "fid"]

# stream tags keeping greedy/random/clustering draws on disjoint substreams
_GREEDY, _RANDOM, _CLUSTER = 1, 2, 3


@dataclass
class ReportRow:
    strategy: str
    k: int
    n: int
    seed: int
    fid: float


@dataclass
class Report:
    """Per-trial rows plus aggregates, both in deterministic order."""

    rows: list[ReportRow]
    summary: list[dict]
    config: dict

    def write(self, csv_path: str | Path, json_path: str | Path) -> None:
        rows = sorted(self.rows, key=lambda r: (r.strategy, r.n, r.k, r.seed))
        with Path(csv_path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for r in rows:
                writer.writerow([r.strategy, r.k, r.n, r.seed, repr(r.fid)])
        doc = {"config": self.config, "summary": self.summary}
        Path(json_path).write_text(
            json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )


def _trial_seed(base_seed: int, *path: int) -> int:
    return int(np.random.SeedSequence([base_seed, *path]).generate_state(1, np.uint64)[0])


def _selection_fid(target_stats, table: FeatureTable, selected: list[str]) -> float:
    return fid(target_stats, summarize(table.rows_for(selected)))


def _aggregate(rows: list[ReportRow], keys: list[str]) -> list[dict]:
    grouped: dict[tuple, list[float]] = {}
    for r in rows:
        grouped.setdefault(tuple(getattr(r, k) for k in keys), []).append(r.fid)
    out = []
    for key in sorted(grouped, key=lambda t: tuple(str(v) for v in t)):
        fids = np.array(grouped[key])
        entry = dict(zip(keys, key))
        entry["seeds"] = int(fids.size)
        entry["mean_fid"] = float(fids.mean())
        entry["std_fid"] = float(fids.std(ddof=1)) if fids.size > 1 else 0.0
        out.append(entry)
    return out


def compare_strategies(
    pool_table: FeatureTable,
    pool_index: IdentityIndex,
    target_table: FeatureTable | np.ndarray,
    k: int,
    n_list: list[int],
    seeds: int,
    base_seed: int = 0,
    params: SearchParams | None = None,
) -> Report:
    """Weighted search vs uniform random selection over sizes and seeds.

    For every n in *n_list* and trial index in [0, seeds), both strategies
    select n images and are scored by the Frechet distance between the
    target and the selected rows. The random baseline samples identities
    uniformly without replacement through the same draw machinery, so the
    cluster weights are the only difference between the strategies.
    """
    if seeds < 1:
        raise ValidationError(f"seeds must be >= 1, got {seeds}")
    params = params or SearchParams()
    target_rows = target_table.data if isinstance(target_table, FeatureTable) else target_table
    target_stats = summarize(target_rows)

    identity_ids, feats = identity_features(pool_table, pool_index)
    clustering = kmeans(
        feats,
        k,
        seed=_trial_seed(base_seed, _CLUSTER, k),
        max_iter=params.max_iter,
        tol=params.tol,
        ids=identity_ids,
    )
    scores = score_clusters(
        target_rows,
        clustering,
        pool_table,
        pool_index,
        min_cluster_images=params.min_cluster_images,
        threads=params.threads,
    )
    uniform = np.full(len(identity_ids), 1.0 / len(identity_ids))

    rows: list[ReportRow] = []
    for n in n_list:
        for trial in range(seeds):
            manifest = sample_training_set(
                scores, clustering, pool_index, n, seed=_trial_seed(base_seed, _GREEDY, n, trial)
            )
            rows.append(
                ReportRow("greedy", k, n, trial, _selection_fid(target_stats, pool_table, manifest.selected))
            )
            rng = np.random.default_rng(_trial_seed(base_seed, _RANDOM, n, trial))
            picked, _ = draw_images(identity_ids, uniform, pool_index, n, rng)
            rows.append(
                ReportRow("random", k, n, trial, _selection_fid(target_stats, pool_table, picked))
            )
    summary = _aggregate(rows, ["strategy", "k", "n"])
    config = {"k": k, "n_list": list(n_list), "seeds": seeds, "base_seed": base_seed}
    return Report(rows=rows, summary=summary, config=config)


def sweep_k(
    pool_table: FeatureTable,
    pool_index: IdentityIndex,
    target_table: FeatureTable | np.ndarray,
    k_list: list[int],
    n: int,
    seeds: int,
    base_seed: int = 0,
    params: SearchParams | None = None,
) -> Report:
    """Mean selected-set distance as a function of the cluster count.

    Emits one row per (k, trial) and per-k mean/std aggregates suitable for
    plotting. Quality is expected to degrade toward both very small and
    very large k; the harness records the curve, it does not assert shape.
    """
    if seeds < 1:
        raise ValidationError(f"seeds must be >= 1, got {seeds}")
    params = params or SearchParams()
    target_rows = target_table.data if isinstance(target_table, FeatureTable) else target_table
    target_stats = summarize(target_rows)
    identity_ids, feats = identity_features(pool_table, pool_index)
    for k in k_list:
        if k > len(identity_ids):
            raise ValidationError(f"k={k} exceeds the identity count ({len(identity_ids)})")

    rows: list[ReportRow] = []
    for k in k_list:
        clustering = kmeans(
            feats,
            k,
            seed=_trial_seed(base_seed, _CLUSTER, k),
            max_iter=params.max_iter,
            tol=params.tol,
            ids=identity_ids,
        )
        scores = score_clusters(
            target_rows,
            clustering,
            pool_table,
            pool_index,
            min_cluster_images=params.min_cluster_images,
            threads=params.threads,
        )
        for trial in range(seeds):
            manifest = sample_training_set(
                scores, clustering, pool_index, n, seed=_trial_seed(base_seed, _GREEDY, k, n, trial)
            )
            rows.append(
                ReportRow("greedy", k, n, trial, _selection_fid(target_stats, pool_table, manifest.selected))
            )
    summary = _aggregate(rows, ["k", "n"])
    config = {"k_list": list(k_list), "n": n, "seeds": seeds, "base_seed": base_seed}
    return Report(rows=rows, summary=summary, config=config)
