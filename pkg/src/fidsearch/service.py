"""HTTP service wrapping the search pipeline.

Endpoints mirror the CLI subcommands (``/fid``, ``/synth``, ``/cluster``,
``/search``, ``/eval/compare``, ``/eval/sweep-k``). Loaded feature tables
and fitted clusterings are cached keyed by file identity and parameters:
clustering and scoring do not depend on the sampling stream, so repeated
searches against the same pool (varying n or seed) skip the expensive
steps and only re-sample.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from pathlib import Path

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from . import __version__, schemas
from .clustering import Clustering, identity_features, kmeans, save_clustering
from .errors import ValidationError
from .evalharness import Report, compare_strategies, sweep_k
from .features_io import FeatureTable, IdentityIndex, load_features, load_identities, save_features, save_identities
from .fid import fid, summarize
from .search import (
    ClusterScores,
    SearchManifest,
    SearchParams,
    derive_seeds,
    sample_training_set,
    score_clusters,
)
from .synth import GroupSpec, PopulationSpec, generate, _parse_cov


class _LRU:
    """Tiny thread-safe LRU keyed by hashable tuples."""

    def __init__(self, maxsize: int):
        self.maxsize = maxsize
        self._data: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def get_or_compute(self, key, compute):
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                return self._data[key]
        value = compute()
        with self._lock:
            self._data[key] = value
            self._data.move_to_end(key)
            while len(self._data) > self.maxsize:
                self._data.popitem(last=False)
        return value


def _file_key(path: str) -> tuple:
    st = Path(path).stat()
    return (str(Path(path).resolve()), st.st_mtime_ns, st.st_size)


def _detect_format(path: str, declared: str | None = None) -> str:
    if declared:
        return declared
    return "csv" if path.endswith(".csv") else "binary"


class Pipeline:
    """Cached access to tables, identity indexes, clusterings, and scores."""

    def __init__(self, cache_size: int = 8):
        self._tables = _LRU(cache_size)
        self._indexes = _LRU(cache_size)
        self._clusterings = _LRU(cache_size)
        self._scores = _LRU(cache_size)

    def table(self, path: str, format: str | None = None) -> FeatureTable:
        fmt = _detect_format(path, format)
        key = (_file_key(path), fmt)
        return self._tables.get_or_compute(key, lambda: load_features(path, format=fmt))

    def index(self, identities_path: str | None, pool_path: str, table: FeatureTable) -> IdentityIndex:
        if identities_path is None:
            key = ("default", _file_key(pool_path))
        else:
            key = ("manifest", _file_key(identities_path), _file_key(pool_path))
        return self._indexes.get_or_compute(key, lambda: load_identities(identities_path, table))

    def clustering(
        self,
        pool_path: str,
        identities_path: str | None,
        table: FeatureTable,
        index: IdentityIndex,
        k: int,
        seed: int,
        max_iter: int,
        tol: float,
    ) -> Clustering:
        key = (
            _file_key(pool_path),
            _file_key(identities_path) if identities_path else None,
            k,
            seed,
            max_iter,
            tol,
        )

        def compute() -> Clustering:
            ids, feats = identity_features(table, index)
            return kmeans(feats, k, seed=seed, max_iter=max_iter, tol=tol, ids=ids)

        return self._clusterings.get_or_compute(key, compute)

    def scores(
        self,
        clustering_key: tuple,
        target_path: str,
        min_cluster_images: int,
        clustering: Clustering,
        table: FeatureTable,
        index: IdentityIndex,
        target: FeatureTable,
    ) -> ClusterScores:
        key = (clustering_key, _file_key(target_path), min_cluster_images)
        return self._scores.get_or_compute(
            key,
            lambda: score_clusters(
                target.data, clustering, table, index, min_cluster_images=min_cluster_images
            ),
        )


def create_app(cache_size: int = 8) -> FastAPI:
    app = FastAPI(title="fidsearch", version=__version__)
    pipeline = Pipeline(cache_size=cache_size)

    @app.exception_handler(ValidationError)
    async def _validation_error(request, exc: ValidationError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(FileNotFoundError)
    async def _not_found(request, exc: FileNotFoundError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    def _resolve(ref: schemas.TableRef) -> FeatureTable:
        if ref.path is not None:
            return pipeline.table(ref.path, ref.format)
        rows = np.asarray(ref.rows, dtype=np.float32)
        ids = ref.ids or [str(i) for i in range(rows.shape[0])]
        return FeatureTable(ids=ids, data=rows)

    @app.post("/fid", response_model=schemas.FidResponse)
    def compute_fid(req: schemas.FidRequest):
        a = _resolve(req.a)
        b = _resolve(req.b)
        value = fid(summarize(a.data), summarize(b.data))
        return schemas.FidResponse(fid=value, dim=a.dim, n_a=a.n, n_b=b.n)

    @app.post("/synth", response_model=schemas.SynthResponse)
    def synth(req: schemas.SynthRequest):
        groups = [
            GroupSpec(
                name=g.name,
                proportion=g.proportion,
                mean=np.asarray(g.mean, dtype=np.float64),
                cov=_parse_cov(g.cov, req.dim, g.name),
                identities=g.identities,
                images_per_identity=g.images_per_identity,
            )
            for g in req.groups
        ]
        spec = PopulationSpec(groups=groups, dim=req.dim, seed=req.seed)
        table, index = generate(spec)
        out = Path(req.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        features_path = out / "features.bin"
        identities_path = out / "identities.tsv"
        save_features(table, features_path, format="binary")
        save_identities(index, identities_path)
        return schemas.SynthResponse(
            n_images=table.n,
            n_identities=index.n_identities,
            dim=table.dim,
            features_path=str(features_path),
            identities_path=str(identities_path),
        )

    @app.post("/cluster", response_model=schemas.ClusterResponse)
    def cluster(req: schemas.ClusterRequest):
        table = pipeline.table(req.features_path)
        index = pipeline.index(req.identities_path, req.features_path, table)
        clustering = pipeline.clustering(
            req.features_path, req.identities_path, table, index,
            k=req.k, seed=req.seed, max_iter=req.max_iter, tol=req.tol,
        )
        if req.out_dir:
            save_clustering(clustering, req.out_dir)
        return schemas.ClusterResponse(
            k=clustering.k,
            sizes=[int(s) for s in clustering.sizes],
            inertia=clustering.inertia,
            n_iter=clustering.n_iter,
            out_dir=req.out_dir,
        )

    def _manifest_response(manifest: SearchManifest) -> schemas.SearchResponse:
        return schemas.SearchResponse(
            version=manifest.format_version,
            config=manifest.config,
            cluster_fids=[None if not np.isfinite(v) else v for v in manifest.cluster_fids],
            weights=manifest.weights,
            selected_ids=manifest.selected,
            seed=manifest.seed,
            per_identity_weight=manifest.per_identity_weight,
        )

    @app.post("/search", response_model=schemas.SearchResponse)
    def search(req: schemas.SearchRequest):
        pool = pipeline.table(req.pool_path)
        index = pipeline.index(req.identities_path, req.pool_path, pool)
        target = pipeline.table(req.target_path)
        kmeans_seed, sample_seed = derive_seeds(req.seed)
        clustering = pipeline.clustering(
            req.pool_path, req.identities_path, pool, index,
            k=req.k, seed=kmeans_seed, max_iter=req.max_iter, tol=req.tol,
        )
        clustering_key = (req.pool_path, req.identities_path, req.k, req.seed, req.max_iter, req.tol)
        scores = pipeline.scores(
            clustering_key, req.target_path, req.min_cluster_images,
            clustering, pool, index, target,
        )
        manifest = sample_training_set(scores, clustering, index, req.n, seed=sample_seed)
        manifest.seed = req.seed
        manifest.config = {
            "k": req.k,
            "n": req.n,
            "seed": req.seed,
            "max_iter": req.max_iter,
            "tol": req.tol,
            "min_cluster_images": req.min_cluster_images,
            "pool_path": req.pool_path,
            "identities_path": req.identities_path,
            "target_path": req.target_path,
        }
        if req.out_path:
            manifest.write(req.out_path)
            ids_out = req.ids_out_path or str(Path(req.out_path).with_suffix(".ids"))
            manifest.write_id_list(ids_out)
        return _manifest_response(manifest)

    def _report_response(report: Report, out_dir: str | None, stem: str) -> schemas.ReportResponse:
        csv_path = summary_path = None
        if out_dir:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            csv_path = str(out / f"{stem}.csv")
            summary_path = str(out / f"{stem}_summary.json")
            report.write(csv_path, summary_path)
        return schemas.ReportResponse(
            rows=[schemas.ReportRowModel(**vars(r)) for r in report.rows],
            summary=report.summary,
            config=report.config,
            csv_path=csv_path,
            summary_path=summary_path,
        )

    @app.post("/eval/compare", response_model=schemas.ReportResponse)
    def eval_compare(req: schemas.CompareRequest):
        pool = pipeline.table(req.pool_path)
        index = pipeline.index(req.identities_path, req.pool_path, pool)
        target = pipeline.table(req.target_path)
        report = compare_strategies(
            pool, index, target,
            k=req.k, n_list=req.n_list, seeds=req.seeds, base_seed=req.base_seed,
        )
        return _report_response(report, req.out_dir, "compare")

    @app.post("/eval/sweep-k", response_model=schemas.ReportResponse)
    def eval_sweep_k(req: schemas.SweepKRequest):
        pool = pipeline.table(req.pool_path)
        index = pipeline.index(req.identities_path, req.pool_path, pool)
        target = pipeline.table(req.target_path)
        report = sweep_k(
            pool, index, target,
            k_list=req.k_list, n=req.n, seeds=req.seeds, base_seed=req.base_seed,
        )
        return _report_response(report, req.out_dir, "sweep_k")

    return app
