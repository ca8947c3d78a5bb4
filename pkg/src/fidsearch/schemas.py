"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field, model_validator


class HealthResponse(BaseModel):
    status: str
    version: str


class TableRef(BaseModel):
    """A feature table, referenced by path or passed inline.

    Exactly one of ``path`` and ``rows`` must be given. ``format`` defaults
    to autodetection by extension (.csv -> csv, otherwise binary).
    """

    path: str | None = None
    format: str | None = Field(default=None, pattern="^(binary|csv)$")
    rows: list[list[float]] | None = None
    ids: list[str] | None = None

    @model_validator(mode="after")
    def _exactly_one_source(self):
        if (self.path is None) == (self.rows is None):
            raise ValueError("exactly one of 'path' or 'rows' must be set")
        return self


class FidRequest(BaseModel):
    a: TableRef
    b: TableRef


class FidResponse(BaseModel):
    fid: float
    dim: int
    n_a: int
    n_b: int


class GroupModel(BaseModel):
    name: str
    proportion: float
    mean: list[float]
    cov: float | list[float] | list[list[float]]
    identities: int
    images_per_identity: int = 1


class SynthRequest(BaseModel):
    dim: int
    seed: int = 0
    groups: list[GroupModel]
    out_dir: str


class SynthResponse(BaseModel):
    n_images: int
    n_identities: int
    dim: int
    features_path: str
    identities_path: str


class ClusterRequest(BaseModel):
    features_path: str
    identities_path: str | None = None
    k: int = 100
    seed: int = 0
    max_iter: int = 300
    tol: float = 1e-4
    out_dir: str | None = None


class ClusterResponse(BaseModel):
    k: int
    sizes: list[int]
    inertia: float
    n_iter: int
    out_dir: str | None


class SearchRequest(BaseModel):
    pool_path: str
    identities_path: str | None = None
    target_path: str
    k: int = 100
    n: int
    seed: int = 0
    max_iter: int = 300
    tol: float = 1e-4
    min_cluster_images: int = 2
    out_path: str | None = None
    ids_out_path: str | None = None


class SearchResponse(BaseModel):
    """The search manifest, mirroring its JSON file schema."""

    version: str
    config: dict
    cluster_fids: list[float | None]
    weights: list[float]
    selected_ids: list[str]
    seed: int
    per_identity_weight: dict[str, float]


class ReportRowModel(BaseModel):
    strategy: str
    k: int
    n: int
    seed: int
    fid: float


class CompareRequest(BaseModel):
    pool_path: str
    identities_path: str | None = None
    target_path: str
    k: int = 100
    n_list: list[int]
    seeds: int
    base_seed: int = 0
    out_dir: str | None = None


class SweepKRequest(BaseModel):
    pool_path: str
    identities_path: str | None = None
    target_path: str
    k_list: list[int]
    n: int
    seeds: int
    base_seed: int = 0
    out_dir: str | None = None


class ReportResponse(BaseModel):
    rows: list[ReportRowModel]
    summary: list[dict]
    config: dict
    csv_path: str | None = None
    summary_path: str | None = None
