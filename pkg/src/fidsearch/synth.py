"""Synthetic biased populations with known subgroup provenance.

Each group is a Gaussian in feature space; identities draw their mean from
the group, and their images jitter around that mean with 10% of the group
covariance. The generated identity manifest tags every identity with its
ground-truth group, so selection strategies can be validated against known
provenance without any real data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .features_io import FeatureTable, IdentityIndex

IMAGE_JITTER_FRACTION = 0.1
PROPORTION_ATOL = 1e-6


@dataclass
class GroupSpec:
    """One subgroup: its Gaussian, identity count, and images per identity."""

    name: str
    proportion: float
    mean: np.ndarray
    cov: np.ndarray
    identities: int
    images_per_identity: int = 1

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        self.cov = np.asarray(self.cov, dtype=np.float64)
        d = self.mean.shape[0]
        if self.cov.shape != (d, d):
            raise ValidationError(
                f"group {self.name!r}: cov shape {self.cov.shape} does not match dim {d}"
            )
        if self.proportion <= 0:
            raise ValidationError(f"group {self.name!r}: proportion must be > 0")
        if self.identities < 1 or self.images_per_identity < 1:
            raise ValidationError(f"group {self.name!r}: counts must be >= 1")


@dataclass
class PopulationSpec:
    """A mixture of groups over a shared feature dimension, plus a seed."""

    groups: list[GroupSpec]
    dim: int
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.groups:
            raise ValidationError("population needs at least one group")
        names = [g.name for g in self.groups]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate group name")
        total = sum(g.proportion for g in self.groups)
        if abs(total - 1.0) > PROPORTION_ATOL:
            raise ValidationError(f"group proportions sum to {total!r}, expected 1")
        for g in self.groups:
            if g.mean.shape[0] != self.dim:
                raise ValidationError(
                    f"group {g.name!r} has dim {g.mean.shape[0]}, population dim is {self.dim}"
                )

    @property
    def n_identities(self) -> int:
        return sum(g.identities for g in self.groups)

    @property
    def n_images(self) -> int:
        return sum(g.identities * g.images_per_identity for g in self.groups)


def _cov_factor(cov: np.ndarray, name: str) -> np.ndarray:
    """PSD factor L with L L^T = cov; rejects covariances that are not PSD."""
    cov = (cov + cov.T) / 2.0
    w, v = np.linalg.eigh(cov)
    scale = max(float(w[-1]), 1.0)
    if w[0] < -1e-9 * scale:
        raise ValidationError(f"group {name!r}: covariance is not PSD (min eig {w[0]:g})")
    return v * np.sqrt(np.clip(w, 0.0, None))


def generate(spec: PopulationSpec) -> tuple[FeatureTable, IdentityIndex]:
    """Draw the population described by *spec*, deterministically.

    Returns a float32 feature table (rows grouped by group, then identity,
    then image) and an identity index whose attrs carry
    ``group=<group name>`` for every identity.
    """
    rng = np.random.default_rng(spec.seed)
    ids: list[str] = []
    blocks: list[np.ndarray] = []
    identities: dict[str, list[str]] = {}
    attrs: dict[str, dict[str, str]] = {}

    for group in spec.groups:
        factor = _cov_factor(group.cov, group.name)
        jitter_factor = np.sqrt(IMAGE_JITTER_FRACTION) * factor
        id_means = group.mean + rng.standard_normal((group.identities, spec.dim)) @ factor.T
        for i in range(group.identities):
            identity = f"{group.name}-{i:05d}"
            images = []
            noise = rng.standard_normal((group.images_per_identity, spec.dim))
            rows = id_means[i] + noise @ jitter_factor.T
            for j in range(group.images_per_identity):
                image_id = f"{identity}-{j:03d}"
                images.append(image_id)
                ids.append(image_id)
            blocks.append(rows)
            identities[identity] = images
            attrs[identity] = {"group": group.name}

    table = FeatureTable(ids=ids, data=np.vstack(blocks).astype(np.float32))
    return table, IdentityIndex(identities=identities, attrs=attrs)


# -- JSON spec files -----------------------------------------------------


def _parse_cov(raw, dim: int, name: str) -> np.ndarray:
    """Covariance from a scalar (isotropic), vector (diagonal), or matrix."""
    if isinstance(raw, (int, float)):
        return float(raw) * np.eye(dim)
    arr = np.asarray(raw, dtype=np.float64)
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise ValidationError(f"group {name!r}: diagonal cov has wrong length")
        return np.diag(arr)
    return arr


def load_population_spec(path: str | Path) -> PopulationSpec:
    """Read a PopulationSpec from a JSON file.

    Expected shape::

        {"dim": 8, "seed": 0, "groups": [
            {"name": "a", "proportion": 0.75, "mean": [...],
             "cov": 1.0, "identities": 600, "images_per_identity": 1},
            ...]}

    ``cov`` may be a scalar (isotropic), a vector (diagonal), or a full
    matrix.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from None
    try:
        dim = int(doc["dim"])
        groups = [
            GroupSpec(
                name=str(g["name"]),
                proportion=float(g["proportion"]),
                mean=np.asarray(g["mean"], dtype=np.float64),
                cov=_parse_cov(g["cov"], dim, str(g["name"])),
                identities=int(g["identities"]),
                images_per_identity=int(g.get("images_per_identity", 1)),
            )
            for g in doc["groups"]
        ]
    except KeyError as exc:
        raise ValidationError(f"{path}: missing required key {exc}") from None
    return PopulationSpec(groups=groups, dim=dim, seed=int(doc.get("seed", 0)))
