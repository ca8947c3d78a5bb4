"""Feature tables and identity manifests: validation and on-disk formats.

Three formats are supported, all bit-exact and language-neutral:

* binary features: magic ``FSF1``, little-endian uint32 ``n`` and ``d``,
  then ``n * d`` little-endian float32 values in row-major order. Image IDs
  live in a sidecar file at ``<path>.ids`` holding ``n`` newline-delimited
  UTF-8 lines.
* csv features: header row with first column ``id`` followed by ``d``
  numeric columns.
* identity manifest: newline-delimited records
  ``identity_id<TAB>image_id[<TAB>key=value ...]``.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

MAGIC = b"FSF1"
IDS_SUFFIX = ".ids"

FORMATS = ("binary", "csv")


@dataclass(eq=False)
class FeatureTable:
    """An n x d matrix of float32 feature rows, one image ID per row.

    Invariants, enforced at construction: at least one row and one column,
    all values finite, IDs unique and aligned with rows.
    """

    ids: list[str]
    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ValidationError(f"feature data must be 2-D, got shape {self.data.shape}")
        n, d = self.data.shape
        if n < 1 or d < 1:
            raise ValidationError(f"feature table must be at least 1x1, got {n}x{d}")
        if len(self.ids) != n:
            raise ValidationError(f"{len(self.ids)} ids for {n} feature rows")
        bad = np.argwhere(~np.isfinite(self.data))
        if bad.size:
            r, c = bad[0]
            raise ValidationError(f"non-finite value at row {r}, column {c}")
        if len(set(self.ids)) != n:
            seen: set[str] = set()
            dup = next(i for i in self.ids if i in seen or seen.add(i))  # type: ignore[func-returns-value]
            raise ValidationError(f"duplicate image id {dup!r}")
        for i in self.ids:
            if not i or "\n" in i or "\t" in i:
                raise ValidationError(f"image id {i!r} is empty or contains tab/newline")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @cached_property
    def row_of(self) -> dict[str, int]:
        """Image ID to row index."""
        return {image_id: i for i, image_id in enumerate(self.ids)}

    def rows_for(self, image_ids: list[str]) -> np.ndarray:
        """Gather the feature rows of the given image IDs, in order."""
        lookup = self.row_of
        return self.data[[lookup[i] for i in image_ids]]


@dataclass
class IdentityIndex:
    """Grouping of image IDs into identities, with optional attribute tags.

    ``identities`` maps identity ID to a nonempty list of image IDs; no
    image may be claimed by two identities. ``attrs`` carries side
    information (e.g. a ground-truth group label) that the search pipeline
    itself never reads.
    """

    identities: dict[str, list[str]]
    attrs: dict[str, dict[str, str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.identities:
            raise ValidationError("identity index has no identities")
        claimed: dict[str, str] = {}
        for identity, images in self.identities.items():
            if not images:
                raise ValidationError(f"identity {identity!r} has no images")
            for img in images:
                if img in claimed:
                    raise ValidationError(
                        f"image id {img!r} claimed by both {claimed[img]!r} and {identity!r}"
                    )
                claimed[img] = identity

    @property
    def n_identities(self) -> int:
        return len(self.identities)

    @property
    def n_images(self) -> int:
        return sum(len(v) for v in self.identities.values())

    def validate_against(self, table: FeatureTable) -> None:
        """Check that every referenced image ID exists in *table*."""
        known = table.row_of
        for identity, images in self.identities.items():
            for img in images:
                if img not in known:
                    raise ValidationError(
                        f"identity {identity!r} references unknown image id {img!r}"
                    )


def default_identity_index(table: FeatureTable) -> IdentityIndex:
    """One singleton identity per image, identity ID equal to image ID."""
    return IdentityIndex(identities={i: [i] for i in table.ids})


# -- features ------------------------------------------------------------


def save_features(table: FeatureTable, path: str | Path, format: str = "binary") -> None:
    """Write *table* to *path* in the given format.

    Binary output is bit-exact under reload; csv is value-exact (floats are
    rendered with full precision). The binary format writes the ID sidecar
    at ``<path>.ids``.
    """
    path = Path(path)
    if format == "binary":
        payload = struct.pack("<4sII", MAGIC, table.n, table.dim)
        path.write_bytes(payload + table.data.astype("<f4").tobytes(order="C"))
        Path(str(path) + IDS_SUFFIX).write_text(
            "\n".join(table.ids) + "\n", encoding="utf-8"
        )
    elif format == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id"] + [f"f{j}" for j in range(table.dim)])
            for image_id, row in zip(table.ids, table.data):
                writer.writerow([image_id] + [repr(float(v)) for v in row])
    else:
        raise ValidationError(f"unknown feature format {format!r}")


def load_features(path: str | Path, format: str | None = None) -> FeatureTable:
    """Load and validate a feature table.

    With *format* omitted, a ``.csv`` suffix selects csv, anything else
    binary.

    Raises:
        FormatError: malformed magic/header, payload size mismatch, missing
            or mis-sized ID sidecar, non-numeric csv cell.
        ValidationError: non-finite value (reported with row and column),
            duplicate ID, empty table.
        OSError: unreadable file.
    """
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix == ".csv" else "binary"
    if format == "binary":
        return _load_binary(path)
    if format == "csv":
        return _load_csv(path)
    raise ValidationError(f"unknown feature format {format!r}")


def _load_binary(path: Path) -> FeatureTable:
    raw = path.read_bytes()
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic, not a {MAGIC.decode()} feature file")
    n, d = struct.unpack_from("<II", raw, 4)
    if n == 0 or d == 0:
        raise FormatError(f"{path}: header declares empty table ({n}x{d})")
    expected = 12 + 4 * n * d
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload is {len(raw) - 12} bytes, header {n}x{d} requires {4 * n * d}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=12).reshape(n, d)

    ids_path = Path(str(path) + IDS_SUFFIX)
    if not ids_path.exists():
        raise FormatError(f"{path}: missing id sidecar {ids_path}")
    ids = ids_path.read_text(encoding="utf-8").splitlines()
    if len(ids) != n:
        raise FormatError(f"{ids_path}: {len(ids)} ids for {n} feature rows")
    try:
        return FeatureTable(ids=ids, data=data)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def _load_csv(path: Path) -> FeatureTable:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty csv file") from None
        if not header or header[0] != "id" or len(header) < 2:
            raise FormatError(f"{path}: header must be 'id' followed by feature columns")
        d = len(header) - 1
        ids: list[str] = []
        rows: list[list[float]] = []
        for lineno, record in enumerate(reader, start=1):
            if not record:
                continue
            if len(record) != d + 1:
                raise FormatError(
                    f"{path}: row {lineno} has {len(record) - 1} values, expected {d}"
                )
            ids.append(record[0])
            try:
                values = [float(v) for v in record[1:]]
            except ValueError as exc:
                raise FormatError(f"{path}: row {lineno}: {exc}") from None
            for col, v in enumerate(values):
                if not np.isfinite(v):
                    raise ValidationError(
                        f"{path}: non-finite value at row {lineno}, column {col}"
                    )
            rows.append(values)
    if not ids:
        raise FormatError(f"{path}: csv has a header but no data rows")
    try:
        return FeatureTable(ids=ids, data=np.array(rows, dtype=np.float32))
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


# -- identities ----------------------------------------------------------


def save_identities(index: IdentityIndex, path: str | Path) -> None:
    """Write an identity manifest, attrs repeated on every record line."""
    path = Path(path)
    lines = []
    for identity, images in index.identities.items():
        tags = index.attrs.get(identity, {})
        suffix = "".join(f"\t{k}={v}" for k, v in sorted(tags.items()))
        for img in images:
            lines.append(f"{identity}\t{img}{suffix}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_identities(path: str | Path | None, table: FeatureTable) -> IdentityIndex:
    """Load an identity manifest and validate it against *table*.

    With ``path=None`` a default index is synthesized: one identity per
    image (the common one-image-per-person case).
    """
    if path is None:
        return default_identity_index(table)
    path = Path(path)
    identities: dict[str, list[str]] = {}
    attrs: dict[str, dict[str, str]] = {}
    claimed: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) < 2 or not parts[0] or not parts[1]:
            raise FormatError(f"{path}: line {lineno}: expected identity<TAB>image[<TAB>k=v ...]")
        identity, img = parts[0], parts[1]
        if img in claimed:
            raise ValidationError(
                f"{path}: line {lineno}: image id {img!r} claimed by both "
                f"{claimed[img]!r} and {identity!r}"
            )
        claimed[img] = identity
        identities.setdefault(identity, []).append(img)
        for token in parts[2:]:
            key, sep, value = token.partition("=")
            if not sep or not key:
                raise FormatError(f"{path}: line {lineno}: malformed attribute {token!r}")
            attrs.setdefault(identity, {})[key] = value
    if not identities:
        raise FormatError(f"{path}: manifest has no records")
    index = IdentityIndex(identities=identities, attrs=attrs)
    index.validate_against(table)
    return index
