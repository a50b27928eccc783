"""Dataset container plus CSV and packed-binary ingestion and export.

CSV layout: a header line `id,attr:<name>,...,vec:0,...,vec:<d-1>`, then
one row per record. Attribute cells hold value strings; the schema is
built from their order of first appearance. The binary format is
little-endian: magic, version, n, d, m, a JSON schema block (attribute
names/values and the distance kind), then fixed-width records of
id, embedding, attribute indices.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import AttributeSchema, DistanceKind, FairnessSpec, Query, VectorRecord, distances

BINARY_MAGIC = b"FKNNDATA"
BINARY_VERSION = 1


class DatasetFormatError(ValueError):
    """A dataset file does not parse under the declared format."""


@dataclass(eq=False)
class Dataset:
    """Column-major in-memory dataset: embeddings, attribute indices, ids."""

    schema: AttributeSchema
    kind: DistanceKind
    ids: np.ndarray          # (n,) int64, unique
    embeddings: np.ndarray   # (n, d) float64
    attrs: np.ndarray        # (n, m) int64

    def __post_init__(self) -> None:
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        self.attrs = np.asarray(self.attrs, dtype=np.int64)
        n = self.ids.shape[0]
        if self.embeddings.ndim != 2 or self.embeddings.shape[0] != n:
            raise ValueError("embeddings must be (n, d) aligned with ids")
        if self.attrs.shape != (n, self.schema.m):
            raise ValueError(f"attribute matrix must be (n, {self.schema.m})")
        if n and len(np.unique(self.ids)) != n:
            raise ValueError("record ids must be unique")
        if not np.all(np.isfinite(self.embeddings)):
            raise ValueError("embeddings must be finite")
        sizes = self.schema.sizes()
        for j in range(self.schema.m):
            col = self.attrs[:, j]
            if n and (col.min() < 0 or col.max() >= sizes[j]):
                raise ValueError(f"attribute column {j} holds a value index out of range")

    @property
    def n(self) -> int:
        return int(self.ids.shape[0])

    @property
    def d(self) -> int:
        return int(self.embeddings.shape[1])

    def record(self, row: int) -> VectorRecord:
        return VectorRecord(int(self.ids[row]), self.embeddings[row], tuple(int(v) for v in self.attrs[row]))

    def records(self) -> Iterable[VectorRecord]:
        return (self.record(i) for i in range(self.n))

    def rows_for_ids(self, wanted: np.ndarray) -> np.ndarray:
        """Row positions of the given record ids; KeyError if any id is unknown."""
        wanted = np.asarray(wanted, dtype=np.int64)
        order = np.argsort(self.ids, kind="stable")
        pos = np.searchsorted(self.ids, wanted, sorter=order)
        if np.any(pos >= self.n) or np.any(self.ids[order[np.minimum(pos, self.n - 1)]] != wanted):
            missing = wanted[(pos >= self.n) | (self.ids[order[np.minimum(pos, self.n - 1)]] != wanted)]
            raise KeyError(f"unknown record ids: {missing[:5].tolist()}")
        return order[pos]

    def fingerprint(self) -> bytes:
        """SHA-256 over the canonical binary serialization of the content."""
        h = hashlib.sha256()
        h.update(_header_bytes(self))
        h.update(self.ids.tobytes())
        h.update(self.embeddings.astype("<f8").tobytes())
        h.update(self.attrs.astype("<i4").tobytes())
        return h.digest()


def from_records(schema: AttributeSchema, kind: DistanceKind, records: Iterable[VectorRecord]) -> Dataset:
    recs = list(records)
    if not recs:
        raise ValueError("cannot build a dataset from zero records")
    ids = np.array([r.id for r in recs], dtype=np.int64)
    emb = np.array([np.asarray(r.embedding, dtype=np.float64) for r in recs])
    attrs = np.array([r.attrs for r in recs], dtype=np.int64)
    return Dataset(schema, kind, ids, emb, attrs)


# ------------------------------------------------------------------ csv

def _parse_csv_header(line: str) -> tuple[list[str], int]:
    cols = [c.strip() for c in line.split(",")]
    if not cols or cols[0] != "id":
        raise DatasetFormatError("csv header must start with an 'id' column")
    attr_names: list[str] = []
    i = 1
    while i < len(cols) and cols[i].startswith("attr:"):
        name = cols[i][len("attr:"):]
        if not name:
            raise DatasetFormatError("empty attribute name in csv header")
        attr_names.append(name)
        i += 1
    vec_cols = cols[i:]
    if not attr_names:
        raise DatasetFormatError("csv header declares no attr:<name> columns")
    if not vec_cols:
        raise DatasetFormatError("csv header declares no vec:<i> columns")
    for j, c in enumerate(vec_cols):
        if c != f"vec:{j}":
            raise DatasetFormatError(f"csv header column {i + j + 1} must be 'vec:{j}', got {c!r}")
    return attr_names, len(vec_cols)


def ingest_csv(path: str | Path, kind: DistanceKind = DistanceKind.euclidean()) -> Dataset:
    """Parse a csv dataset; value domains follow first appearance order."""
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines()]
    if not lines or not lines[0].strip():
        raise DatasetFormatError(f"{path}: empty file")
    attr_names, d = _parse_csv_header(lines[0])
    m = len(attr_names)
    value_order: list[list[str]] = [[] for _ in range(m)]
    value_index: list[dict[str, int]] = [{} for _ in range(m)]
    ids: list[int] = []
    attrs: list[list[int]] = []
    vecs: list[list[float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != 1 + m + d:
            raise DatasetFormatError(f"{path}: line {lineno}: expected {1 + m + d} cells, got {len(cells)}")
        try:
            rid = int(cells[0])
        except ValueError:
            raise DatasetFormatError(f"{path}: line {lineno}: id {cells[0]!r} is not an integer") from None
        row_attrs = []
        for j in range(m):
            value = cells[1 + j]
            if not value:
                raise DatasetFormatError(f"{path}: line {lineno}: empty value for attribute {attr_names[j]!r}")
            if value not in value_index[j]:
                value_index[j][value] = len(value_order[j])
                value_order[j].append(value)
            row_attrs.append(value_index[j][value])
        try:
            vec = [float(c) for c in cells[1 + m:]]
        except ValueError:
            raise DatasetFormatError(f"{path}: line {lineno}: non-numeric vector component") from None
        if not all(np.isfinite(vec)):
            raise DatasetFormatError(f"{path}: line {lineno}: non-finite vector component")
        ids.append(rid)
        attrs.append(row_attrs)
        vecs.append(vec)
    if not ids:
        raise DatasetFormatError(f"{path}: no data rows")
    if len(set(ids)) != len(ids):
        raise DatasetFormatError(f"{path}: duplicate record ids")
    schema = AttributeSchema.of(*((attr_names[j], value_order[j]) for j in range(m)))
    return Dataset(schema, kind, np.array(ids), np.array(vecs), np.array(attrs))


def export_csv(ds: Dataset, path: str | Path) -> None:
    header = ["id"] + [f"attr:{name}" for name in ds.schema.names()] + [f"vec:{i}" for i in range(ds.d)]
    out = [",".join(header)]
    for i in range(ds.n):
        cells = [str(int(ds.ids[i]))]
        cells += [ds.schema.values(j)[ds.attrs[i, j]] for j in range(ds.schema.m)]
        cells += [repr(float(x)) for x in ds.embeddings[i]]
        out.append(",".join(cells))
    Path(path).write_text("\n".join(out) + "\n")


# --------------------------------------------------------------- binary

def _header_bytes(ds: Dataset) -> bytes:
    meta = json.dumps(
        {"schema": [[name, list(values)] for name, values in ds.schema.attributes], "distance": str(ds.kind)},
        sort_keys=True, separators=(",", ":")).encode()
    return struct.pack("<8sIQII", BINARY_MAGIC, BINARY_VERSION, ds.n, ds.d, ds.schema.m) + \
        struct.pack("<I", len(meta)) + meta


def export_binary(ds: Dataset, path: str | Path) -> None:
    rec = struct.Struct(f"<q{ds.d}d{ds.schema.m}i")
    with open(path, "wb") as fh:
        fh.write(_header_bytes(ds))
        for i in range(ds.n):
            fh.write(rec.pack(int(ds.ids[i]), *ds.embeddings[i].tolist(), *ds.attrs[i].tolist()))


def ingest_binary(path: str | Path) -> Dataset:
    blob = Path(path).read_bytes()
    head = struct.Struct("<8sIQII")
    if len(blob) < head.size:
        raise DatasetFormatError(f"{path}: file too short for a header")
    magic, version, n, d, m = head.unpack_from(blob, 0)
    if magic != BINARY_MAGIC:
        raise DatasetFormatError(f"{path}: bad magic, not a dataset file")
    if version != BINARY_VERSION:
        raise DatasetFormatError(f"{path}: unsupported dataset format version {version}")
    off = head.size
    (meta_len,) = struct.unpack_from("<I", blob, off)
    off += 4
    try:
        meta = json.loads(blob[off:off + meta_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DatasetFormatError(f"{path}: corrupt schema block: {exc}") from None
    off += meta_len
    schema = AttributeSchema.of(*((name, values) for name, values in meta["schema"]))
    if schema.m != m:
        raise DatasetFormatError(f"{path}: header says m={m} but schema block has {schema.m} attributes")
    kind = DistanceKind.parse(meta["distance"])
    rec = struct.Struct(f"<q{d}d{m}i")
    if len(blob) - off != n * rec.size:
        raise DatasetFormatError(f"{path}: expected {n} records ({n * rec.size} bytes), found {len(blob) - off} bytes")
    ids = np.empty(n, dtype=np.int64)
    emb = np.empty((n, d), dtype=np.float64)
    attrs = np.empty((n, m), dtype=np.int64)
    for i in range(n):
        fields = rec.unpack_from(blob, off + i * rec.size)
        ids[i] = fields[0]
        emb[i] = fields[1:1 + d]
        attrs[i] = fields[1 + d:]
    return Dataset(schema, kind, ids, emb, attrs)


def ingest(path: str | Path, fmt: str = "auto", kind: DistanceKind = DistanceKind.euclidean()) -> Dataset:
    """Load a dataset; fmt is 'csv', 'binary', or 'auto' (sniff the magic)."""
    if fmt == "auto":
        with open(path, "rb") as fh:
            fmt = "binary" if fh.read(len(BINARY_MAGIC)) == BINARY_MAGIC else "csv"
    if fmt == "csv":
        return ingest_csv(path, kind)
    if fmt == "binary":
        return ingest_binary(path)
    raise ValueError(f"unknown dataset format {fmt!r}")


def save(ds: Dataset, path: str | Path) -> None:
    """Write csv when the path ends in .csv, packed binary otherwise."""
    if str(path).endswith(".csv"):
        export_csv(ds, path)
    else:
        export_binary(ds, path)


# ------------------------------------------------------------- utilities

def knn_ids(ds: Dataset, q: np.ndarray, k: int) -> np.ndarray:
    """Ids of the k nearest records to q, distance then id ascending."""
    dist = distances(ds.embeddings, q, ds.kind)
    order = np.lexsort((ds.ids, dist))[:k]
    return ds.ids[order]


def count_feasible(ds: Dataset, spec: FairnessSpec) -> bool:
    """Availability check: every target count fits the dataset's value counts.

    Necessary for feasibility; together with a witness set meeting the
    counts it is a certificate. Used by the query generator.
    """
    if spec.k > ds.n:
        return False
    for j in spec.constrained():
        col = ds.attrs[:, j]
        for v, c in spec.constraints[j].items():
            if c > int(np.count_nonzero(col == v)):
                return False
    return True


# --------------------------------------------------------------- queries

def query_to_dict(q: Query, schema: AttributeSchema) -> dict:
    return {
        "vector": [float(x) for x in np.asarray(q.vector)],
        "k": q.spec.k,
        "constraints": q.spec.to_names(schema),
    }


def query_from_dict(obj: dict, schema: AttributeSchema) -> Query:
    spec = FairnessSpec.from_names(schema, int(obj["k"]), obj["constraints"])
    return Query(np.asarray(obj["vector"], dtype=np.float64), spec)


def save_queries(queries: Iterable[Query], schema: AttributeSchema, path: str | Path) -> None:
    with open(path, "w") as fh:
        for q in queries:
            fh.write(json.dumps(query_to_dict(q, schema), sort_keys=True, separators=(",", ":")) + "\n")


def load_queries(path: str | Path, schema: AttributeSchema) -> list[Query]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                out.append(query_from_dict(json.loads(line), schema))
    return out
