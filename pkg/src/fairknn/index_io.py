"""Index construction and single-file persistence.

A FairIndex keeps one LSH structure per non-empty attribute partition.
The on-disk format is little-endian: a versioned magic header, a JSON
block (schema, distance kind, LSH parameters), the dataset fingerprint
the index was built from, then per-partition member lists, hash-family
arrays and bucket tables. Loading refuses other versions and `query`
paths refuse an index whose fingerprint does not match the dataset.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .bitmaps import BitLayout, partition_rows
from .core import AttributeSchema, DistanceKind
from .datasets import Dataset
from .lsh import HashFamily, LshParams, PartitionLsh, build_partition_lsh

INDEX_MAGIC = b"FKNNIDX\x00"
INDEX_VERSION = 1


class IndexFormatError(ValueError):
    """An index file does not parse, or does not match its dataset."""


@dataclass(eq=False)
class FairIndex:
    schema: AttributeSchema
    kind: DistanceKind
    layout: BitLayout
    params: LshParams
    d: int
    partitions: dict[int, PartitionLsh]   # keyed by bitmap, ascending insertion
    fingerprint: bytes

    @property
    def registry(self) -> dict[int, np.ndarray]:
        return {bits: p.member_ids for bits, p in self.partitions.items()}

    def check_dataset(self, ds: Dataset) -> None:
        if ds.fingerprint() != self.fingerprint:
            raise IndexFormatError("index was built from a different dataset (fingerprint mismatch)")


def build_index(ds: Dataset, params: LshParams) -> FairIndex:
    """Partition the dataset by attribute bitmap and hash every partition."""
    layout = BitLayout.from_schema(ds.schema)
    partitions: dict[int, PartitionLsh] = {}
    for bits, rows in sorted(partition_rows(ds.attrs, layout).items()):
        by_id = rows[np.argsort(ds.ids[rows], kind="stable")]
        partitions[bits] = build_partition_lsh(
            bits, ds.ids[by_id], by_id, ds.embeddings[by_id], ds.kind, params)
    return FairIndex(ds.schema, ds.kind, layout, params, ds.d, partitions, ds.fingerprint())


# ----------------------------------------------------------------- save/load

def _params_to_dict(params: LshParams) -> dict:
    return {f.name: getattr(params, f.name) for f in fields(LshParams)}


def save_index(index: FairIndex, path: str | Path) -> None:
    meta = json.dumps(
        {
            "schema": [[name, list(values)] for name, values in index.schema.attributes],
            "distance": str(index.kind),
            "params": _params_to_dict(index.params),
            "d": index.d,
        },
        sort_keys=True, separators=(",", ":")).encode()
    out = bytearray()
    out += struct.pack("<8sI", INDEX_MAGIC, INDEX_VERSION)
    out += struct.pack("<I", len(meta)) + meta
    out += struct.pack("<I", len(index.fingerprint)) + index.fingerprint
    out += struct.pack("<I", len(index.partitions))
    for bits, p in index.partitions.items():
        kind_code = 0 if p.family.kind == "pstable" else 1
        out += struct.pack("<QQIIdQBB", bits, p.size, p.mu, p.ell, p.rho, p.surplus,
                           int(p.clamped), kind_code)
        out += p.member_ids.astype("<i8").tobytes()
        out += p.member_rows.astype("<i8").tobytes()
        out += p.family.proj.astype("<f8").tobytes()
        if p.family.offset is not None:
            out += p.family.offset.astype("<f8").tobytes()
        for table in p.tables:
            out += struct.pack("<I", len(table))
            for key, members in table.items():
                raw = key if isinstance(key, bytes) else struct.pack("<Q", key)
                out += struct.pack("<I", len(raw)) + raw
                arr = np.asarray(members, dtype="<i4")
                out += struct.pack("<I", arr.size) + arr.tobytes()
    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, blob: bytes, path: str):
        self.blob = blob
        self.off = 0
        self.path = path

    def take(self, size: int) -> bytes:
        if self.off + size > len(self.blob):
            raise IndexFormatError(f"{self.path}: truncated index file")
        chunk = self.blob[self.off:self.off + size]
        self.off += size
        return chunk

    def unpack(self, fmt: str) -> tuple:
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def array(self, dtype: str, count: int) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt).astype(dt.newbyteorder("="))


def load_index(path: str | Path) -> FairIndex:
    rd = _Reader(Path(path).read_bytes(), str(path))
    magic, version = rd.unpack("<8sI")
    if magic != INDEX_MAGIC:
        raise IndexFormatError(f"{path}: bad magic, not an index file")
    if version != INDEX_VERSION:
        raise IndexFormatError(f"{path}: unsupported index version {version}")
    (meta_len,) = rd.unpack("<I")
    meta = json.loads(rd.take(meta_len).decode())
    schema = AttributeSchema.of(*((name, values) for name, values in meta["schema"]))
    kind = DistanceKind.parse(meta["distance"])
    params = LshParams(**meta["params"])
    d = int(meta["d"])
    (fp_len,) = rd.unpack("<I")
    fingerprint = rd.take(fp_len)
    (n_parts,) = rd.unpack("<I")
    partitions: dict[int, PartitionLsh] = {}
    for _ in range(n_parts):
        bits, n, mu, ell, rho, surplus, clamped, kind_code = rd.unpack("<QQIIdQBB")
        member_ids = rd.array("<i8", n)
        member_rows = rd.array("<i8", n)
        proj = rd.array("<f8", ell * mu * d).reshape(ell, mu, d)
        fam_kind = "pstable" if kind_code == 0 else "angular"
        offset = rd.array("<f8", ell * mu).reshape(ell, mu) if fam_kind == "pstable" else None
        family = HashFamily(fam_kind, params.width if fam_kind == "pstable" else 0.0, proj, offset)
        tables = []
        for _ in range(ell):
            (n_buckets,) = rd.unpack("<I")
            table = {}
            for _ in range(n_buckets):
                (key_len,) = rd.unpack("<I")
                raw = rd.take(key_len)
                key = raw if fam_kind == "pstable" else struct.unpack("<Q", raw)[0]
                (count,) = rd.unpack("<I")
                table[key] = rd.array("<i4", count).astype(np.int64)
            tables.append(table)
        partitions[int(bits)] = PartitionLsh(int(bits), member_ids, member_rows, family,
                                             mu, ell, rho, int(surplus), bool(clamped), tables)
    if rd.off != len(rd.blob):
        raise IndexFormatError(f"{path}: {len(rd.blob) - rd.off} trailing bytes")
    return FairIndex(schema, kind, BitLayout.from_schema(schema), params, d, partitions, fingerprint)
