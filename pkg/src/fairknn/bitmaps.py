"""Bitmap encoding of attribute partitions and the masked-XOR relevance test.

Each attribute gets a fixed-width bit field sized to hold one spare code:
width_j = ceil(log2(|V_j| + 1)). Value index v encodes as v + 1 so the
all-zeros field is reserved for "attribute absent", which is what query
bitmaps use for unconstrained attributes. Attribute 0 occupies the most
significant field. Total width is capped at 64 bits so a partition key
fits a machine word.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import AttributeSchema, FairnessSpec, VectorRecord

MAX_TOTAL_WIDTH = 64


class MalformedBitmapError(ValueError):
    """A bitmap's bits do not decode under the layout that was given."""


@dataclass(frozen=True)
class BitLayout:
    """Field widths and shifts for packing attribute values into one word."""

    widths: tuple[int, ...]
    offsets: tuple[int, ...]
    sizes: tuple[int, ...]
    total_width: int

    @classmethod
    def from_schema(cls, schema: AttributeSchema) -> "BitLayout":
        sizes = schema.sizes()
        widths = tuple(math.ceil(math.log2(size + 1)) for size in sizes)
        total = sum(widths)
        if total > MAX_TOTAL_WIDTH:
            raise ValueError(f"partition bitmap needs {total} bits, the cap is {MAX_TOTAL_WIDTH}")
        offsets = tuple(sum(widths[j + 1:]) for j in range(len(widths)))
        return cls(widths, offsets, sizes, total)

    @property
    def m(self) -> int:
        return len(self.widths)

    def field_mask(self, j: int) -> int:
        return ((1 << self.widths[j]) - 1) << self.offsets[j]


def encode_partition(attrs: Sequence[int], layout: BitLayout) -> int:
    """Pack a full attribute-value tuple into its partition bitmap."""
    if len(attrs) != layout.m:
        raise ValueError(f"expected {layout.m} attribute values, got {len(attrs)}")
    bits = 0
    for j, v in enumerate(attrs):
        if not 0 <= v < layout.sizes[j]:
            raise ValueError(f"value index {v} out of range for attribute {j}")
        bits |= (v + 1) << layout.offsets[j]
    return bits


def encode_partial(assignment: Mapping[int, int], layout: BitLayout) -> int:
    """Pack a partial assignment; unmentioned attributes get the absent code 0."""
    bits = 0
    for j, v in assignment.items():
        if not 0 <= j < layout.m:
            raise ValueError(f"attribute index {j} out of range")
        if not 0 <= v < layout.sizes[j]:
            raise ValueError(f"value index {v} out of range for attribute {j}")
        bits |= (v + 1) << layout.offsets[j]
    return bits


def decode_partition(bits: int, layout: BitLayout) -> tuple[int | None, ...]:
    """Unpack a bitmap to value indices; an all-zeros field decodes to None."""
    if bits < 0 or bits >> layout.total_width:
        raise MalformedBitmapError(f"bitmap {bits:#x} does not fit in {layout.total_width} bits")
    out: list[int | None] = []
    for j in range(layout.m):
        code = (bits >> layout.offsets[j]) & ((1 << layout.widths[j]) - 1)
        if code == 0:
            out.append(None)
        elif code <= layout.sizes[j]:
            out.append(code - 1)
        else:
            raise MalformedBitmapError(f"attribute {j}: field code {code} exceeds domain size {layout.sizes[j]}")
    return tuple(out)


# ---------------------------------------------------------------- registry

def partition_rows(attrs: np.ndarray, layout: BitLayout) -> dict[int, np.ndarray]:
    """Group row positions by partition bitmap, rows ascending per group."""
    attrs = np.asarray(attrs, dtype=np.int64)
    if attrs.ndim != 2 or attrs.shape[1] != layout.m:
        raise ValueError(f"attribute matrix must be (n, {layout.m})")
    for j in range(layout.m):
        col = attrs[:, j]
        if col.size and (col.min() < 0 or col.max() >= layout.sizes[j]):
            raise ValueError(f"attribute {j}: value index out of range")
    bits = np.zeros(attrs.shape[0], dtype=np.int64)
    for j in range(layout.m):
        bits |= (attrs[:, j] + 1) << np.int64(layout.offsets[j])
    uniq, inverse = np.unique(bits, return_inverse=True)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(uniq) + 1))
    return {int(b): np.sort(order[bounds[u]:bounds[u + 1]]) for u, b in enumerate(uniq)}


def registry_from_matrix(attrs: np.ndarray, ids: np.ndarray, layout: BitLayout) -> dict[int, np.ndarray]:
    """Group record ids by partition bitmap. Member lists are id-ascending."""
    ids = np.asarray(ids, dtype=np.int64)
    return {bits: np.sort(ids[rows]) for bits, rows in partition_rows(attrs, layout).items()}


def build_registry(records: Iterable[VectorRecord], layout: BitLayout) -> dict[int, np.ndarray]:
    """Registry from explicit records: partition bitmap -> sorted member ids."""
    recs = list(records)
    attrs = np.array([r.attrs for r in recs], dtype=np.int64).reshape(len(recs), layout.m)
    ids = np.array([r.id for r in recs], dtype=np.int64)
    return registry_from_matrix(attrs, ids, layout)


# ---------------------------------------------------------------- relevance

@dataclass(frozen=True)
class QueryMask:
    """Constrained-field mask plus every query bitmap the spec induces.

    Query bitmaps enumerate one value combination per constrained
    attribute, restricted to values with a positive target count; all
    other fields stay zero. They come out in ascending numeric order.
    """

    mask: int
    bitmaps: tuple[int, ...]


def query_mask(spec: FairnessSpec, layout: BitLayout) -> QueryMask:
    constrained = spec.constrained()
    mask = 0
    for j in constrained:
        if j >= layout.m:
            raise ValueError(f"constrained attribute index {j} out of range for layout")
        mask |= layout.field_mask(j)
    value_lists = [spec.positive_values(j) for j in constrained]
    bitmaps = []
    if all(value_lists):
        for combo in itertools.product(*value_lists):
            bitmaps.append(encode_partial(dict(zip(constrained, combo)), layout))
    return QueryMask(mask, tuple(bitmaps))


def relevance_matrix(partition_bits: np.ndarray, qm: QueryMask) -> np.ndarray:
    """(partitions, query bitmaps) boolean table of the masked-XOR test.

    Entry [p, i] is True iff ((bits_p AND mask) XOR q_i) == 0. One
    comparison per pair, so the work is exactly len(bits) * len(qm.bitmaps).
    """
    bits = np.asarray(partition_bits, dtype=np.uint64)
    if not qm.bitmaps:
        return np.zeros((bits.size, 0), dtype=bool)
    qbs = np.asarray(qm.bitmaps, dtype=np.uint64)
    masked = bits & np.uint64(qm.mask)
    return (masked[:, None] ^ qbs[None, :]) == 0


def relevant_partitions(partition_bits: Iterable[int], qm: QueryMask) -> list[int]:
    """Partitions whose masked bitmap matches some query bitmap, ascending."""
    bits = np.fromiter(partition_bits, dtype=np.uint64)
    if bits.size == 0:
        return []
    hit = relevance_matrix(bits, qm).any(axis=1)
    return sorted(int(b) for b in bits[hit])


def quota(partition_bits: int, spec: FairnessSpec, layout: BitLayout) -> int:
    """Per-partition retrieval quota: the tightest constrained target.

    Every member of a partition carries the same value on every
    attribute, so no feasible answer can use more than beta[j, v_j]
    members of it for any constrained j. The min over constrained
    attributes is therefore an upper bound on how many of its members
    any feasible answer contains.
    """
    values = decode_partition(partition_bits, layout)
    best = spec.k
    for j in spec.constrained():
        v = values[j]
        best = min(best, 0 if v is None else spec.count(j, v))
    return best
