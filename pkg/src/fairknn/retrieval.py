"""Partition-restricted candidate retrieval.

A query touches only the partitions whose bitmap passes the masked-XOR
relevance test. Each relevant partition contributes at most its quota
k_pi of candidates (the tightest constrained target for its values),
probed from its LSH tables with an inflated budget k*_pi = k_pi +
surplus that absorbs expected false positives. Members of one partition
agree on every attribute, so no feasible answer needs more than k_pi of
them: the union of per-partition quota heads still contains an optimal
fair answer whenever retrieval is exhaustive per partition.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bitmaps import query_mask, quota, relevant_partitions
from .core import FairnessSpec, Query, distances
from .datasets import Dataset
from .fairselect import SelectionProblem
from .index_io import FairIndex
from .lsh import PartitionLsh, probe


@dataclass(frozen=True)
class Candidate:
    """One retrieved record: identity, distance and attribute values."""

    id: int
    row: int
    dist: float
    attrs: tuple[int, ...]
    partition: int


@dataclass(frozen=True)
class PartitionProbe:
    """Per-partition accounting of one retrieval."""

    bits: int
    size: int          # members in the partition
    quota: int         # k_pi
    budget: int        # k*_pi
    collisions: int    # distinct members colliding with the query
    scanned: int       # distance evaluations = min(collisions, budget)
    returned: int      # candidates kept (<= quota)


@dataclass(eq=False)
class RetrievalReport:
    """Union of per-partition candidates plus probe accounting."""

    ids: np.ndarray
    rows: np.ndarray
    dists: np.ndarray
    partition_of: np.ndarray
    probes: list[PartitionProbe]
    relevant_members: int

    @property
    def scanned(self) -> int:
        return sum(p.scanned for p in self.probes)

    def candidates(self, ds: Dataset) -> list[Candidate]:
        return [
            Candidate(int(i), int(r), float(d), tuple(int(v) for v in ds.attrs[r]), int(b))
            for i, r, d, b in zip(self.ids, self.rows, self.dists, self.partition_of)
        ]

    def selection_problem(self, ds: Dataset, spec: FairnessSpec) -> SelectionProblem:
        return SelectionProblem(self.ids, self.dists, ds.attrs[self.rows], spec)


def near_pi(ds: Dataset, plsh: PartitionLsh, q: np.ndarray, k_pi: int,
            k_star: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Up to k_pi nearest collided members of one partition.

    Probes every table, keeps collided members in first-encounter order
    (table order, then bucket order), truncates to the first k_star
    distinct members, and only then ranks by distance (ties by id).
    Returning fewer than k_pi is legal; the caller treats the result as
    what this partition can offer.
    """
    local = probe(plsh, q)
    collisions = int(local.size)
    local = local[:k_star]
    rows = plsh.member_rows[local]
    ids = plsh.member_ids[local]
    dist = distances(ds.embeddings[rows], q, ds.kind)
    order = np.lexsort((ids, dist))[:k_pi]
    return ids[order], rows[order], dist[order], collisions


def near_neighbor(ds: Dataset, index: FairIndex, query: Query, quota_boost: int = 1) -> RetrievalReport:
    """Probe every relevant partition and pool the quota-limited heads.

    Partitions are disjoint, so the union never holds duplicate ids.
    """
    spec = query.spec
    spec.validate_against(ds.schema)
    if quota_boost < 1:
        raise ValueError("quota_boost must be >= 1")
    qm = query_mask(spec, index.layout)
    rel = relevant_partitions(index.partitions.keys(), qm)
    ids_parts, rows_parts, dist_parts, bits_parts = [], [], [], []
    probes: list[PartitionProbe] = []
    relevant_members = 0
    for bits in rel:
        plsh = index.partitions[bits]
        relevant_members += plsh.size
        k_pi = quota(bits, spec, index.layout) * quota_boost
        k_star = k_pi + plsh.surplus
        ids, rows, dist, collisions = near_pi(ds, plsh, query.vector, k_pi, k_star)
        probes.append(PartitionProbe(bits, plsh.size, k_pi, k_star, collisions,
                                     min(collisions, k_star), int(ids.size)))
        if ids.size:
            ids_parts.append(ids)
            rows_parts.append(rows)
            dist_parts.append(dist)
            bits_parts.append(np.full(ids.size, bits, dtype=np.int64))
    if ids_parts:
        all_ids = np.concatenate(ids_parts)
        report = RetrievalReport(all_ids, np.concatenate(rows_parts), np.concatenate(dist_parts),
                                 np.concatenate(bits_parts), probes, relevant_members)
    else:
        empty = np.empty(0, dtype=np.int64)
        report = RetrievalReport(empty, empty.copy(), np.empty(0, dtype=np.float64),
                                 empty.copy(), probes, relevant_members)
    assert len(np.unique(report.ids)) == report.ids.size, "partitions must be disjoint"
    return report
