"""Baselines: single-attribute indexing (SAIR) and independence-assumption
quotas (JIR).

SAIR builds one LSH structure per (attribute, value) group, so every
record is indexed once per attribute. A query retrieves the k nearest
members of every constrained value's group, pools them per attribute,
intersects the pools across constrained attributes, and runs the exact
selector on the intersection. Correlated attributes shrink the
intersection, which is what makes it fail where the partition pipeline
does not.

JIR reuses the partition machinery but sizes each relevant partition's
quota by the product of dataset-marginal proportions:
k_pi = ceil(k * prod_j prop(v_j)). Skewed joint distributions starve
partitions whose true need exceeds the independence estimate.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .bitmaps import BitLayout, decode_partition, encode_partial, query_mask, relevant_partitions
from .core import Query, distances
from .datasets import Dataset
from .fairselect import DEFAULT_NODE_BUDGET, SelectionProblem, select_fair, verify
from .index_io import FairIndex
from .lsh import LshParams, build_partition_lsh, probe
from .pipeline import MethodResult
from .retrieval import near_pi


@dataclass(eq=False)
class SairIndex:
    """One LSH structure per (attribute index, value index) group."""

    params: LshParams
    groups: dict[tuple[int, int], object]   # (j, v) -> PartitionLsh


def build_sair(ds: Dataset, params: LshParams) -> SairIndex:
    layout = BitLayout.from_schema(ds.schema)
    groups = {}
    for j in range(ds.schema.m):
        for v in range(len(ds.schema.values(j))):
            rows = np.flatnonzero(ds.attrs[:, j] == v)
            if rows.size == 0:
                continue
            by_id = rows[np.argsort(ds.ids[rows], kind="stable")]
            # the group's partial bitmap doubles as its hash-stream tag
            bits = encode_partial({j: v}, layout)
            groups[(j, v)] = build_partition_lsh(bits, ds.ids[by_id], by_id,
                                                 ds.embeddings[by_id], ds.kind, params)
    return SairIndex(params, groups)


def sair_answer(ds: Dataset, sindex: SairIndex, query: Query, force_ilp: bool = False,
                node_budget: int = DEFAULT_NODE_BUDGET) -> MethodResult:
    spec = query.spec
    spec.validate_against(ds.schema)
    t0 = time.perf_counter()
    scanned = 0
    pools: list[set[int]] = []
    dist_of: dict[int, tuple[float, int]] = {}
    for j in spec.constrained():
        pool: set[int] = set()
        for v in spec.positive_values(j):
            plsh = sindex.groups.get((j, v))
            if plsh is None:
                continue
            budget = spec.k + plsh.surplus
            ids, rows, dist, collisions = near_pi(ds, plsh, query.vector, spec.k, budget)
            scanned += min(collisions, budget)
            pool.update(int(i) for i in ids)
            for i, r, dv in zip(ids, rows, dist):
                dist_of[int(i)] = (float(dv), int(r))
        pools.append(pool)
    inter = sorted(set.intersection(*pools)) if pools else []
    ids = np.array(inter, dtype=np.int64)
    rows = np.array([dist_of[i][1] for i in inter], dtype=np.int64)
    dists = np.array([dist_of[i][0] for i in inter], dtype=np.float64)
    t1 = time.perf_counter()
    problem = SelectionProblem(ids, dists, ds.attrs[rows] if rows.size else
                               np.empty((0, ds.schema.m), dtype=np.int64), spec)
    result = select_fair(problem, force_ilp=force_ilp, node_budget=node_budget)
    check = verify(result, problem)
    t2 = time.perf_counter()
    return MethodResult(result, check, scanned, int(ids.size), t1 - t0, t2 - t1)


# ------------------------------------------------------------------------ jir

def marginal_props(ds: Dataset) -> list[dict[int, float]]:
    """Per-attribute value proportions measured on the dataset."""
    props: list[dict[int, float]] = []
    for j in range(ds.schema.m):
        vals, counts = np.unique(ds.attrs[:, j], return_counts=True)
        props.append({int(v): float(c) / ds.n for v, c in zip(vals, counts)})
    return props


def jir_quota(bits: int, query: Query, index: FairIndex, props: list[dict[int, float]]) -> int:
    """Independence-assumption quota: ceil(k * product of marginal props)."""
    values = decode_partition(bits, index.layout)
    prod = 1.0
    for j in query.spec.constrained():
        v = values[j]
        prod *= props[j].get(v, 0.0) if v is not None else 0.0
    return math.ceil(query.spec.k * prod)


def jir_answer(ds: Dataset, index: FairIndex, query: Query, props: list[dict[int, float]],
               force_ilp: bool = False, node_budget: int = DEFAULT_NODE_BUDGET) -> MethodResult:
    """Partition retrieval with product-rule quotas, then exact selection."""
    spec = query.spec
    spec.validate_against(ds.schema)
    t0 = time.perf_counter()
    qm = query_mask(spec, index.layout)
    rel = relevant_partitions(index.partitions.keys(), qm)
    ids_parts, rows_parts, dist_parts = [], [], []
    scanned = 0
    for bits in rel:
        plsh = index.partitions[bits]
        k_pi = jir_quota(bits, query, index, props)
        if k_pi == 0:
            continue
        budget = k_pi + plsh.surplus
        ids, rows, dist, collisions = near_pi(ds, plsh, query.vector, k_pi, budget)
        scanned += min(collisions, budget)
        if ids.size:
            ids_parts.append(ids)
            rows_parts.append(rows)
            dist_parts.append(dist)
    if ids_parts:
        ids = np.concatenate(ids_parts)
        rows = np.concatenate(rows_parts)
        dists = np.concatenate(dist_parts)
    else:
        ids = np.empty(0, dtype=np.int64)
        rows = np.empty(0, dtype=np.int64)
        dists = np.empty(0, dtype=np.float64)
    t1 = time.perf_counter()
    problem = SelectionProblem(ids, dists, ds.attrs[rows] if rows.size else
                               np.empty((0, ds.schema.m), dtype=np.int64), spec)
    result = select_fair(problem, force_ilp=force_ilp, node_budget=node_budget)
    check = verify(result, problem)
    t2 = time.perf_counter()
    return MethodResult(result, check, scanned, int(ids.size), t1 - t0, t2 - t1)
