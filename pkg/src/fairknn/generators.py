"""Synthetic data, hard 3DM-style instances, and feasible query generation."""
from __future__ import annotations

import math

import numpy as np

from .core import AttributeSchema, DistanceKind, FairnessSpec, Query
from .datasets import Dataset, count_feasible, knn_ids

MAX_QUERY_TRIES = 50


def _ball_points(rng: np.random.Generator, n: int, d: int, center: np.ndarray, radius: float) -> np.ndarray:
    """n points uniform in the d-ball of the given radius around center."""
    if n == 0:
        return np.empty((0, d))
    dirs = rng.standard_normal((n, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = radius * rng.uniform(0.0, 1.0, size=n) ** (1.0 / d)
    return center + dirs * radii[:, None]


def _mixed_radix_attrs(n: int, sizes: tuple[int, ...]) -> np.ndarray:
    """Cycle through the full value-combination product, one combo per row."""
    attrs = np.empty((n, len(sizes)), dtype=np.int64)
    counter = np.arange(n, dtype=np.int64)
    tail = 1
    for j in range(len(sizes) - 1, -1, -1):
        attrs[:, j] = (counter // tail) % sizes[j]
        tail *= sizes[j]
    return attrs


def _grid_schema(sizes: tuple[int, ...]) -> AttributeSchema:
    return AttributeSchema.of(
        *((f"attr{j}", tuple(f"v{i}" for i in range(size))) for j, size in enumerate(sizes)))


def gen_synthetic(n_total: int, d: int, tight_size: int, tight_radius: float, far_offset: float,
                  seed: int, attr_sizes: tuple[int, ...] = (3, 6, 3), far_radius: float | None = None,
                  kind: DistanceKind = DistanceKind.euclidean()) -> Dataset:
    """Adversarial two-cluster dataset.

    tight_size points fill a ball of tight_radius around the origin; the
    remaining points form a second cluster far_offset away along the
    first axis. Both clusters cycle through every attribute-value
    combination, so every partition has members on both sides. Rows
    0..tight_size-1 are the tight cluster.
    """
    if not 0 <= tight_size <= n_total:
        raise ValueError("need 0 <= tight_size <= n_total")
    if n_total < 1:
        raise ValueError("n_total must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    far_n = n_total - tight_size
    far_center = np.zeros(d)
    far_center[0] = far_offset
    tight = _ball_points(rng, tight_size, d, np.zeros(d), tight_radius)
    far = _ball_points(rng, far_n, d, far_center, far_radius if far_radius is not None else tight_radius)
    emb = np.concatenate([tight, far], axis=0)
    attrs = np.concatenate([_mixed_radix_attrs(tight_size, attr_sizes),
                            _mixed_radix_attrs(far_n, attr_sizes)], axis=0)
    return Dataset(_grid_schema(attr_sizes), kind, np.arange(n_total, dtype=np.int64), emb, attrs)


def gen_3dm(k_elements: int, extra_triples: int, planted: bool, seed: int,
            d: int = 4) -> tuple[Dataset, FairnessSpec]:
    """Matching-style stress instance over three attributes.

    Three attributes share domain size k_elements; each record is a
    triple. With planted=True the first k_elements records form a
    perfect matching (decoys come after it); the all-ones spec then has
    a feasible answer by construction. Any feasible answer uses every
    value of every attribute exactly once, i.e. is a set of pairwise
    disjoint triples.
    """
    if k_elements < 1:
        raise ValueError("k_elements must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    triples = []
    if planted:
        p1 = rng.permutation(k_elements)
        p2 = rng.permutation(k_elements)
        triples.extend((i, int(p1[i]), int(p2[i])) for i in range(k_elements))
    else:
        triples.extend(tuple(int(v) for v in rng.integers(0, k_elements, size=3))
                       for _ in range(k_elements))
    triples.extend(tuple(int(v) for v in rng.integers(0, k_elements, size=3))
                   for _ in range(extra_triples))
    n = len(triples)
    schema = AttributeSchema.of(*((name, tuple(f"e{i}" for i in range(k_elements)))
                                  for name in ("x", "y", "z")))
    emb = rng.standard_normal((n, d))
    ds = Dataset(schema, DistanceKind.euclidean(), np.arange(n, dtype=np.int64), emb,
                 np.array(triples, dtype=np.int64))
    spec = FairnessSpec(k_elements, {j: {v: 1 for v in range(k_elements)} for j in range(3)})
    return ds, spec


def gen_queries(ds: Dataset, k: int, n_queries: int, seed: int, noise: float,
                constrained: tuple[int, ...] | None = None,
                anchor: str = "data") -> list[Query]:
    """Feasible queries built from witnesses.

    Each query perturbs an anchor (a random record, or the origin when
    anchor='origin'), takes the brute-force k nearest records as a
    witness, and adopts the witness's value counts on the constrained
    attributes as targets. The witness certifies feasibility; a
    dataset-level availability count is still checked, and a query is
    retried on failure up to a bounded number of times.
    """
    if ds.n == 0:
        raise ValueError("dataset is empty")
    if k > ds.n:
        raise ValueError(f"k={k} exceeds dataset size {ds.n}")
    if n_queries < 1:
        raise ValueError("need at least one query")
    if anchor not in ("data", "origin"):
        raise ValueError(f"unknown anchor mode {anchor!r}")
    cons = tuple(sorted(constrained)) if constrained is not None else tuple(range(ds.schema.m))
    if not cons:
        raise ValueError("at least one attribute must be constrained")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    queries: list[Query] = []
    for _ in range(n_queries):
        for attempt in range(MAX_QUERY_TRIES):
            if anchor == "data":
                base = ds.embeddings[int(rng.integers(ds.n))]
            else:
                base = np.zeros(ds.d)
            vec = base + rng.standard_normal(ds.d) * noise
            witness = ds.rows_for_ids(knn_ids(ds, vec, k))
            constraints = {}
            for j in cons:
                vals, counts = np.unique(ds.attrs[witness, j], return_counts=True)
                constraints[j] = {int(v): int(c) for v, c in zip(vals, counts)}
            spec = FairnessSpec(k, constraints)
            if count_feasible(ds, spec):
                queries.append(Query(vec, spec))
                break
        else:
            raise RuntimeError(f"no feasible query found after {MAX_QUERY_TRIES} tries")
    return queries
