"""Core domain types and the supported distance family.

Everything downstream shares these: the attribute schema of a dataset,
vector records, fairness count constraints, queries, and the four
distance functions (Euclidean, Manhattan, cosine-based, Minkowski).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_SEED = 0


# ----------------------------------------------------------------- distances

@dataclass(frozen=True)
class DistanceKind:
    """One member of the distance family; Minkowski carries its order p."""

    name: str
    p: float = 0.0

    _NAMES = ("euclidean", "manhattan", "cosine", "minkowski")

    def __post_init__(self) -> None:
        if self.name not in self._NAMES:
            raise ValueError(f"unknown distance kind {self.name!r}")
        if self.name == "minkowski" and not (math.isfinite(self.p) and self.p > 0):
            raise ValueError("minkowski order p must be finite and > 0")

    @classmethod
    def euclidean(cls) -> "DistanceKind":
        return cls("euclidean")

    @classmethod
    def manhattan(cls) -> "DistanceKind":
        return cls("manhattan")

    @classmethod
    def cosine(cls) -> "DistanceKind":
        return cls("cosine")

    @classmethod
    def minkowski(cls, p: float) -> "DistanceKind":
        return cls("minkowski", float(p))

    @classmethod
    def parse(cls, text: str) -> "DistanceKind":
        """Parse 'euclidean' / 'manhattan' / 'cosine' / 'minkowski:<p>'."""
        name, _, arg = text.strip().partition(":")
        if name == "minkowski":
            if not arg:
                raise ValueError("minkowski distance needs an order, e.g. 'minkowski:3'")
            return cls.minkowski(float(arg))
        if arg:
            raise ValueError(f"distance {name!r} takes no parameter")
        return cls(name)

    def __str__(self) -> str:
        if self.name == "minkowski":
            return f"minkowski:{self.p!r}"
        return self.name


def distances(points: np.ndarray, q: np.ndarray, kind: DistanceKind) -> np.ndarray:
    """Distances from each row of `points` to `q`, as a float64 array.

    Raises ValueError on dimension mismatch, and for the cosine-based
    distance when any involved vector has zero norm (the angle is
    undefined there, so silently returning a number would hide a bug).
    """
    pts = np.asarray(points, dtype=np.float64)
    qv = np.asarray(q, dtype=np.float64)
    if pts.ndim != 2 or qv.ndim != 1:
        raise ValueError("expected a 2-d point matrix and a 1-d query vector")
    if pts.shape[1] != qv.shape[0]:
        raise ValueError(f"dimension mismatch: points have d={pts.shape[1]}, query has d={qv.shape[0]}")

    if kind.name == "euclidean":
        diff = pts - qv
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    if kind.name == "manhattan":
        return np.abs(pts - qv).sum(axis=1)
    if kind.name == "minkowski":
        return np.power(np.power(np.abs(pts - qv), kind.p).sum(axis=1), 1.0 / kind.p)
    # cosine-based: 1 - cos(x, q), range [0, 2]
    qn = math.sqrt(float(qv @ qv))
    if qn == 0.0:
        raise ValueError("cosine-based distance is undefined for a zero query vector")
    norms = np.sqrt(np.einsum("ij,ij->i", pts, pts))
    if np.any(norms == 0.0):
        raise ValueError("cosine-based distance is undefined for zero vectors in the dataset")
    cos = np.clip((pts @ qv) / (norms * qn), -1.0, 1.0)
    return 1.0 - cos


def distance(x: np.ndarray, q: np.ndarray, kind: DistanceKind) -> float:
    """Distance between two single vectors."""
    xv = np.asarray(x, dtype=np.float64)
    if xv.ndim != 1:
        raise ValueError("expected a 1-d vector")
    return float(distances(xv[None, :], q, kind)[0])


# -------------------------------------------------------------------- schema

@dataclass(frozen=True)
class AttributeSchema:
    """Named categorical attributes with finite value domains.

    Attribute order matters: it fixes bit significance in partition
    bitmaps (attribute 0 occupies the most significant field).
    """

    attributes: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self) -> None:
        if not self.attributes:
            raise ValueError("schema needs at least one attribute")
        names = [a[0] for a in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError("duplicate attribute names in schema")
        for name, values in self.attributes:
            if not values:
                raise ValueError(f"attribute {name!r} has an empty value domain")
            if len(set(values)) != len(values):
                raise ValueError(f"attribute {name!r} has duplicate values")

    @classmethod
    def of(cls, *attrs: tuple[str, Sequence[str]]) -> "AttributeSchema":
        return cls(tuple((name, tuple(values)) for name, values in attrs))

    @property
    def m(self) -> int:
        return len(self.attributes)

    def names(self) -> tuple[str, ...]:
        return tuple(a[0] for a in self.attributes)

    def sizes(self) -> tuple[int, ...]:
        return tuple(len(a[1]) for a in self.attributes)

    def values(self, j: int) -> tuple[str, ...]:
        return self.attributes[j][1]

    def attr_index(self, name: str) -> int:
        for j, (n, _) in enumerate(self.attributes):
            if n == name:
                return j
        raise KeyError(f"no attribute named {name!r}")

    def value_index(self, j: int, value: str) -> int:
        try:
            return self.attributes[j][1].index(value)
        except ValueError:
            raise KeyError(f"attribute {self.attributes[j][0]!r} has no value {value!r}") from None


@dataclass(eq=False)
class VectorRecord:
    """One dataset element: an id, an embedding, and attribute value indices."""

    id: int
    embedding: np.ndarray
    attrs: tuple[int, ...]


def validate_record(rec: VectorRecord, schema: AttributeSchema, dim: int) -> None:
    if rec.id < 0:
        raise ValueError(f"record id must be non-negative, got {rec.id}")
    if len(rec.attrs) != schema.m:
        raise ValueError(f"record {rec.id}: expected {schema.m} attribute values, got {len(rec.attrs)}")
    for j, v in enumerate(rec.attrs):
        if not 0 <= v < len(schema.values(j)):
            raise ValueError(f"record {rec.id}: value index {v} out of range for attribute {schema.names()[j]!r}")
    if np.asarray(rec.embedding).shape != (dim,):
        raise ValueError(f"record {rec.id}: embedding shape {np.asarray(rec.embedding).shape} != ({dim},)")


# ----------------------------------------------------------- fairness spec

@dataclass(frozen=True)
class FairnessSpec:
    """Exact per-value count targets over a subset of attributes.

    `constraints` maps attribute index -> {value index -> required count}.
    Values absent from a constrained attribute's map are required to
    appear zero times. For every constrained attribute the counts must
    sum to k, so any feasible answer has exactly k elements.
    """

    k: int
    constraints: Mapping[int, Mapping[int, int]]

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if not self.constraints:
            raise ValueError("at least one attribute must be constrained")
        frozen: dict[int, dict[int, int]] = {}
        for j, counts in self.constraints.items():
            per = {}
            for v, c in counts.items():
                if c < 0:
                    raise ValueError(f"negative count for attribute {j}, value {v}")
                per[int(v)] = int(c)
            if sum(per.values()) != self.k:
                raise ValueError(f"counts for attribute {j} sum to {sum(per.values())}, expected k={self.k}")
            frozen[int(j)] = per
        object.__setattr__(self, "constraints", frozen)

    def constrained(self) -> tuple[int, ...]:
        return tuple(sorted(self.constraints))

    def count(self, j: int, v: int) -> int:
        return self.constraints.get(j, {}).get(v, 0)

    def positive_values(self, j: int) -> tuple[int, ...]:
        return tuple(sorted(v for v, c in self.constraints.get(j, {}).items() if c > 0))

    def validate_against(self, schema: AttributeSchema) -> None:
        for j, counts in self.constraints.items():
            if not 0 <= j < schema.m:
                raise ValueError(f"constrained attribute index {j} out of range")
            for v in counts:
                if not 0 <= v < len(schema.values(j)):
                    raise ValueError(f"value index {v} out of range for attribute {schema.names()[j]!r}")

    @classmethod
    def from_names(cls, schema: AttributeSchema, k: int, named: Mapping[str, Mapping[str, int]]) -> "FairnessSpec":
        """Build a spec from attribute/value names, e.g. {'Gender': {'Male': 2, 'Female': 3}}."""
        constraints: dict[int, dict[int, int]] = {}
        for attr_name, counts in named.items():
            j = schema.attr_index(attr_name)
            constraints[j] = {schema.value_index(j, v): c for v, c in counts.items()}
        return cls(k, constraints)

    def to_names(self, schema: AttributeSchema) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for j in self.constrained():
            out[schema.names()[j]] = {schema.values(j)[v]: c for v, c in sorted(self.constraints[j].items())}
        return out


@dataclass(eq=False)
class Query:
    """A query vector plus the fairness constraints its answer must meet."""

    vector: np.ndarray
    spec: FairnessSpec


def count_values(attrs: np.ndarray, j: int, values: Iterable[int]) -> dict[int, int]:
    """Occurrences of each given value index in column j of an attribute matrix."""
    col = np.asarray(attrs)[:, j]
    return {v: int(np.count_nonzero(col == v)) for v in values}
