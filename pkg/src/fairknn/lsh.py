"""Locality-sensitive hashing: families, collision model, derived parameters.

Two families are supported, paired with the distance the index serves:

* p-stable (Gaussian) for Euclidean distance. A base hash is
  h(x) = floor((a.x + b) / w) with a ~ N(0, I_d) and b ~ U[0, w).
  Two points at distance s collide with probability
      p(s) = 1 - 2*Phi(-w/s) - (2 / (sqrt(2*pi) * (w/s))) * (1 - exp(-(w/s)^2 / 2)),
  which is strictly decreasing in s.
* angular sign hashes for the cosine-based distance. h(x) = sign(u.x)
  for a random unit vector u; points at angle theta collide with
  probability 1 - theta/pi.

A compound hash concatenates mu base hashes; an index keeps ell
independent tables of compound hashes. Given near/far collision bounds
p1 > p2, table counts follow the usual exponent rho = ln(1/p1)/ln(1/p2):
mu grows logarithmically with the partition size, ell like n^rho, and a
false-positive surplus of ceil(2*ell/delta) candidates per probe keeps
the scan bounded while missing a near point with probability < delta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .core import DistanceKind

DEFAULT_ELL_MAX = 512


# ------------------------------------------------------------ collision model

def pstable_collision(dist: float, width: float) -> float:
    """Collision probability of one Gaussian p-stable hash at a given distance."""
    if width <= 0:
        raise ValueError("bucket width must be positive")
    if dist < 0:
        raise ValueError("distance must be non-negative")
    if dist == 0.0:
        return 1.0
    t = width / dist
    return float(1.0 - 2.0 * ndtr(-t) - 2.0 / (math.sqrt(2.0 * math.pi) * t) * (1.0 - math.exp(-t * t / 2.0)))


def angular_collision(dist: float) -> float:
    """Collision probability of one sign hash at a given cosine-based distance."""
    if not 0.0 <= dist <= 2.0:
        raise ValueError("cosine-based distance lies in [0, 2]")
    theta = math.acos(min(1.0, max(-1.0, 1.0 - dist)))
    return 1.0 - theta / math.pi


# ------------------------------------------------------------- configuration

@dataclass(frozen=True)
class LshParams:
    """Index-wide LSH configuration.

    radius is the near threshold R and cfactor*radius the far threshold;
    collision probabilities at those two distances drive the derivation
    of mu (compound length) and ell (table count) per partition. Explicit
    mu/ell override the derivation. max_near is the K in the table-count
    bound; delta the allowed miss/false-positive rate.
    """

    radius: float = 1.0
    cfactor: float = 2.0
    width: float = 4.0
    delta: float = 0.1
    max_near: int = 10
    mu: int | None = None
    ell: int | None = None
    ell_max: int = DEFAULT_ELL_MAX
    family: str = "auto"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.cfactor <= 1:
            raise ValueError("cfactor must exceed 1")
        if self.width <= 0:
            raise ValueError("width must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.max_near < 1:
            raise ValueError("max_near must be >= 1")
        if self.mu is not None and self.mu < 1:
            raise ValueError("mu must be >= 1")
        if self.ell is not None and self.ell < 1:
            raise ValueError("ell must be >= 1")
        if self.ell_max < 1:
            raise ValueError("ell_max must be >= 1")
        if self.family not in ("auto", "pstable", "angular"):
            raise ValueError(f"unknown hash family {self.family!r}")


def resolve_family(family: str, kind: DistanceKind) -> str:
    """Pick the hash family for a distance kind, validating compatibility."""
    if kind.name == "euclidean":
        resolved = "pstable"
    elif kind.name == "cosine":
        resolved = "angular"
    else:
        raise ValueError(f"LSH indexing supports euclidean and cosine-based distances, not {kind.name}")
    if family not in ("auto", resolved):
        raise ValueError(f"hash family {family!r} does not serve {kind.name} distance")
    return resolved


def collision_bounds(params: LshParams, family: str) -> tuple[float, float]:
    """(p1, p2): collision probabilities at the near and far thresholds."""
    far = params.cfactor * params.radius
    if family == "pstable":
        return pstable_collision(params.radius, params.width), pstable_collision(far, params.width)
    return angular_collision(min(params.radius, 2.0)), angular_collision(min(far, 2.0))


@dataclass(frozen=True)
class DerivedParams:
    mu: int
    ell: int
    rho: float
    surplus: int
    clamped: bool


def derive_params(n_members: int, p1: float, p2: float, max_near: int, delta: float,
                  ell_max: int = DEFAULT_ELL_MAX) -> DerivedParams:
    """Size a partition's compound hashes and tables from its member count.

    mu = ceil(ln n / ln(1/p2)) floored at 1, ell = ceil(n^rho * ln(2K/delta))
    clamped into [1, ell_max], surplus = ceil(2*ell/delta) with the ell
    actually used. Natural logarithms throughout.
    """
    if n_members < 1:
        raise ValueError("a partition index needs at least one member")
    if not 0.0 < p2 < p1 < 1.0:
        raise ValueError(f"collision bounds must satisfy 0 < p2 < p1 < 1, got p1={p1}, p2={p2}")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if max_near < 1:
        raise ValueError("max_near must be >= 1")
    ln_inv_p1 = -math.log(p1)
    ln_inv_p2 = -math.log(p2)
    mu = max(1, math.ceil(math.log(n_members) / ln_inv_p2))
    rho = ln_inv_p1 / ln_inv_p2
    raw_ell = math.ceil(n_members ** rho * math.log(2.0 * max_near / delta))
    ell = min(max(raw_ell, 1), ell_max)
    surplus = math.ceil(2.0 * ell / delta)
    return DerivedParams(mu, ell, rho, surplus, raw_ell > ell_max)


# ---------------------------------------------------------------- hash family

@dataclass(eq=False)
class HashFamily:
    """ell independent compound hashes of mu base hashes each."""

    kind: str
    width: float
    proj: np.ndarray              # (ell, mu, d)
    offset: np.ndarray | None     # (ell, mu), p-stable only

    @property
    def ell(self) -> int:
        return self.proj.shape[0]

    @property
    def mu(self) -> int:
        return self.proj.shape[1]


def make_family(kind: str, d: int, mu: int, ell: int, width: float, rng: np.random.Generator) -> HashFamily:
    proj = rng.standard_normal((ell, mu, d))
    if kind == "pstable":
        offset = rng.uniform(0.0, width, size=(ell, mu))
        return HashFamily("pstable", width, proj, offset)
    if kind == "angular":
        if mu > 64:
            raise ValueError("angular compound hashes are packed into 64-bit words, mu must be <= 64")
        proj /= np.linalg.norm(proj, axis=2, keepdims=True)
        return HashFamily("angular", 0.0, proj, None)
    raise ValueError(f"unknown hash family {kind!r}")


def table_keys(points: np.ndarray, family: HashFamily, j: int) -> np.ndarray:
    """Compound-hash keys of every row under table j.

    p-stable: an (n, mu) int64 matrix of bucket indices. Angular: an
    (n,) uint64 word of packed sign bits.
    """
    scores = points @ family.proj[j].T
    if family.kind == "pstable":
        return np.floor((scores + family.offset[j]) / family.width).astype(np.int64)
    bits = (scores >= 0.0).astype(np.uint64)
    return bits @ (np.uint64(1) << np.arange(family.mu, dtype=np.uint64))


def compound_hash(x: np.ndarray, family: HashFamily, j: int):
    """Compound hash of one vector under table j: a tuple (p-stable) or an int."""
    keys = table_keys(np.asarray(x, dtype=np.float64)[None, :], family, j)
    if family.kind == "pstable":
        return tuple(int(v) for v in keys[0])
    return int(keys[0])


def _bucket_key(keys: np.ndarray, row: int):
    # p-stable keys become little-endian bytes so persisted tables are portable
    if keys.ndim == 2:
        return np.ascontiguousarray(keys[row].astype("<i8")).tobytes()
    return int(keys[row])


def _group_keys(keys: np.ndarray) -> dict:
    """Bucket map key -> local member positions, preserving member order."""
    if keys.ndim == 2:
        arr = np.ascontiguousarray(keys.astype("<i8"))
        flat = arr.view(np.dtype((np.void, arr.dtype.itemsize * arr.shape[1]))).ravel()
        uniq, inverse = np.unique(flat, return_inverse=True)
        raw = [u.tobytes() for u in uniq]
    else:
        uniq, inverse = np.unique(keys, return_inverse=True)
        raw = [int(u) for u in uniq]
    order = np.argsort(inverse, kind="stable").astype(np.int64)
    bounds = np.searchsorted(inverse[order], np.arange(len(uniq) + 1))
    return {raw[u]: order[bounds[u]:bounds[u + 1]] for u in range(len(uniq))}


# ------------------------------------------------------------ partition index

@dataclass(eq=False)
class PartitionLsh:
    """LSH tables over the members of one attribute partition."""

    bits: int
    member_ids: np.ndarray    # ascending record ids
    member_rows: np.ndarray   # dataset row of each member, aligned with member_ids
    family: HashFamily
    mu: int
    ell: int
    rho: float
    surplus: int
    clamped: bool
    tables: list[dict]

    @property
    def size(self) -> int:
        return int(self.member_ids.size)


def partition_rng(seed: int, bits: int) -> np.random.Generator:
    # one deterministic stream per (index seed, partition bitmap)
    return np.random.default_rng(np.random.SeedSequence([seed, bits]))


def plan_partition(n_members: int, kind: DistanceKind, params: LshParams) -> DerivedParams:
    """Resolve mu/ell/surplus for a partition, honoring explicit overrides."""
    family = resolve_family(params.family, kind)
    if params.mu is not None and params.ell is not None:
        mu, ell = params.mu, params.ell
        p1, p2 = collision_bounds(params, family)
        rho = math.log(1.0 / p1) / math.log(1.0 / p2) if 0 < p2 < p1 < 1 else float("nan")
        return DerivedParams(mu, ell, rho, math.ceil(2.0 * ell / params.delta), False)
    p1, p2 = collision_bounds(params, family)
    derived = derive_params(n_members, p1, p2, params.max_near, params.delta, params.ell_max)
    mu = params.mu if params.mu is not None else derived.mu
    ell = params.ell if params.ell is not None else derived.ell
    clamped = derived.clamped and params.ell is None
    return DerivedParams(mu, ell, derived.rho, math.ceil(2.0 * ell / params.delta), clamped)


def build_partition_lsh(bits: int, member_ids: np.ndarray, member_rows: np.ndarray,
                        points: np.ndarray, kind: DistanceKind, params: LshParams) -> PartitionLsh:
    """Hash one partition's member embeddings into ell bucket tables.

    `points` holds the member embeddings aligned with member_ids. The
    hash family is drawn from a stream seeded by (params.seed, bits), so
    rebuilding a partition always reproduces the same tables.
    """
    member_ids = np.asarray(member_ids, dtype=np.int64)
    member_rows = np.asarray(member_rows, dtype=np.int64)
    points = np.asarray(points, dtype=np.float64)
    if member_ids.size != member_rows.size or points.shape[0] != member_ids.size:
        raise ValueError("member ids, rows and embeddings must align")
    if member_ids.size == 0:
        raise ValueError("cannot index an empty partition")
    plan = plan_partition(member_ids.size, kind, params)
    family = make_family(resolve_family(params.family, kind), points.shape[1], plan.mu, plan.ell,
                         params.width, partition_rng(params.seed, bits))
    tables = [_group_keys(table_keys(points, family, j)) for j in range(plan.ell)]
    return PartitionLsh(bits, member_ids, member_rows, family, plan.mu, plan.ell,
                        plan.rho, plan.surplus, plan.clamped, tables)


def probe(plsh: PartitionLsh, q: np.ndarray) -> np.ndarray:
    """Local member positions colliding with q, in first-encounter order.

    Tables are probed in order; within a bucket, members keep their
    member-array order. Duplicates across tables keep their first slot.
    """
    qv = np.asarray(q, dtype=np.float64)
    collected = []
    for j in range(plsh.ell):
        keys = table_keys(qv[None, :], plsh.family, j)
        bucket = plsh.tables[j].get(_bucket_key(keys, 0))
        if bucket is not None:
            collected.append(bucket)
    if not collected:
        return np.empty(0, dtype=np.int64)
    cat = np.concatenate(collected)
    _, first = np.unique(cat, return_index=True)
    return cat[np.sort(first)]
