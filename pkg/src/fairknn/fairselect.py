"""Exact fair selection: pick k candidates meeting every count target at
minimum total distance.

Three solvers cover the three regimes. One constrained attribute is a
per-value sort. Two constrained attributes reduce to a unit-capacity
transportation problem (see mincostflow). Three or more are NP-hard in
general, solved exactly by best-first branch and bound over inclusion
masks with constraint propagation and an LP-free lower bound. A tiny
exhaustive oracle backs all of them in tests.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import FairnessSpec
from .mincostflow import Lane, solve_transport

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
RESOURCE_EXHAUSTED = "resource_exhausted"

DEFAULT_NODE_BUDGET = 500_000
ORACLE_MAX_CANDIDATES = 24
COST_TOL = 1e-9


@dataclass(eq=False)
class SelectionProblem:
    """Candidate pool for one query: ids, distances, attribute values, targets."""

    ids: np.ndarray     # (n,) int64, unique
    dists: np.ndarray   # (n,) float64, >= 0
    attrs: np.ndarray   # (n, m) int64 value indices
    spec: FairnessSpec

    def __post_init__(self) -> None:
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.dists = np.asarray(self.dists, dtype=np.float64)
        self.attrs = np.asarray(self.attrs, dtype=np.int64)
        n = self.ids.shape[0]
        if self.dists.shape != (n,) or self.attrs.ndim != 2 or self.attrs.shape[0] != n:
            raise ValueError("ids, dists and attrs must align")
        if n and len(np.unique(self.ids)) != n:
            raise ValueError("candidate ids must be unique")
        if n and self.dists.min() < 0:
            raise ValueError("distances must be non-negative")

    @property
    def n(self) -> int:
        return int(self.ids.shape[0])

    @classmethod
    def from_candidates(cls, candidates: Sequence, spec: FairnessSpec) -> "SelectionProblem":
        """Build from objects carrying .id, .dist and .attrs."""
        ids = np.array([c.id for c in candidates], dtype=np.int64)
        dists = np.array([c.dist for c in candidates], dtype=np.float64)
        m = len(candidates[0].attrs) if candidates else max(spec.constrained(), default=0) + 1
        attrs = np.array([c.attrs for c in candidates], dtype=np.int64).reshape(len(candidates), m)
        return cls(ids, dists, attrs, spec)


@dataclass(frozen=True)
class SelectionResult:
    status: str
    selected: tuple[int, ...]   # record ids, ascending; empty unless feasible
    cost: float
    solver: str

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


def _empty_ok(spec: FairnessSpec, solver: str) -> SelectionResult:
    return SelectionResult(FEASIBLE, (), 0.0, solver)


def _sorted_order(problem: SelectionProblem) -> np.ndarray:
    # canonical candidate order: distance ascending, ties by id ascending
    return np.lexsort((problem.ids, problem.dists))


# ------------------------------------------------------------- one attribute

def select_1attr(problem: SelectionProblem) -> SelectionResult:
    """Per-value head of the distance ordering; optimal because values
    partition the candidates and the targets are independent."""
    spec = problem.spec
    cons = spec.constrained()
    if len(cons) != 1:
        raise ValueError(f"select_1attr needs exactly one constrained attribute, got {len(cons)}")
    if spec.k == 0:
        return _empty_ok(spec, "sort")
    j = cons[0]
    order = _sorted_order(problem)
    col = problem.attrs[order, j]
    picked: list[np.ndarray] = []
    cost = 0.0
    for v in spec.positive_values(j):
        need = spec.count(j, v)
        rows = order[col == v][:need]
        if rows.size < need:
            return SelectionResult(INFEASIBLE, (), 0.0, "sort")
        picked.append(rows)
        cost += float(problem.dists[rows].sum())
    chosen = np.concatenate(picked)
    return SelectionResult(FEASIBLE, tuple(sorted(int(i) for i in problem.ids[chosen])), cost, "sort")


# ------------------------------------------------------------ two attributes

def select_2attr(problem: SelectionProblem) -> SelectionResult:
    """Min-cost flow over the value-pair bipartite graph (exact)."""
    spec = problem.spec
    cons = spec.constrained()
    if len(cons) != 2:
        raise ValueError(f"select_2attr needs exactly two constrained attributes, got {len(cons)}")
    if spec.k == 0:
        return _empty_ok(spec, "flow")
    ja, jb = cons
    avals = spec.positive_values(ja)
    bvals = spec.positive_values(jb)
    sup_idx = {v: i for i, v in enumerate(avals)}
    dem_idx = {t: i for i, t in enumerate(bvals)}
    order = _sorted_order(problem)
    ca = problem.attrs[order, ja]
    cb = problem.attrs[order, jb]
    usable = np.isin(ca, avals) & np.isin(cb, bvals)
    order = order[usable]
    ca, cb = ca[usable], cb[usable]

    lanes: list[Lane] = []
    lane_rows: list[np.ndarray] = []
    for v in avals:
        for t in bvals:
            rows = order[(ca == v) & (cb == t)]
            if rows.size:
                lanes.append(Lane(sup_idx[v], dem_idx[t], problem.dists[rows]))
                lane_rows.append(rows)
    supplies = [spec.count(ja, v) for v in avals]
    demands = [spec.count(jb, t) for t in bvals]
    cost = solve_transport(supplies, demands, lanes)
    if cost is None:
        return SelectionResult(INFEASIBLE, (), 0.0, "flow")
    chosen = [rows[:lane.used] for lane, rows in zip(lanes, lane_rows) if lane.used]
    rows = np.concatenate(chosen) if chosen else np.empty(0, dtype=np.int64)
    assert rows.size == spec.k
    return SelectionResult(FEASIBLE, tuple(sorted(int(i) for i in problem.ids[rows])), cost, "flow")


# ------------------------------------------------------- three plus attributes

class _Groups:
    """Per-(attribute, value) position masks over dist-sorted candidates."""

    def __init__(self, attrs_sorted: np.ndarray, spec: FairnessSpec):
        self.need: list[int] = []
        self.mask: list[int] = []
        self.positions: list[list[int]] = []
        for j in spec.constrained():
            col = attrs_sorted[:, j]
            for v in spec.positive_values(j):
                pos = np.flatnonzero(col == v)
                bits = 0
                for p in pos:
                    bits |= 1 << int(p)
                self.need.append(spec.count(j, v))
                self.mask.append(bits)
                self.positions.append([int(p) for p in pos])
        self.per_attr: list[list[int]] = []
        start = 0
        for j in spec.constrained():
            width = len(spec.positive_values(j))
            self.per_attr.append(list(range(start, start + width)))
            start += width


def _cheapest_free(positions: list[int], free: int, take: int, dists: np.ndarray) -> float | None:
    """Sum of the `take` smallest free distances in a group; None if short."""
    got, acc = 0, 0.0
    for p in positions:
        if (free >> p) & 1:
            acc += dists[p]
            got += 1
            if got == take:
                return acc
    return None


def select_3plus(problem: SelectionProblem, node_budget: int = DEFAULT_NODE_BUDGET) -> SelectionResult:
    """Best-first branch and bound over candidate inclusion masks.

    Node state is (included, excluded) bitmasks over dist-sorted
    candidates. Constraint propagation runs to fixpoint: a group whose
    remaining need equals its free count pulls every free member in; a
    filled group pushes its free members out; the same rule applies to
    the global size-k budget. The lower bound is the included cost plus
    the larger of (a) the per-attribute sum of cheapest-free completions
    and (b) the cheapest free completion of the size budget — both relax
    the other constraints, so neither overshoots a true completion. The
    first complete node popped from the heap is therefore optimal. A
    node budget turns pathological instances into an explicit
    resource_exhausted status instead of a silent timeout.
    """
    spec = problem.spec
    if not spec.constrained():
        raise ValueError("select_3plus needs at least one constrained attribute")
    if spec.k == 0:
        return _empty_ok(spec, "ilp")

    usable = np.ones(problem.n, dtype=bool)
    for j in spec.constrained():
        pos = spec.positive_values(j)
        usable &= np.isin(problem.attrs[:, j], pos)
    order = _sorted_order(problem)
    order = order[usable[order]]
    n = int(order.size)
    k = spec.k
    if n < k:
        return SelectionResult(INFEASIBLE, (), 0.0, "ilp")
    dists = problem.dists[order]
    ids = problem.ids[order]
    groups = _Groups(problem.attrs[order], spec)
    if any(g_need > len(g_pos) for g_need, g_pos in zip(groups.need, groups.positions)):
        return SelectionResult(INFEASIBLE, (), 0.0, "ilp")

    full = (1 << n) - 1
    n_groups = len(groups.need)

    def cost_of(mask: int) -> float:
        acc = 0.0
        while mask:
            low = mask & -mask
            acc += dists[low.bit_length() - 1]
            mask ^= low
        return acc

    def propagate(incl: int, excl: int) -> tuple[int, int] | None:
        while True:
            changed = False
            for g in range(n_groups):
                gm = groups.mask[g]
                rem = groups.need[g] - (incl & gm).bit_count()
                free = gm & ~incl & ~excl
                nfree = free.bit_count()
                if rem < 0 or rem > nfree:
                    return None
                if rem == 0:
                    if free:
                        excl |= free
                        changed = True
                elif rem == nfree:
                    incl |= free
                    changed = True
            remk = k - incl.bit_count()
            free_all = full & ~incl & ~excl
            nfree = free_all.bit_count()
            if remk < 0 or remk > nfree:
                return None
            if remk == 0:
                if free_all:
                    excl |= free_all
                    changed = True
            elif remk == nfree:
                incl |= free_all
                changed = True
            if not changed:
                return incl, excl

    def lower_bound(incl: int, excl: int) -> float | None:
        base = cost_of(incl)
        remk = k - incl.bit_count()
        if remk == 0:
            return base
        free_all = ~incl & ~excl
        best = None
        for member in groups.per_attr:
            acc = 0.0
            for g in member:
                rem = groups.need[g] - (incl & groups.mask[g]).bit_count()
                if rem:
                    part = _cheapest_free(groups.positions[g], free_all, rem, dists)
                    if part is None:
                        return None
                    acc += part
            if best is None or acc > best:
                best = acc
        got, acc = 0, 0.0
        for p in range(n):
            if (free_all >> p) & 1:
                acc += dists[p]
                got += 1
                if got == remk:
                    break
        if got < remk:
            return None
        if acc > best:
            best = acc
        return base + best

    heap: list[tuple[float, int, int, int]] = []
    counter = itertools.count()
    root = propagate(0, 0)
    if root is not None:
        lb = lower_bound(*root)
        if lb is not None:
            heapq.heappush(heap, (lb, next(counter), root[0], root[1]))

    popped = 0
    while heap:
        lb, _, incl, excl = heapq.heappop(heap)
        popped += 1
        if popped > node_budget:
            return SelectionResult(RESOURCE_EXHAUSTED, (), 0.0, "ilp")
        if incl.bit_count() == k:
            sel = []
            mask = incl
            while mask:
                low = mask & -mask
                sel.append(int(ids[low.bit_length() - 1]))
                mask ^= low
            return SelectionResult(FEASIBLE, tuple(sorted(sel)), cost_of(incl), "ilp")
        # branch on the cheapest free candidate of the tightest open group
        free_all = ~incl & ~excl
        pick, tight = -1, None
        for g in range(n_groups):
            rem = groups.need[g] - (incl & groups.mask[g]).bit_count()
            if rem <= 0:
                continue
            slack = (groups.mask[g] & free_all).bit_count() - rem
            if tight is None or slack < tight:
                tight = slack
                for p in groups.positions[g]:
                    if (free_all >> p) & 1:
                        pick = p
                        break
        if pick < 0:
            continue
        bit = 1 << pick
        for child in (propagate(incl | bit, excl), propagate(incl, excl | bit)):
            if child is None:
                continue
            clb = lower_bound(*child)
            if clb is not None:
                heapq.heappush(heap, (clb, next(counter), child[0], child[1]))
    return SelectionResult(INFEASIBLE, (), 0.0, "ilp")


# ------------------------------------------------------------------ dispatch

def select_fair(problem: SelectionProblem, force_ilp: bool = False,
                node_budget: int = DEFAULT_NODE_BUDGET) -> SelectionResult:
    """Route to the solver for the constrained-attribute count."""
    width = len(problem.spec.constrained())
    if force_ilp or width >= 3:
        return select_3plus(problem, node_budget=node_budget)
    if width == 2:
        return select_2attr(problem)
    return select_1attr(problem)


# -------------------------------------------------------------- verification

@dataclass(frozen=True)
class Violation:
    attr: int
    value: int
    expected: int
    got: int


@dataclass(frozen=True)
class VerifyReport:
    ok: bool
    violations: tuple[Violation, ...]
    recomputed_cost: float
    size_ok: bool
    cost_ok: bool


def verify(result: SelectionResult, problem: SelectionProblem, tol: float = COST_TOL) -> VerifyReport:
    """Independent recount of every constrained target plus a cost recompute."""
    if not result.feasible:
        return VerifyReport(True, (), 0.0, True, True)
    sel = np.asarray(result.selected, dtype=np.int64)
    size_ok = sel.size == problem.spec.k and len(np.unique(sel)) == sel.size
    id_pos = {int(i): p for p, i in enumerate(problem.ids)}
    try:
        rows = np.array([id_pos[int(i)] for i in sel], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"selected id {exc} is not a candidate") from None
    violations: list[Violation] = []
    for j in problem.spec.constrained():
        col = problem.attrs[rows, j] if rows.size else np.empty(0, dtype=np.int64)
        seen = {int(v): int(c) for v, c in zip(*np.unique(col, return_counts=True))}
        for v in sorted(set(seen) | set(problem.spec.constraints[j])):
            expected = problem.spec.count(j, v)
            got = seen.get(v, 0)
            if expected != got:
                violations.append(Violation(j, v, expected, got))
    recomputed = float(problem.dists[rows].sum()) if rows.size else 0.0
    cost_ok = abs(recomputed - result.cost) <= tol
    return VerifyReport(size_ok and cost_ok and not violations, tuple(violations), recomputed, size_ok, cost_ok)


# ------------------------------------------------------------------- oracle

def oracle_enumerate(problem: SelectionProblem) -> SelectionResult:
    """Exhaustive optimum over all size-k candidate subsets (n <= 24 guard)."""
    n, k = problem.n, problem.spec.k
    if n > ORACLE_MAX_CANDIDATES:
        raise ValueError(f"oracle_enumerate handles at most {ORACLE_MAX_CANDIDATES} candidates, got {n}")
    if k > n:
        return SelectionResult(INFEASIBLE, (), 0.0, "oracle")
    combos = np.array(list(itertools.combinations(range(n), k)), dtype=np.int64).reshape(-1, max(k, 1))
    if k == 0:
        combos = np.zeros((1, 0), dtype=np.int64)
    costs = problem.dists[combos].sum(axis=1) if k else np.zeros(1)
    feasible = np.ones(combos.shape[0], dtype=bool)
    for j in problem.spec.constrained():
        vals = problem.attrs[combos, j] if k else np.zeros((1, 0), dtype=np.int64)
        for v, c in problem.spec.constraints[j].items():
            feasible &= (vals == v).sum(axis=1) == c
    hits = np.flatnonzero(feasible)
    if hits.size == 0:
        return SelectionResult(INFEASIBLE, (), 0.0, "oracle")
    best_cost = costs[hits].min()
    ties = hits[costs[hits] == best_cost]
    key = min(tuple(sorted(int(i) for i in problem.ids[combos[t]])) for t in ties)
    return SelectionResult(FEASIBLE, key, float(best_cost), "oracle")
