"""Unit-capacity transportation solver for two-attribute fair selection.

The instance is a bipartite multigraph: supply nodes are the values of
one constrained attribute, demand nodes the values of the other, and
every candidate is one unit-capacity edge between its value pair with
its distance as cost. Parallel edges of a pair are compressed into one
"lane": a cost array sorted ascending plus a prefix pointer. The forward
residual arc of a lane offers the cheapest unused edge (costs[used]), the
reverse arc returns the most expensive used edge (-costs[used-1]), so the
used set is always a prefix. An exchange argument makes that lossless:
any flow using a non-prefix subset of a lane can swap an expensive used
edge for a cheaper unused one without touching the rest.

Successive shortest paths with Johnson potentials: one Bellman-Ford pass
seeds the potentials, then each of the k unit augmentations runs a
Dijkstra over reduced costs. Supplies and demands are integers summing
to k, so after k successful augmentations the flow meets every target
exactly; if some augmentation finds the sink unreachable the instance
is infeasible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(eq=False)
class Lane:
    """All candidate edges between one (supply value, demand value) pair."""

    supply: int              # supply node index
    demand: int              # demand node index
    costs: np.ndarray        # float64, ascending
    used: int = 0

    def __post_init__(self) -> None:
        self.costs = np.asarray(self.costs, dtype=np.float64)
        if np.any(np.diff(self.costs) < 0):
            raise ValueError("lane costs must be sorted ascending")


# arc kinds recorded on the Dijkstra parent trail
_SRC, _FWD, _REV, _SNK = 0, 1, 2, 3

# tolerance for clamping float roundoff in reduced costs
_EPS = 1e-9


def solve_transport(supplies: list[int], demands: list[int], lanes: list[Lane]) -> float | None:
    """Route sum(supplies) units at minimum cost; returns the cost or None.

    Mutates each lane's `used` counter to the optimal per-pair edge count.
    """
    if sum(supplies) != sum(demands):
        raise ValueError("total supply must equal total demand")
    if any(s < 0 for s in supplies) or any(d < 0 for d in demands):
        raise ValueError("supplies and demands must be non-negative")
    total = sum(supplies)
    a, b = len(supplies), len(demands)
    source, sink = 0, 1 + a + b
    n_nodes = a + b + 2
    sup_node = lambda v: 1 + v
    dem_node = lambda t: 1 + a + t
    for lane in lanes:
        lane.used = 0
    rem_sup = list(supplies)
    rem_dem = list(demands)

    def arcs_from(u: int):
        """Yield (target, cost, kind, lane_index) for residual arcs out of u."""
        if u == source:
            for v in range(a):
                if rem_sup[v] > 0:
                    yield sup_node(v), 0.0, _SRC, -1
        elif u == sink:
            return
        elif u <= a:
            v = u - 1
            for gi, lane in enumerate(lanes):
                if lane.supply == v and lane.used < lane.costs.size:
                    yield dem_node(lane.demand), float(lane.costs[lane.used]), _FWD, gi
        else:
            t = u - 1 - a
            if rem_dem[t] > 0:
                yield sink, 0.0, _SNK, -1
            for gi, lane in enumerate(lanes):
                if lane.demand == t and lane.used > 0:
                    yield sup_node(lane.supply), -float(lane.costs[lane.used - 1]), _REV, gi

    # Bellman-Ford once for initial potentials (the initial arcs are all
    # non-negative, but this keeps the invariant independent of that fact)
    h = [math.inf] * n_nodes
    h[source] = 0.0
    for _ in range(n_nodes - 1):
        changed = False
        for u in range(n_nodes):
            if math.isinf(h[u]):
                continue
            for w, c, _, _ in arcs_from(u):
                if h[u] + c < h[w] - _EPS:
                    h[w] = h[u] + c
                    changed = True
        if not changed:
            break

    for _ in range(total):
        dist = [math.inf] * n_nodes
        done = [False] * n_nodes
        parent: list[tuple[int, int, int] | None] = [None] * n_nodes
        dist[source] = 0.0
        while True:
            u, best = -1, math.inf
            for w in range(n_nodes):
                if not done[w] and dist[w] < best:
                    u, best = w, dist[w]
            if u < 0 or u == sink:
                break
            done[u] = True
            for w, c, kind, gi in arcs_from(u):
                if math.isinf(h[w]):
                    continue  # never reachable, see module docstring invariants
                rc = c + h[u] - h[w]
                if rc < 0.0:
                    if rc < -_EPS:
                        raise AssertionError(f"negative reduced cost {rc}")
                    rc = 0.0
                if dist[u] + rc < dist[w]:
                    dist[w] = dist[u] + rc
                    parent[w] = (u, kind, gi)
        if math.isinf(dist[sink]):
            return None
        # push one unit back along the parent trail
        w = sink
        while w != source:
            u, kind, gi = parent[w]
            if kind == _SRC:
                rem_sup[w - 1] -= 1
            elif kind == _SNK:
                rem_dem[u - 1 - a] -= 1
            elif kind == _FWD:
                lanes[gi].used += 1
            else:
                lanes[gi].used -= 1
            w = u
        for w in range(n_nodes):
            if not math.isinf(h[w]):
                h[w] += min(dist[w], dist[sink])

    return float(sum(lane.costs[:lane.used].sum() for lane in lanes))
