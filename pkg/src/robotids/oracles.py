"""Independent reference computations used to cross-check the fast paths.

Each oracle trades efficiency for obviousness: exhaustive enumeration or
random sampling instead of the closed-form shortcuts in :mod:`monitor` and
:mod:`consensus`.
"""

from __future__ import annotations

import itertools
import math
import random
from typing import Iterable, Sequence

from .geometry import Region, contains_point, region_from_rect
from .monitor import OccupancyEstimate, OccupancyHypothesis
from .consensus import CommGraph, merge
from .protocol import AgentConfig, ProtocolSpec


def brute_force_events(spec: ProtocolSpec, s_tilde: Sequence[int], v: Sequence[int], q: AgentConfig,
                       latch=None) -> frozenset:
    """Events some hidden completion could trigger.

    Enumerates every p in {0,1}^kappa that is zero on fully visible
    topologies and evaluates each condition on ``s_tilde | p``.
    """
    lam = spec.lambdas(q, latch)
    out = set()
    for p in itertools.product((0, 1), repeat=spec.kappa):
        if any(pk and vk for pk, vk in zip(p, v)):
            continue
        s = tuple(int(a or b) for a, b in zip(s_tilde, p))
        out.update(name for name, c in spec.events if c.evaluate(s, lam))
    return frozenset(out)


def sampled_subset(a: Region, b: Region, rng: random.Random, n: int = 2000) -> bool:
    """Rejection-sample points of ``a`` and test them against ``b``."""
    bounds = a.bounds()
    if bounds is None:
        return True
    x0, y0, x1, y1 = bounds
    hits = 0
    tries = 0
    while hits < n and tries < 50 * n:
        tries += 1
        p = (rng.uniform(x0, x1), rng.uniform(y0, y1))
        if not contains_point(a, p, 0.0):
            continue
        hits += 1
        if not contains_point(b, p, 1e-9):
            return False
    return True


def bfs_distances(g: CommGraph, source) -> dict:
    """Plain breadth-first hop counts from ``source``."""
    dist = {source: 0}
    frontier = [source]
    while frontier:
        nxt = []
        for u in frontier:
            for w in g.neighbors(u):
                if w not in dist:
                    dist[w] = dist[u] + 1
                    nxt.append(w)
        frontier = nxt
    return dist


def bfs_diameter(g: CommGraph) -> int:
    best = 0
    for n in g.nodes:
        d = bfs_distances(g, n)
        if len(d) != len(g.nodes):
            return math.inf
        best = max(best, max(d.values()))
    return best


def fold_in_order(estimates: Iterable[OccupancyEstimate], order: Sequence[int]) -> OccupancyEstimate:
    """Centralized estimate folded in an arbitrary order."""
    estimates = list(estimates)
    out = estimates[order[0]]
    for i in order[1:]:
        out = merge(out, estimates[i])
    return out


def information_spread(g: CommGraph, rounds: int) -> dict:
    """Which initial states each node has absorbed after ``rounds`` synchronous rounds."""
    known = {n: {n} for n in g.nodes}
    for _ in range(rounds):
        known = {n: set().union(*(known[m] for m in g.neighbors(n))) for n in g.nodes}
    return known


def random_connected_graph(rng: random.Random, n: int, p_extra: float = 0.3) -> CommGraph:
    """Random spanning tree plus a few extra edges."""
    nodes = list(range(n))
    order = nodes[:]
    rng.shuffle(order)
    edges = [(order[i], order[rng.randrange(i)]) for i in range(1, n)]
    for a in nodes:
        for b in nodes[a + 1:]:
            if (a, b) not in edges and (b, a) not in edges and rng.random() < p_extra:
                edges.append((a, b))
    return CommGraph(tuple(nodes), tuple(edges))


def _random_rect(rng: random.Random, k: int) -> Region:
    # a unit cell per topology keeps rectangles of different topologies apart
    x0 = 10.0 * k + rng.choice((0.0, 1.0, 2.0))
    y0 = rng.choice((0.0, 1.0, 2.0))
    return region_from_rect(x0, x0 + rng.choice((2.0, 3.0, 4.0)), y0, y0 + rng.choice((2.0, 3.0, 4.0)))


def random_rect_estimate(rng: random.Random, kappa: int = 2, max_hyps: int = 3) -> OccupancyEstimate:
    """A small estimate whose regions are unions of axis-aligned grid rectangles."""
    hyps = []
    for _ in range(rng.randint(1, max_hyps)):
        regions, flags = [], []
        for k in range(kappa):
            parts = [_random_rect(rng, k) for _ in range(rng.randint(1, 2))]
            regions.append(Region(tuple(p for r in parts for p in r.parts)))
            flags.append(rng.random() < 0.3)
        hyps.append(OccupancyHypothesis(tuple(regions), tuple(flags)))
    return OccupancyEstimate.of(hyps)


__all__ = ["brute_force_events", "sampled_subset", "bfs_distances", "bfs_diameter", "fold_in_order",
           "information_spread", "random_connected_graph", "random_rect_estimate"]
