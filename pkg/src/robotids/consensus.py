"""Set-valued consensus on occupancy estimates.

Monitors watching the same target exchange estimates with their one-hop
neighbors and keep the intersection. Because the merge is commutative,
associative and idempotent, every node reaches the fold of all initial
estimates after diam(G) synchronous rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Mapping, Sequence

import networkx as nx

from .geometry import AREA_TOL, intersect
from .monitor import OccupancyEstimate, OccupancyHypothesis, estimate_equal

UNREACHABLE = math.inf


class ConsensusError(RuntimeError):
    pass


@dataclass(frozen=True)
class CommGraph:
    """Undirected communication graph; every node implicitly talks to itself."""

    nodes: tuple
    edges: tuple

    def __post_init__(self):
        nodes = tuple(self.nodes)
        edges = tuple(tuple(e) for e in self.edges)
        if len(set(nodes)) != len(nodes):
            raise ValueError("duplicate node ids")
        known = set(nodes)
        for a, b in edges:
            if a not in known or b not in known:
                raise ValueError(f"edge ({a}, {b}) references an unknown node")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from((a, b) for a, b in self.edges if a != b)
        return g

    def neighbors(self, node) -> list:
        """Closed one-hop neighborhood, in node order."""
        adj = {node}
        for a, b in self.edges:
            if a == node:
                adj.add(b)
            elif b == node:
                adj.add(a)
        return [n for n in self.nodes if n in adj]


def graph_dist(g: CommGraph, a, b) -> float:
    """Hop count between ``a`` and ``b``; ``UNREACHABLE`` when disconnected."""
    if a not in g.nodes or b not in g.nodes:
        raise KeyError(f"unknown node {a if a not in g.nodes else b}")
    try:
        return nx.shortest_path_length(g.to_networkx(), a, b)
    except nx.NetworkXNoPath:
        return UNREACHABLE


def is_connected(g: CommGraph) -> bool:
    if not g.nodes:
        return False
    return nx.is_connected(g.to_networkx())


def graph_diam(g: CommGraph) -> int:
    if not is_connected(g):
        raise ConsensusError("diameter of a disconnected graph is undefined")
    return nx.diameter(g.to_networkx()) if len(g.nodes) > 1 else 0


def _meet(ra, rb, memo):
    if ra is rb or ra.parts == rb.parts:
        return ra
    key = (id(ra), id(rb))
    if key not in memo:
        memo[key] = intersect(ra, rb)
    return memo[key]


def merge_hypotheses(a: OccupancyHypothesis, b: OccupancyHypothesis, _memo: dict | None = None) -> OccupancyHypothesis:
    memo = {} if _memo is None else _memo
    return OccupancyHypothesis(tuple(_meet(ra, rb, memo) for ra, rb in zip(a.regions, b.regions)),
                               tuple(fa or fb for fa, fb in zip(a.required, b.required)))


def merge(x1: OccupancyEstimate, x2: OccupancyEstimate, area_tol: float = AREA_TOL) -> OccupancyEstimate:
    """Pairwise intersection of hypotheses, keeping only consistent, maximal ones."""
    if x1.hypotheses and x2.hypotheses and x1.hypotheses[0].kappa != x2.hypotheses[0].kappa:
        raise ValueError("estimates have different numbers of topologies")
    # hypotheses of one estimate share region objects, so intersections repeat
    memo: dict = {}
    combos = [merge_hypotheses(a, b, memo) for a in x1.hypotheses for b in x2.hypotheses]
    return OccupancyEstimate.of(combos, area_tol)


def fold(estimates: Iterable[OccupancyEstimate], area_tol: float = AREA_TOL,
         cache: dict | None = None) -> OccupancyEstimate:
    """Left fold of ``merge``. With ``cache``, repeated folds over the same inputs are reused."""
    estimates = list(estimates)
    if not estimates:
        raise ValueError("nothing to fold")
    key = tuple(id(e) for e in estimates)
    if cache is not None and key in cache:
        return cache[key][1]
    out = reduce(lambda x, y: merge(x, y, area_tol), estimates[1:], estimates[0])
    if cache is not None:
        cache[key] = (estimates, out)    # keeps the inputs alive so their ids stay unique
    return out


def centralized(initial: Sequence[OccupancyEstimate] | Mapping, area_tol: float = AREA_TOL,
                cache: dict | None = None) -> OccupancyEstimate:
    """Fold of every monitor's estimate: what a single observer with all the evidence would keep."""
    values = list(initial.values()) if isinstance(initial, Mapping) else list(initial)
    return fold(values, area_tol, cache)


def round_step(g: CommGraph, states: Mapping, area_tol: float = AREA_TOL, cache: dict | None = None) -> dict:
    """One synchronous round: each node folds its own and its neighbors' round-k states."""
    if set(states) != set(g.nodes):
        raise ValueError("need exactly one state per node")
    cache = {} if cache is None else cache
    return {n: fold((states[m] for m in g.neighbors(n)), area_tol, cache) for n in g.nodes}


@dataclass(frozen=True)
class ConsensusRun:
    rounds: tuple            # rounds[k] maps node -> estimate after k rounds; rounds[0] is the input
    target: OccupancyEstimate
    diameter: int
    converged_at: int        # first round at which every node equals the target

    @property
    def final(self) -> dict:
        return self.rounds[-1]


def run_consensus(g: CommGraph, initial: Mapping, max_rounds: int | None = None,
                  area_tol: float = AREA_TOL) -> ConsensusRun:
    if not is_connected(g):
        raise ConsensusError("communication graph is disconnected")
    diam = graph_diam(g)
    if max_rounds is None:
        max_rounds = diam
    if max_rounds < diam:
        raise ValueError(f"max_rounds {max_rounds} is below the graph diameter {diam}")
    cache: dict = {}
    target = centralized([initial[n] for n in g.nodes], area_tol, cache)
    history = [dict(initial)]
    converged = None

    def agree(states):
        return all(estimate_equal(states[n], target, area_tol) for n in g.nodes)

    if agree(history[0]):
        converged = 0
    for k in range(1, max_rounds + 1):
        history.append(round_step(g, history[-1], area_tol, cache))
        if converged is None and agree(history[-1]):
            converged = k
    if converged is None or converged > diam:
        raise ConsensusError(f"nodes disagree with the centralized estimate after {diam} rounds")
    return ConsensusRun(tuple(history), target, diam, converged)


__all__ = [
    "CommGraph", "ConsensusError", "ConsensusRun", "UNREACHABLE", "graph_dist", "graph_diam",
    "is_connected", "merge", "merge_hypotheses", "fold", "centralized", "round_step", "run_consensus",
]
