"""Local misbehavior monitor for one target agent.

The monitor is a set-valued hybrid observer. Each period it

1. *predicts*: from what it can see of the target's neighborhood it bounds
   the target's event set, steps a nondeterministic copy of the automaton,
   and flows the measured configuration once per candidate discrete state;
2. *updates*: the next measurement prunes the candidates that drifted more
   than ``epsilon`` away, and the surviving transitions tell which hidden
   encoder bits the target must have seen;
3. turns those bits into an occupancy estimate, a set of hypotheses about
   where other agents must be (or cannot be) in the parts it cannot see.

Everything is a pure function of (state, inputs).
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

from .geometry import (AREA_TOL, EMPTY, Region, contains_point, difference, intersect,
                       is_empty, is_subset, region_equal, square, union)
from .protocol import (AgentConfig, Latch, ProtocolDefinitionError, ProtocolSpec, automaton_step,
                       detect_events, flow, wrap_angle)

# slack for the target's own integration when the monitor replays it
INTEGRATION_BUDGET = 1e-6
# smallest half-width used to inflate a measured neighbor into a region
MIN_INFLATION = 1e-3

Mode = tuple[str, Latch]


class Verdict(str, enum.Enum):
    COOPERATIVE = "cooperative"
    UNCERTAIN = "uncertain"
    UNCOOPERATIVE = "uncooperative"


class InconsistentEstimateError(RuntimeError):
    """A posterior encoder bit fell below its a-priori value."""


@dataclass(frozen=True)
class NormWeights:
    """Weights turning (x, y, theta, v) differences into one length."""

    theta: float = 1.0   # m/rad
    v: float = 1.0       # s

    def __post_init__(self):
        if self.theta < 0 or self.v < 0:
            raise ValueError("norm weights must be non-negative")


DEFAULT_WEIGHTS = NormWeights()


def config_distance(a: AgentConfig, b: AgentConfig, weights: NormWeights = DEFAULT_WEIGHTS) -> float:
    dth = wrap_angle(a.theta - b.theta)
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2
                     + (weights.theta * dth) ** 2 + (weights.v * (a.v - b.v)) ** 2)


# -- occupancy hypotheses -------------------------------------------------------------------------


@dataclass(frozen=True)
class OccupancyHypothesis:
    """Per topology: the region other agents may occupy, and whether one must be there.

    A world is consistent with the hypothesis when every agent inside
    topology k lies in ``regions[k]`` and, for flagged topologies, at least
    one agent does.
    """

    regions: tuple[Region, ...]
    required: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "required", tuple(bool(b) for b in self.required))
        if len(self.regions) != len(self.required):
            raise ValueError("regions and flags differ in length")

    @property
    def kappa(self) -> int:
        return len(self.regions)

    @property
    def contradictory(self) -> bool:
        return any(f and is_empty(r) for r, f in zip(self.regions, self.required))

    @property
    def needs_hidden(self) -> bool:
        return any(self.required)

    def to_json(self):
        return [{"region": r.to_json(), "required": f} for r, f in zip(self.regions, self.required)]

    @classmethod
    def from_json(cls, data):
        return cls(tuple(Region.from_json(d["region"]) for d in data), tuple(d["required"] for d in data))


def hypothesis_equal(a: OccupancyHypothesis, b: OccupancyHypothesis, area_tol: float = AREA_TOL) -> bool:
    return (a.required == b.required
            and all(ra is rb or region_equal(ra, rb, area_tol) for ra, rb in zip(a.regions, b.regions)))


def _bbox_inside(a: Region, b: Region, slack: float = 1e-6) -> bool:
    if not a.parts:
        return True
    if not b.parts:
        return False
    ax0, ay0, ax1, ay1 = a.bounds()
    bx0, by0, bx1, by1 = b.bounds()
    return ax0 >= bx0 - slack and ay0 >= by0 - slack and ax1 <= bx1 + slack and ay1 <= by1 + slack


def subsumed(a: OccupancyHypothesis, b: OccupancyHypothesis, area_tol: float = AREA_TOL,
             _memo: Optional[dict] = None) -> bool:
    """True when every world consistent with ``a`` is consistent with ``b``."""
    if any(fb and not fa for fa, fb in zip(a.required, b.required)):
        return False
    for ra, rb in zip(a.regions, b.regions):
        if ra is rb:
            continue
        key = (id(ra), id(rb))
        if _memo is not None and key in _memo:
            inside = _memo[key]
        else:
            inside = is_empty(ra, area_tol) or (_bbox_inside(ra, rb) and is_subset(ra, rb, area_tol))
            if _memo is not None:
                _memo[key] = inside
        if not inside:
            return False
    return True


def reduce_hypotheses(hyps: Iterable[OccupancyHypothesis], area_tol: float = AREA_TOL) -> tuple[OccupancyHypothesis, ...]:
    """Drop contradictory, duplicate and subsumed hypotheses.

    The kept set is the antichain of maximal hypotheses; it describes the
    same set of worlds as the input.
    """
    hyps = list(hyps)
    memo: dict = {}
    kept: list[OccupancyHypothesis] = []
    for h in hyps:
        if h.contradictory:
            continue
        if any(subsumed(h, g, area_tol, memo) for g in kept):
            continue
        kept = [g for g in kept if not subsumed(g, h, area_tol, memo)]
        kept.append(h)
    return tuple(kept)


@dataclass(frozen=True)
class OccupancyEstimate:
    hypotheses: tuple[OccupancyHypothesis, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))
        ks = {h.kappa for h in self.hypotheses}
        if len(ks) > 1:
            raise ValueError("hypotheses disagree on the number of topologies")

    @classmethod
    def of(cls, hyps: Iterable[OccupancyHypothesis], area_tol: float = AREA_TOL) -> "OccupancyEstimate":
        return cls(reduce_hypotheses(hyps, area_tol))

    @property
    def empty(self) -> bool:
        return not self.hypotheses

    def __len__(self):
        return len(self.hypotheses)

    def to_json(self):
        return [h.to_json() for h in self.hypotheses]

    @classmethod
    def from_json(cls, data):
        return cls(tuple(OccupancyHypothesis.from_json(h) for h in data))


def estimate_equal(a: OccupancyEstimate, b: OccupancyEstimate, area_tol: float = AREA_TOL) -> bool:
    """Set equality of hypotheses under region equality."""
    if a is b:
        return True
    if len(a) != len(b):
        return False
    return (all(any(hypothesis_equal(h, g, area_tol) for g in b.hypotheses) for h in a.hypotheses)
            and all(any(hypothesis_equal(g, h, area_tol) for h in a.hypotheses) for g in b.hypotheses))


def consistent_with(h: OccupancyHypothesis, topologies: Sequence[Region],
                    neighbors: Sequence[AgentConfig], tol: float = 1e-6) -> bool:
    """Does the actual neighbor placement satisfy hypothesis ``h``?"""
    for eta, region, req in zip(topologies, h.regions, h.required):
        inside = [n for n in neighbors if contains_point(eta, n.point)]
        if not all(contains_point(region, n.point, tol) for n in inside):
            return False
        if req and not inside:
            return False
    return True


# -- estimator pieces -------------------------------------------------------------------------------


def topology_check(spec: ProtocolSpec, q_bar: AgentConfig, v_h: Region, area_tol: float = AREA_TOL) -> tuple[int, ...]:
    """Bit k is 1 iff topology k of the target lies entirely inside the monitor's view."""
    return tuple(int(is_subset(eta, v_h, area_tol)) for eta in spec.topologies(q_bar))


def restricted_encoder(spec: ProtocolSpec, q_bar: AgentConfig, visible: Sequence[AgentConfig]) -> tuple[int, ...]:
    """Encoder bits computed from visible agents only; never above the true bits."""
    regions = spec.topologies(q_bar)
    return tuple(int(any(contains_point(r, n.point) for n in visible)) for r in regions)


def event_estimate(spec: ProtocolSpec, s_tilde: Sequence[int], v: Sequence[int], q_bar: AgentConfig,
                   latch: Latch = None) -> frozenset:
    """Smallest event set guaranteed to contain the target's true events.

    A required-present bit is satisfied either by a visible occupant or by
    the topology not being fully visible; a required-absent bit needs the
    visible part to be empty; lambda predicates are evaluated exactly.
    """
    if len(s_tilde) != spec.kappa or len(v) != spec.kappa:
        raise ValueError("encoder and visibility vectors must have length kappa")
    lam = spec.lambdas(q_bar, latch)
    out = []
    for name, c in spec.events:
        ok = (all(s_tilde[k] or not v[k] for k in c.gamma)
              and not any(s_tilde[k] for k in c.rho)
              and all(lam[k] for k in c.mu)
              and not any(lam[k] for k in c.nu))
        if ok:
            out.append(name)
    return frozenset(out)


def nondet_automaton_step(spec: ProtocolSpec, sigma_hat: Iterable[str], events: Iterable[str]) -> frozenset:
    sigma_hat = frozenset(sigma_hat)
    events = frozenset(events)
    if not sigma_hat:
        raise ValueError("state estimate must be nonempty")
    if not events:
        raise ProtocolDefinitionError("empty event estimate: the condition family is not exhaustive")
    return frozenset(spec.transitions[(s, e)] for s in sigma_hat for e in events if (s, e) in spec.transitions)


def hidden_presence(prior_bit: int, posterior_bits: Iterable[int]) -> frozenset:
    """What the a-priori and a-posteriori encoder bits say about a hidden occupant.

    ``{1}``: someone must be hiding there, ``{0}``: nobody is, ``{0, 1}``: unknown.
    """
    post = frozenset(int(b) for b in posterior_bits)
    if prior_bit not in (0, 1) or not post or not post <= {0, 1}:
        raise ValueError(f"bad input ({prior_bit}, {sorted(post)})")
    if prior_bit == 0:
        return post
    if post == {1}:
        return frozenset({0, 1})
    raise InconsistentEstimateError(f"posterior {sorted(post)} below prior bit 1")


def inflate(points: Iterable[AgentConfig], half_width: float) -> Region:
    return union(*(square(p.point, half_width) for p in points))


def occupancy_estimate(spec: ProtocolSpec, q_bar: AgentConfig, inflated: Region, v_h: Region,
                       p_hat: Sequence[Iterable[int]], s_tilde: Optional[Sequence[int]] = None,
                       hidden: Optional[Sequence[Region]] = None) -> OccupancyEstimate:
    """One hypothesis per choice of hidden-presence bits.

    With p_k = 0 the target's topology k holds only the visible (inflated)
    agents. With p_k = 1 it may also hold agents in its non-visible part; the
    presence flag is raised unless a visible agent already occupies topology
    k (``s_tilde``), because then no hidden agent is needed.
    """
    p_hat = [tuple(sorted(set(int(b) for b in pk))) for pk in p_hat]
    if len(p_hat) != spec.kappa or any(not pk for pk in p_hat):
        raise ValueError("p_hat needs one nonempty bit set per topology")
    s_tilde = tuple(s_tilde) if s_tilde is not None else (0,) * spec.kappa
    etas = spec.topologies(q_bar)
    seen = [intersect(inflated, eta) for eta in etas]
    if hidden is None:
        hidden = [difference(eta, v_h) for eta in etas]
    # built once per topology so hypotheses share region objects
    wide = [union(seen[k], hidden[k]) if 1 in p_hat[k] else None for k in range(spec.kappa)]
    hyps = []
    for p in itertools.product(*p_hat):
        regions, flags = [], []
        for k, pk in enumerate(p):
            if pk:
                regions.append(wide[k])
                flags.append(not s_tilde[k])
            else:
                regions.append(seen[k])
                flags.append(False)
        hyps.append(OccupancyHypothesis(tuple(regions), tuple(flags)))
    return OccupancyEstimate.of(hyps)


def classify(estimate: OccupancyEstimate, detected: bool = False) -> Verdict:
    if detected or estimate.empty:
        return Verdict.UNCOOPERATIVE
    if all(not h.needs_hidden for h in estimate.hypotheses):
        return Verdict.COOPERATIVE
    return Verdict.UNCERTAIN


# -- the observer cycle ----------------------------------------------------------------------------------


@dataclass(frozen=True)
class LedgerEntry:
    """A candidate discrete mode for the coming period and where it leads."""

    sigma: str
    latch: Latch
    endpoint: AgentConfig


@dataclass(frozen=True)
class MonitorState:
    target_id: int
    epsilon: float
    epsilon_min: float = 0.0
    noise_bound: float = 0.0
    weights: NormWeights = DEFAULT_WEIGHTS
    # posterior modes of the previous period; None before the first measurement
    modes: Optional[frozenset] = None
    q_bar: Optional[AgentConfig] = None
    v: tuple = ()
    s_tilde: tuple = ()
    events: frozenset = frozenset()
    ledger: tuple[LedgerEntry, ...] = ()
    v_h: Region = EMPTY
    inflated: Region = EMPTY
    hidden: tuple[Region, ...] = ()     # target topologies minus the monitor's view

    def __post_init__(self):
        if self.epsilon_min < 0:
            raise ValueError("epsilon_min must be non-negative")
        if self.epsilon < self.epsilon_min:
            raise ValueError("epsilon must be at least epsilon_min")

    @property
    def sigma_hat(self) -> frozenset:
        """Discrete states the target may be in during the coming period."""
        return frozenset(e.sigma for e in self.ledger)

    @property
    def inflation(self) -> float:
        return max(self.epsilon_min, self.noise_bound, MIN_INFLATION)


def new_monitor(target_id: int, epsilon: float, epsilon_min: float = 0.0, noise_bound: float = 0.0,
                weights: NormWeights = DEFAULT_WEIGHTS) -> MonitorState:
    if epsilon < noise_bound + INTEGRATION_BUDGET:
        raise ValueError(f"epsilon {epsilon} below noise bound {noise_bound} plus integration budget")
    return MonitorState(target_id, epsilon, epsilon_min, noise_bound, weights)


def all_modes(spec: ProtocolSpec, q: AgentConfig) -> frozenset:
    return frozenset((s, latch) for s in spec.states for latch in spec.latch_candidates(s, q))


def predict(spec: ProtocolSpec, state: MonitorState, q_bar: AgentConfig, visible: Sequence[AgentConfig],
            v_h: Region, period: float) -> MonitorState:
    """Bound the target's next discrete state and flow one trajectory per candidate."""
    modes = state.modes if state.modes is not None else all_modes(spec, q_bar)
    hidden = hidden_region(spec, q_bar, v_h)
    v = tuple(int(is_empty(h)) for h in hidden)
    s_tilde = restricted_encoder(spec, q_bar, visible)
    events: set = set()
    successors: set = set()
    for sigma, latch in modes:
        e_hat = event_estimate(spec, s_tilde, v, q_bar, latch)
        events |= e_hat
        for e in e_hat:
            nxt = spec.transitions.get((sigma, e))
            if nxt is not None:
                successors.add((nxt, spec.latch_update(sigma, nxt, q_bar, latch)))
    if not successors:
        raise ProtocolDefinitionError(f"no successor mode for target {state.target_id}")
    endpoints = {}
    ledger = []
    for sigma, latch in sorted(successors, key=repr):
        if sigma not in endpoints:
            endpoints[sigma] = flow(spec, q_bar, sigma, period)
        ledger.append(LedgerEntry(sigma, latch, endpoints[sigma]))
    return replace(state, modes=frozenset(modes), q_bar=q_bar, v=v, s_tilde=s_tilde,
                   events=frozenset(events), ledger=tuple(ledger), v_h=v_h, hidden=hidden,
                   inflated=inflate(visible, state.inflation))


def completions(s_tilde: Sequence[int], v: Sequence[int]) -> Iterable[tuple[int, ...]]:
    """Encoder vectors reachable from ``s_tilde`` by hidden agents in non-visible topologies."""
    free = [k for k in range(len(s_tilde)) if not s_tilde[k] and not v[k]]
    for bits in itertools.product((0, 1), repeat=len(free)):
        s = list(s_tilde)
        for k, b in zip(free, bits):
            s[k] = b
        yield tuple(s)


@dataclass(frozen=True)
class UpdateResult:
    sigma_hat: frozenset            # posterior discrete states over the elapsed period
    modes: frozenset                # the same, with latches
    s_star: frozenset               # encoder vectors explaining a surviving transition
    p_hat: tuple                    # hidden-presence bit sets per topology
    estimate: OccupancyEstimate
    detected: bool
    verdict: Verdict
    distances: dict = field(default_factory=dict)


def _explained(spec: ProtocolSpec, state: MonitorState, kept: frozenset) -> frozenset:
    out = set()
    for s in completions(state.s_tilde, state.v):
        for sigma, latch in state.modes:
            try:
                nxt = automaton_step(spec, sigma, detect_events(spec, s, state.q_bar, latch))
            except ProtocolDefinitionError:
                continue
            if (nxt, spec.latch_update(sigma, nxt, state.q_bar, latch)) in kept:
                out.add(s)
                break
    return frozenset(out)


def update(spec: ProtocolSpec, state: MonitorState, q_bar_next: AgentConfig) -> tuple[MonitorState, UpdateResult]:
    """Confront the ledger with the new measurement.

    Returns the state to predict from next and the verdict material for the
    elapsed period. When no candidate survives the target is flagged and the
    mode estimate restarts from the full state set.
    """
    if not state.ledger:
        raise ValueError("update called before predict")
    dist = {(e.sigma, e.latch): config_distance(e.endpoint, q_bar_next, state.weights) for e in state.ledger}
    kept = frozenset(m for m, d in dist.items() if d <= state.epsilon)
    s_star = _explained(spec, state, kept) if kept else frozenset()
    detected = not s_star
    if detected:
        p_hat: tuple = ()
        estimate = OccupancyEstimate()
    else:
        p_hat = tuple(hidden_presence(state.s_tilde[k], {s[k] for s in s_star}) for k in range(spec.kappa))
        estimate = occupancy_estimate(spec, state.q_bar, state.inflated, state.v_h, p_hat, state.s_tilde,
                                      state.hidden)
    result = UpdateResult(
        sigma_hat=frozenset(m[0] for m in kept),
        modes=kept,
        s_star=s_star,
        p_hat=p_hat,
        estimate=estimate,
        detected=detected,
        verdict=classify(estimate, detected),
        distances={f"{m[0]}{'' if m[1] is None else m[1]}": d for m, d in dist.items()},
    )
    nxt = replace(state, modes=None if detected else kept, q_bar=q_bar_next, ledger=())
    return nxt, result


def hidden_region(spec: ProtocolSpec, q_bar: AgentConfig, v_h: Region) -> tuple[Region, ...]:
    return tuple(difference(eta, v_h) for eta in spec.topologies(q_bar))


__all__ = [
    "Verdict", "InconsistentEstimateError", "NormWeights", "DEFAULT_WEIGHTS", "config_distance",
    "OccupancyHypothesis", "OccupancyEstimate", "hypothesis_equal", "subsumed", "reduce_hypotheses",
    "estimate_equal", "consistent_with", "topology_check", "restricted_encoder", "event_estimate",
    "nondet_automaton_step", "hidden_presence", "inflate", "occupancy_estimate", "classify",
    "LedgerEntry", "MonitorState", "new_monitor", "all_modes", "predict", "completions",
    "UpdateResult", "update", "hidden_region", "INTEGRATION_BUDGET",
]
