"""Cooperation-protocol engine.

A :class:`ProtocolSpec` bundles everything an agent needs to behave lawfully:
topology builders, the encoder/event-detector logic, a discrete automaton,
the control decoder and the continuous dynamics. :func:`world_step` advances
every agent by one observation period with sampled-time semantics: events are
evaluated at the period boundary, the automaton switches, then the continuous
state flows under the latched discrete state.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Hashable, Mapping, Optional, Sequence

from .geometry import AREA_TOL, Region, contains_point, is_subset, union

Latch = Optional[Hashable]
Bits = tuple[int, ...]

RK4_SUBSTEPS = 64
_TOPO_CACHE_SIZE = 4096

# unchecked stand-in for AgentConfig inside the integrator's inner loop
_Q = namedtuple("_Q", "x y theta v")


class ProtocolDefinitionError(RuntimeError):
    """The protocol produced no usable transition (or several conflicting ones)."""


def wrap_angle(a: float) -> float:
    """Map an angle onto (-pi, pi]."""
    a = math.fmod(a + math.pi, 2 * math.pi)
    if a <= 0:
        a += 2 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class AgentConfig:
    x: float
    y: float
    theta: float
    v: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.theta, self.v)):
            raise ValueError(f"non-finite configuration {self}")

    @property
    def point(self):
        return (self.x, self.y)

    def as_tuple(self):
        return (self.x, self.y, self.theta, self.v)

    def to_json(self):
        return [self.x, self.y, self.theta, self.v]

    @classmethod
    def from_json(cls, data):
        x, y, theta, v = (float(c) for c in data)
        return cls(x, y, wrap_angle(theta), v)


@dataclass(frozen=True)
class DetectorCondition:
    """Conjunction of encoder bits and lambda predicates.

    ``gamma``/``rho`` index encoder bits that must be 1/0, ``mu``/``nu`` index
    lambda predicates that must hold/fail. Indices outside all four sets are
    don't-care.
    """

    gamma: frozenset = frozenset()
    rho: frozenset = frozenset()
    mu: frozenset = frozenset()
    nu: frozenset = frozenset()

    def __post_init__(self):
        for name in ("gamma", "rho", "mu", "nu"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if self.gamma & self.rho:
            raise ValueError("gamma and rho overlap")
        if self.mu & self.nu:
            raise ValueError("mu and nu overlap")

    def evaluate(self, s: Sequence[int], lam: Sequence[bool]) -> bool:
        return (all(s[k] for k in self.gamma)
                and not any(s[k] for k in self.rho)
                and all(lam[k] for k in self.mu)
                and not any(lam[k] for k in self.nu))


def _no_latch(prev, new, q, latch):
    return None


def _single_latch(sigma, q):
    return (None,)


@dataclass(frozen=True)
class ProtocolSpec:
    """One agent's cooperation protocol as data.

    ``transitions`` may be partial: an event without an entry for the current
    state is irrelevant in that state. Among the relevant events of a nominal
    step, all must agree on the successor.
    """

    name: str
    kappa: int
    topology_builder: Callable[[AgentConfig], tuple[Region, ...]]
    lambda_predicates: tuple[Callable[[AgentConfig, Latch], bool], ...]
    events: tuple[tuple[str, DetectorCondition], ...]
    states: tuple[str, ...]
    transitions: Mapping[tuple[str, str], str]
    initial_state: str
    decoder: Callable[[AgentConfig, str], tuple[float, float]]
    dynamics: Callable[[AgentConfig, tuple[float, float]], tuple[float, float, float, float]]
    visibility_builder: Callable[[AgentConfig, Sequence[AgentConfig]], Region]
    closed_flow: Optional[Callable[[AgentConfig, str, float, float], AgentConfig]] = None
    # (state before substep, state after, sigma) -> state; enforces limits the controller saturates at
    project: Optional[Callable[[tuple, tuple, str], tuple]] = None
    # optional (sigma, accel scale) -> rhs(y) with decoder and dynamics fused; must equal the generic path
    fused_field: Optional[Callable[[str, float], Callable[[tuple], tuple]]] = None
    latch_update: Callable[[str, str, AgentConfig, Latch], Latch] = _no_latch
    latch_candidates: Callable[[str, AgentConfig], tuple[Latch, ...]] = _single_latch
    exclusive: bool = False
    accel_scale: float = 1.0
    scaled_states: frozenset = frozenset()
    substeps: int = RK4_SUBSTEPS
    params: Any = None
    _event_index: dict = field(default=None, init=False, repr=False, compare=False)
    _topo_cache: dict = field(default=None, init=False, repr=False, compare=False)
    _flow_cache: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.initial_state not in self.states:
            raise ValueError("initial state not in state set")
        for (s, e), t in self.transitions.items():
            if s not in self.states or t not in self.states:
                raise ValueError(f"transition ({s}, {e}) -> {t} uses an unknown state")
        object.__setattr__(self, "_event_index", {name: c for name, c in self.events})
        object.__setattr__(self, "_topo_cache", {})
        object.__setattr__(self, "_flow_cache", {})
        for (s, e) in self.transitions:
            if e not in self._event_index:
                raise ValueError(f"transition uses unknown event {e}")

    @property
    def h(self) -> int:
        return len(self.lambda_predicates)

    @property
    def event_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.events)

    def condition(self, event: str) -> DetectorCondition:
        return self._event_index[event]

    def topologies(self, q: AgentConfig) -> tuple[Region, ...]:
        cache = self._topo_cache
        hit = cache.get(q)
        if hit is not None:
            return hit
        regions = tuple(self.topology_builder(q))
        if len(regions) != self.kappa:
            raise ProtocolDefinitionError(f"{self.name}: expected {self.kappa} topologies, got {len(regions)}")
        if len(cache) >= _TOPO_CACHE_SIZE:
            cache.clear()
        cache[q] = regions
        return regions

    def neighborhood(self, q: AgentConfig) -> Region:
        return union(*self.topologies(q))

    def lambdas(self, q: AgentConfig, latch: Latch = None) -> tuple[bool, ...]:
        return tuple(bool(f(q, latch)) for f in self.lambda_predicates)

    def control(self, q: AgentConfig, sigma: str) -> tuple[float, float]:
        a, w = self.decoder(q, sigma)
        if sigma in self.scaled_states:
            a *= self.accel_scale
        return a, w


def encode(spec: ProtocolSpec, q: AgentConfig, neighbors: Sequence[AgentConfig]) -> Bits:
    """Topology occupancy bits: bit k is 1 iff a neighbor lies in topology k."""
    regions = spec.topologies(q)
    return tuple(int(any(contains_point(r, n.point) for n in neighbors)) for r in regions)


def detect_events(spec: ProtocolSpec, s: Sequence[int], q: AgentConfig, latch: Latch = None) -> frozenset:
    if len(s) != spec.kappa:
        raise ValueError(f"encoder vector has length {len(s)}, expected {spec.kappa}")
    lam = spec.lambdas(q, latch)
    return frozenset(name for name, c in spec.events if c.evaluate(s, lam))


def automaton_step(spec: ProtocolSpec, sigma: str, events) -> str:
    """Deterministic successor of ``sigma`` under the detected event set.

    Events without a table entry for ``sigma`` are ignored; the remaining ones
    must name exactly one successor.
    """
    relevant = [e for e in events if (sigma, e) in spec.transitions]
    if spec.exclusive and len(events) != 1:
        raise ProtocolDefinitionError(f"{spec.name}: expected a single event in {sigma}, got {sorted(events)}")
    targets = {spec.transitions[(sigma, e)] for e in relevant}
    if len(targets) != 1:
        raise ProtocolDefinitionError(
            f"{spec.name}: events {sorted(events)} give successors {sorted(targets)} from {sigma}")
    return targets.pop()


def discrete_step(spec: ProtocolSpec, sigma: str, s: Sequence[int], q: AgentConfig,
                  latch: Latch = None) -> tuple[str, Latch]:
    """Encoder bits -> events -> automaton, including the lane latch bookkeeping."""
    nxt = automaton_step(spec, sigma, detect_events(spec, s, q, latch))
    return nxt, spec.latch_update(sigma, nxt, q, latch)


# -- continuous flow ----------------------------------------------------------------------

def _rk4(rhs, y, dt, n, project, sigma):
    h = dt / n
    h2 = 0.5 * h
    h6 = h / 6.0
    x0, x1, x2, x3 = y
    for _ in range(n):
        a0, a1, a2, a3 = rhs((x0, x1, x2, x3))
        b0, b1, b2, b3 = rhs((x0 + h2 * a0, x1 + h2 * a1, x2 + h2 * a2, x3 + h2 * a3))
        c0, c1, c2, c3 = rhs((x0 + h2 * b0, x1 + h2 * b1, x2 + h2 * b2, x3 + h2 * b3))
        d0, d1, d2, d3 = rhs((x0 + h * c0, x1 + h * c1, x2 + h * c2, x3 + h * c3))
        nxt = (x0 + h6 * (a0 + 2 * b0 + 2 * c0 + d0),
               x1 + h6 * (a1 + 2 * b1 + 2 * c1 + d1),
               x2 + h6 * (a2 + 2 * b2 + 2 * c2 + d2),
               x3 + h6 * (a3 + 2 * b3 + 2 * c3 + d3))
        if project is not None:
            nxt = project((x0, x1, x2, x3), nxt, sigma)
        x0, x1, x2, x3 = nxt
    return (x0, x1, x2, x3)


def integrate(spec: ProtocolSpec, q: AgentConfig, sigma: str, dt: float,
              substeps: Optional[int] = None) -> AgentConfig:
    """Fixed-step RK4 on the controlled vector field, ignoring any closed form."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return q
    substeps = substeps or spec.substeps

    if spec.fused_field is not None:
        rhs = spec.fused_field(sigma, spec.accel_scale if sigma in spec.scaled_states else 1.0)
    else:
        def rhs(y):
            c = _Q._make(y)
            return spec.dynamics(c, spec.control(c, sigma))

    y = _rk4(rhs, q.as_tuple(), dt, substeps, spec.project, sigma)
    return AgentConfig(y[0], y[1], wrap_angle(y[2]), y[3])


def flow(spec: ProtocolSpec, q: AgentConfig, sigma: str, dt: float) -> AgentConfig:
    """Continuous state after ``dt`` seconds in discrete state ``sigma``."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return q
    if spec.closed_flow is not None:
        scale = spec.accel_scale if sigma in spec.scaled_states else 1.0
        return spec.closed_flow(q, sigma, dt, scale)
    # agents and the monitors replaying them integrate the same segments
    cache = spec._flow_cache
    key = (q, sigma, dt)
    out = cache.get(key)
    if out is None:
        if len(cache) >= _TOPO_CACHE_SIZE:
            cache.clear()
        out = cache[key] = integrate(spec, q, sigma, dt)
    return out


# -- multi-agent world ------------------------------------------------------------------------

@dataclass(frozen=True)
class Behavior:
    """How an agent deviates from its protocol, if at all.

    ``kind`` is ``"nominal"``, ``"corrupted-encoder"`` (its encoder reads the
    ghost schedule instead of the world) or ``"corrupted-decoder"`` (it flows
    under ``spec``, a tampered copy of its protocol).
    """

    kind: str = "nominal"
    ghost: Any = None
    alpha: float = 0.0
    spec: Optional[ProtocolSpec] = None


NOMINAL = Behavior()


@dataclass(frozen=True)
class AgentEntry:
    id: int
    q: AgentConfig
    sigma: str
    latch: Latch = None
    behavior: Behavior = NOMINAL


@dataclass(frozen=True)
class WorldState:
    time: float
    agents: tuple[AgentEntry, ...]

    def __post_init__(self):
        if self.time < 0:
            raise ValueError("time must be non-negative")
        ids = [a.id for a in self.agents]
        if len(set(ids)) != len(ids):
            raise ValueError("agent ids must be unique")

    def agent(self, agent_id: int) -> AgentEntry:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise KeyError(agent_id)

    def configs(self) -> dict[int, AgentConfig]:
        return {a.id: a.q for a in self.agents}


def _spec_for(specs, agent_id) -> ProtocolSpec:
    if isinstance(specs, ProtocolSpec):
        return specs
    return specs[agent_id]


def neighbor_configs(spec: ProtocolSpec, q: AgentConfig, others: Sequence[AgentConfig]) -> list[AgentConfig]:
    """The neighbor configuration set: others lying in the union of q's topologies."""
    nb = spec.neighborhood(q)
    return [o for o in others if contains_point(nb, o.point)]


def world_step(world: WorldState, specs, period: float, check_neighborhood: bool = False) -> WorldState:
    """Advance all agents synchronously by one period.

    ``specs`` is either one spec shared by every agent or a mapping from agent
    id to spec. With ``check_neighborhood`` the sensing assumption (each
    nominal agent sees its whole neighborhood) is asserted.
    """
    if not period > 0:
        raise ValueError("period must be positive")
    new_agents = []
    for a in world.agents:
        spec = _spec_for(specs, a.id)
        others = [b.q for b in world.agents if b.id != a.id]
        if a.behavior.kind == "corrupted-encoder":
            fake = a.behavior.ghost.neighbors_at(world.time, a.q)
            inputs = fake if fake is not None else neighbor_configs(spec, a.q, others)
        else:
            inputs = neighbor_configs(spec, a.q, others)
            if check_neighborhood and a.behavior.kind == "nominal":
                vis = spec.visibility_builder(a.q, others)
                if not is_subset(spec.neighborhood(a.q), vis, AREA_TOL):
                    raise AssertionError(f"agent {a.id} does not see its own neighborhood")
        s = encode(spec, a.q, inputs)
        try:
            sigma, latch = discrete_step(spec, a.sigma, s, a.q, a.latch)
        except ProtocolDefinitionError as exc:
            raise ProtocolDefinitionError(f"agent {a.id} at t={world.time:g}: {exc}") from exc
        flow_spec = a.behavior.spec if a.behavior.kind == "corrupted-decoder" else spec
        q = flow(flow_spec, a.q, sigma, period)
        new_agents.append(replace(a, q=q, sigma=sigma, latch=latch))
    return WorldState(world.time + period, tuple(new_agents))
