"""Concrete protocols: the robotic warehouse and the automated highway.

Also hosts the two misbehavior models (ghost neighbors fed to the encoder,
a detuned acceleration loop in the decoder) and the first-order tolerance
bound for detecting the latter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .geometry import (Region, SectorSpec, difference, region_from_disc, region_from_rect,
                       region_from_sector, union)
from .protocol import AgentConfig, Behavior, DetectorCondition, ProtocolSpec

# -- warehouse ------------------------------------------------------------------------------------


@dataclass(frozen=True)
class WarehouseParams:
    d: float = 3.0          # safety distance (m)
    R: float = 8.0          # camera range (m)
    v_max: float = 1.5      # m/s
    mu: float = 0.5         # speed-loop gain (1/s)
    T: float = 0.5          # observation period (s)
    arc_segments: int = 32

    def __post_init__(self):
        if not self.R > self.d > 0:
            raise ValueError("warehouse needs R > d > 0")
        if not (self.v_max > 0 and self.mu > 0 and self.T > 0):
            raise ValueError("v_max, mu and T must be positive")


def _unicycle(q: AgentConfig, u):
    a, w = u
    return (q.v * math.cos(q.theta), q.v * math.sin(q.theta), w, a)


def warehouse_flow(q: AgentConfig, sigma: str, dt: float, p: WarehouseParams, acc_scale: float = 1.0) -> AgentConfig:
    """Closed-form solution of the forklift speed loop over ``dt`` seconds.

    Heading is constant; ACC relaxes speed towards ``v_max`` with gain
    ``mu * acc_scale``, DEC relaxes it towards zero with gain ``mu``.
    """
    v0 = q.v
    if sigma == "ACC":
        mu = p.mu * acc_scale
        if mu == 0.0:
            disp, v = v0 * dt, v0
        else:
            decay = math.exp(-mu * dt)
            disp = p.v_max * dt + (v0 - p.v_max) / mu * (1.0 - decay)
            v = p.v_max * (1.0 - decay) + v0 * decay
    elif sigma == "DEC":
        decay = math.exp(-p.mu * dt)
        disp = v0 / p.mu * (1.0 - decay)
        v = v0 * decay
    else:
        raise ValueError(f"unknown warehouse state {sigma!r}")
    return AgentConfig(q.x + disp * math.cos(q.theta), q.y + disp * math.sin(q.theta), q.theta, v)


def warehouse_topology(q: AgentConfig, p: WarehouseParams) -> Region:
    """Give-way sector: within ``d`` and bearing in [-pi/2, pi/4] of the heading."""
    return region_from_sector(SectorSpec((q.x, q.y), p.d, q.theta, -math.pi / 2, math.pi / 4, p.arc_segments))


def build_warehouse(params: WarehouseParams = WarehouseParams()) -> ProtocolSpec:
    p = params

    def decoder(q, sigma):
        if sigma == "ACC":
            return (-p.mu * (q.v - p.v_max), 0.0)
        if sigma == "DEC":
            return (-p.mu * q.v, 0.0)
        raise ValueError(sigma)

    return ProtocolSpec(
        name="warehouse",
        kappa=1,
        topology_builder=lambda q: (warehouse_topology(q, p),),
        lambda_predicates=(),
        events=(("e1", DetectorCondition(rho={0})), ("e2", DetectorCondition(gamma={0}))),
        states=("ACC", "DEC"),
        transitions={("ACC", "e1"): "ACC", ("ACC", "e2"): "DEC",
                     ("DEC", "e1"): "ACC", ("DEC", "e2"): "DEC"},
        initial_state="DEC",
        decoder=decoder,
        dynamics=_unicycle,
        visibility_builder=lambda q, others: region_from_disc((q.x, q.y), p.R, p.arc_segments),
        closed_flow=lambda q, sigma, dt, scale: warehouse_flow(q, sigma, dt, p, scale),
        exclusive=True,
        params=p,
    )


# -- highway ----------------------------------------------------------------------------------------


@dataclass(frozen=True)
class HighwayParams:
    lanes: int = 3
    lane_width: float = 3.5
    d_f: float = 25.0
    d_b: float = 15.0
    a_bar: float = 2.0
    omega_bar: float = 0.3
    theta_max: float = 0.3
    mu: float = 1.0
    v_max: float = 20.0
    R: float = 60.0
    T: float = 0.5
    occlusion: bool = False
    car_length: float = 4.5
    car_width: float = 1.8
    arc_segments: int = 64

    def __post_init__(self):
        if self.lanes < 2:
            raise ValueError("highway needs at least two lanes")
        for name in ("lane_width", "d_f", "d_b", "a_bar", "omega_bar", "theta_max", "R", "T", "v_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def lane_index(y: float, w: float) -> int:
    return math.floor(y / w)


def sinc(theta: float) -> float:
    """sin(theta)/theta with the removable singularity filled in."""
    if abs(theta) < 1e-4:
        return 1.0 - theta * theta / 6.0
    return math.sin(theta) / theta


def highway_topologies(q: AgentConfig, p: HighwayParams) -> tuple[Region, ...]:
    """Front, left, right and back rectangles of a car."""
    w = p.lane_width
    lane = lane_index(q.y, w)
    lo, hi = lane * w, (lane + 1) * w
    return (
        region_from_rect(q.x, q.x + p.d_f, lo, hi),
        region_from_rect(q.x - p.d_b, q.x + p.d_f, hi, hi + w),
        region_from_rect(q.x - p.d_b, q.x + p.d_f, lo - w, lo),
        region_from_rect(q.x - p.d_b, q.x, lo, hi),
    )


def car_footprint(q: AgentConfig, length: float, width: float) -> list[tuple[float, float]]:
    c, s = math.cos(q.theta), math.sin(q.theta)
    hl, hw = length / 2, width / 2
    return [(q.x + c * dx - s * dy, q.y + s * dx + c * dy)
            for dx, dy in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw))]


def occlusion_shadow(observer: tuple[float, float], car: AgentConfig, p: HighwayParams,
                     reach: float) -> Optional[Region]:
    """Convex wedge behind ``car`` as seen from ``observer``.

    The wedge spans the car's full angular extent and reaches past ``reach``.
    Its near edge is a chord just beyond the car's center, so the car's own
    reference point stays visible while the area behind the car is dropped.
    """
    ox, oy = observer
    dc = math.hypot(car.x - ox, car.y - oy)
    if dc < 1e-9:
        return None
    corners = car_footprint(car, p.car_length, p.car_width)
    phi_c = math.atan2(car.y - oy, car.x - ox)
    rel = [math.remainder(math.atan2(cy - oy, cx - ox) - phi_c, 2 * math.pi) for cx, cy in corners]
    a, b = min(rel), max(rel)
    span = b - a
    if span >= math.pi * 0.95:
        return None  # observer sits on or next to the car
    r_in = dc * (1 + 1e-6) / math.cos(span / 2)
    k = max(2, math.ceil(span / 0.1))
    r_out = reach / math.cos(span / (2 * k))
    pts = [(ox + r_in * math.cos(phi_c + a), oy + r_in * math.sin(phi_c + a))]
    pts += [(ox + r_out * math.cos(phi_c + a + span * j / k), oy + r_out * math.sin(phi_c + a + span * j / k))
            for j in range(k + 1)]
    pts.append((ox + r_in * math.cos(phi_c + b), oy + r_in * math.sin(phi_c + b)))
    # pts run counter-clockwise since a < b
    return Region((tuple(pts),))


def highway_visibility(q: AgentConfig, others: Sequence[AgentConfig], p: HighwayParams) -> Region:
    disc = region_from_disc((q.x, q.y), p.R, p.arc_segments)
    if not p.occlusion:
        return disc
    shadows = []
    reach = p.R * 1.05
    for o in others:
        if math.hypot(o.x - q.x, o.y - q.y) > p.R + p.car_length:
            continue
        sh = occlusion_shadow((q.x, q.y), o, p, reach)
        if sh is not None:
            shadows.append(sh)
    return difference(disc, union(*shadows))


HIGHWAY_EVENTS = (
    ("e1", DetectorCondition(rho={0}, gamma={2})),
    ("e2", DetectorCondition(rho={0}, mu={1})),
    ("e3", DetectorCondition(gamma={0, 1})),
    ("e4", DetectorCondition(gamma={0, 3})),
    ("e5", DetectorCondition(gamma={0}, mu={0})),
    ("e6", DetectorCondition(gamma={0}, rho={1, 3}, nu={0})),
    ("e7", DetectorCondition(rho={0, 2}, nu={1})),
    ("e8", DetectorCondition(rho={0})),
    ("e9", DetectorCondition(mu={2})),
    ("e10", DetectorCondition(gamma={0}, nu={2})),
    ("e11", DetectorCondition(gamma={0})),
    ("e12", DetectorCondition(mu={3})),
    ("e13", DetectorCondition(rho={0}, nu={3})),
)

HIGHWAY_TRANSITIONS = {
    ("FAST", "e1"): "FAST", ("FAST", "e2"): "FAST",
    ("FAST", "e3"): "SLOW", ("FAST", "e4"): "SLOW", ("FAST", "e5"): "SLOW",
    ("FAST", "e6"): "LEFT",
    ("FAST", "e7"): "RIGHT",
    ("SLOW", "e8"): "FAST",
    ("SLOW", "e3"): "SLOW", ("SLOW", "e4"): "SLOW", ("SLOW", "e5"): "SLOW",
    ("SLOW", "e6"): "LEFT",
    ("LEFT", "e8"): "FAST", ("LEFT", "e9"): "FAST",
    ("LEFT", "e10"): "LEFT",
    ("RIGHT", "e11"): "FAST", ("RIGHT", "e12"): "FAST",
    ("RIGHT", "e13"): "RIGHT",
}


def highway_decoder(q: AgentConfig, sigma: str, p: HighwayParams, v_max: float) -> tuple[float, float]:
    if sigma in ("FAST", "LEFT"):
        a = p.a_bar if q.v < v_max else 0.0
    elif sigma == "SLOW":
        a = -p.a_bar if q.v > 0 else 0.0
    elif sigma == "RIGHT":
        a = 0.0
    else:
        raise ValueError(sigma)
    if sigma in ("FAST", "SLOW"):
        y_star = (lane_index(q.y, p.lane_width) + 0.5) * p.lane_width
        w = ((y_star - q.y) * sinc(q.theta) - p.mu * q.theta) * q.v
    elif sigma == "LEFT":
        w = p.omega_bar if q.theta < p.theta_max else 0.0
    else:
        w = -p.omega_bar if q.theta > -p.theta_max else 0.0
    return a, w


def _highway_latch_update(prev: str, new: str, q: AgentConfig, latch, w: float):
    if new == "LEFT":
        return latch if prev == "LEFT" else ("L", (lane_index(q.y, w) + 1) * w)
    if new == "RIGHT":
        return latch if prev == "RIGHT" else ("R", lane_index(q.y, w) * w)
    return None


def _highway_latch_candidates(sigma: str, q: AgentConfig, w: float):
    lane = lane_index(q.y, w)
    if sigma == "LEFT":
        return (("L", (lane + 1) * w), ("L", lane * w))
    if sigma == "RIGHT":
        return (("R", lane * w), ("R", (lane + 1) * w))
    return (None,)


def _saturate(prev, new, sigma: str, p: HighwayParams, v_max: float):
    """Stop a fixed RK4 step from overshooting the decoder's switching surfaces.

    The bang-bang laws hold speed at ``v_max`` (or zero) and heading at
    +-``theta_max`` once reached; a step that crosses one of them lands on it.
    """
    x, y, th, v = new
    if v < 0.0:
        v = 0.0
    if sigma in ("FAST", "LEFT") and prev[3] <= v_max < v:
        v = v_max
    if sigma == "LEFT" and prev[2] <= p.theta_max < th:
        th = p.theta_max
    elif sigma == "RIGHT" and prev[2] >= -p.theta_max > th:
        th = -p.theta_max
    return (x, y, th, v)


def _highway_field(sigma: str, scale: float, p: HighwayParams, v_max: float):
    """Unicycle driven by ``highway_decoder``, written out per state for speed."""
    w, a_bar, om, th_max, mu = p.lane_width, p.a_bar, p.omega_bar, p.theta_max, p.mu
    floor, sin, cos = math.floor, math.sin, math.cos

    if sigma in ("FAST", "SLOW"):
        fast = sigma == "FAST"

        def rhs(y):
            _, yy, th, v = y
            if fast:
                a = a_bar if v < v_max else 0.0
            else:
                a = -a_bar if v > 0 else 0.0
            y_star = (floor(yy / w) + 0.5) * w
            sc = 1.0 - th * th / 6.0 if abs(th) < 1e-4 else sin(th) / th
            return (v * cos(th), v * sin(th), ((y_star - yy) * sc - mu * th) * v, a * scale)
    elif sigma == "LEFT":
        def rhs(y):
            _, _, th, v = y
            a = a_bar if v < v_max else 0.0
            return (v * cos(th), v * sin(th), om if th < th_max else 0.0, a * scale)
    elif sigma == "RIGHT":
        def rhs(y):
            _, _, th, v = y
            return (v * cos(th), v * sin(th), -om if th > -th_max else 0.0, 0.0)
    else:
        raise ValueError(sigma)
    return rhs


def build_highway(params: HighwayParams = HighwayParams()) -> ProtocolSpec:
    """Highway protocol for a car whose cruise speed is ``params.v_max``."""
    p = params
    w = p.lane_width
    v_max = p.v_max

    lambdas = (
        lambda q, latch: (p.lanes - 1) * w <= q.y <= p.lanes * w,
        lambda q, latch: 0.0 <= q.y <= w,
        lambda q, latch: latch is not None and latch[0] == "L" and q.y >= latch[1],
        lambda q, latch: latch is not None and latch[0] == "R" and q.y <= latch[1],
    )
    return ProtocolSpec(
        name="highway",
        kappa=4,
        topology_builder=lambda q: highway_topologies(q, p),
        lambda_predicates=lambdas,
        events=HIGHWAY_EVENTS,
        states=("FAST", "SLOW", "LEFT", "RIGHT"),
        transitions=dict(HIGHWAY_TRANSITIONS),
        initial_state="FAST",
        decoder=lambda q, sigma: highway_decoder(q, sigma, p, v_max),
        dynamics=_unicycle,
        visibility_builder=lambda q, others: highway_visibility(q, others, p),
        project=lambda prev, new, sigma: _saturate(prev, new, sigma, p, v_max),
        fused_field=lambda sigma, scale: _highway_field(sigma, scale, p, v_max),
        latch_update=lambda prev, new, q, latch: _highway_latch_update(prev, new, q, latch, w),
        latch_candidates=lambda sigma, q: _highway_latch_candidates(sigma, q, w),
        exclusive=False,
        params=p,
    )


# -- misbehavior models ----------------------------------------------------------------------------------


@dataclass(frozen=True)
class GhostInterval:
    start: float
    end: float = math.inf
    offsets: tuple = ()     # fabricated neighbors, (dx, dy) from the agent; empty = pretend nobody is there


@dataclass(frozen=True)
class GhostSchedule:
    """Piecewise-constant fabricated neighbor set.

    Inside an interval the agent's encoder sees exactly the listed ghosts,
    which ride along with the agent at fixed offsets. Outside every interval
    the true neighbor set is used.
    """

    intervals: tuple[GhostInterval, ...] = ()

    def __post_init__(self):
        ivs = tuple(self.intervals)
        for iv in ivs:
            if not iv.start < iv.end:
                raise ValueError("ghost interval must have start < end")
        for a, b in zip(ivs, ivs[1:]):
            if b.start < a.end:
                raise ValueError("ghost intervals must be ordered and non-overlapping")
        object.__setattr__(self, "intervals", ivs)

    def neighbors_at(self, t: float, q: AgentConfig) -> Optional[list[AgentConfig]]:
        for iv in self.intervals:
            if iv.start - 1e-9 <= t < iv.end - 1e-9:
                return [AgentConfig(q.x + dx, q.y + dy, q.theta, q.v) for dx, dy in iv.offsets]
        return None


def corrupted_encoder(base: ProtocolSpec, ghost: GhostSchedule) -> Behavior:
    """Agent runs ``base`` faithfully but feeds its encoder the ghost schedule."""
    return Behavior(kind="corrupted-encoder", ghost=ghost)


def corrupted_decoder(base: ProtocolSpec, alpha: float, states: Sequence[str] = ("ACC",)) -> Behavior:
    """Agent whose acceleration command in ``states`` is scaled by ``1 - alpha``.

    For the warehouse this is the gain substitution mu -> mu(1 - alpha) in ACC.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    tampered = replace(base, accel_scale=1.0 - alpha, scaled_states=frozenset(states))
    return Behavior(kind="corrupted-decoder", alpha=alpha, spec=tampered)


def epsilon_bound(alpha: float, v_tk: float, params: WarehouseParams) -> tuple[float, float]:
    """First-order gaps between the tampered ACC flow and the nominal ACC / DEC flows.

    A monitor tolerance below both values (and above the sensor floor) is
    expected to expose the tampered decoder within one period.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    dev = params.mu * abs(v_tk - params.v_max) * params.T * alpha
    return dev, -dev + params.mu * params.T * params.v_max


def ghost_inside_front(params: WarehouseParams, heading: float, fraction: float = 0.5) -> tuple[float, float]:
    """Offset of a fabricated forklift placed squarely inside the give-way sector."""
    ang = heading - math.pi / 8
    return (fraction * params.d * math.cos(ang), fraction * params.d * math.sin(ang))


__all__ = [
    "WarehouseParams", "HighwayParams", "GhostInterval", "GhostSchedule",
    "build_warehouse", "build_highway", "corrupted_encoder", "corrupted_decoder",
    "epsilon_bound", "warehouse_flow", "warehouse_topology", "highway_topologies",
    "highway_decoder", "highway_visibility", "occlusion_shadow", "lane_index", "sinc",
    "ghost_inside_front", "car_footprint",
]
