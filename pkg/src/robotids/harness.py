"""Scenario loading and the simulate -> monitor -> consensus loop.

A scenario is one JSON document (see README for the schema). :func:`run`
steps the world period by period, lets every configured monitor observe its
target, runs consensus among the monitors watching the same target and
emits one trace record per period.
"""

from __future__ import annotations

import dataclasses
import json
import math
import random
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from .consensus import CommGraph, is_connected, run_consensus
from .geometry import contains_point
from .monitor import (INTEGRATION_BUDGET, MonitorState, NormWeights, Verdict, classify,
                      consistent_with, new_monitor, predict, update)
from .protocol import (AgentConfig, AgentEntry, Behavior, NOMINAL, ProtocolSpec, WorldState,
                       detect_events, encode, neighbor_configs, world_step)
from .scenarios import (GhostInterval, GhostSchedule, HighwayParams, WarehouseParams, build_highway,
                        build_warehouse, corrupted_decoder, corrupted_encoder)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DETECTED = 2

_PARAM_TYPES = {"warehouse": WarehouseParams, "highway": HighwayParams}


class ConfigError(ValueError):
    """Invalid scenario document; the message names the offending field."""


@dataclass(frozen=True)
class AgentSetup:
    id: int
    q: AgentConfig
    sigma: str
    behavior: dict = field(default_factory=lambda: {"kind": "nominal"})
    v_max: Optional[float] = None


@dataclass(frozen=True)
class MonitorSetup:
    monitor: int
    target: int
    epsilon: float
    epsilon_min: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    params: Any
    agents: tuple[AgentSetup, ...]
    monitors: tuple[MonitorSetup, ...] = ()
    edges: Optional[tuple] = None       # None: monitors of a target form a complete graph
    horizon: int = 10
    noise_bound: float = 0.0
    seed: int = 0
    weights: NormWeights = NormWeights()
    name: str = "scenario"

    @property
    def period(self) -> float:
        return self.params.T

    def agent(self, agent_id: int) -> AgentSetup:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise KeyError(agent_id)

    def graph_for(self, target: int) -> CommGraph:
        nodes = tuple(m.monitor for m in self.monitors if m.target == target)
        if self.edges is None:
            edges = tuple((a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:])
        else:
            edges = tuple((a, b) for a, b in self.edges if a in nodes and b in nodes)
        return CommGraph(nodes, edges)

    def targets(self) -> list[int]:
        out = []
        for m in self.monitors:
            if m.target not in out:
                out.append(m.target)
        return out


# -- loading ------------------------------------------------------------------------------------------


def _field(data: dict, key: str, where: str, default=..., kind=None):
    if key not in data:
        if default is ...:
            raise ConfigError(f"{where}.{key}: missing")
        return default
    value = data[key]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"{where}.{key}: expected {kind if isinstance(kind, type) else 'number'}, got {value!r}")
    return value


_NUM = (int, float)


def _params(kind: str, data: dict, occlusion: Optional[bool]):
    cls = _PARAM_TYPES[kind]
    names = {f.name for f in dataclasses.fields(cls)}
    values = {}
    for key, val in data.items():
        if key not in names:
            raise ConfigError(f"params.{key}: unknown parameter for {kind}")
        values[key] = val
    if occlusion is not None:
        if kind != "highway":
            raise ConfigError("occlusion: only the highway scenario models occlusion")
        values["occlusion"] = bool(occlusion)
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"params: {exc}") from exc


def _behavior(data: dict, where: str) -> dict:
    kind = _field(data, "kind", where, "nominal", str)
    if kind == "nominal":
        return {"kind": kind}
    if kind == "corrupted-encoder":
        ghost = _field(data, "ghost", where, kind=list)
        for i, iv in enumerate(ghost):
            w = f"{where}.ghost[{i}]"
            _field(iv, "start", w, kind=_NUM)
            end = _field(iv, "end", w, None)
            if end is not None and not isinstance(end, _NUM):
                raise ConfigError(f"{w}.end: expected number or null")
            for off in _field(iv, "offsets", w, [], list):
                if len(off) != 2:
                    raise ConfigError(f"{w}.offsets: each offset is [dx, dy]")
        return {"kind": kind, "ghost": ghost}
    if kind == "corrupted-decoder":
        alpha = _field(data, "alpha", where, kind=_NUM)
        if not 0 <= alpha <= 1:
            raise ConfigError(f"{where}.alpha: must lie in [0, 1]")
        return {"kind": kind, "alpha": float(alpha), "states": list(_field(data, "states", where, ["ACC"], list))}
    raise ConfigError(f"{where}.kind: unknown behavior {kind!r}")


def parse_config(data: dict, name: str = "scenario") -> ScenarioConfig:
    """Validate a scenario document and fill defaults."""
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a JSON object")
    kind = _field(data, "scenario", "config", kind=str)
    if kind not in _PARAM_TYPES:
        raise ConfigError(f"config.scenario: expected one of {sorted(_PARAM_TYPES)}, got {kind!r}")
    params = _params(kind, _field(data, "params", "config", {}, dict), data.get("occlusion"))
    states = build_warehouse(params).states if kind == "warehouse" else build_highway(params).states

    agents = []
    for i, a in enumerate(_field(data, "agents", "config", kind=list)):
        where = f"agents[{i}]"
        q = _field(a, "q", where, kind=list)
        if len(q) != 4 or not all(isinstance(c, _NUM) for c in q):
            raise ConfigError(f"{where}.q: expected [x, y, theta, v]")
        sigma = _field(a, "sigma", where, kind=str)
        if sigma not in states:
            raise ConfigError(f"{where}.sigma: {sigma!r} is not one of {list(states)}")
        v_max = _field(a, "vMax", where, None)
        if v_max is not None and (kind != "highway" or not isinstance(v_max, _NUM) or v_max <= 0):
            raise ConfigError(f"{where}.vMax: positive number, highway only")
        agents.append(AgentSetup(int(_field(a, "id", where, kind=int)), AgentConfig.from_json(q), sigma,
                                 _behavior(_field(a, "behavior", where, {}, dict), f"{where}.behavior"),
                                 None if v_max is None else float(v_max)))
    if not agents:
        raise ConfigError("config.agents: at least one agent is required")
    ids = [a.id for a in agents]
    if len(set(ids)) != len(ids):
        raise ConfigError("config.agents: ids must be unique")

    noise = float(_field(data, "noiseBound", "config", 0.0, _NUM))
    if noise < 0:
        raise ConfigError("config.noiseBound: must be non-negative")
    monitors = []
    for i, m in enumerate(_field(data, "monitors", "config", [], list)):
        where = f"monitors[{i}]"
        mon = _field(m, "monitor", where, kind=int)
        tgt = _field(m, "target", where, kind=int)
        for key, val in (("monitor", mon), ("target", tgt)):
            if val not in ids:
                raise ConfigError(f"{where}.{key}: no agent with id {val}")
        if mon == tgt:
            raise ConfigError(f"{where}: an agent cannot monitor itself")
        eps = float(_field(m, "epsilon", where, kind=_NUM))
        eps_min = float(_field(m, "epsilonMin", where, 0.0, _NUM))
        if eps < noise + INTEGRATION_BUDGET:
            raise ConfigError(f"{where}.epsilon: {eps} is below noiseBound + integration budget ({noise + INTEGRATION_BUDGET})")
        if eps_min < 0 or eps_min > eps:
            raise ConfigError(f"{where}.epsilonMin: must satisfy 0 <= epsilonMin <= epsilon")
        monitors.append(MonitorSetup(mon, tgt, eps, eps_min))
    pairs = [(m.monitor, m.target) for m in monitors]
    if len(set(pairs)) != len(pairs):
        raise ConfigError("config.monitors: duplicate (monitor, target) pair")

    edges = None
    if "commGraph" in data:
        raw = _field(_field(data, "commGraph", "config", kind=dict), "edges", "commGraph", kind=list)
        mon_ids = {m.monitor for m in monitors}
        edges = []
        for j, e in enumerate(raw):
            if len(e) != 2 or any(n not in mon_ids for n in e):
                raise ConfigError(f"commGraph.edges[{j}]: both ends must be monitor ids")
            edges.append((int(e[0]), int(e[1])))
        edges = tuple(edges)

    horizon = _field(data, "horizon", "config", 10, int)
    if horizon < 1:
        raise ConfigError("config.horizon: must be at least 1")
    w = _field(data, "weights", "config", {}, dict)
    try:
        weights = NormWeights(float(w.get("theta", 1.0)), float(w.get("v", 1.0)))
    except ValueError as exc:
        raise ConfigError(f"config.weights: {exc}") from exc

    cfg = ScenarioConfig(kind, params, tuple(agents), tuple(monitors), edges, horizon, noise,
                         int(_field(data, "seed", "config", 0, int)), weights,
                         str(data.get("name", name)))
    for tgt in cfg.targets():
        g = cfg.graph_for(tgt)
        if not is_connected(g):
            raise ConfigError(f"commGraph: monitors of target {tgt} are not connected")
    return cfg


def shipped_configs() -> list[str]:
    root = resources.files("robotids") / "data"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(source) -> ScenarioConfig:
    """Load a scenario from a JSON file path or the name of a shipped scenario."""
    path = Path(source)
    if path.is_file():
        text, name = path.read_text(), path.stem
    else:
        res = resources.files("robotids") / "data" / f"{source}.json"
        if not res.is_file():
            raise ConfigError(f"{source}: no such file or shipped scenario (shipped: {', '.join(shipped_configs())})")
        text, name = res.read_text(), str(source)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: invalid JSON ({exc})") from exc
    return parse_config(data, name)


def config_to_json(cfg: ScenarioConfig) -> dict:
    out = {
        "name": cfg.name,
        "scenario": cfg.kind,
        "params": dataclasses.asdict(cfg.params),
        "agents": [{"id": a.id, "q": a.q.to_json(), "sigma": a.sigma, "behavior": a.behavior,
                    **({"vMax": a.v_max} if a.v_max is not None else {})} for a in cfg.agents],
        "monitors": [{"monitor": m.monitor, "target": m.target, "epsilon": m.epsilon,
                      "epsilonMin": m.epsilon_min} for m in cfg.monitors],
        "horizon": cfg.horizon,
        "noiseBound": cfg.noise_bound,
        "seed": cfg.seed,
        "weights": {"theta": cfg.weights.theta, "v": cfg.weights.v},
    }
    if cfg.edges is not None:
        out["commGraph"] = {"edges": [list(e) for e in cfg.edges]}
    return out


# -- building the world ------------------------------------------------------------------------------------


def agent_specs(cfg: ScenarioConfig) -> dict[int, ProtocolSpec]:
    if cfg.kind == "warehouse":
        spec = build_warehouse(cfg.params)
        return {a.id: spec for a in cfg.agents}
    cache: dict = {}
    out = {}
    for a in cfg.agents:
        vm = a.v_max if a.v_max is not None else cfg.params.v_max
        if vm not in cache:
            cache[vm] = build_highway(replace(cfg.params, v_max=vm))
        out[a.id] = cache[vm]
    return out


def _make_behavior(setup: AgentSetup, spec: ProtocolSpec) -> Behavior:
    b = setup.behavior
    if b["kind"] == "corrupted-encoder":
        ivs = tuple(GhostInterval(float(iv["start"]), math.inf if iv.get("end") is None else float(iv["end"]),
                                  tuple(tuple(float(c) for c in off) for off in iv.get("offsets", [])))
                    for iv in b["ghost"])
        return corrupted_encoder(spec, GhostSchedule(ivs))
    if b["kind"] == "corrupted-decoder":
        return corrupted_decoder(spec, b["alpha"], tuple(b["states"]))
    return NOMINAL


def initial_world(cfg: ScenarioConfig, specs: dict[int, ProtocolSpec]) -> WorldState:
    entries = []
    for a in cfg.agents:
        spec = specs[a.id]
        latch = spec.latch_candidates(a.sigma, a.q)[0]
        entries.append(AgentEntry(a.id, a.q, a.sigma, latch, _make_behavior(a, spec)))
    return WorldState(0.0, tuple(entries))


# -- the loop --------------------------------------------------------------------------------------------------


@dataclass
class RunResult:
    records: list
    verdicts: dict            # target id -> final (sticky) verdict
    exit_code: int
    violations: list          # soundness audit failures (only with audit=True)
    detections: dict          # target id -> period index of first uncooperative verdict


def _measure(rng: random.Random, q: AgentConfig, bound: float) -> AgentConfig:
    if bound == 0:
        return q
    u = [rng.uniform(-bound, bound) for _ in range(4)]
    return AgentConfig(q.x + u[0], q.y + u[1], math.remainder(q.theta + u[2], 2 * math.pi), q.v + u[3])


def _latch_json(latch):
    return None if latch is None else list(latch)


def run(cfg: ScenarioConfig, out_dir: Optional[Path] = None, horizon: Optional[int] = None,
        seed: Optional[int] = None, audit: bool = False) -> RunResult:
    """Simulate ``cfg`` and monitor it; returns the records and the exit summary."""
    horizon = cfg.horizon if horizon is None else horizon
    if horizon < 1:
        raise ConfigError("horizon: must be at least 1")
    rng = random.Random(cfg.seed if seed is None else seed)
    specs = agent_specs(cfg)
    world = initial_world(cfg, specs)
    T = cfg.period
    monitors = {(m.monitor, m.target): new_monitor(m.target, m.epsilon, m.epsilon_min, cfg.noise_bound, cfg.weights)
                for m in cfg.monitors}
    graphs = {t: cfg.graph_for(t) for t in cfg.targets()}
    sticky: dict[int, Verdict] = {}
    detections: dict[int, int] = {}
    records, violations = [], []
    trace_fh = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        trace_fh = open(out_dir / "trace.jsonl", "w")
    try:
        for k in range(horizon):
            t_k = k * T
            world = replace(world, time=t_k)
            truth = world.configs()
            observed = {}
            for (mid, tid), ms in monitors.items():
                spec = specs[tid]
                q_m = truth[mid]
                others = [q for i, q in truth.items() if i != mid]
                v_h = spec.visibility_builder(q_m, others)
                visible = [q_m] + [_measure(rng, q, cfg.noise_bound) for i, q in truth.items()
                                   if i not in (mid, tid) and contains_point(v_h, q.point)]
                q_bar = _measure(rng, truth[tid], cfg.noise_bound)
                monitors[(mid, tid)] = predict(spec, ms, q_bar, visible, v_h, T)
                observed[(mid, tid)] = q_bar

            prev = world
            try:
                world = world_step(world, specs, T)
            except Exception as exc:
                raise RuntimeError(f"period {k}: {exc}") from exc
            truth_next = world.configs()

            mon_records, results = [], {}
            for (mid, tid), ms in monitors.items():
                spec = specs[tid]
                before = ms
                nxt, res = update(spec, ms, _measure(rng, truth_next[tid], cfg.noise_bound))
                monitors[(mid, tid)] = nxt
                results[(mid, tid)] = res
                mon_records.append({
                    "monitor": mid, "target": tid,
                    "qBar": before.q_bar.to_json(),
                    "v": list(before.v), "sTilde": list(before.s_tilde),
                    "events": sorted(before.events),
                    "sigmaPrior": sorted(before.sigma_hat),
                    "sigmaHat": sorted(res.sigma_hat),
                    "sStar": [list(s) for s in sorted(res.s_star)],
                    "pHat": [sorted(p) for p in res.p_hat],
                    "topologies": [r.to_json() for r in spec.topologies(before.q_bar)],
                    "hidden": [r.to_json() for r in before.hidden],
                    "hypotheses": res.estimate.to_json(),
                    "detected": res.detected,
                    "verdict": res.verdict.value,
                })
                if audit:
                    violations += _audit(spec, prev, world, mid, tid, before, res, k)

            cons_records = []
            for tid, g in graphs.items():
                initial = {n: results[(n, tid)].estimate for n in g.nodes}
                runres = run_consensus(g, initial)
                detected = any(results[(n, tid)].detected for n in g.nodes)
                verdict = classify(runres.target, detected)
                if verdict is Verdict.UNCOOPERATIVE and tid not in detections:
                    detections[tid] = k
                if sticky.get(tid) is Verdict.UNCOOPERATIVE:
                    verdict = Verdict.UNCOOPERATIVE
                sticky[tid] = verdict
                if audit and _nominal(prev, tid) and verdict is Verdict.UNCOOPERATIVE:
                    violations.append(f"period {k}: consensus accuses nominal target {tid}")
                cons_records.append({
                    "target": tid,
                    "diameter": runres.diameter,
                    "convergedAt": runres.converged_at,
                    "rounds": [{str(n): {"hypotheses": st[n].to_json(), "verdict": classify(st[n]).value}
                                for n in g.nodes} for st in runres.rounds],
                    "verdict": verdict.value,
                })

            rec = {
                "period": k,
                "time": t_k,
                "agents": [{"id": a.id, "q": truth[a.id].to_json(), "sigma": b.sigma,
                            "latch": _latch_json(b.latch), "behavior": a.behavior.kind}
                           for a, b in zip(prev.agents, world.agents)],
                "monitors": mon_records,
                "consensus": cons_records,
                "verdicts": {str(t): v.value for t, v in sticky.items()},
            }
            records.append(rec)
            if trace_fh is not None:
                trace_fh.write(json.dumps(rec, sort_keys=True) + "\n")
    finally:
        if trace_fh is not None:
            trace_fh.close()

    exit_code = EXIT_DETECTED if any(v is Verdict.UNCOOPERATIVE for v in sticky.values()) else EXIT_OK
    result = RunResult(records, {t: v.value for t, v in sticky.items()}, exit_code, violations, detections)
    if out_dir is not None:
        summary = {"scenario": cfg.name, "periods": horizon, "verdicts": {str(t): v for t, v in result.verdicts.items()},
                   "detections": {str(t): k for t, k in detections.items()}, "exitCode": exit_code}
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return result


def _nominal(world: WorldState, agent_id: int) -> bool:
    return world.agent(agent_id).behavior.kind == "nominal"


def _audit(spec: ProtocolSpec, prev: WorldState, nxt: WorldState, mid: int, tid: int,
           ms: MonitorState, res, k: int) -> list[str]:
    """Soundness checks that need ground truth; only meaningful for nominal targets."""
    if not _nominal(prev, tid):
        return []
    out = []
    before, after = prev.agent(tid), nxt.agent(tid)
    others = [a.q for a in prev.agents if a.id != tid]
    neighbors = neighbor_configs(spec, before.q, others)
    s = encode(spec, before.q, neighbors)
    tag = f"period {k}, monitor {mid} -> target {tid}"
    if any(a > b for a, b in zip(ms.s_tilde, s)):
        out.append(f"{tag}: restricted encoder {ms.s_tilde} exceeds true bits {s}")
    if not detect_events(spec, s, before.q, before.latch) <= ms.events:
        out.append(f"{tag}: true events missing from the estimate")
    if after.sigma not in res.sigma_hat or (after.sigma, after.latch) not in res.modes:
        out.append(f"{tag}: true state {after.sigma} pruned")
    if res.verdict is Verdict.UNCOOPERATIVE:
        out.append(f"{tag}: nominal target declared uncooperative")
    elif not any(consistent_with(h, spec.topologies(before.q), neighbors) for h in res.estimate.hypotheses):
        out.append(f"{tag}: no hypothesis matches the true neighbors")
    return out


# -- randomized nominal scenarios ---------------------------------------------------------------------------------


def random_nominal_config(kind: str, rng: random.Random, n_agents: int = 6, horizon: int = 40,
                          n_monitors: int = 3, occlusion: bool = False) -> ScenarioConfig:
    """A crowd of lawful agents with a few monitors watching nearby agents."""
    if kind == "warehouse":
        params = WarehouseParams()
        agents = []
        for i in range(n_agents):
            q = AgentConfig(rng.uniform(0, 12), rng.uniform(0, 12), rng.uniform(-math.pi, math.pi),
                            rng.uniform(0, params.v_max))
            agents.append(AgentSetup(i, q, rng.choice(("ACC", "DEC"))))
    elif kind == "highway":
        params = HighwayParams(occlusion=occlusion)
        agents = []
        slots = rng.sample(range(params.lanes * 6), n_agents)
        for i, slot in enumerate(slots):
            lane, col = divmod(slot, 6)
            x = col * 18.0 + rng.uniform(-4, 4)
            y = (lane + 0.5) * params.lane_width + rng.uniform(-0.5, 0.5)
            v_max = rng.uniform(16, 24)
            q = AgentConfig(x, y, rng.uniform(-0.05, 0.05), rng.uniform(0.7, 1.0) * v_max)
            agents.append(AgentSetup(i, q, "FAST", v_max=v_max))
    else:
        raise ConfigError(f"unknown scenario kind {kind!r}")
    pairs = [(a.id, b.id) for a in agents for b in agents if a.id != b.id]
    rng.shuffle(pairs)
    chosen = pairs[:1]
    while len(chosen) < min(n_monitors, len(pairs)):
        # half the time watch an already watched target so consensus has work to do
        same = [p for p in pairs if p[1] == chosen[0][1] and p not in chosen]
        pool = same if same and rng.random() < 0.5 else [p for p in pairs if p not in chosen]
        chosen.append(rng.choice(pool))
    monitors = tuple(MonitorSetup(m, t, 1e-3) for m, t in chosen)
    return ScenarioConfig(kind, params, tuple(agents), monitors, None, horizon, 0.0,
                          rng.randrange(2 ** 31), NormWeights(), f"random-{kind}")


__all__ = [
    "ConfigError", "AgentSetup", "MonitorSetup", "ScenarioConfig", "RunResult", "parse_config",
    "load_scenario", "shipped_configs", "config_to_json", "agent_specs", "initial_world", "run",
    "random_nominal_config", "EXIT_OK", "EXIT_DETECTED", "EXIT_ERROR",
]
