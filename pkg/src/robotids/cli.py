"""Command line entry point.

    robotids run <config> [--out DIR] [--seed N] [--frames] [--horizon N]
    robotids graph <config>
    robotids oracle [--graphs N] [--seed N]

``<config>`` is a JSON file or the name of a shipped scenario. ``run`` exits
with 0 when nothing was detected, 2 when some target was declared
uncooperative and 1 on any error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import random
import sys
import time
from pathlib import Path

from .consensus import ConsensusError, graph_diam, graph_dist, run_consensus
from .harness import EXIT_ERROR, EXIT_OK, ConfigError, load_scenario, run, shipped_configs
from .monitor import estimate_equal, event_estimate
from .oracles import brute_force_events, fold_in_order, random_connected_graph, random_rect_estimate
from .protocol import AgentConfig
from .scenarios import HighwayParams, build_highway, build_warehouse


def _cmd_run(args) -> int:
    cfg = load_scenario(args.config)
    out = Path(args.out) if args.out else None
    if args.frames and out is None:
        raise ConfigError("--frames needs --out")
    res = run(cfg, out, horizon=args.horizon, seed=args.seed)
    for rec in res.records:
        line = " ".join(f"{t}:{v}" for t, v in sorted(rec["verdicts"].items(), key=lambda kv: int(kv[0])))
        print(f"t={rec['time']:7.2f}  {line}")
    if args.frames:
        from .render import render_frames
        paths = render_frames(res.records, out / "frames")
        print(f"wrote {len(paths)} frames to {out / 'frames'}")
    for t, v in sorted(res.verdicts.items()):
        when = f" (first at period {res.detections[t]})" if t in res.detections else ""
        print(f"target {t}: {v}{when}")
    return res.exit_code


def _cmd_graph(args) -> int:
    cfg = load_scenario(args.config)
    out = {}
    for tid in cfg.targets():
        g = cfg.graph_for(tid)
        dist = {f"{a}-{b}": graph_dist(g, a, b) for a, b in itertools.combinations(g.nodes, 2)}
        try:
            diam = graph_diam(g)
        except ConsensusError:
            diam = None
        out[str(tid)] = {"nodes": list(g.nodes), "edges": [list(e) for e in g.edges], "dist": dist, "diam": diam}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _event_oracle_cases():
    yield "warehouse", build_warehouse(), [(AgentConfig(0.0, 0.0, 0.3, 1.0), None)]
    p = HighwayParams()
    spec = build_highway(p)
    cases = []
    for lane in range(p.lanes):
        q = AgentConfig(10.0, (lane + 0.5) * p.lane_width, 0.0, 15.0)
        for sigma in spec.states:
            cases += [(q, latch) for latch in spec.latch_candidates(sigma, q)]
    yield "highway", spec, cases


def _cmd_oracle(args) -> int:
    ok = True
    for name, spec, cases in _event_oracle_cases():
        t0 = time.perf_counter()
        bad = 0
        total = 0
        for q, latch in cases:
            for s in itertools.product((0, 1), repeat=spec.kappa):
                for v in itertools.product((0, 1), repeat=spec.kappa):
                    total += 1
                    if event_estimate(spec, s, v, q, latch) != brute_force_events(spec, s, v, q, latch):
                        bad += 1
        ok &= bad == 0
        print(f"event estimator vs brute force [{name}]: {total - bad}/{total} agree "
              f"({time.perf_counter() - t0:.2f}s)")
    rng = random.Random(args.seed)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(args.graphs):
        n = rng.randint(2, 8)
        g = random_connected_graph(rng, n)
        init = {v: random_rect_estimate(rng) for v in g.nodes}
        try:
            r = run_consensus(g, init)
        except ConsensusError:
            bad += 1
            continue
        order = list(range(n))
        rng.shuffle(order)
        if not estimate_equal(fold_in_order([init[v] for v in g.nodes], order), r.target):
            bad += 1
    ok &= bad == 0
    print(f"consensus vs centralized fold: {args.graphs - bad}/{args.graphs} graphs agree "
          f"({time.perf_counter() - t0:.2f}s)")
    return EXIT_OK if ok else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robotids", description="Monitor multi-robot cooperation protocols.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    shipped = ", ".join(shipped_configs())
    r = sub.add_parser("run", help="simulate a scenario and monitor it")
    r.add_argument("config", help=f"JSON file or shipped scenario ({shipped})")
    r.add_argument("--out", help="directory for trace.jsonl, summary.json and frames")
    r.add_argument("--seed", type=int, help="override the noise seed")
    r.add_argument("--frames", action="store_true", help="render one SVG per period and monitor")
    r.add_argument("--horizon", type=int, help="override the number of periods")
    r.set_defaults(func=_cmd_run)
    g = sub.add_parser("graph", help="print hop distances and diameter of each communication graph")
    g.add_argument("config")
    g.set_defaults(func=_cmd_graph)
    o = sub.add_parser("oracle", help="cross-check the estimators against brute-force references")
    o.add_argument("--graphs", type=int, default=100)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=_cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConsensusError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
