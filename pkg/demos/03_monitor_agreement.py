"""Four cars agree that a fifth is hogging the middle lane.

Car 1 keeps driving FAST in the middle lane although the right lane is
free, which the protocol forbids. Each of cars 2 to 5 sees only part of
the right lane, so on its own each one can still imagine a hidden car
there that would make the behavior lawful. Sharing estimates over the
communication graph 2-3, 2-5, 3-4 rules that out: after at most three
rounds (the graph diameter) every car holds the empty estimate.

    python demos/03_monitor_agreement.py
"""

from robotids.consensus import graph_diam
from robotids.harness import load_scenario, run


def main():
    cfg = load_scenario("highway_agreement")
    g = cfg.graph_for(1)
    print("monitors", g.nodes, "edges", g.edges, "diameter", graph_diam(g))
    res = run(cfg)
    k = res.detections[1]
    rec = res.records[k]
    print(f"period {k} (t = {rec['time']:g} s)")
    for m in rec["monitors"]:
        print(f"  car {m['monitor']} alone: {len(m['hypotheses'])} hypotheses, {m['verdict']}")
    (cons,) = rec["consensus"]
    for r, states in enumerate(cons["rounds"]):
        row = "  ".join(f"{n}:{len(s['hypotheses'])}" for n, s in states.items())
        print(f"  round {r}: {row}")
    print("exit code", res.exit_code, "verdicts", res.verdicts)


if __name__ == "__main__":
    main()
