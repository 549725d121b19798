"""The event estimator is as tight as possible.

For a target whose topologies are partly hidden, the monitor must allow
every event that some hidden car could trigger, and nothing else. This
script checks the estimator against enumeration of every hidden
completion, for all encoder and visibility patterns of the highway
protocol, and prints one worked case.

    python demos/04_event_estimator.py
"""

import itertools

from robotids.monitor import event_estimate
from robotids.oracles import brute_force_events
from robotids.protocol import AgentConfig
from robotids.scenarios import HighwayParams, build_highway


def main():
    p = HighwayParams()
    spec = build_highway(p)
    q = AgentConfig(0.0, 1.5 * p.lane_width, 0.0, 18.0)
    total = 0
    for s in itertools.product((0, 1), repeat=4):
        for v in itertools.product((0, 1), repeat=4):
            assert event_estimate(spec, s, v, q) == brute_force_events(spec, s, v, q)
            total += 1
    print(f"{total} (s, v) patterns agree with brute force")
    s, v = (0, 0, 0, 0), (1, 1, 0, 1)
    print("front, left, back fully visible and empty; right lane partly hidden")
    print("possible events:", sorted(event_estimate(spec, s, v, q), key=lambda e: int(e[1:])))


if __name__ == "__main__":
    main()
