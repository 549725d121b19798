"""How small a tampered speed loop can a monitor catch?

The attacked forklift scales its ACC gain by (1 - alpha), so it speeds up
more slowly than the protocol says. Each period the monitor compares the
measured state with the nominal ACC prediction. The gap grows roughly like
mu |v - v_max| T alpha, so any tolerance below that catches the attack and
any tolerance above the measured gap misses it.

    python demos/02_detuned_decoder.py
"""

from robotids.geometry import region_from_disc
from robotids.monitor import new_monitor, predict, update
from robotids.protocol import AgentConfig
from robotids.scenarios import WarehouseParams, build_warehouse, corrupted_decoder, epsilon_bound

P = WarehouseParams(mu=0.2, T=0.5)
SPEC = build_warehouse(P)


def first_detection(alpha, epsilon, periods=4):
    tampered = corrupted_decoder(SPEC, alpha).spec
    q = AgentConfig(0.0, 0.0, 0.0, 0.0)
    ms = new_monitor(1, epsilon)
    gaps = []
    hit = None
    for k in range(periods):
        watcher = AgentConfig(q.x - 2.0, q.y, 0.0, 0.0)
        ms = predict(SPEC, ms, q, [watcher], region_from_disc((watcher.x, watcher.y), P.R), P.T)
        q = tampered.closed_flow(q, "ACC", P.T, tampered.accel_scale)
        ms, res = update(SPEC, ms, q)
        gaps.append(min(res.distances.values()))
        if res.detected and hit is None:
            hit = k
    return hit, max(gaps)


def main():
    print(f"mu*T = {P.mu * P.T:g}, start at rest")
    print(f"{'alpha':>5}  {'bound':>8}  {'gap':>8}  {'eps':>8}  detected at period")
    for alpha in (0.2, 0.5, 1.0):
        bound, _ = epsilon_bound(alpha, 0.0, P)
        _, gap = first_detection(alpha, 1.0)
        for eps in (0.8 * bound, 2 * gap):
            hit, _ = first_detection(alpha, eps)
            print(f"{alpha:5.1f}  {bound:8.4f}  {gap:8.4f}  {eps:8.4f}  {'missed' if hit is None else hit}")


if __name__ == "__main__":
    main()
