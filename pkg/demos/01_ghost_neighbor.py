"""A forklift invents a neighbor to justify stopping.

Forklift 1 drives at full speed. From t = 1 s on, its encoder reports a
fabricated forklift inside its give-way sector, so it switches to DEC and
slows down. Forklift 0 watches from a spot where that sector is partly
out of camera range. It cannot disprove the ghost, but it does work out
that the stop only makes sense if someone is hiding in the part it cannot
see, and reports the target as uncertain with that region marked.

    python demos/01_ghost_neighbor.py
"""

from robotids.geometry import area, Region
from robotids.harness import load_scenario, run


def main():
    cfg = load_scenario("warehouse_ghost")
    res = run(cfg)
    print(f"{'t':>5}  {'v':>3}  {'sigma':>6}  {'s*':>6}  {'p':>6}  verdict")
    for rec in res.records:
        (m,) = rec["monitors"]
        print(f"{rec['time']:5.2f}  {m['v']!s:>3}  {','.join(m['sigmaHat']):>6}  "
              f"{m['sStar']!s:>6}  {m['pHat']!s:>6}  {m['verdict']}")
    last = res.records[-1]["monitors"][0]
    for i, hyp in enumerate(last["hypotheses"], 1):
        for k, cell in enumerate(hyp):
            r = Region.from_json(cell["region"])
            tag = "someone must be here" if cell["required"] else "may be occupied"
            print(f"H{i}, topology {k}: {area(r):.2f} m^2 out of view, {tag}")
    print("final verdict:", res.verdicts)


if __name__ == "__main__":
    main()
