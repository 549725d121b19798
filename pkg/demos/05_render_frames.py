"""Write SVG snapshots of a run, one per period and monitor.

Red areas are out of view and must hold some agent; green areas are out
of view and inferred empty. The ring around the target is green, yellow
or red for cooperative, uncertain and uncooperative.

    python demos/05_render_frames.py [scenario] [out_dir]
"""

import sys
from pathlib import Path

from robotids.harness import load_scenario, run
from robotids.render import render_frames


def main():
    name = sys.argv[1] if len(sys.argv) > 1 else "warehouse_ghost"
    out = Path(sys.argv[2] if len(sys.argv) > 2 else f"out/{name}")
    res = run(load_scenario(name), out)
    paths = render_frames(res.records, out / "frames")
    print(f"trace: {out / 'trace.jsonl'}")
    print(f"{len(paths)} frames, e.g. {paths[-1]}")


if __name__ == "__main__":
    main()
