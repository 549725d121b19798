"""SVG snapshots of a monitor's view, one file per period and monitor.

Red areas are non-visible places where some agent must be; green areas are
non-visible places the monitor has inferred to be empty. The ring around
the target shows the verdict (green cooperative, yellow uncertain, red
uncooperative). Each hypothesis gets its own panel.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

from .geometry import Region, is_empty, is_subset

PANEL = 420
MARGIN = 4.0
RING = {"cooperative": "#2e9d3a", "uncertain": "#e0b000", "uncooperative": "#d22"}


class _Frame:
    def __init__(self, bounds, panel: int):
        x0, y0, x1, y1 = bounds
        self.x0, self.y1 = x0 - MARGIN, y1 + MARGIN
        span = max(x1 - x0, y1 - y0) + 2 * MARGIN
        self.k = panel / span
        self.height = (y1 - y0 + 2 * MARGIN) * self.k

    def pt(self, x, y, dx=0.0):
        return (dx + (x - self.x0) * self.k, (self.y1 - y) * self.k)

    def polygons(self, region: Region, dx: float, fill: str, opacity: float, stroke: str = "none",
                 dash: str = "") -> list[str]:
        out = []
        for poly in region.parts:
            pts = " ".join("%.2f,%.2f" % self.pt(x, y, dx) for x, y in poly)
            extra = f' stroke-dasharray="{dash}"' if dash else ""
            out.append(f'<polygon points="{pts}" fill="{fill}" fill-opacity="{opacity}" '
                       f'stroke="{stroke}" stroke-width="1"{extra}/>')
        return out


def _bounds(regions: Iterable[Region], points: Sequence[tuple[float, float]]):
    xs, ys = [], []
    for r in regions:
        b = r.bounds()
        if b is not None:
            xs += [b[0], b[2]]
            ys += [b[1], b[3]]
    for x, y in points:
        xs.append(x)
        ys.append(y)
    return min(xs), min(ys), max(xs), max(ys)


def render_monitor_view(record: dict, mon: dict) -> str:
    """One SVG document for monitor record ``mon`` of trace ``record``."""
    topos = [Region.from_json(r) for r in mon["topologies"]]
    hidden = [Region.from_json(r) for r in mon["hidden"]]
    hyps = mon["hypotheses"]
    agents = record["agents"]
    target = next(a for a in agents if a["id"] == mon["target"])
    tx, ty = target["q"][0], target["q"][1]
    near = [(a["q"][0], a["q"][1]) for a in agents
            if abs(a["q"][0] - tx) < 80 and abs(a["q"][1] - ty) < 80]
    frame = _Frame(_bounds(topos, near), PANEL)
    panels = max(1, len(hyps))
    width, height = PANEL * panels, frame.height + 24
    body = [f'<rect width="{width}" height="{height:.1f}" fill="white"/>']
    for i in range(panels):
        dx = i * PANEL
        for eta in topos:
            body += frame.polygons(eta, dx, "#fff3b0", 0.35, "#c8a000", "4,3")
        if hyps:
            for k, cell in enumerate(hyps[i]):
                region = Region.from_json(cell["region"])
                if cell["required"]:
                    body += frame.polygons(region, dx, "#e33", 0.55)
                elif not is_empty(hidden[k]) and not is_subset(hidden[k], region):
                    body += frame.polygons(hidden[k], dx, "#3a3", 0.45)
            body.append(f'<text x="{dx + 6}" y="{height - 8:.1f}" font-size="12" font-family="sans-serif">'
                        f'H{i + 1}</text>')
        for a in agents:
            x, y = frame.pt(a["q"][0], a["q"][1], dx)
            colour = "#1f5fd6" if a["id"] == mon["monitor"] else "#444"
            body.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="{colour}"/>')
            body.append(f'<text x="{x + 5:.2f}" y="{y - 5:.2f}" font-size="10" font-family="sans-serif">'
                        f'{a["id"]:02d}</text>')
        x, y = frame.pt(tx, ty, dx)
        body.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="9" fill="none" stroke="{RING[mon["verdict"]]}" '
                    f'stroke-width="3"/>')
    title = escape(f't={record["time"]:g}s monitor {mon["monitor"]} target {mon["target"]}: {mon["verdict"]}, '
                   f'sigma={",".join(mon["sigmaHat"]) or "-"}')
    body.append(f'<text x="6" y="14" font-size="12" font-family="sans-serif">{title}</text>')
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height:.1f}" '
            f'viewBox="0 0 {width} {height:.1f}">\n' + "\n".join(body) + "\n</svg>\n")


def render_frames(records: Sequence[dict], out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for rec in records:
        for mon in rec["monitors"]:
            path = out_dir / f"frame_{rec['period']:04d}_m{mon['monitor']}_t{mon['target']}.svg"
            path.write_text(render_monitor_view(rec, mon))
            paths.append(path)
    return paths


__all__ = ["render_frames", "render_monitor_view"]
