"""Planar region algebra.

A :class:`Region` is a finite union of convex polygons. Every set the
detection stack manipulates (agent topologies, sensor visibility, occupancy
hypotheses) is realized as a Region. Boolean operations are built from
convex clipping only: intersection clips parts pairwise, difference peels a
convex subject against each edge of a convex clip polygon, which yields
disjoint convex pieces and avoids a general non-convex kernel.

Curved boundaries are approximated by inscribed polygons unless an outer
approximation is requested explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

Point = tuple[float, float]
Polygon = tuple[Point, ...]

AREA_TOL = 1e-9
# pieces smaller than this are clipping residue, not geometry
_SLIVER = 1e-12
_SIDE_EPS = 1e-12


@dataclass(frozen=True)
class Region:
    """Union of convex counter-clockwise polygons (overlap allowed)."""

    parts: tuple[Polygon, ...] = ()
    _bboxes: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        boxes = []
        for poly in self.parts:
            if len(poly) < 3:
                raise ValueError("polygon part needs at least 3 vertices")
            xs = [p[0] for p in poly]
            ys = [p[1] for p in poly]
            if not math.isfinite(math.fsum(xs) + math.fsum(ys)):
                raise ValueError("polygon vertex is not finite")
            boxes.append((min(xs), min(ys), max(xs), max(ys)))
        object.__setattr__(self, "_bboxes", tuple(boxes))

    def __bool__(self):
        return bool(self.parts)

    def __len__(self):
        return len(self.parts)

    def bounds(self):
        """(xmin, ymin, xmax, ymax) or None for the empty region."""
        if not self.parts:
            return None
        b = self._bboxes
        return (min(r[0] for r in b), min(r[1] for r in b),
                max(r[2] for r in b), max(r[3] for r in b))

    def to_json(self):
        return [[[x, y] for x, y in poly] for poly in self.parts]

    @classmethod
    def from_json(cls, data):
        return cls(tuple(tuple((float(x), float(y)) for x, y in poly) for poly in data))


EMPTY = Region()


@dataclass(frozen=True)
class SectorSpec:
    """Circular sector around ``center``; bearings are relative to ``heading``."""

    center: Point
    radius: float
    heading: float
    ang_min: float
    ang_max: float
    arc_segments: int = 32

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"sector radius must be positive, got {self.radius}")
        if not self.ang_min < self.ang_max:
            raise ValueError("sector needs ang_min < ang_max")
        if self.ang_max - self.ang_min > 2 * math.pi + 1e-12:
            raise ValueError("sector span exceeds a full turn")
        if self.arc_segments < 8:
            raise ValueError("arc_segments must be >= 8")


# -- low level convex helpers -------------------------------------------------

def _signed_area(poly: Sequence[Point]) -> float:
    s = 0.0
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        s += x1 * y2 - x2 * y1
    return 0.5 * s


def _clean(poly: list[Point]) -> Polygon | None:
    """Drop repeated vertices; None when the result is degenerate."""
    out: list[Point] = []
    for p in poly:
        if not out or abs(p[0] - out[-1][0]) > 1e-12 or abs(p[1] - out[-1][1]) > 1e-12:
            out.append(p)
    while len(out) > 1 and abs(out[0][0] - out[-1][0]) <= 1e-12 and abs(out[0][1] - out[-1][1]) <= 1e-12:
        out.pop()
    if len(out) < 3 or _signed_area(out) <= _SLIVER:
        return None
    return tuple(out)


def _clip(poly: Sequence[Point], ax: float, ay: float, bx: float, by: float, keep_left: bool) -> list[Point]:
    """Sutherland-Hodgman against the line a->b, keeping one closed side."""
    ex, ey = bx - ax, by - ay
    scale = math.hypot(ex, ey) * _SIDE_EPS
    sgn = 1.0 if keep_left else -1.0
    out: list[Point] = []
    n = len(poly)
    if n == 0:
        return out
    sides = [sgn * (ex * (py - ay) - ey * (px - ax)) for px, py in poly]
    if min(sides) >= -scale:
        return list(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        sp, sq = sides[i], sides[(i + 1) % n]
        p_in = sp >= -scale
        q_in = sq >= -scale
        if p_in:
            out.append(p)
        if (sp > scale and sq < -scale) or (sp < -scale and sq > scale):
            t = sp / (sp - sq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
        elif p_in != q_in:
            # one endpoint within tolerance of the line: it is already emitted
            pass
    return out


def _bbox_disjoint(a, b) -> bool:
    return a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1]


def _poly_bbox(poly):
    xs = [p[0] for p in poly]
    ys = [p[1] for p in poly]
    return (min(xs), min(ys), max(xs), max(ys))


def convex_intersection(p: Polygon, q: Polygon) -> Polygon | None:
    out: list[Point] = list(p)
    n = len(q)
    for i in range(n):
        (ax, ay), (bx, by) = q[i], q[(i + 1) % n]
        out = _clip(out, ax, ay, bx, by, True)
        if len(out) < 3:
            return None
    return _clean(out)


def convex_difference(p: Polygon, q: Polygon) -> list[Polygon]:
    """p minus q as disjoint convex pieces."""
    if _bbox_disjoint(_poly_bbox(p), _poly_bbox(q)):
        return [p]
    pieces: list[Polygon] = []
    rest: list[Point] = list(p)
    n = len(q)
    for i in range(n):
        (ax, ay), (bx, by) = q[i], q[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        scale = math.hypot(ex, ey) * _SIDE_EPS
        sides = [ex * (py - ay) - ey * (px - ax) for px, py in rest]
        if min(sides) >= -scale:
            continue  # nothing of rest lies beyond this edge
        if max(sides) <= scale:
            piece = _clean(rest)
            if piece is not None:
                pieces.append(piece)
            return pieces
        outside = _clean(_clip(rest, ax, ay, bx, by, False))
        if outside is not None:
            pieces.append(outside)
        rest = _clip(rest, ax, ay, bx, by, True)
        if len(rest) < 3 or _clean(rest) is None:
            return pieces
    return pieces


def _inside_convex(p: Polygon, q: Polygon, tol: float = 1e-12) -> bool:
    """Every vertex of p lies in the closed convex polygon q."""
    n = len(q)
    for i in range(n):
        (ax, ay), (bx, by) = q[i], q[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        lim = -tol * math.hypot(ex, ey)
        for px, py in p:
            if ex * (py - ay) - ey * (px - ax) < lim:
                return False
    return True


# -- construction ---------------------------------------------------------------

def region_from_polygon(points: Iterable[Point]) -> Region:
    """Single convex polygon; orientation is normalized to counter-clockwise."""
    pts = [(float(x), float(y)) for x, y in points]
    if _signed_area(pts) < 0:
        pts.reverse()
    poly = _clean(pts)
    if poly is None:
        raise ValueError("polygon is degenerate")
    n = len(poly)
    for i in range(n):
        (ax, ay), (bx, by), (cx, cy) = poly[i], poly[(i + 1) % n], poly[(i + 2) % n]
        if (bx - ax) * (cy - by) - (by - ay) * (cx - bx) < -1e-9:
            raise ValueError("polygon is not convex")
    return Region((poly,))


def region_from_rect(x_min: float, x_max: float, y_min: float, y_max: float) -> Region:
    if not (x_min < x_max and y_min < y_max):
        raise ValueError(f"degenerate rectangle [{x_min}, {x_max}] x [{y_min}, {y_max}]")
    return Region((((x_min, y_min), (x_max, y_min), (x_max, y_max), (x_min, y_max)),))


def square(center: Point, half_width: float) -> Region:
    cx, cy = center
    return region_from_rect(cx - half_width, cx + half_width, cy - half_width, cy + half_width)


def region_from_sector(spec: SectorSpec) -> Region:
    """Inscribed polygon of a circular sector.

    All vertices lie on the exact sector boundary, so the polygon is contained
    in the true sector. Spans wider than pi are split into convex slices
    sharing the apex.
    """
    cx, cy = spec.center
    r = spec.radius
    span = spec.ang_max - spec.ang_min
    n = spec.arc_segments
    a0 = spec.heading + spec.ang_min
    arc = [(cx + r * math.cos(a0 + span * k / n), cy + r * math.sin(a0 + span * k / n))
           for k in range(n + 1)]
    if span >= 2 * math.pi - 1e-12:
        return Region((_clean(arc[:-1]),))
    slices = max(1, math.ceil(span / math.pi - 1e-12))
    parts = []
    bounds = [round(n * j / slices) for j in range(slices + 1)]
    for j in range(slices):
        chunk = arc[bounds[j]:bounds[j + 1] + 1]
        poly = _clean([(cx, cy)] + chunk)
        if poly is not None:
            parts.append(poly)
    return Region(tuple(parts))


def region_from_disc(center: Point, radius: float, arc_segments: int = 32, outer: bool = False) -> Region:
    """Regular polygon approximating a disc.

    ``outer=False`` inscribes the polygon (under-approximation); ``outer=True``
    circumscribes it so the exact disc is contained.
    """
    if not radius > 0:
        raise ValueError("disc radius must be positive")
    if arc_segments < 8:
        raise ValueError("arc_segments must be >= 8")
    r = radius / math.cos(math.pi / arc_segments) if outer else radius
    cx, cy = center
    poly = tuple((cx + r * math.cos(2 * math.pi * k / arc_segments - math.pi),
                  cy + r * math.sin(2 * math.pi * k / arc_segments - math.pi))
                 for k in range(arc_segments))
    return Region((poly,))


# -- boolean operations -------------------------------------------------------------

def union(*regions: Region) -> Region:
    parts: list[Polygon] = []
    for r in regions:
        parts.extend(r.parts)
    return Region(tuple(parts))


def intersect(a: Region, b: Region) -> Region:
    parts = []
    for p, pb in zip(a.parts, a._bboxes):
        for q, qb in zip(b.parts, b._bboxes):
            if _bbox_disjoint(pb, qb):
                continue
            r = convex_intersection(p, q)
            if r is not None:
                parts.append(r)
    return Region(tuple(_drop_nested(parts)))


def _drop_nested(parts: list[Polygon]) -> list[Polygon]:
    # overlapping inputs produce nested or repeated pieces; without pruning,
    # repeated intersections multiply the part count
    if len(parts) < 2:
        return parts
    boxes = [_poly_bbox(p) for p in parts]
    keep = []
    for i, p in enumerate(parts):
        pb = boxes[i]
        nested = False
        for j, q in enumerate(parts):
            if i == j:
                continue
            qb = boxes[j]
            if pb[0] < qb[0] - 1e-9 or pb[1] < qb[1] - 1e-9 or pb[2] > qb[2] + 1e-9 or pb[3] > qb[3] + 1e-9:
                continue
            # of two mutually nested pieces keep the earlier one
            if _inside_convex(p, q, 1e-9) and (j < i or not _inside_convex(q, p, 1e-9)):
                nested = True
                break
        if not nested:
            keep.append(p)
    return keep


def _subtract_parts(pieces: list[Polygon], b: Region) -> list[Polygon]:
    for q, qb in zip(b.parts, b._bboxes):
        nxt: list[Polygon] = []
        for p in pieces:
            if _bbox_disjoint(_poly_bbox(p), qb):
                nxt.append(p)
            else:
                nxt.extend(convex_difference(p, q))
        pieces = nxt
        if not pieces:
            break
    return pieces


def difference(a: Region, b: Region) -> Region:
    if not a.parts or not b.parts:
        return a
    return Region(tuple(_subtract_parts(list(a.parts), b)))


def disjoint_parts(a: Region) -> Region:
    """Same point set re-expressed with non-overlapping parts."""
    done: list[Polygon] = []
    out: list[Polygon] = []
    for p in a.parts:
        pieces = [p]
        for q in done:
            nxt = []
            for piece in pieces:
                nxt.extend(convex_difference(piece, q))
            pieces = nxt
            if not pieces:
                break
        out.extend(pieces)
        done.append(p)
    return Region(tuple(out))


def area(a: Region) -> float:
    if len(a.parts) <= 1:
        return sum(_signed_area(p) for p in a.parts)
    return sum(_signed_area(p) for p in disjoint_parts(a).parts)


def is_empty(a: Region, area_tol: float = AREA_TOL) -> bool:
    part_areas = [_signed_area(p) for p in a.parts]
    if not part_areas or sum(part_areas) <= area_tol:
        return True
    if max(part_areas) > area_tol:
        return False
    return area(a) <= area_tol


def is_subset(a: Region, b: Region, area_tol: float = AREA_TOL) -> bool:
    if area_tol < 0:
        raise ValueError("area_tol must be non-negative")
    if not a.parts or a.parts == b.parts:
        return True
    total = 0.0
    for p, pb in zip(a.parts, a._bboxes):
        if any(qb[0] - 1e-9 <= pb[0] and qb[1] - 1e-9 <= pb[1] and qb[2] + 1e-9 >= pb[2] and qb[3] + 1e-9 >= pb[3]
               and _inside_convex(p, q)
               for q, qb in zip(b.parts, b._bboxes)):
            continue
        for piece in _subtract_parts([p], b):
            total += _signed_area(piece)
            if total > area_tol:
                return False
    return True


def region_equal(a: Region, b: Region, area_tol: float = AREA_TOL) -> bool:
    return is_subset(a, b, area_tol) and is_subset(b, a, area_tol)


def contains_point(a: Region, p: Point, tol: float = 1e-9) -> bool:
    """Closed membership test; points within ``tol`` of an edge count as inside."""
    px, py = p
    for poly, bb in zip(a.parts, a._bboxes):
        if px < bb[0] - tol or px > bb[2] + tol or py < bb[1] - tol or py > bb[3] + tol:
            continue
        n = len(poly)
        inside = True
        for i in range(n):
            (ax, ay), (bx, by) = poly[i], poly[(i + 1) % n]
            ex, ey = bx - ax, by - ay
            if ex * (py - ay) - ey * (px - ax) < -tol * math.hypot(ex, ey):
                inside = False
                break
        if inside:
            return True
    return False
