"""Deterministic JSON / CSV / SVG emitters for spheres, fronts, and reports.

All floats are rendered with 17 significant digits and all JSON objects
with sorted keys, so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
from typing import Iterable, Sequence

from .exact import float17
from .models import Model
from .synthesis import FrontSample, SpherePatch

SCHEMA_VERSION = "1"


def sphere_json(m: Model, radius, patches: Sequence[SpherePatch]) -> str:
    samples = []
    for p in patches:
        for pt in p.samples:
            samples.append([float17(c) for c in pt])
    payload = {
        "schema": SCHEMA_VERSION,
        "kind": "sphere",
        "model": m.id.value,
        "radius": float17(float(radius)),
        "patches": [p.to_json() for p in patches],
        "samples": sorted(samples),
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def front_json(m: Model, front: FrontSample) -> str:
    points = sorted(
        (label, tuple(float17(c) for c in pt)) for label, pt in front.points
    )
    payload = {
        "schema": SCHEMA_VERSION,
        "kind": "front",
        "model": m.id.value,
        "time": float17(front.time),
        "points": [{"label": label, "point": list(pt)} for label, pt in points],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def points_csv(points: Iterable[tuple], dim: int, labels=None) -> str:
    header = ",".join(["x", "y", "z"][:dim] + (["label"] if labels else []))
    rows = [header]
    if labels:
        data = sorted(
            (tuple(float17(c) for c in pt), label) for pt, label in zip(points, labels)
        )
        for pt, label in data:
            rows.append(",".join(pt) + f",{label}")
    else:
        for pt in sorted(tuple(float17(c) for c in pt) for pt in points):
            rows.append(",".join(pt))
    return "\n".join(rows) + "\n"


_VIEW_AXES = {"x": (1, 2), "y": (0, 2), "z": (0, 1)}

_KIND_STYLE = {
    "singular": "fill:#d62728;stroke:none",
    "bang": "fill:#1f77b4;stroke:none",
    "line": "fill:#2ca02c;stroke:none",
}


def svg_points(
    labeled_points: Sequence[tuple],
    dim: int,
    view: str = "z",
    size: int = 640,
    kinds=None,
) -> str:
    """Scatter SVG of labeled points; 3-D data is projected along `view`."""
    if dim == 2:
        ax = (0, 1)
    else:
        if view not in _VIEW_AXES:
            raise ValueError("view must be one of x, y, z")
        ax = _VIEW_AXES[view]
    pts = [(pt[ax[0]], pt[ax[1]], label) for label, pt in labeled_points]
    if not pts:
        body = ""
        lo0 = lo1 = -1.0
        span = 2.0
    else:
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        lo0, hi0 = min(xs), max(xs)
        lo1, hi1 = min(ys), max(ys)
        span = max(hi0 - lo0, hi1 - lo1, 1e-9) * 1.1
        lo0 -= (span - (hi0 - lo0)) / 2
        lo1 -= (span - (hi1 - lo1)) / 2
        kinds = kinds or {}
        elems = []
        for x, y, label in sorted(pts, key=lambda t: (t[2], t[0], t[1])):
            px = (x - lo0) / span * size
            py = size - (y - lo1) / span * size
            style = _KIND_STYLE.get(kinds.get(label, "bang"), _KIND_STYLE["bang"])
            elems.append(
                f'<circle cx="{px:.3f}" cy="{py:.3f}" r="1.6" '
                f'style="{style}"><title>{label}</title></circle>'
            )
        body = "\n".join(elems)
    return (
        f'<?xml version="1.0" encoding="UTF-8"?>\n'
        f"<!-- schema {SCHEMA_VERSION} -->\n"
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">\n'
        f'<rect width="{size}" height="{size}" fill="white"/>\n'
        f"{body}\n</svg>\n"
    )


def sphere_svg(m: Model, patches: Sequence[SpherePatch], view: str = "z") -> str:
    labeled = []
    kinds = {}
    for p in patches:
        kinds[p.label] = p.kind
        for pt in p.samples:
            labeled.append((p.label, pt))
    return svg_points(labeled, m.dim, view=view, kinds=kinds)


def front_svg(m: Model, front: FrontSample, view: str = "z") -> str:
    labeled = list(front.points)
    return svg_points(labeled, m.dim, view=view)
