"""Tracing unit spheres and fronts; writes SVG/JSON next to this script.

Run:  python demos/05_spheres_and_fronts.py
"""

from fractions import Fraction as F
from pathlib import Path

from subfinsler import ModelId, get_model
from subfinsler import export
from subfinsler.synthesis import trace_front, trace_sphere

here = Path(__file__).resolve().parent

for mid, view in ((ModelId.GRUSHIN_LINF, "z"), (ModelId.HEISENBERG_LINF, "y")):
    m = get_model(mid)
    print(f"tracing the unit sphere of {mid.value} ...")
    patches = trace_sphere(m, F(1), sampling=9)
    kinds = sorted({p.kind for p in patches})
    n_samples = sum(len(p.samples) for p in patches)
    print(f"  {len(patches)} polynomial patches (degree <= "
          f"{max(p.degree for p in patches)}), kinds {kinds}, "
          f"{n_samples} verified samples")
    svg = export.sphere_svg(m, patches, view=view)
    out = here / f"sphere-{mid.value}.svg"
    out.write_text(svg, encoding="utf-8")
    print(f"  wrote {out.name}")

    front = trace_front(m, F(1), sampling=9)
    out_json = here / f"front-{mid.value}.json"
    out_json.write_text(export.front_json(m, front), encoding="utf-8")
    print(f"  wrote {out_json.name} ({len(front.points)} front points; the "
          "front is a superset of the sphere)")
