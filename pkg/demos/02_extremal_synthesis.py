"""Synthesizing extremals: bang-bang cycles, singular arcs, switch records.

Run:  python demos/02_extremal_synthesis.py
"""

from fractions import Fraction as F

from subfinsler import (
    ModelId,
    SingularPolicy,
    get_model,
    make_lift,
    schedule_endpoint,
    synthesize_extremal,
)

h = get_model(ModelId.HEISENBERG_LINF)

print("Heisenberg regular bang-bang from phi(0) = (1/2, 1/3, 1)")
lift = make_lift(h, (F(1, 2), F(1, 3), F(1)))
sched, rec = synthesize_extremal(h, (0, 0, 0), lift, F(4))
for arc in sched.arcs:
    print(f"  bang {int(arc.control.u1):+d},{int(arc.control.u2):+d}"
          f"  for {arc.duration}")
print("  switch components:", rec.components, "(alternating)")
print("  internal arc length:", rec.internal_arc_length,
      "= (phi1+phi2)/phi3 =", (F(1, 2) + F(1, 3)) / 1)

print("\nSingular trajectory: u2 pinned at +1, u1 free")
lift = make_lift(h, (F(0), F(1), F(0)))
policy = SingularPolicy(
    free_profile=lambda ctx, rem: [(F(1, 2), F(1)), (F(-1, 2), rem - 1)]
)
sched, rec = synthesize_extremal(h, (0, 0, 0), lift, F(2), policy)
print("  arc kinds:", [a.kind for a in sched.arcs])
print("  endpoint:", schedule_endpoint(h, sched), " (y equals the time)")

print("\nMartinet tangential entry: a singular insert of chosen length")
m1 = get_model(ModelId.MARTINET_L1)
a = F(1, 2)
lift = make_lift(m1, (a * a / 4, -3 * a * a / 4, a, F(1), F(-1)))
policy = SingularPolicy(tangential_length=lambda ctx: F(1, 3))
sched, rec = synthesize_extremal(m1, (0, a, 0), lift, F(3), policy)
print("  arc types:", [str(t) for t in rec.arc_types])
print("  (the bang_singular_overlap arcs ride the plane y = 0)")
