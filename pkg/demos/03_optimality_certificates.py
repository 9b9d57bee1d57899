"""Second-order non-optimality certificates, numeric and symbolic.

Run:  python demos/03_optimality_certificates.py
"""

from fractions import Fraction as F

from subfinsler import (
    ControlSchedule,
    ModelId,
    assemble_report,
    bang_arc,
    check_unique_lift,
    fit_extremal_data,
    get_model,
)
from subfinsler.pmp import ExtremalLift
from subfinsler.vecfield import Poly

print("A 6-arc Heisenberg bang-bang cycle is never optimal")
h = get_model(ModelId.HEISENBERG_LINF)
controls = [(-1, -1), (-1, 1), (1, 1), (1, -1), (-1, -1), (-1, 1)]
sched, _ = fit_extremal_data(h, controls, [F(1)] * 6)
unique, lift = check_unique_lift(h, sched)
rep = assemble_report(h, sched, lift, 3, unique)
print("  unique lift (phi3 normalized):", lift.phi)
print("  restricted form:", rep.restricted_matrix)
print("  verdict:", rep.verdict, " witness:", rep.witness.coords,
      " Q value:", rep.witness.value)

print("\nThe same machinery with *symbolic* durations (Martinet, type NI)")
m = get_model(ModelId.MARTINET_L1)
NV = 5
t1, t2 = Poly.var(3, NV), Poly.var(4, NV)
sched = ControlSchedule(
    model=m.id,
    start=(F(0), F(0), F(0)),
    arcs=tuple(
        bang_arc(u1, u2, d)
        for (u1, u2), d in zip(
            [(1, -1), (1, 1), (-1, 1), (1, 1), (1, -1)],
            [t2 * F(1, 2), t1, t2, t1, t2 * F(1, 2)],
        )
    ),
)
lift = ExtremalLift(
    phi=(t1 * t2 - t2 * t2 * F(1, 4), -(t2 * t2 * F(1, 4)), Poly(NV),
         Poly.const(1, NV), Poly.const(-1, NV)),
    lambda0=t1 * t2,
)
rep = assemble_report(m, sched, lift, 2, True, validate=False)
print("  index space W basis:", rep.W_basis)
print("  restricted form (rows):")
for row in rep.restricted_matrix:
    print("   ", [str(x) for x in row])
print("  i.e. Q = 8*t1*a0^2 + 8*t2*a0*a1: positive at (1, 0)")
