"""Tour of the model catalog: frames, brackets, and exact bang flows.

Run:  python demos/01_models_and_flows.py
"""

from fractions import Fraction as F

from subfinsler import all_models, bang_flow, get_model, ModelId
from subfinsler.vecfield import bracket, rk_integrate

print("The five square-norm structures")
print("=" * 60)
for m in all_models():
    print(f"\n{m.id.value}  (dim {m.dim}, optimal bang arcs <= {m.arc_bound})")
    print(f"  frame:    {m.frame[0]}  |  {m.frame[1]}")
    print(f"  brackets: {', '.join(str(f) for f in m.aux_fields)}")
    for rel in m.structural_relations:
        print(f"  relation: {rel.description}")

print("\nBracket check: the Heisenberg frame generates d/dz")
h = get_model(ModelId.HEISENBERG_LINF)
print("  [X1, X2] =", bracket(*h.frame))

print("\nExact bang flows (polynomial in t, no integration error)")
m2 = get_model(ModelId.MARTINET_LINF)
end = bang_flow(m2, (0, 0, 0), (1, 1), F(1))
print("  martinet-linf: origin, u=(1,1), t=1  ->", end)

print("\nCross-check against the RK4 oracle")
field = m2.control_field(__import__("subfinsler").Control(F(1), F(1)))
approx = rk_integrate(field, (0.0, 0.0, 0.0), 1.0, 1000)
err = max(abs(float(a) - b) for a, b in zip(end, approx))
print(f"  closed form vs rk_integrate(1000 steps): max error {err:.2e}")
