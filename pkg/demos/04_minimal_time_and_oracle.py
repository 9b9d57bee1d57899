"""Minimal time to a target, validated by the brute-force oracle.

Run:  python demos/04_minimal_time_and_oracle.py
"""

from fractions import Fraction as F

from subfinsler import ModelId, get_model
from subfinsler.oracle import GridConfig, estimate, propagate
from subfinsler.synthesis import minimal_time

h = get_model(ModelId.HEISENBERG_LINF)

targets = [(1, 0, 0), (0, 1, 0), (0, 0, F(1, 8)), (F(1, 2), F(1, 2), F(1, 10))]
print("Synthesized minimal times (Heisenberg)")
for tgt in targets:
    res = minimal_time(h, (0, 0, 0), tgt)
    print(f"  {tuple(float(c) for c in tgt)} -> {float(res.time):.4f}"
          f"  via {res.certificate['family']}")

print("\nIndependent oracle brackets (grid propagation + enumeration)")
cfg = GridConfig(
    bounds=((-1.3, 1.3), (-1.3, 1.3), (-0.8, 0.8)),
    dx=0.02, dt=0.02, horizon=1.3,
)
grid = propagate(h, (0, 0, 0), cfg)
for tgt in [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 0.125)]:
    est = estimate(h, (0, 0, 0), tgt, cfg, grid=grid, max_arcs=5, delta=0.02)
    print(f"  {tgt} -> [{est.lower_bound:.3f}, {est.upper_bound:.3f}]")
print("\nBoth agree that the unit-coordinate targets sit at time ~1; the")
print("vertical target (0,0,1/8) sits at ~1 as well (a closed square of")
print("side 1/4 encloses exactly that area; the bracket is looser there")
print("because grid propagation resolves the bracket direction coarsely).")
