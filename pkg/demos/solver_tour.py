"""Radial solutions of the p-biharmonic problem with a Hardy term on the unit ball.

Three regimes, three outcomes:
  q < p         the energy is bounded below and a negative minimum exists
  p < q < p**   a mountain-pass critical point with positive energy
  q > p**       only the trivial solution; non-trivial candidates are rejected

Run:  python3 demos/solver_tour.py
"""
from hrlab.solver import (ProblemSpec, RadialMesh, direct_minimize, mountain_pass,
                          mountain_pass_lower_bound, nonexistence_probe)


def show(title, cp):
    poh = cp.pohozaev
    print(f"{title}\n  kind {cp.kind}, energy {cp.energy:.6g}, residual {cp.residual:.1e}, "
          f"u(0) = {cp.field.values[0]:.4g}")
    print(f"  Pohozaev lhs {poh.lhs:.6g}  rhs {poh.rhs:.6g}  relative imbalance {poh.relative_imbalance:.1e}")


spec = ProblemSpec(3, 2.5, 1.5, -1.0)
for M in (200, 400, 800):
    show(f"sublinear N=3 p=2.5 q=1.5 lambda=-1, {M} nodes", direct_minimize(spec, RadialMesh(3, nodes=M)))

spec = ProblemSpec(5, 2.0, 3.0, 0.0)
mesh = RadialMesh(5, nodes=300)
cp = mountain_pass(spec, mesh)
show("\nsuperlinear N=5 p=2 q=3 lambda=0 (critical exponent 10)", cp)
print(f"  positive lower bound from the Sobolev ratio: {mountain_pass_lower_bound(spec, mesh):.6g}")
print(f"  Morse index {cp.info['morse_index']}, path endpoint energy {cp.info['endpoint_energy']:.3g}")

cp = nonexistence_probe(ProblemSpec(5, 2.0, 12.0, -0.1), RadialMesh(5, nodes=200))
show("\nsupercritical N=5 p=2 q=12 lambda=-0.1", cp)
for cand in cp.info["rejected_candidates"]:
    print("  rejected:", cand["outcome"])
