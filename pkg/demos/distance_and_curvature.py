"""Distance to the boundary, its derivatives, and where it stops being smooth.

Run:  python3 demos/distance_and_curvature.py
"""
import numpy as np

from hrlab.geometry import Annulus, Ball, Box, GeometryError

disc = Ball((0.0, 0.0), 1.0)
x = np.array([[0.5, 0.0], [0.0, -0.9]])
jet = disc.distance_jet(x)
print("unit disc")
print("  delta       ", jet.delta)
print("  |grad delta|", np.linalg.norm(jet.grad, axis=1))
print("  Lap delta   ", jet.lap, " (equals -(N-1)/(R - delta), so the disc is mean convex)")

# The Hessian of delta can be rebuilt from the principal curvatures of the
# nearest boundary point; for a ball and an annulus both routes must agree.
shell = Annulus((0.0, 0.0), 1.0, 2.0)
y = np.array([[1.2, 0.0], [0.0, 1.9]])
diff = np.abs(shell.hessian_via_curvatures(y) - shell.distance_jet(y).hess).max()
print("\nannulus 1 < |x| < 2")
print("  curvatures at the inner rim", shell.curvature(np.array([1.2, 0.0])).principal_curvatures)
print("  curvature route vs direct Hessian, max difference", diff)
print("  mean convex?", shell.mean_convexity().weakly_mean_convex)

# The rectangle's distance function has a ridge: the medial axis. Jets are
# refused close to it, since the Hessian is undefined there.
rect = Box((0.0, 0.0), (2.0, 1.0))
print("\nrectangle [0,2] x [0,1], inradius", rect.inradius)
for pt in ([0.3, 0.2], [1.0, 0.5]):
    try:
        q = np.array([pt])
        j = rect.distance_jet(q)
        print(f"  {pt}: delta {j.delta[0]:.3f}, ridge distance {rect.ridge_distance(q)[0]:.3f}")
    except GeometryError as exc:
        print(f"  {pt}: refused ({exc})")

# Level-set measure |{delta = s}| drives the co-area reduction used by the quadrature.
s = np.array([0.0, 0.1, 0.25, 0.45])
print("\nlevel measure of the rectangle at s =", s, "->", rect.level_measure(s))
