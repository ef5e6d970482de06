"""How close can a test function get to the best Hessian-Hardy constant?

The quotient Q_H(eps) = int |Hu|^p / int |grad u|^p delta^-p is evaluated for the
concentrating family u_eps on the unit disc. It stays above lambda_p and creeps
towards it only logarithmically, so the gap shrinks slowly as eps decreases.
Afterwards every applicable inequality is checked on the shipped test fields.

Run:  python3 demos/sharpness_and_inequalities.py
"""
from hrlab.constants import lambda_p
from hrlab.geometry import Ball
from hrlab.sharpness import sharpness_sweep
from hrlab.verifier import default_fields, verify_all

disc = Ball((0.0, 0.0), 1.0)

for p in (1.5, 2.0):
    lam = lambda_p(p)
    print(f"p = {p}: lambda_p = {lam:.6f}")
    print("     eps        Q_H      gap")
    for row in sharpness_sweep(disc, p, (0.2, 0.1, 0.05, 0.02)):
        print(f"  {row.eps:6.3f}  {row.Q_H:9.4f}  {row.gap:7.4f}")
    print()

print("inequality checks on the disc, p = 2 (slack = lhs - rhs, must be >= -quad_error)")
for fld in default_fields(disc, 2.0, include_sequence=False):
    for rep in verify_all(disc, fld, 2.0):
        flag = "ok " if rep.holds else "BAD"
        print(f"  {flag} {rep.name:22s} {rep.field:22s} slack {rep.slack:12.5g}")
