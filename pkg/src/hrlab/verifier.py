"""Evaluate both sides of the Hardy-Rellich type inequalities on closed-form test fields."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from . import constants as K
from .fields import RadialBump, SeparableBump, AffineModulation
from .geometry import Annulus, Ball, Box, Domain, ExteriorBall
from .quadrature import QuadratureSpec, grid_integrate
from .sharpness import SequenceField, make_params

# integrand slots computed in one pass over the quadrature nodes
HESS_P, LAP_P, HARDY, CURV, GRAD_P, U2_D4, U2_D2, U2, HESS_2, LAP_2 = range(10)


class NotApplicable(ValueError):
    """The inequality's hypotheses do not hold for this domain or field."""


@dataclass
class InequalityReport:
    name: str
    domain: str
    field: str
    p: float
    lhs: float
    rhs_terms: list
    quad_error: float
    note: str = ""

    @property
    def rhs(self) -> float:
        return float(sum(v for _, v in self.rhs_terms))

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    @property
    def holds(self) -> bool:
        return self.slack >= -self.quad_error

    def as_dict(self):
        d = asdict(self)
        d["rhs_terms"] = [list(t) for t in self.rhs_terms]
        d.update(rhs=self.rhs, slack=self.slack, holds=self.holds)
        return d


@dataclass
class IntegralTable:
    value: np.ndarray
    error: np.ndarray
    converged: bool = True


def _frob(H):
    return np.sqrt(np.sum(H * H, axis=(-2, -1)))


def verifier_spec(domain: Domain) -> QuadratureSpec:
    # test fields are supported away from the boundary, so shallow grading is enough
    if domain.N >= 3:
        return QuadratureSpec(layers=8, order=10, transverse_panels=2, max_refinements=2,
                              target_rel_error=1e-9)
    return QuadratureSpec(layers=8, order=10, transverse_panels=4, max_refinements=3,
                          target_rel_error=1e-10)


@lru_cache(maxsize=256)
def integrals(domain: Domain, fld, p: float, spec: QuadratureSpec | None = None) -> IntegralTable:
    spec = spec or verifier_spec(domain)
    if fld.ridge_clearance:
        spec = QuadratureSpec(**{**spec.__dict__, "ridge_margin": fld.ridge_clearance})

    def F(x):
        d, _, _, lap_d = domain._jet(x)
        j = fld.jet(x)
        g = np.linalg.norm(j.grad, axis=-1)
        h = _frob(j.hess)
        gp = g ** p
        u2 = j.u ** 2
        return np.stack([h ** p, np.abs(j.lap) ** p, gp / d ** p, gp * d ** (1 - p) * (-lap_d),
                         gp, u2 / d ** 4, u2 / d ** 2, u2, h ** 2, j.lap ** 2])

    lo, hi = fld.delta_support
    res = grid_integrate(domain, F, spec, delta_range=(lo, hi), breakpoints=fld.breakpoints,
                         strict=False)
    return IntegralTable(np.asarray(res.value), np.asarray(res.error), res.converged)


def _report(name, domain, fld, p, tab: IntegralTable, lhs_slot, terms, note=""):
    rhs_terms = [(label, coef * float(tab.value[slot])) for label, coef, slot in terms]
    err = float(tab.error[lhs_slot]) + sum(abs(c) * float(tab.error[s]) for _, c, s in terms)
    return InequalityReport(name, type(domain).__name__, getattr(fld, "name", "") or repr(fld),
                            float(p), float(tab.value[lhs_slot]), rhs_terms, err, note)


def _mean_convex_H0(domain):
    mc = domain.mean_convexity()
    if not mc.weakly_mean_convex:
        raise NotApplicable("domain is not weakly mean convex")
    return mc.H0


def _require_bounded(domain):
    if not domain.bounded:
        raise NotApplicable("needs a bounded domain")


def _require_superharmonic_distance(domain):
    if not isinstance(domain, (Ball, Box)):
        raise NotApplicable("needs -Lap(delta) >= 0 away from the ridge")


def verify_hessian(domain: Domain, fld, p: float, spec=None) -> InequalityReport:
    """Hessian inequality with the curvature remainder; valid on any bounded C^2 domain."""
    _require_bounded(domain)
    tab = integrals(domain, fld, p, spec)
    lam = K.lambda_p(p)
    return _report("hessian", domain, fld, p, tab, HESS_P,
                   [("lambda_p*hardy", lam, HARDY),
                    ("curvature", ((p - 1) / p) ** (p - 1), CURV)])


def verify_hessian_convex(domain: Domain, fld, p: float, spec=None) -> InequalityReport:
    _require_bounded(domain)
    _require_superharmonic_distance(domain)
    tab = integrals(domain, fld, p, spec)
    return _report("hessian_convex", domain, fld, p, tab, HESS_P,
                   [("lambda_p*hardy", K.lambda_p(p), HARDY)])


def verify_laplacian(domain: Domain, fld, p: float, spec=None) -> InequalityReport:
    """Laplacian version.

    For p != 2 the unknown Calderon-Zygmund constant is replaced by its proven
    lower bound C_{p,N}, so the checked inequality is implied by the sharp one.
    """
    _require_bounded(domain)
    tab = integrals(domain, fld, p, spec)
    if p == 2:
        return _report("laplacian", domain, fld, p, tab, LAP_P,
                       [("hardy/4", 0.25, HARDY), ("curvature/2", 0.5, CURV)])
    c = K.riesz_lower_bound(p, domain.N)
    return _report("laplacian", domain, fld, p, tab, LAP_P,
                   [("C_pN*lambda_p*hardy", c * K.lambda_p(p), HARDY),
                    ("C_pN*curvature", c * ((p - 1) / p) ** (p - 1), CURV)],
                   note="C_{p,N} used in place of the Calderon-Zygmund constant")


def verify_mean_convex(domain: Domain, fld, p: float, spec=None, form: str = "hessian"):
    _require_bounded(domain)
    H0 = _mean_convex_H0(domain)
    tab = integrals(domain, fld, p, spec)
    N = domain.N
    if form == "hessian":
        return _report("mean_convex_hessian", domain, fld, p, tab, HESS_P,
                       [("lambda_p*hardy", K.lambda_p(p), HARDY),
                        ("mean_curvature", K.mean_convex_remainder_coeff(p, N, H0), GRAD_P)])
    if form != "laplacian":
        raise ValueError("form must be 'hessian' or 'laplacian'")
    if p == 2:
        return _report("mean_convex_laplacian", domain, fld, p, tab, LAP_P,
                       [("hardy/4", 0.25, HARDY), ("mean_curvature", 2 * H0 ** 2 / N, GRAD_P)])
    c = K.riesz_lower_bound(p, N)
    return _report("mean_convex_laplacian", domain, fld, p, tab, LAP_P,
                   [("C_pN*lambda_p*hardy", c * K.lambda_p(p), HARDY),
                    ("C_pN*mean_curvature", c * K.mean_convex_remainder_coeff(p, N, H0), GRAD_P)],
                   note="C_{p,N} used in place of the Calderon-Zygmund constant")


def _require_radial(fld):
    if not getattr(fld, "is_delta_radial", False):
        raise NotApplicable("needs a field that depends on delta only")


def verify_radial(domain: Domain, fld, p: float, spec=None, reduced: bool = False):
    """Laplacian inequality for u = g(delta); ``reduced`` drops the Lap(delta) term,
    which is allowed where Lap(delta) >= 0 (exteriors of convex sets)."""
    _require_radial(fld)
    tab = integrals(domain, fld, p, spec)
    lam = K.lambda_p(p)
    if reduced:
        if not isinstance(domain, ExteriorBall):
            raise NotApplicable("reduced form needs Lap(delta) >= 0")
        return _report("radial_reduced", domain, fld, p, tab, LAP_P,
                       [("lambda_p*hardy", lam, HARDY)])
    # p lambda_p int |grad u|^p delta^{1-p} Lap(delta) = -p lambda_p * CURV
    return _report("radial", domain, fld, p, tab, LAP_P,
                   [("lambda_p*hardy", lam, HARDY), ("p*lambda_p*lap_delta", -p * lam, CURV)])


def verify_hrr_p2(domain: Domain, fld, spec=None) -> InequalityReport:
    """Second-order inequality with the Bessel-zero remainders, p = 2 on convex domains."""
    if not isinstance(domain, (Ball, Box)):
        raise NotApplicable("needs a bounded convex domain")
    tab = integrals(domain, fld, 2.0, spec)
    lam0 = K.bessel_lambda0()
    d0 = domain.inradius
    return _report("hrr", domain, fld, 2.0, tab, LAP_2,
                   [("9/16*u^2/delta^4", 9 / 16, U2_D4),
                    ("lambda0^2/(4 delta0^2)*u^2/delta^2", lam0 ** 2 / (4 * d0 ** 2), U2_D2),
                    ("lambda0^4/delta0^4*u^2", lam0 ** 4 / d0 ** 4, U2)])


@dataclass
class IdentityReport:
    domain: str
    field: str
    laplacian_sq: float
    hessian_sq: float
    quad_error: float

    @property
    def rel_diff(self):
        return abs(self.laplacian_sq - self.hessian_sq) / max(abs(self.hessian_sq), 1e-300)


def verify_p2_identity(domain: Domain, fld, spec=None) -> IdentityReport:
    """int |Lap u|^2 = int |Hu|^2: two integrations by parts for compactly supported u."""
    tab = integrals(domain, fld, 2.0, spec)
    return IdentityReport(type(domain).__name__, fld.name, float(tab.value[LAP_2]),
                          float(tab.value[HESS_2]), float(tab.error[LAP_2] + tab.error[HESS_2]))


INEQUALITIES = {
    "hessian": verify_hessian,
    "hessian_convex": verify_hessian_convex,
    "laplacian": verify_laplacian,
    "mean_convex_hessian": lambda d, u, p, spec=None: verify_mean_convex(d, u, p, spec, "hessian"),
    "mean_convex_laplacian": lambda d, u, p, spec=None: verify_mean_convex(d, u, p, spec, "laplacian"),
    "radial": verify_radial,
    "radial_reduced": lambda d, u, p, spec=None: verify_radial(d, u, p, spec, reduced=True),
    "hrr": lambda d, u, p, spec=None: verify_hrr_p2(d, u, spec),
}


def applicable(name: str, domain: Domain, fld, p: float) -> bool:
    """Which inequalities each domain family is checked against."""
    radial = getattr(fld, "is_delta_radial", False)
    if isinstance(domain, ExteriorBall):
        return name in ("radial", "radial_reduced") and radial
    if isinstance(domain, Annulus):
        return name == "hessian"
    if name == "radial":
        return radial
    if name == "radial_reduced":
        return False
    if name == "hrr":
        return p == 2
    return True


def verify_all(domain: Domain, fld, p: float, spec=None) -> list[InequalityReport]:
    return [fn(domain, fld, p, spec) for name, fn in INEQUALITIES.items()
            if applicable(name, domain, fld, p)]


def default_fields(domain: Domain, p: float | None = None, include_sequence: bool = True):
    """The shipped test fields for a domain (the sequence field needs p)."""
    N = domain.N
    if isinstance(domain, Ball):
        R = domain.radius
        c = domain.c
        tilt = np.zeros(N)
        tilt[0] = 0.4 / R
        tilt2 = np.zeros(N)
        tilt2[-1] = -0.3 / R
        out = [RadialBump(domain, 0.1 * R, 0.6 * R, name="radial_wide"),
               RadialBump(domain, 0.02 * R, 0.2 * R, power=4, name="radial_near_boundary"),
               RadialBump(domain, 0.3 * R, 0.9 * R, name="radial_deep"),
               RadialBump(domain, 0.05 * R, 0.5 * R,
                          modulation=AffineModulation(tuple(tilt), tuple(c)), name="tilted_x"),
               RadialBump(domain, 0.15 * R, 0.7 * R,
                          modulation=AffineModulation(tuple(tilt + tilt2), tuple(c)),
                          name="tilted_xy")]
    elif isinstance(domain, Box):
        lo, L = np.array(domain.lo), domain.lengths
        if N != 2:
            raise NotImplementedError("shipped box fields are two-dimensional")

        def rect(a0, b0, a1, b1):
            return ((lo[0] + a0 * L[0], lo[0] + b0 * L[0]), (lo[1] + a1 * L[1], lo[1] + b1 * L[1]))
        # fractions chosen for a 2:1 box; every rectangle sits in a single face region
        out = [SeparableBump(domain, rect(0.3, 0.7, 0.05, 0.35), name="bottom_face"),
               SeparableBump(domain, rect(0.35, 0.75, 0.6, 0.95), name="top_face"),
               SeparableBump(domain, rect(0.015, 0.1, 0.3, 0.7), name="left_face"),
               SeparableBump(domain, rect(0.88, 0.99, 0.25, 0.65), power=4, name="right_face"),
               SeparableBump(domain, rect(0.4, 0.6, 0.01, 0.2), name="bottom_shallow")]
    elif isinstance(domain, Annulus):
        w = domain.inradius
        out = [RadialBump(domain, 0.1 * w, 0.8 * w, name="shell_wide"),
               RadialBump(domain, 0.05 * w, 0.4 * w, power=4, name="shell_thin"),
               RadialBump(domain, 0.2 * w, 0.95 * w, name="shell_deep")]
    elif isinstance(domain, ExteriorBall):
        R = domain.radius
        out = [RadialBump(domain, 0.2 * R, 2.0 * R, name="outer_wide"),
               RadialBump(domain, 0.05 * R, 0.5 * R, name="outer_near"),
               RadialBump(domain, 0.5 * R, 3.0 * R, power=4, name="outer_far")]
    else:
        raise TypeError(type(domain).__name__)
    if include_sequence and p is not None and isinstance(domain, (Ball, Box)):
        out.append(SequenceField(domain, make_params(domain, p, 0.1), name="u_eps(0.1)"))
    return out
