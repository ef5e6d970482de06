"""The minimizing sequence u_eps = delta^alpha * theta_eps * chi and its Rayleigh quotients.

theta_eps switches on in the log-variable xi = ln(delta/eps^2) / ln(1/eps) through a
C-infinity transition; chi is a fixed cutoff that removes a tube of radius r
around the ridge. As eps -> 0 the Hessian quotient decreases toward ((p-1)/p)^p.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .constants import lambda_p, riesz_lower_bound
from .fields import FieldJet, compose_profile
from .geometry import Ball, Domain, RidgeProximity
from .quadrature import QuadratureSpec, QuadResult, coarea_integrate, grid_integrate

DEFAULT_EPS = (0.2, 0.1, 0.05, 0.02, 0.01)
CUTOFF_STEEPNESS = 1.0


def smooth_step(t, steepness: float = 1.0):
    """sigma(t) = 1 / (1 + exp(c (1/t - 1/(1-t)))) and its first two derivatives.

    Equal to 0 for t <= 0 and 1 for t >= 1; c is the steepness.
    """
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    tc = np.where(inside, t, 0.5)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        c = steepness
        phi = c * (1.0 / tc - 1.0 / (1.0 - tc))
        s = expit(-phi)
        psi = c * (1.0 / tc ** 2 + 1.0 / (1.0 - tc) ** 2)
        dpsi = c * (-2.0 / tc ** 3 + 2.0 / (1.0 - tc) ** 3)
        w = s * (1.0 - s)
        s1 = w * psi
        s2 = s1 * (1.0 - 2.0 * s) * psi + w * dpsi
    s1 = np.nan_to_num(s1)
    s2 = np.nan_to_num(s2)
    val = np.where(inside, s, np.where(t >= 1, 1.0, 0.0))
    return val, np.where(inside, s1, 0.0), np.where(inside, s2, 0.0)


def theta_profile(xi):
    """theta(xi) = sigma(4 xi - 1): 0 below 1/4, 1 above 1/2."""
    s0, s1, s2 = smooth_step(4.0 * np.asarray(xi, dtype=float) - 1.0)
    return s0, 4.0 * s1, 16.0 * s2


@dataclass(frozen=True)
class SequenceParams:
    p: float
    eps: float
    r: float

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if not self.r > 0:
            raise ValueError("ridge tube radius must be positive")

    @property
    def alpha(self):
        return (2 * self.p - 1) / self.p + self.eps

    @property
    def log_scale(self):
        return math.log(1.0 / self.eps)

    @property
    def band(self):
        """delta-interval where theta_eps moves from 0 to 1."""
        return self.eps ** 1.75, self.eps ** 1.5


TUBE_FRACTION = 0.12


def default_tube_radius(domain: Domain) -> float:
    # largest round fraction below 1/8 of the ridge-to-boundary distance on a ball
    return TUBE_FRACTION * domain.inradius


def make_params(domain: Domain, p: float, eps: float, r: float | None = None) -> SequenceParams:
    r = default_tube_radius(domain) if r is None else r
    prm = SequenceParams(p, eps, r)
    if isinstance(domain, Ball) and prm.band[1] >= domain.radius - 2 * r:
        raise ValueError("transition band must stay outside the doubled ridge tube")
    return prm


def theta_eps_profile(s, prm: SequenceParams):
    """theta_eps as a function of the level s = delta, with d/ds and d2/ds2."""
    s = np.asarray(s, dtype=float)
    L = prm.log_scale
    pos = s > 0
    sc = np.where(pos, s, 1.0)
    xi = np.log(sc / prm.eps ** 2) / L
    t0, t1, t2 = theta_profile(xi)
    d1 = t1 / (sc * L)
    d2 = t2 / (sc * L) ** 2 - t1 / (sc ** 2 * L)
    return np.where(pos, t0, 0.0), np.where(pos, d1, 0.0), np.where(pos, d2, 0.0)


def ridge_cutoff_jet(domain: Domain, x, r: float, steepness: float = CUTOFF_STEEPNESS):
    """chi = prod_k sigma((d_k - r)/r) over the ridge pieces seen from x.

    A product of smooth factors (instead of sigma of the minimum) keeps chi smooth
    where two ridge pieces are equally near, which happens on polytopes.
    """
    x = np.asarray(x, dtype=float)
    f = domain.ridge_facets(x)
    K, N = f.dist.shape[-1], domain.N
    shape = x.shape[:-1]
    if K == 0:
        return np.ones(shape), np.zeros(shape + (N,)), np.zeros(shape + (N, N))
    c0, c1, c2 = smooth_step((f.dist - r) / r, steepness)
    dg = np.nan_to_num(f.grad)
    dh = np.nan_to_num(f.hess)
    gk = (c1 / r)[..., None] * dg
    hk = ((c2 / r ** 2)[..., None, None] * dg[..., :, None] * dg[..., None, :]
          + (c1 / r)[..., None, None] * dh)
    val = np.prod(c0, axis=-1)
    grad = np.zeros(shape + (N,))
    hess = np.zeros(shape + (N, N))
    for k in range(K):
        others = np.prod(np.delete(c0, k, axis=-1), axis=-1)
        grad += others[..., None] * gk[..., k, :]
        hess += others[..., None, None] * hk[..., k, :, :]
        for l in range(K):
            if l == k:
                continue
            rest = np.prod(np.delete(c0, [k, l], axis=-1), axis=-1)
            hess += rest[..., None, None] * gk[..., k, :, None] * gk[..., l, None, :]
    return val, grad, hess


def _check_admissible(domain, x, prm):
    if np.any(domain.ridge_distance(x) < 0.5 * prm.r):
        raise RidgeProximity("point lies inside half the ridge tube")


def theta_eps_jet(domain: Domain, prm: SequenceParams, x, check: bool = True):
    """Value, gradient and Hessian of theta_eps(delta(x)) * chi(x)."""
    x = np.asarray(x, dtype=float)
    if check:
        _check_admissible(domain, x, prm)
    d, gd, hd, _ = domain._jet(x)
    t0, t1, t2 = theta_eps_profile(d, prm)
    c, cg, ch = ridge_cutoff_jet(domain, x, prm.r)
    j = compose_profile(t0, t1, t2, gd, hd, c, cg, ch)
    return j.u, j.grad, j.hess


def u_eps_profile(s, prm: SequenceParams):
    """G(s) = s^alpha theta_eps(s) and two derivatives."""
    s = np.asarray(s, dtype=float)
    a = prm.alpha
    t0, t1, t2 = theta_eps_profile(s, prm)
    on = t0 > 0
    sc = np.where(on, s, 1.0)
    p0 = sc ** a
    p1 = a * sc ** (a - 1)
    p2 = a * (a - 1) * sc ** (a - 2)
    G = p0 * t0
    G1 = p1 * t0 + p0 * t1
    G2 = p2 * t0 + 2 * p1 * t1 + p0 * t2
    z = np.zeros_like(s)
    return np.where(on, G, z), np.where(on, G1, z), np.where(on, G2, z)


def u_eps_jet(domain: Domain, prm: SequenceParams, x, check: bool = True) -> FieldJet:
    x = np.asarray(x, dtype=float)
    if check:
        _check_admissible(domain, x, prm)
    d, gd, hd, _ = domain._jet(x)
    G0, G1, G2 = u_eps_profile(d, prm)
    c, cg, ch = ridge_cutoff_jet(domain, x, prm.r)
    return compose_profile(G0, G1, G2, gd, hd, c, cg, ch)


@dataclass(frozen=True)
class SequenceField:
    """u_eps packaged as a test field."""

    domain: Domain
    params: SequenceParams
    name: str = "u_eps"

    @property
    def delta_support(self):
        lo = self.params.band[0]
        hi = self.domain.radius - self.params.r if isinstance(self.domain, Ball) else self.domain.inradius
        return (lo, hi)

    @property
    def breakpoints(self):
        lo, hi = self.params.band
        bps = [lo, hi]
        if isinstance(self.domain, Ball):
            bps += [self.domain.radius - 2 * self.params.r]
        return tuple(bps)

    @property
    def ridge_clearance(self):
        return self.params.r

    @property
    def is_delta_radial(self):
        return isinstance(self.domain, Ball)

    def jet(self, x):
        return u_eps_jet(self.domain, self.params, x, check=False)


def _frob(H):
    return np.sqrt(np.sum(H * H, axis=(-2, -1)))


def _quotient_integrands(domain, prm, x, delta):
    j = u_eps_jet(domain, prm, x, check=False)
    p = prm.p
    g = np.linalg.norm(j.grad, axis=-1) ** p
    return np.stack([_frob(j.hess) ** p, np.abs(j.lap) ** p, g / delta ** p])


def sequence_integrals(domain: Domain, prm: SequenceParams,
                       quadrature: QuadratureSpec | None = None) -> QuadResult:
    """Integrals of |Hu|^p, |Lap u|^p and |grad u|^p / delta^p for u = u_eps.

    On a ball u_eps depends on delta only, so the co-area route is exact;
    otherwise the boundary-adapted grid is used with the ridge tube removed.
    """
    fld = SequenceField(domain, prm)
    lo, hi = fld.delta_support
    if isinstance(domain, Ball):
        spec = quadrature or QuadratureSpec(method="coarea", target_rel_error=1e-9, order=12)
        c = domain.c
        e = np.zeros(domain.N)
        e[0] = 1.0

        def f(s):
            x = c + (domain.radius - s)[:, None] * e
            return _quotient_integrands(domain, prm, x, s)

        return coarea_integrate(domain, f, prm.eps ** 2, hi, spec, fld.breakpoints, strict=False)
    spec = quadrature or QuadratureSpec(target_rel_error=1e-6, order=10, max_refinements=2)
    spec = QuadratureSpec(**{**spec.__dict__, "ridge_margin": prm.r})

    def F(x):
        d = domain._delta(x)
        return _quotient_integrands(domain, prm, x, d)

    return grid_integrate(domain, F, spec, delta_range=(lo, None), breakpoints=fld.breakpoints,
                          strict=False)


@dataclass
class QuotientResult:
    value: float
    error: float


def _ratio(num, den, enum, eden):
    q = num / den
    return QuotientResult(q, abs(q) * (enum / abs(num) + eden / abs(den)))


def rayleigh_hessian(domain: Domain, p: float, eps: float, quadrature=None, r=None) -> QuotientResult:
    res = sequence_integrals(domain, make_params(domain, p, eps, r), quadrature)
    v, e = np.asarray(res.value), np.asarray(res.error)
    return _ratio(v[0], v[2], e[0], e[2])


def rayleigh_laplacian(domain: Domain, p: float, eps: float, quadrature=None, r=None) -> QuotientResult:
    res = sequence_integrals(domain, make_params(domain, p, eps, r), quadrature)
    v, e = np.asarray(res.value), np.asarray(res.error)
    return _ratio(v[1], v[2], e[1], e[2])


@dataclass
class SweepRow:
    eps: float
    Q_H: float
    Q_Lap: float
    gap: float
    Q_H_error: float
    Q_Lap_error: float
    decreasing: bool


def sharpness_sweep(domain: Domain, p: float, eps_list=DEFAULT_EPS, quadrature=None,
                    r=None, threads: int | None = None) -> list[SweepRow]:
    eps_list = list(eps_list)
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps list must be strictly decreasing")
    if not eps_list:
        return []
    threads = threads or int(os.environ.get("HRLAB_THREADS", "1"))

    def one(eps):
        res = sequence_integrals(domain, make_params(domain, p, eps, r), quadrature)
        v, e = np.asarray(res.value), np.asarray(res.error)
        return _ratio(v[0], v[2], e[0], e[2]), _ratio(v[1], v[2], e[1], e[2])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, eps_list))
    else:
        results = [one(e) for e in eps_list]
    lam = lambda_p(p)
    rows, prev = [], math.inf
    for eps, (qh, ql) in zip(eps_list, results):
        rows.append(SweepRow(eps, qh.value, ql.value, qh.value - lam, qh.error, ql.error,
                             qh.value < prev))
        prev = qh.value
    return rows


def laplacian_lower_bound(p: float, N: int) -> float:
    """C_{p,N} lambda_p, the provable floor for the Laplacian quotient."""
    return riesz_lower_bound(p, N) * lambda_p(p)
