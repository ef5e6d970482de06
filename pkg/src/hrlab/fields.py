"""Closed-form test functions with analytic first and second derivatives.

A field is anything with ``jet(x) -> FieldJet`` on arrays of points of shape
(M, N), plus the delta-interval containing its support (used to restrict
quadrature) and optional delta-breakpoints where it is not smooth.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Box, Domain


@dataclass(frozen=True)
class FieldJet:
    u: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    lap: np.ndarray


def zero_jet(shape, N):
    return FieldJet(np.zeros(shape), np.zeros(shape + (N,)), np.zeros(shape + (N, N)),
                    np.zeros(shape))


def compose_profile(G, G1, G2, grad_d, hess_d, h=None, h_grad=None, h_hess=None) -> FieldJet:
    """Jet of u = G(delta) * h(x) from the profile derivatives and the delta jet.

    grad u = h G' grad(d) + G grad(h)
    hess u = h (G'' grad(d) grad(d)^T + G' hess(d)) + G' (grad(d) grad(h)^T + grad(h) grad(d)^T) + G hess(h)
    """
    outer = grad_d[..., :, None] * grad_d[..., None, :]
    base_grad = G1[..., None] * grad_d
    base_hess = G2[..., None, None] * outer + G1[..., None, None] * hess_d
    if h is None:
        u, g, H = G, base_grad, base_hess
    else:
        cross = grad_d[..., :, None] * h_grad[..., None, :]
        cross = cross + np.swapaxes(cross, -1, -2)
        u = G * h
        g = h[..., None] * base_grad + G[..., None] * h_grad
        H = (h[..., None, None] * base_hess + G1[..., None, None] * cross
             + G[..., None, None] * h_hess)
    return FieldJet(u, g, H, np.trace(H, axis1=-2, axis2=-1))


def poly_bump(s, a, b, k):
    """((s-a)(b-s))^k normalised to peak 1 on [a, b], zero outside, with two derivatives."""
    s = np.asarray(s, dtype=float)
    inside = (s > a) & (s < b)
    scale = (0.5 * (b - a)) ** (2 * k)
    P = np.where(inside, (s - a) * (b - s), 0.0)
    dP = a + b - 2.0 * s
    g0 = P ** k / scale
    g1 = k * P ** (k - 1) * dP / scale
    g2 = (k * (k - 1) * P ** (k - 2) * dP ** 2 - 2.0 * k * P ** (k - 1)) / scale
    z = np.zeros_like(s)
    return np.where(inside, g0, z), np.where(inside, g1, z), np.where(inside, g2, z)


@dataclass(frozen=True)
class AffineModulation:
    """h(x) = 1 + slope . (x - origin)."""

    slope: tuple
    origin: tuple

    def __call__(self, x):
        sl = np.array(self.slope)
        h = 1.0 + (x - np.array(self.origin)) @ sl
        g = np.broadcast_to(sl, x.shape)
        H = np.zeros(x.shape + (x.shape[-1],))
        return h, g, H


@dataclass(frozen=True)
class RadialBump:
    """u = g(delta) (optionally times an affine modulation), g a polynomial bump on [a, b]."""

    domain: Domain
    a: float
    b: float
    power: int = 6
    modulation: AffineModulation | None = None
    name: str = ""

    def __post_init__(self):
        if isinstance(self.domain, Box):
            raise ValueError("level sets of delta meet the ridge of a box; use SeparableBump")
        if not 0 < self.a < self.b:
            raise ValueError("need 0 < a < b")
        if self.b >= self.domain.inradius:
            raise ValueError("bump support must stay below the inradius (away from the ridge)")
        if self.power < 3:
            raise ValueError("power >= 3 keeps the field twice continuously differentiable")

    @property
    def delta_support(self):
        return (self.a, self.b)

    @property
    def breakpoints(self):
        return (self.a, self.b)

    @property
    def ridge_clearance(self):
        return 0.0

    @property
    def is_delta_radial(self):
        return self.modulation is None

    def profile(self, s):
        return poly_bump(s, self.a, self.b, self.power)

    def jet(self, x) -> FieldJet:
        x = np.asarray(x, dtype=float)
        d, gd, hd, _ = self.domain._jet(x)
        G0, G1, G2 = self.profile(d)
        if self.modulation is None:
            return compose_profile(G0, G1, G2, gd, hd)
        h, hg, hh = self.modulation(x)
        return compose_profile(G0, G1, G2, gd, hd, h, hg, hh)


@dataclass(frozen=True)
class SeparableBump:
    """u(x) = prod_i b_i(x_i) on a box, every b_i a polynomial bump on its own interval.

    The support rectangle must sit inside the region served by a single face and
    away from the medial axis.
    """

    domain: Box
    intervals: tuple
    power: int = 6
    name: str = ""
    _face: int = field(default=-1, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.domain, Box):
            raise ValueError("separable bumps are defined on boxes")
        object.__setattr__(self, "intervals", tuple(tuple(map(float, iv)) for iv in self.intervals))
        iv = np.array(self.intervals, dtype=float)
        if iv.shape != (self.domain.N, 2) or np.any(iv[:, 0] >= iv[:, 1]):
            raise ValueError("need one increasing interval per coordinate")
        corners = np.array(np.meshgrid(*iv, indexing="ij")).reshape(self.domain.N, -1).T
        if not np.all(self.domain.contains(corners)):
            raise ValueError("support must lie inside the box")
        faces = self.domain.nearest_face(corners)
        if np.any(faces != faces[0]) or np.any(self.domain.ridge_distance(corners) <= 0):
            raise ValueError("support must lie in one face region, away from the ridge")
        if np.any(self.domain.distance(corners) <= 0):
            raise ValueError("support must stay away from the boundary")
        object.__setattr__(self, "_face", int(faces[0]))

    @property
    def delta_support(self):
        iv = np.array(self.intervals)
        axis, side = divmod(self._face, 2)
        lo, hi = self.domain.lo[axis], self.domain.hi[axis]
        ends = iv[axis] - lo if side == 0 else hi - iv[axis]
        return (float(ends.min()), float(ends.max()))

    @property
    def breakpoints(self):
        return self.delta_support

    @property
    def ridge_clearance(self):
        return 0.0

    is_delta_radial = False

    def jet(self, x) -> FieldJet:
        x = np.asarray(x, dtype=float)
        N = self.domain.N
        vals = [poly_bump(x[..., i], a, b, self.power) for i, (a, b) in enumerate(self.intervals)]
        b0 = np.stack([v[0] for v in vals], axis=-1)
        b1 = np.stack([v[1] for v in vals], axis=-1)
        b2 = np.stack([v[2] for v in vals], axis=-1)

        def prod_except(skip):
            out = np.ones(x.shape[:-1])
            for j in range(N):
                if j not in skip:
                    out = out * b0[..., j]
            return out

        u = prod_except(())
        grad = np.stack([b1[..., i] * prod_except((i,)) for i in range(N)], axis=-1)
        hess = np.empty(x.shape[:-1] + (N, N))
        for i in range(N):
            for j in range(N):
                if i == j:
                    hess[..., i, i] = b2[..., i] * prod_except((i,))
                else:
                    hess[..., i, j] = b1[..., i] * b1[..., j] * prod_except((i, j))
        return FieldJet(u, grad, hess, np.trace(hess, axis1=-2, axis2=-1))


@dataclass(frozen=True)
class ZeroField:
    domain: Domain
    name: str = "zero"

    @property
    def delta_support(self):
        top = self.domain.inradius
        return (0.5, 1.0) if not np.isfinite(top) else (0.25 * top, 0.5 * top)

    breakpoints = ()
    ridge_clearance = 0.0
    is_delta_radial = True

    def jet(self, x):
        x = np.asarray(x, dtype=float)
        return zero_jet(x.shape[:-1], x.shape[-1])
