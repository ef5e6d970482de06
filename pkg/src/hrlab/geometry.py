"""Exact distance-to-boundary geometry for a small family of analytic domains.

Every domain exposes the distance ``delta`` to its boundary together with its
first and second derivatives, the nearest boundary point, principal curvature
data at that point and a description of the ridge (the closure of the set of
points with more than one nearest boundary point).

Principal curvatures are stored with respect to the interior normal, so that a
sphere of radius R has curvatures -1/R and the Hessian of delta reads

    hess = sum_l kappa_l / (1 + delta * kappa_l) * v_l v_l^T.

``mean_convexity`` reports H with the opposite sign (convex => H >= 0).

All per-point methods accept arrays of shape (..., N) and broadcast.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class GeometryError(ValueError):
    pass


class OutsideDomain(GeometryError):
    pass


class RidgeProximity(GeometryError):
    pass


class NonSmoothPoint(GeometryError):
    pass


class _Multiple:
    """Sentinel returned by ``near_point`` on the skeleton."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "MULTIPLE"


MULTIPLE = _Multiple()

TIE_TOL = 1e-12


def sphere_area(N: int) -> float:
    """(N-1)-dimensional measure of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


def orthonormal_complement(n: np.ndarray) -> np.ndarray:
    """Rows form an orthonormal basis of the hyperplane orthogonal to unit n."""
    n = np.asarray(n, dtype=float)
    N = n.size
    e = np.zeros(N)
    k = int(np.argmax(np.abs(n)))
    e[k] = 1.0
    # Householder reflection sending e_k to n (up to sign)
    sign = 1.0 if n[k] >= 0 else -1.0
    v = n + sign * e
    v /= np.linalg.norm(v)
    H = np.eye(N) - 2.0 * np.outer(v, v)
    rows = [H[:, j] for j in range(N) if j != k]
    return np.array(rows)


@dataclass(frozen=True)
class DistanceJet:
    delta: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    lap: np.ndarray


@dataclass(frozen=True)
class CurvatureData:
    near_point: np.ndarray
    tangent_frame: np.ndarray  # shape (N-1, N)
    principal_curvatures: np.ndarray
    mean_curvature: float


@dataclass(frozen=True)
class MeanConvexity:
    H0: float
    weakly_mean_convex: bool


@dataclass(frozen=True)
class RidgeFacets:
    """Distances to the pieces of ridge that bound the chart containing x.

    ``dist`` has shape (..., K); ``grad`` (..., K, N); ``hess`` (..., K, N, N).
    The ridge distance is the minimum over the last axis of ``dist``.
    """

    dist: np.ndarray
    grad: np.ndarray
    hess: np.ndarray


def _as_points(x, N):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != N:
        raise ValueError(f"expected points with last dimension {N}, got shape {x.shape}")
    return x


def _radial_parts(x, center):
    y = x - center
    r = np.linalg.norm(y, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        xhat = y / r[..., None]
    return y, r, xhat


def _tangent_projector(xhat):
    N = xhat.shape[-1]
    return np.eye(N) - xhat[..., :, None] * xhat[..., None, :]


class Domain:
    """Common interface; subclasses implement the closed forms."""

    N: int
    bounded = True

    @property
    def inradius(self) -> float:
        raise NotImplementedError

    def contains(self, x, tol: float = 1e-13):
        raise NotImplementedError

    def _delta(self, x):
        raise NotImplementedError

    def _jet(self, x):
        """Unchecked jet: (delta, grad, hess, lap), arrays."""
        raise NotImplementedError

    def ridge_facets(self, x) -> RidgeFacets:
        raise NotImplementedError

    def _check_inside(self, x):
        if not np.all(self.contains(x)):
            raise OutsideDomain(f"point(s) outside the closed domain {self!r}")

    # public per-point API

    def distance(self, x):
        x = _as_points(x, self.N)
        self._check_inside(x)
        return self._delta(x)

    def ridge_distance(self, x):
        x = _as_points(x, self.N)
        f = self.ridge_facets(x)
        if f.dist.shape[-1] == 0:
            return np.full(x.shape[:-1], np.inf)[()]
        return np.min(f.dist, axis=-1)

    def distance_jet(self, x, ridge_margin: float | None = None) -> DistanceJet:
        x = _as_points(x, self.N)
        self._check_inside(x)
        if ridge_margin is None:
            ridge_margin = default_ridge_margin(self)
        self._check_smooth(x)
        if np.any(self.ridge_distance(x) <= ridge_margin):
            raise RidgeProximity(
                f"ridge distance must exceed ridge_margin={ridge_margin:g}")
        d, g, h, lap = self._jet(x)
        return DistanceJet(d, g, h, lap)

    def _check_smooth(self, x):
        pass

    def near_point(self, x):
        raise NotImplementedError

    def curvature(self, x) -> CurvatureData:
        raise NotImplementedError

    def hessian_via_curvatures(self, x) -> np.ndarray:
        """Hessian of delta assembled from principal curvature data at one point."""
        x = _as_points(x, self.N)
        if x.ndim != 1:
            return np.array([self.hessian_via_curvatures(xi) for xi in x.reshape(-1, self.N)]
                            ).reshape(x.shape + (self.N,))
        jet = self.distance_jet(x, ridge_margin=0.0)
        c = self.curvature(x)
        H = np.zeros((self.N, self.N))
        for k, v in zip(c.principal_curvatures, c.tangent_frame):
            H += k / (1.0 + jet.delta * k) * np.outer(v, v)
        return H

    def level_measure(self, s):
        raise NotImplementedError

    def mean_convexity(self) -> MeanConvexity:
        raise NotImplementedError


@dataclass(frozen=True, repr=False)
class Ball(Domain):
    center: tuple
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.radius <= 0:
            raise GeometryError("ball radius must be positive")
        if len(self.center) < 2:
            raise GeometryError("dimension must be at least 2")

    def __repr__(self):
        return f"Ball(center={self.center}, radius={self.radius})"

    @property
    def N(self):
        return len(self.center)

    @property
    def c(self):
        return np.array(self.center)

    @property
    def inradius(self):
        return float(self.radius)

    def contains(self, x, tol=1e-13):
        r = np.linalg.norm(np.asarray(x) - self.c, axis=-1)
        return r <= self.radius * (1 + tol)

    def _delta(self, x):
        return self.radius - np.linalg.norm(x - self.c, axis=-1)

    def _jet(self, x):
        _, r, xhat = _radial_parts(x, self.c)
        P = _tangent_projector(xhat)
        return (self.radius - r, -xhat, -P / r[..., None, None], -(self.N - 1) / r)

    def ridge_facets(self, x):
        _, r, xhat = _radial_parts(_as_points(x, self.N), self.c)
        P = _tangent_projector(xhat)
        return RidgeFacets(r[..., None], xhat[..., None, :], (P / r[..., None, None])[..., None, :, :])

    def near_point(self, x):
        x = _as_points(x, self.N)
        self._check_inside(x)
        y, r, xhat = _radial_parts(x, self.c)
        if x.ndim == 1:
            return MULTIPLE if r == 0 else self.c + self.radius * xhat
        return self.c + self.radius * xhat

    def curvature(self, x):
        y = self.near_point(x)
        if y is MULTIPLE:
            raise RidgeProximity("center of the ball has no unique near point")
        n = -(y - self.c) / self.radius
        kappa = np.full(self.N - 1, -1.0 / self.radius)
        return CurvatureData(y, orthonormal_complement(n), kappa, -1.0 / self.radius)

    def level_measure(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise GeometryError("level must be non-negative")
        out = sphere_area(self.N) * np.clip(self.radius - s, 0.0, None) ** (self.N - 1)
        return out[()]

    def mean_convexity(self):
        return MeanConvexity(1.0 / self.radius, True)


@dataclass(frozen=True, repr=False)
class ExteriorBall(Domain):
    center: tuple
    radius: float = 1.0
    bounded = False

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.radius <= 0:
            raise GeometryError("radius must be positive")
        if len(self.center) < 2:
            raise GeometryError("dimension must be at least 2")

    def __repr__(self):
        return f"ExteriorBall(center={self.center}, radius={self.radius})"

    @property
    def N(self):
        return len(self.center)

    @property
    def c(self):
        return np.array(self.center)

    @property
    def inradius(self):
        return math.inf

    def contains(self, x, tol=1e-13):
        r = np.linalg.norm(np.asarray(x) - self.c, axis=-1)
        return r >= self.radius * (1 - tol)

    def _delta(self, x):
        return np.linalg.norm(x - self.c, axis=-1) - self.radius

    def _jet(self, x):
        _, r, xhat = _radial_parts(x, self.c)
        P = _tangent_projector(xhat)
        return (r - self.radius, xhat, P / r[..., None, None], (self.N - 1) / r)

    def ridge_facets(self, x):
        x = _as_points(x, self.N)
        sh = x.shape[:-1]
        return RidgeFacets(np.zeros(sh + (0,)), np.zeros(sh + (0, self.N)),
                           np.zeros(sh + (0, self.N, self.N)))

    def near_point(self, x):
        x = _as_points(x, self.N)
        self._check_inside(x)
        _, _, xhat = _radial_parts(x, self.c)
        return self.c + self.radius * xhat

    def curvature(self, x):
        y = self.near_point(x)
        n = (y - self.c) / self.radius
        kappa = np.full(self.N - 1, 1.0 / self.radius)
        return CurvatureData(y, orthonormal_complement(n), kappa, 1.0 / self.radius)

    def level_measure(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise GeometryError("level must be non-negative")
        return (sphere_area(self.N) * (self.radius + s) ** (self.N - 1))[()]

    def mean_convexity(self):
        raise GeometryError("mean convexity is only defined here for bounded domains")


@dataclass(frozen=True, repr=False)
class Annulus(Domain):
    center: tuple
    r_inner: float = 1.0
    r_outer: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not 0 < self.r_inner < self.r_outer:
            raise GeometryError("annulus radii must satisfy 0 < R1 < R2")
        if len(self.center) < 2:
            raise GeometryError("dimension must be at least 2")

    def __repr__(self):
        return f"Annulus(center={self.center}, r_inner={self.r_inner}, r_outer={self.r_outer})"

    @property
    def N(self):
        return len(self.center)

    @property
    def c(self):
        return np.array(self.center)

    @property
    def mid(self):
        return 0.5 * (self.r_inner + self.r_outer)

    @property
    def inradius(self):
        return 0.5 * (self.r_outer - self.r_inner)

    def contains(self, x, tol=1e-13):
        r = np.linalg.norm(np.asarray(x) - self.c, axis=-1)
        return (r >= self.r_inner * (1 - tol)) & (r <= self.r_outer * (1 + tol))

    def _delta(self, x):
        r = np.linalg.norm(x - self.c, axis=-1)
        return np.minimum(r - self.r_inner, self.r_outer - r)

    def _jet(self, x):
        _, r, xhat = _radial_parts(x, self.c)
        inner = (r < self.mid)
        sgn = np.where(inner, 1.0, -1.0)
        P = _tangent_projector(xhat)
        delta = np.where(inner, r - self.r_inner, self.r_outer - r)
        return (delta, sgn[..., None] * xhat, sgn[..., None, None] * P / r[..., None, None],
                sgn * (self.N - 1) / r)

    def ridge_facets(self, x):
        _, r, xhat = _radial_parts(_as_points(x, self.N), self.c)
        sgn = np.where(r >= self.mid, 1.0, -1.0)
        P = _tangent_projector(xhat)
        dist = np.abs(r - self.mid)
        grad = sgn[..., None] * xhat
        hess = sgn[..., None, None] * P / r[..., None, None]
        return RidgeFacets(dist[..., None], grad[..., None, :], hess[..., None, :, :])

    def near_point(self, x):
        x = _as_points(x, self.N)
        self._check_inside(x)
        _, r, xhat = _radial_parts(x, self.c)
        R = np.where(r < self.mid, self.r_inner, self.r_outer)
        y = self.c + R[..., None] * xhat
        if x.ndim == 1 and abs(r - self.mid) <= TIE_TOL:
            return MULTIPLE
        return y

    def curvature(self, x):
        y = self.near_point(x)
        if y is MULTIPLE:
            raise RidgeProximity("point lies on the mid-shell ridge")
        R = np.linalg.norm(y - self.c)
        inner = abs(R - self.r_inner) < abs(R - self.r_outer)
        outward = (y - self.c) / R
        n = outward if inner else -outward
        k = 1.0 / self.r_inner if inner else -1.0 / self.r_outer
        return CurvatureData(y, orthonormal_complement(n), np.full(self.N - 1, k), k)

    def level_measure(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise GeometryError("level must be non-negative")
        a = sphere_area(self.N) * ((self.r_inner + s) ** (self.N - 1)
                                   + (self.r_outer - s) ** (self.N - 1))
        return np.where(s <= self.inradius, a, 0.0)[()]

    def mean_convexity(self):
        # inner sphere is concave seen from inside: H = -1/R1
        return MeanConvexity(-1.0 / self.r_inner, False)


@dataclass(frozen=True, repr=False)
class Box(Domain):
    lo: tuple
    hi: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi) or len(self.lo) < 2:
            raise GeometryError("box corners must have the same dimension >= 2")
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise GeometryError("box requires lo < hi componentwise")

    def __repr__(self):
        return f"Box(lo={self.lo}, hi={self.hi})"

    @property
    def N(self):
        return len(self.lo)

    @property
    def lengths(self):
        return np.array(self.hi) - np.array(self.lo)

    @property
    def inradius(self):
        return float(0.5 * np.min(self.lengths))

    def contains(self, x, tol=1e-13):
        x = np.asarray(x)
        scale = tol * np.max(self.lengths)
        return np.all((x >= np.array(self.lo) - scale) & (x <= np.array(self.hi) + scale), axis=-1)

    def face_distances(self, x):
        """Distances to the 2N faces, ordered (lo_0, hi_0, lo_1, hi_1, ...)."""
        x = np.asarray(x, dtype=float)
        lo = x - np.array(self.lo)
        hi = np.array(self.hi) - x
        return np.stack([lo, hi], axis=-1).reshape(x.shape[:-1] + (2 * self.N,))

    def face_normals(self):
        """Interior unit normals of the faces, same ordering as face_distances."""
        n = np.zeros((2 * self.N, self.N))
        for i in range(self.N):
            n[2 * i, i] = 1.0
            n[2 * i + 1, i] = -1.0
        return n

    def _delta(self, x):
        return np.min(self.face_distances(x), axis=-1)

    def nearest_face(self, x):
        return np.argmin(self.face_distances(x), axis=-1)

    def _check_smooth(self, x):
        d = np.sort(self.face_distances(x), axis=-1)
        if np.any(d[..., 1] - d[..., 0] <= TIE_TOL):
            raise NonSmoothPoint("two faces are equally near; delta is not differentiable there")

    def _jet(self, x):
        x = np.asarray(x, dtype=float)
        d = self.face_distances(x)
        k = np.argmin(d, axis=-1)
        delta = np.take_along_axis(d, k[..., None], axis=-1)[..., 0]
        grad = self.face_normals()[k]
        sh = x.shape[:-1]
        return delta, grad, np.zeros(sh + (self.N, self.N)), np.zeros(sh)

    def ridge_facets(self, x):
        """Distances to the bisector hyperplanes between the nearest face and the others.

        Inside the region served by a face, the medial axis consists of pieces of these
        hyperplanes, and the closest ridge point is the closest hyperplane.
        """
        x = _as_points(x, self.N)
        d = self.face_distances(x)
        k = np.argmin(d, axis=-1)
        normals = self.face_normals()
        nf = 2 * self.N
        others = np.array([[f for f in range(nf) if f != j] for j in range(nf)])[k]
        dk = np.take_along_axis(d, k[..., None], axis=-1)
        do = np.take_along_axis(d, others, axis=-1)
        same_axis = (others // 2) == (k[..., None] // 2)
        scale = np.where(same_axis, 2.0, math.sqrt(2.0))
        dist = (do - dk) / scale
        grad = (normals[others] - normals[k][..., None, :]) / scale[..., None]
        hess = np.zeros(dist.shape + (self.N, self.N))
        return RidgeFacets(dist, grad, hess)

    def near_point(self, x):
        x = _as_points(x, self.N)
        self._check_inside(x)
        d = self.face_distances(x)
        k = np.argmin(d, axis=-1)
        y = np.array(x, dtype=float, copy=True)
        axis = k // 2
        val = np.where(k % 2 == 0, np.array(self.lo)[axis], np.array(self.hi)[axis])
        np.put_along_axis(y, axis[..., None], val[..., None], axis=-1)
        if x.ndim == 1:
            ds = np.sort(d)
            if ds[1] - ds[0] <= TIE_TOL:
                return MULTIPLE
        return y

    def curvature(self, x):
        y = self.near_point(x)
        if y is MULTIPLE:
            raise NonSmoothPoint("no unique nearest face")
        k = int(self.nearest_face(x))
        n = self.face_normals()[k]
        return CurvatureData(y, orthonormal_complement(n), np.zeros(self.N - 1), 0.0)

    def level_measure(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise GeometryError("level must be non-negative")
        L = np.clip(self.lengths - 2.0 * s[..., None], 0.0, None)
        total = np.zeros(s.shape)
        for k in range(self.N):
            total = total + 2.0 * np.prod(np.delete(L, k, axis=-1), axis=-1)
        return np.where(s <= self.inradius, total, 0.0)[()]

    def mean_convexity(self):
        return MeanConvexity(0.0, True)


def default_ridge_margin(domain: Domain) -> float:
    r = domain.inradius
    if not math.isfinite(r):
        return 0.0
    return r / 100.0


def domain_from_config(cfg: dict) -> Domain:
    """Build a domain from a mapping such as {"kind": "ball", "N": 2, "radius": 1}."""
    kind = str(cfg.get("kind", "ball")).lower().replace("_", "-")
    N = int(cfg.get("N", cfg.get("dimension", 2)))
    center = tuple(cfg.get("center", (0.0,) * N))
    if kind == "ball":
        return Ball(center, float(cfg.get("radius", 1.0)))
    if kind in ("exterior-ball", "exteriorball", "exterior"):
        return ExteriorBall(center, float(cfg.get("radius", 1.0)))
    if kind == "annulus":
        return Annulus(center, float(cfg.get("r_inner", cfg.get("R1", 1.0))),
                       float(cfg.get("r_outer", cfg.get("R2", 2.0))))
    if kind == "box":
        lo = tuple(cfg.get("lo", (0.0,) * N))
        hi = tuple(cfg.get("hi", (1.0,) * N))
        return Box(lo, hi)
    raise GeometryError(f"unknown domain kind {kind!r}")


# function-style aliases

def distance(domain: Domain, x):
    return domain.distance(x)


def near_point(domain: Domain, x):
    return domain.near_point(x)


def distance_jet(domain: Domain, x, ridge_margin: float | None = None) -> DistanceJet:
    return domain.distance_jet(x, ridge_margin)


def hessian_delta_via_curvatures(domain: Domain, x):
    return domain.hessian_via_curvatures(x)


def ridge_distance(domain: Domain, x):
    return domain.ridge_distance(x)


def inradius(domain: Domain) -> float:
    return domain.inradius


def mean_convexity(domain: Domain) -> MeanConvexity:
    return domain.mean_convexity()


def level_measure(domain: Domain, s):
    return domain.level_measure(s)
