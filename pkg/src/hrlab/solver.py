"""Radial variational solver for the singular p-bilaplacian problem on the unit ball.

    Lap(|Lap u|^{p-2} Lap u) + lam div(|grad u|^{p-2} grad u / delta^p) = |u|^{q-2} u,
    u = du/dn = 0 on the sphere, delta = 1 - |x|.

Radial functions are discretised by a finite-volume scheme on a mesh graded
geometrically toward r = 1. The discrete energy

    I[u] = (1/p) sum_i W_i |D_i|^p - (lam/p) sum_i V_i |G_i|^p / d_i^p - (1/q) sum_i W_i |u_i|^q

uses node Laplacians D (fluxes of the midpoint gradients G through the control
volume faces; zero flux at r = 0 and at r = 1 encodes u'(0) = u'(1) = 0),
and its exact gradient and Hessian drive Newton iterations.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import legendre
from scipy import linalg

from .constants import NoCriticalExponent, lambda_p, riesz_lower_bound, sobolev_critical
from .geometry import sphere_area

log = logging.getLogger(__name__)

REGULARIZATION_MU = 1e-10


class SolverError(RuntimeError):
    pass


class NonConvergence(SolverError):
    def __init__(self, msg, iterate=None):
        super().__init__(msg)
        self.iterate = iterate


class ThresholdViolated(ValueError):
    """lam is not below the Hardy-Rellich constant, so the energy may be unbounded."""


class InvalidExponents(ValueError):
    pass


class ContradictionFound(SolverError):
    """A non-trivial, balanced critical point turned up where none should exist."""


class LambdaThresholdWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# mesh and operators


@dataclass(frozen=True)
class RadialMesh:
    N: int
    nodes: int = 400
    grading: float = 20.0  # ratio of the first to the last cell width

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("dimension must be at least 2")
        if self.nodes < 8:
            raise ValueError("need at least 8 cells")
        if self.grading < 1:
            raise ValueError("grading must be >= 1")

    def refined(self, factor: int = 2) -> "RadialMesh":
        return RadialMesh(self.N, self.nodes * factor, self.grading)


class _Operators:
    """Mesh arrays and the sparse-ish linear maps u -> D (node Laplacian) and u -> G."""

    def __init__(self, mesh: RadialMesh):
        N, M = mesh.N, mesh.nodes
        q = mesh.grading ** (-1.0 / (M - 1)) if M > 1 else 1.0
        widths = q ** np.arange(M)
        widths /= widths.sum()
        r = np.concatenate([[0.0], np.cumsum(widths)])
        r[-1] = 1.0
        h = np.diff(r)
        m = 0.5 * (r[:-1] + r[1:])
        S = sphere_area(N)
        faces = np.concatenate([[0.0], m, [1.0]])
        W = S * (faces[1:] ** N - faces[:-1] ** N) / N
        V = S * (r[1:] ** N - r[:-1] ** N) / N
        # G = B u, u holds the M free values u_0..u_{M-1} (u_M = 0)
        B = np.zeros((M, M))
        for i in range(M):
            B[i, i] = -1.0 / h[i]
            if i + 1 < M:
                B[i, i + 1] = 1.0 / h[i]
        flux = S * m ** (N - 1)
        # D_i = (flux_i G_i - flux_{i-1} G_{i-1}) / W_i for nodes 0..M
        Fm = np.zeros((M + 1, M))
        Fm[:M] += flux[:, None] * B
        Fm[1:] -= flux[:, None] * B
        A = Fm / W[:, None]
        self.N, self.M, self.S = N, M, S
        self.r, self.h, self.m, self.d = r, h, m, 1.0 - m
        self.W, self.V, self.A, self.B = W, V, A, B
        self.Wu = W[:M]
        self.precond = A.T @ (W[:, None] * A)
        self._pchol = linalg.cho_factor(self.precond)

    def apply_precond_inverse(self, g):
        return linalg.cho_solve(self._pchol, g)


_OPS_CACHE: dict = {}


def operators(mesh: RadialMesh) -> _Operators:
    ops = _OPS_CACHE.get(mesh)
    if ops is None:
        ops = _OPS_CACHE[mesh] = _Operators(mesh)
    return ops


@dataclass
class RadialField:
    """Nodal values of a radial function; the last entry (r = 1) is always 0."""

    mesh: RadialMesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape == (self.mesh.nodes,):
            v = np.append(v, 0.0)
        if v.shape != (self.mesh.nodes + 1,):
            raise ValueError("need one value per node")
        if v[-1] != 0:
            raise ValueError("u(1) = 0 is part of the discrete space")
        self.values = v

    @property
    def free(self):
        return self.values[:-1]

    @property
    def radii(self):
        return operators(self.mesh).r

    def laplacian(self):
        return operators(self.mesh).A @ self.free

    def gradient(self):
        """Midpoint derivatives u'(m_i)."""
        return operators(self.mesh).B @ self.free

    @classmethod
    def from_function(cls, mesh: RadialMesh, f: Callable):
        r = operators(mesh).r
        v = np.asarray(f(r), dtype=float)
        v[-1] = 0.0
        return cls(mesh, v)

    def max_abs(self):
        return float(np.max(np.abs(self.values)))

    def to_csv(self) -> str:
        lines = ["r,u"]
        lines += [f"{ri:.17g},{ui:.17g}" for ri, ui in zip(self.radii, self.values)]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# problem and energy


def lambda_threshold(p: float, N: int) -> tuple[float, float]:
    """(safe bound, hard bound) for lam.

    Below the safe bound C_{p,N} lambda_p the Laplacian norm controls the Hardy
    term; lambda_p is an upper bound for the unknown sharp constant. At p = 2 the
    Calderon-Zygmund factor is 1, so both coincide.
    """
    lp = lambda_p(p)
    if p == 2:
        return lp, lp
    return riesz_lower_bound(p, N) * lp, lp


@dataclass(frozen=True)
class ProblemSpec:
    N: int
    p: float
    q: float
    lam: float = 0.0

    def __post_init__(self):
        if not self.p > 1 or not self.q > 1:
            raise InvalidExponents("need p > 1 and q > 1")
        safe, hard = lambda_threshold(self.p, self.N)
        if self.lam >= hard:
            raise ThresholdViolated(f"lambda={self.lam} must stay below {hard:.6g}")
        if self.lam >= safe:
            warnings.warn(f"lambda={self.lam} lies above the provable bound {safe:.3g}; "
                          "coercivity is not guaranteed", LambdaThresholdWarning, stacklevel=2)

    @property
    def critical_exponent(self):
        try:
            return sobolev_critical(self.p, self.N)
        except NoCriticalExponent:
            return math.inf


def _phi(D, p):
    """(|D|^p, |D|^{p-2}D, (p-1)|D|^{p-2}); regularised with mu for p < 2."""
    if p >= 2:
        a = np.abs(D)
        return a ** p, a ** (p - 2) * D, (p - 1) * a ** (p - 2)
    mu2 = REGULARIZATION_MU ** 2
    s = D * D + mu2
    return s ** (p / 2), s ** ((p - 2) / 2) * D, s ** ((p - 4) / 2) * ((p - 1) * D * D + mu2)


def _power_terms(u, q):
    a = np.abs(u)
    with np.errstate(divide="ignore"):
        h = np.where(a > 0, (q - 1) * a ** (q - 2), 0.0) if q < 2 else (q - 1) * a ** (q - 2)
    return a ** q, a ** (q - 2) * u if q >= 2 else np.sign(u) * a ** (q - 1), h


@dataclass
class EnergyParts:
    laplacian: float  # sum W |D|^p
    hardy: float      # sum V |G|^p / d^p
    power: float      # sum W |u|^q

    def energy(self, spec: ProblemSpec):
        return self.laplacian / spec.p - spec.lam * self.hardy / spec.p - self.power / spec.q


def energy_parts(spec: ProblemSpec, u: RadialField) -> EnergyParts:
    ops = operators(u.mesh)
    D, G = u.laplacian(), u.gradient()
    lap = float(np.sum(ops.W * _phi(D, spec.p)[0]))
    hardy = float(np.sum(ops.V * _phi(G, spec.p)[0] / ops.d ** spec.p))
    power = float(np.sum(ops.Wu * np.abs(u.free) ** spec.q))
    return EnergyParts(lap, hardy, power)


def energy(spec: ProblemSpec, u: RadialField) -> float:
    val = energy_parts(spec, u).energy(spec)
    if not math.isfinite(val):
        raise SolverError("non-finite energy: resolution failure")
    return val


def _gradient_parts(spec, ops, x):
    D, G = ops.A @ x, ops.B @ x
    _, dD, _ = _phi(D, spec.p)
    _, dG, _ = _phi(G, spec.p)
    _, du, _ = _power_terms(x, spec.q)
    g_lap = ops.A.T @ (ops.W * dD)
    g_hardy = -spec.lam * (ops.B.T @ (ops.V * dG / ops.d ** spec.p))
    g_pow = -ops.Wu * du
    return g_lap, g_hardy, g_pow


def _energy_free(spec, ops, x):
    D, G = ops.A @ x, ops.B @ x
    return (np.sum(ops.W * _phi(D, spec.p)[0]) / spec.p
            - spec.lam * np.sum(ops.V * _phi(G, spec.p)[0] / ops.d ** spec.p) / spec.p
            - np.sum(ops.Wu * np.abs(x) ** spec.q) / spec.q)


def _gradient_free(spec, ops, x):
    a, b, c = _gradient_parts(spec, ops, x)
    return a + b + c


def _hessian_free(spec, ops, x):
    D, G = ops.A @ x, ops.B @ x
    hD = _phi(D, spec.p)[2]
    hG = _phi(G, spec.p)[2]
    hu = _power_terms(x, spec.q)[2]
    H = ops.A.T @ ((ops.W * hD)[:, None] * ops.A)
    H -= spec.lam * ops.B.T @ ((ops.V * hG / ops.d ** spec.p)[:, None] * ops.B)
    H -= np.diag(ops.Wu * hu)
    return H


def gradient_action(spec: ProblemSpec, u: RadialField, phi: RadialField) -> float:
    """I'[u] phi = int |Lap u|^{p-2} Lap u Lap phi - lam int |u'|^{p-2} u' phi' / delta^p - int |u|^{q-2} u phi."""
    ops = operators(u.mesh)
    return float(_gradient_free(spec, ops, u.free) @ phi.free)


def _dual_norm(ops, g):
    """Norm of a functional g in the dual of (u, ||Lap u||_2): sqrt(g^T P^{-1} g), P = A^T W A."""
    return float(np.sqrt(max(g @ ops.apply_precond_inverse(g), 0.0)))


def residual(spec: ProblemSpec, u: RadialField) -> float:
    """Relative size of the discrete Euler-Lagrange residual.

    The gradient and each of its three parts are measured in the dual norm of
    the discrete Laplacian norm; the total is divided by the sum of the parts so
    the number is scale free. A pointwise weighted norm would instead be
    dominated by round-off in the finest boundary cells.
    """
    ops = operators(u.mesh)
    parts = _gradient_parts(spec, ops, u.free)
    total = _dual_norm(ops, sum(parts))
    scale = sum(_dual_norm(ops, g) for g in parts)
    return total / scale if scale > 0 else 0.0


# ---------------------------------------------------------------------------
# Pohozaev balance


@dataclass
class PohozaevReport:
    boundary: float       # (p-1)/p * surface integral of |Lap u|^p (x.n)
    bulk: float           # (N-2p)/p * int |Lap u|^p
    hardy_normal: float   # lam * int |u'|^p delta^{-p-1} (x . n(N(x)))
    hardy: float          # lam (N-p)/p * int |u'|^p / delta^p
    power: float          # N/q * int |u|^q
    normal_factor_min: float  # min over nodes of x . n(N(x)) = |x|

    @property
    def lhs(self):
        return self.boundary + self.bulk - self.hardy_normal

    @property
    def rhs(self):
        return self.hardy + self.power

    @property
    def imbalance(self):
        return self.lhs - self.rhs

    @property
    def scale(self):
        return (abs(self.boundary) + abs(self.bulk) + abs(self.hardy_normal)
                + abs(self.hardy) + abs(self.power))

    @property
    def relative_imbalance(self):
        return abs(self.imbalance) / self.scale if self.scale > 0 else 0.0

    def as_dict(self):
        return dict(boundary=self.boundary, bulk=self.bulk, hardy_normal=self.hardy_normal,
                    hardy=self.hardy, power=self.power, imbalance=self.imbalance,
                    relative_imbalance=self.relative_imbalance,
                    normal_factor_min=self.normal_factor_min)


def boundary_laplacian(u: RadialField) -> float:
    """Lap u at r = 1, extrapolated from the last two node values.

    The boundary control volume average sits a quarter cell inside the sphere.
    """
    D = u.laplacian()
    return float(D[-1] + (D[-1] - D[-2]) / 3.0)


def pohozaev_report(spec: ProblemSpec, u: RadialField) -> PohozaevReport:
    ops = operators(u.mesh)
    p, N, lam = spec.p, spec.N, spec.lam
    D, G = u.laplacian(), u.gradient()
    lap_p = float(np.sum(ops.W * np.abs(D) ** p))
    g = np.abs(G) ** p
    # on the unit ball the near point of x is x/|x| and x . n = |x|
    normal = ops.m
    return PohozaevReport(
        boundary=(p - 1) / p * ops.S * abs(boundary_laplacian(u)) ** p,
        bulk=(N - 2 * p) / p * lap_p,
        hardy_normal=lam * float(np.sum(ops.V * g * ops.d ** (-p - 1) * normal)),
        hardy=lam * (N - p) / p * float(np.sum(ops.V * g / ops.d ** p)),
        power=N / spec.q * float(np.sum(ops.Wu * np.abs(u.free) ** spec.q)),
        normal_factor_min=float(np.min(np.concatenate([ops.r, ops.m]))),
    )


# ---------------------------------------------------------------------------
# critical points


@dataclass
class CriticalPoint:
    field: RadialField
    energy: float
    residual: float
    kind: str
    pohozaev: PohozaevReport
    iterations: int = 0
    history: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def summary(self):
        return dict(kind=self.kind, energy=self.energy, residual=self.residual,
                    iterations=self.iterations, nodes=self.field.mesh.nodes,
                    max_abs=self.field.max_abs(), pohozaev=self.pohozaev.as_dict(), **self.info)


def _start_profile(r):
    return (1.0 - r * r) ** 2


def _scaled_start(spec, ops):
    w = _start_profile(ops.r[:-1])
    D, G = ops.A @ w, ops.B @ w
    a = np.sum(ops.W * _phi(D, spec.p)[0]) - spec.lam * np.sum(ops.V * _phi(G, spec.p)[0] / ops.d ** spec.p)
    b = np.sum(ops.Wu * np.abs(w) ** spec.q)
    return w, a, b


def _newton(spec, ops, x, tol, max_iter, history, monotone=True):
    """Damped Newton with Armijo backtracking.

    When ``monotone`` the energy must decrease (minimisation) and an indefinite
    Hessian is shifted by multiples of the preconditioner; otherwise the step
    minimises the gradient norm (saddle refinement).
    """
    E = _energy_free(spec, ops, x)
    for it in range(max_iter):
        parts = _gradient_parts(spec, ops, x)
        g = sum(parts)
        scale = sum(_dual_norm(ops, c) for c in parts)
        res = _dual_norm(ops, g) / scale if scale > 0 else 0.0
        history.append((E, res))
        if res < tol:
            return x, it, res
        H = _hessian_free(spec, ops, x)
        if monotone:
            shift = 0.0
            base = np.trace(H) / np.trace(ops.precond)
            for _ in range(30):
                try:
                    c = linalg.cho_factor(H + shift * ops.precond)
                    step = -linalg.cho_solve(c, g)
                    break
                except linalg.LinAlgError:
                    shift = max(2 * shift, 1e-8 * base)
            else:
                step = -ops.apply_precond_inverse(g)
            t, slope = 1.0, float(g @ step)
            g_norm = _dual_norm(ops, g)
            while t > 1e-12:
                xn = x + t * step
                En = _energy_free(spec, ops, xn)
                if En <= E + 1e-4 * t * slope:
                    break
                # near the minimum the energy stops resolving the decrease; then a
                # step that shrinks the gradient and keeps E within round-off is taken
                if (abs(En - E) <= 1e-13 * abs(E)
                        and _dual_norm(ops, _gradient_free(spec, ops, xn)) < g_norm):
                    break
                t *= 0.5
            else:
                return x, it, res
            if np.array_equal(xn, x):
                return x, it, res
            x, E = xn, En
        else:
            step = -linalg.solve(H, g)
            t = 1.0
            r0 = _dual_norm(ops, g)
            while t > 1e-6:
                xn = x + t * step
                if _dual_norm(ops, _gradient_free(spec, ops, xn)) < (1 - 1e-4 * t) * r0:
                    break
                t *= 0.5
            x = xn
            E = _energy_free(spec, ops, x)
    parts = _gradient_parts(spec, ops, x)
    res = _dual_norm(ops, sum(parts)) / max(sum(_dual_norm(ops, c) for c in parts), 1e-300)
    return x, max_iter, res


def _finish(spec, mesh, x, kind, it, history, info=None):
    u = RadialField(mesh, x)
    return CriticalPoint(u, energy(spec, u), residual(spec, u), kind, pohozaev_report(spec, u),
                         it, history, info or {})


def direct_minimize(spec: ProblemSpec, mesh: RadialMesh | None = None, tol: float = 1e-10,
                    max_iter: int = 200) -> CriticalPoint:
    """Global minimiser for the sublinear case 1 < q < p.

    Starts from (1 - r^2)^2 scaled to the minimum of t -> I[t w] (negative because
    q < p) and runs damped Newton; every accepted step lowers the energy.
    """
    if not spec.q < spec.p:
        raise InvalidExponents("direct minimisation needs 1 < q < p")
    mesh = mesh or RadialMesh(spec.N)
    ops = operators(mesh)
    w, a, b = _scaled_start(spec, ops)
    t = (b / a) ** (1.0 / (spec.p - spec.q))
    history: list = []
    x, it, res = _newton(spec, ops, t * w, tol, max_iter, history)
    cp = _finish(spec, mesh, x, "minimizer", it, history)
    if cp.residual > max(tol, 1e-6):
        raise NonConvergence(f"residual {cp.residual:.3g} after {it} iterations", cp)
    return cp


def _string_energies(spec, ops, path):
    return np.array([_energy_free(spec, ops, x) for x in path])


def _reparametrize(ops, path):
    diffs = np.diff(path, axis=0)
    seg = np.sqrt(np.einsum("ki,ij,kj->k", diffs, ops.precond, diffs))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0:
        return path
    s /= s[-1]
    target = np.linspace(0, 1, len(path))
    out = np.empty_like(path)
    for j in range(path.shape[1]):
        out[:, j] = np.interp(target, s, path[:, j])
    return out


def negative_directions(spec, ops, x) -> int:
    """Number of negative eigenvalues of the Hessian relative to the preconditioner metric."""
    H = _hessian_free(spec, ops, x)
    ev = linalg.eigh(H, ops.precond, eigvals_only=True)
    return int(np.sum(ev < -1e-10 * np.max(np.abs(ev))))


def sobolev_ratio(spec: ProblemSpec, mesh: RadialMesh, iters: int = 400) -> float:
    """Discrete S = sup (sum W|u|^q)^{1/q} / (sum W|D|^p)^{1/p} by preconditioned ascent."""
    ops = operators(mesh)
    p, q = spec.p, spec.q

    def logR(x):
        a = np.sum(ops.W * np.abs(ops.A @ x) ** p)
        b = np.sum(ops.Wu * np.abs(x) ** q)
        return math.log(b) / q - math.log(a) / p

    def grad(x):
        D = ops.A @ x
        a = np.sum(ops.W * np.abs(D) ** p)
        b = np.sum(ops.Wu * np.abs(x) ** q)
        ga = p * ops.A.T @ (ops.W * np.abs(D) ** (p - 2) * D)
        gb = q * ops.Wu * np.abs(x) ** (q - 2) * x
        return gb / (q * b) - ga / (p * a)

    x = _start_profile(ops.r[:-1])
    x /= np.sqrt(x @ ops.precond @ x)
    f = logR(x)
    step = 1.0
    for _ in range(iters):
        d = ops.apply_precond_inverse(grad(x))
        nd = math.sqrt(d @ ops.precond @ d)
        if nd < 1e-13:
            break
        while step > 1e-14:
            xn = x + step * d / nd
            xn /= math.sqrt(xn @ ops.precond @ xn)
            fn = logR(xn)
            if fn > f:
                break
            step *= 0.5
        else:
            break
        if fn - f < 1e-15:
            x, f = xn, fn
            break
        x, f = xn, fn
        step = min(1.0, 2 * step)
    return math.exp(f)


def mountain_pass_lower_bound(spec: ProblemSpec, mesh: RadialMesh) -> float:
    """r(rho) = rho^p/p - S^q rho^q / q at half the maximising radius.

    For lam <= 0 the energy dominates this function of rho = ||Lap u||_p on the
    sphere ||Lap u||_p = rho, so every path from 0 to a negative-energy point
    crosses level r(rho).
    """
    p, q = spec.p, spec.q
    S = sobolev_ratio(spec, mesh)
    rho_star = (S ** (-q)) ** (1.0 / (q - p))
    rho = 0.5 * rho_star
    return rho ** p / p - S ** q * rho ** q / q


def mountain_pass(spec: ProblemSpec, mesh: RadialMesh | None = None, images: int = 32,
                  sweeps: int = 400, step: float = 0.2, tol: float = 1e-10,
                  newton_iter: int = 60, check_regime: bool = True) -> CriticalPoint:
    """Saddle point for p < q < p** by the string method followed by Newton.

    The string joins 0 to T w with I[T w] < 0. It is relaxed by preconditioned
    steepest descent of every interior image and reparametrised by arc length
    after each sweep; Newton refines the highest image.
    """
    if check_regime:
        if not spec.p < spec.q < spec.critical_exponent:
            raise InvalidExponents("mountain pass needs p < q < p**")
        if spec.lam > 0:
            raise InvalidExponents("existence is only established for lam <= 0")
    mesh = mesh or RadialMesh(spec.N)
    ops = operators(mesh)
    w, a, b = _scaled_start(spec, ops)
    t0 = (spec.q * a / (spec.p * b)) ** (1.0 / (spec.q - spec.p))  # I[t0 w] = 0
    end = 1.5 * t0 * w
    if _energy_free(spec, ops, end) >= 0:
        raise SolverError("endpoint of the path does not have negative energy")
    path = np.linspace(0.0, 1.0, images)[:, None] * end[None, :]
    history = []
    end_norm = math.sqrt(end @ ops.precond @ end)
    max_move = 0.05 * end_norm
    for sweep in range(sweeps):
        Es = _string_energies(spec, ops, path)
        k = int(np.argmax(Es[1:-1])) + 1
        history.append(float(Es[k]))
        tangent = path[k + 1] - path[k - 1]
        tangent /= math.sqrt(tangent @ ops.precond @ tangent)
        move = -ops.apply_precond_inverse(_gradient_free(spec, ops, path[k]))
        # only the highest image moves, and only across the path
        move -= (move @ ops.precond @ tangent) * tangent
        size = math.sqrt(max(move @ ops.precond @ move, 0.0))
        if size < tol * end_norm:
            break
        move *= min(step, max_move / size)
        path[k] = path[k] + move
        path = _reparametrize(ops, path)
    Es = _string_energies(spec, ops, path)
    k = int(np.argmax(Es))
    nh: list = []
    x, it, res = _newton(spec, ops, path[k].copy(), tol, newton_iter, nh, monotone=False)
    info = dict(string_max=float(Es[k]), string_sweeps=len(history),
                endpoint_energy=float(Es[-1]), morse_index=negative_directions(spec, ops, x))
    cp = _finish(spec, mesh, x, "mountain_pass", it, history + [e for e, _ in nh], info)
    if cp.residual > 1e-4 or cp.field.max_abs() < 1e-8:
        raise NonConvergence(f"saddle search ended with residual {cp.residual:.3g}", cp)
    return cp


def nehari_level(spec: ProblemSpec, mesh: RadialMesh) -> float:
    """inf over u != 0 of max_t I[t u]; for homogeneous terms it is
    (1/p - 1/q) * (A^{1/p}/B^{1/q})^{pq/(q-p)} at the best ratio, lam <= 0 only."""
    if spec.lam != 0:
        raise ValueError("Nehari level closed form needs lam = 0")
    S = sobolev_ratio(spec, mesh)
    p, q = spec.p, spec.q
    return (1 / p - 1 / q) * S ** (-p * q / (q - p))


def nonexistence_probe(spec: ProblemSpec, mesh: RadialMesh | None = None,
                       balance_tol: float = 0.05, stability_tol: float = 0.1,
                       check_regime: bool = True) -> CriticalPoint:
    """Search for non-trivial solutions where none exist (lam < 0, q >= p** or lam <= 0, q > p**).

    Descent from a small multiple of (1 - r^2)^2 and a mountain-pass search are
    run. A finite mesh can carry a discrete saddle (typically a bubble that
    concentrates at the mesh scale), so a non-trivial candidate only counts if it
    is also Pohozaev balanced within ``balance_tol`` and mesh stable: one doubling
    of the mesh moves its peak value by less than ``stability_tol``. A candidate
    passing both is a contradiction and raises.
    """
    qs = spec.critical_exponent
    in_regime = (spec.lam < 0 and spec.q >= qs) or (spec.lam <= 0 and spec.q > qs)
    if check_regime and not in_regime:
        raise InvalidExponents("parameters are outside the non-existence regime")
    mesh = mesh or RadialMesh(spec.N)
    ops = operators(mesh)
    w, a, b = _scaled_start(spec, ops)
    t0 = (spec.q * a / (spec.p * b)) ** (1.0 / (spec.q - spec.p))
    hist: list = []
    x, it, _ = _newton(spec, ops, 0.1 * t0 * w, 1e-12, 200, hist)
    trivial = _finish(spec, mesh, x, "trivial", it, hist)
    if trivial.field.max_abs() > 1e-8:
        raise ContradictionFound("descent from a small start stalled at a non-trivial state")

    def search(m):
        try:
            return mountain_pass(spec, m, check_regime=False)
        except NonConvergence as exc:
            log.info("mountain pass search: %s", exc)
            return None

    findings = []
    cand = search(mesh)
    if cand is None:
        findings.append(dict(search="mountain_pass", outcome="no non-trivial critical point"))
    else:
        fine = search(mesh.refined())
        rel = cand.pohozaev.relative_imbalance
        entry = dict(search="mountain_pass", energy=cand.energy, peak=float(cand.field.values[0]),
                     relative_imbalance=rel)
        if fine is None:
            entry.update(outcome="disappears under mesh refinement")
        else:
            rel_fine = fine.pohozaev.relative_imbalance
            drift = abs(fine.field.values[0] / cand.field.values[0] - 1.0)
            entry.update(refined_energy=fine.energy, refined_peak=float(fine.field.values[0]),
                         refined_relative_imbalance=rel_fine, peak_drift=drift)
            balanced = rel < balance_tol and rel_fine < balance_tol
            stable = drift < stability_tol
            if balanced and stable:
                raise ContradictionFound(
                    f"mesh-stable critical point with Pohozaev imbalance {rel:.3g}/{rel_fine:.3g}")
            entry.update(outcome="mesh unstable (concentrating)" if not stable else "Pohozaev imbalance")
        findings.append(entry)
    trivial.info.update(rejected_candidates=findings,
                        normal_factor_min=trivial.pohozaev.normal_factor_min)
    return trivial


# ---------------------------------------------------------------------------
# Mitidieri identity for smooth radial profiles


@dataclass(frozen=True)
class RadialProfile:
    """u(r) given by a polynomial in r with u(1) = u'(1) = 0 and u'(0) = 0."""

    coeffs: tuple

    def __post_init__(self):
        P = np.polynomial.Polynomial(self.coeffs)
        d = P.deriv()
        if abs(P(1.0)) > 1e-12 or abs(d(1.0)) > 1e-12 or abs(d(0.0)) > 1e-12:
            raise ValueError("profile must satisfy u(1) = u'(1) = 0 and u'(0) = 0")

    @classmethod
    def bump(cls, k: int = 2, shape=(1.0,)):
        """(1 - r^2)^k times a polynomial in r^2 with coefficients ``shape``."""
        if k < 2:
            raise ValueError("k >= 2 keeps u'(1) = 0")
        base = np.polynomial.Polynomial([1.0, 0.0, -1.0]) ** k
        s = np.polynomial.Polynomial(np.ravel([[c, 0.0] for c in shape])[:-1] if len(shape) else [0.0])
        return cls(tuple((base * s).coef))

    def poly(self):
        return np.polynomial.Polynomial(self.coeffs)


@dataclass
class MitidieriResult:
    lhs: float
    rhs: float
    magnitude: float  # L1 mass of the integrands, the scale for the relative error

    @property
    def difference(self):
        return self.lhs - self.rhs

    @property
    def relative(self):
        return abs(self.difference) / self.magnitude if self.magnitude > 0 else 0.0


def mitidieri_check(u: RadialProfile, v: RadialProfile, N: int, order: int | None = None) -> MitidieriResult:
    """int (Lap v (x.grad u) + Lap u (x.grad v)) = (N-2) int grad u . grad v on the unit ball.

    Boundary terms vanish because u' = v' = 0 on the sphere. With polynomial
    profiles every radial integrand is a polynomial, so Gauss-Legendre is exact.
    """
    P, Q = u.poly(), v.poly()
    deg = P.degree() + Q.degree() + N + 2
    n = order or deg // 2 + 2
    t, wt = legendre.leggauss(n)
    r = 0.5 * (t + 1.0)
    wr = 0.5 * wt * sphere_area(N) * r ** (N - 1)
    du, dv = P.deriv()(r), Q.deriv()(r)

    def lap(F):
        d1, d2 = F.deriv(), F.deriv(2)
        # (N-1) u'/r is a polynomial because u'(0) = 0
        quot = np.polynomial.Polynomial(d1.coef[1:]) if d1.degree() >= 1 else np.polynomial.Polynomial([0.0])
        return d2(r) + (N - 1) * quot(r)

    a, b, c = wr * lap(Q) * r * du, wr * lap(P) * r * dv, (N - 2) * wr * du * dv
    # scale by the L1 mass of the integrands so that identities with both sides zero
    # are judged against round-off in the individual terms
    mass = float(np.sum(np.abs(a)) + np.sum(np.abs(b)) + np.sum(np.abs(c)))
    return MitidieriResult(float(np.sum(a) + np.sum(b)), float(np.sum(c)), mass)
