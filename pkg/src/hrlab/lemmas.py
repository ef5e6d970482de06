"""Randomised checks of the elementary vector inequalities used in the estimates."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

REL_TOL = 1e-12
DEFAULT_SEED = 20240611


def _norm(v):
    return np.linalg.norm(v, axis=-1)


def _signed_power(v, p):
    """|v|^{p-2} v, taken as 0 at v = 0."""
    n = _norm(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(n > 0, n ** (p - 2.0), 0.0)
    return f[..., None] * v


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _taylor_defect(a, b, p):
    """(|a+b|^p - |a|^p - p |a|^{p-2} a.b, absolute scale of the three terms)."""
    t1 = _norm(a + b) ** p
    t2 = _norm(a) ** p
    t3 = p * _dot(_signed_power(a, p), b)
    return t1 - t2 - t3, np.abs(t1) + np.abs(t2) + np.abs(t3)


def _pl_gamma_objective(p):
    def neg(z):
        s, phi = np.exp(z[0]), z[1]
        a = np.array([[s * np.cos(phi), s * np.sin(phi)]])
        return -_taylor_defect(a, np.array([[1.0, 0.0]]), p)[0][0]
    return neg


@lru_cache(maxsize=64)
def estimate_gamma_p(p: float, headroom: float = 0.05) -> float:
    """Numerical sup of (|a+b|^p - |a|^p - p|a|^{p-2}a.b) / |b|^p for 1 < p < 2.

    By rotation invariance and homogeneity it suffices to take b = e1 and a in the
    plane. A log-polar grid locates the maximum, Nelder-Mead polishes the best
    candidates, and the result is padded by ``headroom``.
    """
    if not 1 < p < 2:
        raise ValueError("gamma_p is only needed for 1 < p < 2")
    s = np.concatenate([[0.0], np.logspace(-4, 3, 400)])
    phi = np.linspace(0.0, np.pi, 361)
    S, PHI = np.meshgrid(s, phi, indexing="ij")
    a = np.stack([S * np.cos(PHI), S * np.sin(PHI)], axis=-1)
    b = np.broadcast_to(np.array([1.0, 0.0]), a.shape)
    vals = _taylor_defect(a, b, p)[0]
    best = float(vals.max())
    neg = _pl_gamma_objective(p)
    flat = np.argsort(vals.ravel())[::-1][:5]
    for k in flat:
        i, j = np.unravel_index(k, vals.shape)
        if S[i, j] == 0:
            continue
        res = minimize(neg, [np.log(S[i, j]), PHI[i, j]], method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000})
        best = max(best, -float(res.fun))
    return best * (1.0 + headroom)


@dataclass
class LemmaCheck:
    lemma: str
    p: float
    samples: int
    violations: int
    worst_excess: float
    counterexamples: list = field(default_factory=list)

    @property
    def ok(self):
        return self.violations == 0


def sample_pairs(count: int, rng: np.random.Generator, dim: int):
    """Random vector pairs with log-uniform magnitudes in [1e-6, 1e6].

    About a fifth of the pairs are made collinear (b = t a), where several of the
    inequalities are tight, and a few contain exact zeros.
    """
    def vecs():
        d = rng.standard_normal((count, dim))
        d /= np.maximum(_norm(d)[:, None], 1e-300)
        return d * 10.0 ** rng.uniform(-6, 6, count)[:, None]

    a, b = vecs(), vecs()
    col = rng.random(count) < 0.2
    t = rng.choice([-1.0, 1.0], count) * 10.0 ** rng.uniform(-6, 6, count)
    b[col] = t[col, None] * a[col]
    z = rng.random(count)
    a[z < 0.01] = 0.0
    b[(z >= 0.01) & (z < 0.02)] = 0.0
    return a, b


def fuzz_lemmas(p: float, sample_count: int = 100_000, seed: int = DEFAULT_SEED) -> list[LemmaCheck]:
    """Check every inequality applicable at exponent p on random pairs.

    Dimensions 1..8 are cycled so each gets about the same share of samples.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    if not p > 1:
        raise ValueError("p must exceed 1")
    rng = np.random.default_rng(seed)
    dims = np.arange(sample_count) % 8 + 1
    parts = [sample_pairs(int((dims == d).sum()), rng, int(d)) for d in range(1, 9)]
    checks: list[LemmaCheck] = []

    def run(name, fn):
        res = [fn(a, b) for a, b in parts if a.shape[0]]
        lhs = np.concatenate([r[0] for r in res])
        rhs = np.concatenate([r[1] for r in res])
        sc = np.concatenate([r[2] for r in res])
        bad = (lhs - rhs) / np.maximum(sc, 1e-300) > REL_TOL
        cex = []
        if bad.any():
            flat = [(a[k], b[k]) for a, b in parts for k in range(a.shape[0])]
            cex = [{"a": flat[k][0].tolist(), "b": flat[k][1].tolist()} for k in np.flatnonzero(bad)[:3]]
        ex = (lhs - rhs) / np.maximum(sc, 1e-300)
        checks.append(LemmaCheck(name, p, int(lhs.size), int(bad.sum()),
                                 float(ex.max(initial=-np.inf)), cex))

    if p >= 2:
        def taylor_upper(a, b):
            d, sc = _taylor_defect(a, b, p)
            r = 0.5 * p * (p - 1) * (_norm(a) + _norm(b)) ** (p - 2) * _norm(b) ** 2
            return d, r, sc + r
        run("taylor_upper_p_ge_2", taylor_upper)

        def monotone_ge_2(a, b):
            lhs = _dot(_signed_power(a, p) - _signed_power(b, p), a - b)
            r = 2.0 ** (2 - p) * _norm(a - b) ** p
            sc = np.abs(_dot(_signed_power(a, p), a - b)) + np.abs(_dot(_signed_power(b, p), a - b)) + r
            return r, lhs, sc
        run("monotone_p_ge_2", monotone_ge_2)
    else:
        gamma = estimate_gamma_p(p)

        def taylor_upper_lt2(a, b):
            d, sc = _taylor_defect(a, b, p)
            r = gamma * _norm(b) ** p
            return d, r, sc + r
        run("taylor_upper_p_lt_2", taylor_upper_lt2)

        def monotone_lt_2(a, b):
            lhs = _dot(_signed_power(a, p) - _signed_power(b, p), a - b)
            r = (p - 1) * _norm(a - b) ** 2 / (1 + _norm(a) ** 2 + _norm(b) ** 2) ** ((2 - p) / 2)
            sc = np.abs(_dot(_signed_power(a, p), a - b)) + np.abs(_dot(_signed_power(b, p), a - b)) + r
            return r, lhs, sc
        run("monotone_p_lt_2", monotone_lt_2)

    # sub-additivity of |.|^s for exponents s in (0, 1] derived from p
    for s, tag in ((1.0 / p, "1/p"), (p / 2.0, "p/2")):
        if not 0 < s <= 1:
            continue

        def subadditive(a, b, s=s):
            t1, t2, t3 = _norm(a + b) ** s, _norm(a) ** s, _norm(b) ** s
            return t1 - t2, t3, t1 + t2 + t3
        run(f"subadditive_s={tag}", subadditive)

    def scalar_convex(a, b):
        x, y = np.abs(a[:, 0]), np.abs(b[:, 0])
        lhs = (x + y) ** p
        rhs = 2.0 ** (p - 1) * (x ** p + y ** p)
        return lhs, rhs, lhs + rhs
    run("scalar_power_mean", scalar_convex)

    def scalar_concave(a, b):
        q = 1.0 / p
        x, y = np.abs(a[:, 0]), np.abs(b[:, 0])
        lhs = (x + y) ** q
        rhs = x ** q + y ** q
        return lhs, rhs, lhs + rhs
    run("scalar_subadditive", scalar_concave)
    return checks
