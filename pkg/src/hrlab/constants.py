"""Closed-form constants and the Bessel root used by the p=2 improved inequality."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass


class NoCriticalExponent(ValueError):
    """Raised when p >= N/2: the second-order embedding has no critical exponent."""


def _check_p(p: float):
    if not p > 1:
        raise ValueError(f"exponent p must exceed 1, got {p}")


def lambda_p(p: float) -> float:
    """Sharp constant ((p-1)/p)^p of the Hessian inequality."""
    _check_p(p)
    return ((p - 1.0) / p) ** p


def conjugate_max(p: float) -> float:
    return max(p, p / (p - 1.0))


def riesz_lower_bound(p: float, N: int) -> float:
    """Lower bound N^-p cot^-2p(pi / (2 p_max)) for the Hessian-by-Laplacian constant.

    The bound is stated for p != 2; at p = 2 the formula still evaluates (to N^-2)
    while the true constant is 1. Use ``is_formula_only`` to detect that case.
    """
    _check_p(p)
    if N < 2:
        raise ValueError("dimension must be at least 2")
    pm = conjugate_max(p)
    return N ** (-p) * math.tan(math.pi / (2.0 * pm)) ** (2.0 * p)


def is_formula_only(p: float) -> bool:
    return p == 2


def sobolev_critical(p: float, N: int) -> float:
    """p** = Np/(N-2p) for the embedding of W^{2,p}_0 into L^q."""
    _check_p(p)
    if p >= N / 2:
        raise NoCriticalExponent(f"p={p} >= N/2={N / 2}: every finite q is subcritical")
    return N * p / (N - 2.0 * p)


def mean_convex_remainder_coeff(p: float, N: int, H0: float) -> float:
    _check_p(p)
    if H0 < 0:
        raise ValueError("mean-convex remainder needs H0 >= 0")
    return p * H0 ** p / N ** (p - 1)


def beta_moment(N: int, p: float) -> float:
    """B_{N,2p} = Gamma((1+2p)/2) Gamma(N/2) / (sqrt(pi) Gamma((N+2p)/2))."""
    return (math.exp(math.lgamma((1 + 2 * p) / 2) + math.lgamma(N / 2)
                     - math.lgamma((N + 2 * p) / 2)) / math.sqrt(math.pi))


def edmunds_bound(p: float, N: int) -> float:
    _check_p(p)
    if p == 2:
        raise ValueError("the bound is only stated for p != 2")
    pm = conjugate_max(p)
    d = 2.0 if p < 2 else 2.0 * (p - 1.0)
    return (beta_moment(N, p) * N ** (-d) * math.tan(math.pi / (2 * pm)) ** (2 * p)
            * ((2 * p - 1) * (p - 1) / p ** 2) ** p)


# ---- Bessel functions by ascending series ---------------------------------

SERIES_RANGE = 12.0


def bessel_j(n: int, x: float) -> float:
    """J_n(x) for integer n >= 0 and |x| <= 12 by its power series."""
    if abs(x) > SERIES_RANGE:
        raise ValueError("series evaluation is only used for |x| <= 12")
    h = 0.5 * x
    term = h ** n / math.factorial(n)
    total = term
    h2 = h * h
    k = 0
    while True:
        k += 1
        term *= -h2 / (k * (k + n))
        total += term
        if abs(term) < 1e-17 * max(abs(total), 1e-300) and k > 2:
            break
    return total


def _hrr_function(x: float) -> float:
    return bessel_j(0, x) - 2.0 * x * bessel_j(1, x)


def _hrr_derivative(x: float) -> float:
    # J0' = -J1 and (x J1)' = x J0
    return -bessel_j(1, x) - 2.0 * x * bessel_j(0, x)


def bessel_lambda0(tol: float = 1e-15) -> float:
    """First positive zero of J0(x) - 2x J1(x).

    A coarse sign scan brackets the root, then safeguarded Newton steps refine it
    (a step leaving the bracket falls back to bisection).
    """
    step = 0.01
    a, fa = 0.0, _hrr_function(0.0)
    while True:
        b = a + step
        fb = _hrr_function(b)
        if fa * fb <= 0:
            break
        a, fa = b, fb
        if a > 3.0:
            raise RuntimeError("no sign change found on [0, 3]")
    x = 0.5 * (a + b)
    for _ in range(100):
        fx = _hrr_function(x)
        if fx == 0:
            return x
        if fa * fx < 0:
            b = x
        else:
            a, fa = x, fx
        d = _hrr_derivative(x)
        xn = x - fx / d if d != 0 else 0.5 * (a + b)
        if not a < xn < b:
            xn = 0.5 * (a + b)
        if abs(xn - x) < tol * max(1.0, abs(x)):
            return xn
        x = xn
    return x


@dataclass
class ConstantsReport:
    p: float
    N: int
    lambda_p: float
    C_pN: float
    C_pN_formula_only: bool
    p_star_star: float | None = None
    B_N2p: float | None = None
    edmunds_bound: float | None = None
    lambda0: float | None = None

    def as_dict(self):
        return asdict(self)


def constants_report(p: float, N: int) -> ConstantsReport:
    rep = ConstantsReport(p=p, N=N, lambda_p=lambda_p(p), C_pN=riesz_lower_bound(p, N),
                          C_pN_formula_only=is_formula_only(p))
    try:
        rep.p_star_star = sobolev_critical(p, N)
    except NoCriticalExponent:
        rep.p_star_star = None
    rep.B_N2p = beta_moment(N, p)
    rep.edmunds_bound = None if p == 2 else edmunds_bound(p, N)
    rep.lambda0 = bessel_lambda0()
    return rep
