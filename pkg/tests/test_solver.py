import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from hrlab.geometry import sphere_area
from hrlab.solver import (InvalidExponents, LambdaThresholdWarning, NonConvergence, ProblemSpec,
                          RadialField, RadialMesh, RadialProfile, ThresholdViolated,
                          boundary_laplacian, direct_minimize, energy, energy_parts,
                          gradient_action, lambda_threshold, mitidieri_check, mountain_pass,
                          mountain_pass_lower_bound, nehari_level, nonexistence_probe, operators,
                          pohozaev_report, residual)
from hrlab.solver import _gradient_free, _hessian_free
from sampling import PAIRS, finite_difference_orders, random_field

SUBLINEAR = ProblemSpec(3, 2.5, 1.5, 0.0)


def _bump(mesh):
    return RadialField.from_function(mesh, lambda r: (1 - r * r) ** 2)


# ---- discretisation -------------------------------------------------------

def test_mesh_grading_and_refinement():
    mesh = RadialMesh(3, nodes=50, grading=10.0)
    ops = operators(mesh)
    assert ops.r[0] == 0 and ops.r[-1] == 1 and np.all(np.diff(ops.r) > 0)
    assert ops.h[0] / ops.h[-1] == pytest.approx(10.0)
    assert mesh.refined().nodes == 100
    assert ops.W.sum() == pytest.approx(sphere_area(3) / 3)
    for bad in (dict(N=1), dict(N=3, nodes=4), dict(N=3, grading=0.5)):
        with pytest.raises(ValueError):
            RadialMesh(**bad)


def test_discrete_laplacian_is_second_order():
    # Lap (1 - r^2)^2 = -4N + (4N + 8) r^2
    errs = []
    for M in (100, 200, 400):
        mesh = RadialMesh(3, nodes=M)
        u = _bump(mesh)
        r = operators(mesh).r
        errs.append(np.max(np.abs(u.laplacian()[:-1] - (-12 + 20 * r[:-1] ** 2))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


@pytest.mark.parametrize("N,p,q,lam", [(3, 2.5, 1.5, -1.0), (5, 2.0, 3.0, 0.0), (2, 1.6, 1.2, 0.01)])
def test_energy_parts_converge_to_closed_form(N, p, q, lam):
    spec = ProblemSpec(N, p, q, lam)
    S = sphere_area(N)
    kink = math.sqrt(4 * N / (4 * N + 8))
    lap = S * quad(lambda r: abs(-4 * N + (4 * N + 8) * r * r) ** p * r ** (N - 1), 0, 1,
                   points=[kink], epsrel=1e-13)[0]
    hardy = S * quad(lambda r: (4 * r * (1 + r)) ** p * r ** (N - 1), 0, 1, epsrel=1e-13)[0]
    power = S * quad(lambda r: (1 - r * r) ** (2 * q) * r ** (N - 1), 0, 1, epsrel=1e-13)[0]
    errs = []
    for M in (200, 400):
        e = energy_parts(spec, _bump(RadialMesh(N, nodes=M)))
        errs.append(np.abs([e.laplacian / lap - 1, e.hardy / hardy - 1, e.power / power - 1]))
    assert np.all(errs[1] < 1e-4) and np.all(errs[0] / errs[1] > 3.5)
    exact = lap / p - lam * hardy / p - power / q
    assert energy(spec, _bump(RadialMesh(N, nodes=400))) == pytest.approx(exact, rel=1e-4)


def test_field_validation_and_csv():
    mesh = RadialMesh(2, nodes=10)
    with pytest.raises(ValueError):
        RadialField(mesh, np.ones(11))
    with pytest.raises(ValueError):
        RadialField(mesh, np.ones(5))
    u = _bump(mesh)
    lines = u.to_csv().splitlines()
    assert lines[0] == "r,u" and len(lines) == 12 and lines[-1].endswith(",0")


@settings(max_examples=25)
@given(t=st.floats(0.01, 50.0))
def test_energy_scaling_along_rays(t):
    # I[t w] = t^p (A - lam H)/p - t^q B/q exactly on the discrete level
    spec = ProblemSpec(3, 2.5, 1.5, -0.5)
    w = _bump(RadialMesh(3, nodes=60))
    e = energy_parts(spec, w)
    tw = RadialField(w.mesh, t * w.values)
    want = t ** 2.5 * (e.laplacian - spec.lam * e.hardy) / 2.5 - t ** 1.5 * e.power / 1.5
    assert energy(spec, tw) == pytest.approx(want, rel=1e-10)


# ---- gradient and Hessian -------------------------------------------------

@pytest.mark.parametrize("spec", [ProblemSpec(5, 2.0, 3.0, 0.0), ProblemSpec(3, 2.5, 1.5, -1.0),
                                  ProblemSpec(3, 3.0, 4.0, -0.2)], ids=str)
def test_gradient_consistency_order(spec):
    assert min(finite_difference_orders(spec)) >= 1.9


def test_hessian_matches_gradient_differences():
    # central differences of the gradient converge to the Hessian at second order
    spec = ProblemSpec(3, 2.5, 3.0, -0.5)
    mesh = RadialMesh(3, nodes=40)
    ops = operators(mesh)
    x = random_field(mesh, np.random.default_rng(4), 1.0).free
    H = _hessian_free(spec, ops, x)
    scale = np.abs(H).max()

    def worst(h):
        out = 0.0
        for k in range(x.size):
            e = np.zeros_like(x)
            e[k] = h
            fd = (_gradient_free(spec, ops, x + e) - _gradient_free(spec, ops, x - e)) / (2 * h)
            out = max(out, np.abs(fd - H[:, k]).max() / scale)
        return out

    coarse, fine = worst(1e-6), worst(1e-7)
    assert fine < 1e-5 and coarse / fine > 50


# ---- problem specification ------------------------------------------------

def test_lambda_gate():
    safe, hard = lambda_threshold(3.0, 3)
    assert safe < hard == pytest.approx(8 / 27)
    assert lambda_threshold(2.0, 5) == (0.25, 0.25)
    with pytest.raises(ThresholdViolated):
        ProblemSpec(3, 3.0, 1.5, hard)
    with pytest.warns(LambdaThresholdWarning):
        ProblemSpec(3, 3.0, 1.5, 0.5 * (safe + hard))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ProblemSpec(3, 3.0, 1.5, 0.5 * safe)
    with pytest.raises(InvalidExponents):
        ProblemSpec(3, 1.0, 1.5)
    assert ProblemSpec(5, 2.0, 3.0).critical_exponent == 10
    assert ProblemSpec(3, 2.0, 3.0).critical_exponent == math.inf


# ---- minimisation ---------------------------------------------------------

def test_minimizer_energy_decreases_monotonically():
    cp = direct_minimize(SUBLINEAR, RadialMesh(3, nodes=200))
    E = [e for e, _ in cp.history]
    # the only permitted rise is within round-off of the energy itself
    assert all(b <= a + 1e-13 * abs(a) for a, b in zip(E, E[1:]))
    assert cp.energy < 0 and cp.residual < 1e-10 and cp.kind == "minimizer"


@pytest.mark.parametrize("lam", [0.0, -1.0])
def test_minimizer_mesh_convergence(lam):
    spec = ProblemSpec(3, 2.5, 1.5, lam)
    a = direct_minimize(spec, RadialMesh(3, nodes=200))
    b = direct_minimize(spec, RadialMesh(3, nodes=400))
    assert abs(b.energy / a.energy - 1) < 0.01
    assert abs(b.pohozaev.imbalance) < abs(a.pohozaev.imbalance)


def test_minimizer_is_positive_and_decreasing():
    u = direct_minimize(SUBLINEAR, RadialMesh(3, nodes=200)).field.values
    assert np.all(u[:-1] > 0) and np.all(np.diff(u) <= 1e-15)


def test_sublinear_regime_required():
    with pytest.raises(InvalidExponents):
        direct_minimize(ProblemSpec(3, 2.5, 3.0))


def test_non_convergence_is_reported():
    with pytest.raises(NonConvergence) as exc:
        direct_minimize(SUBLINEAR, RadialMesh(3, nodes=200), max_iter=1)
    assert exc.value.iterate is not None


# ---- mountain pass --------------------------------------------------------

@pytest.fixture(scope="module")
def saddle():
    spec = ProblemSpec(5, 2.0, 3.0, 0.0)
    return spec, mountain_pass(spec, RadialMesh(5, nodes=200))


def test_mountain_pass_level(saddle):
    spec, cp = saddle
    mesh = cp.field.mesh
    assert cp.kind == "mountain_pass" and cp.residual < 1e-4 and cp.energy > 0
    assert cp.energy >= mountain_pass_lower_bound(spec, mesh)
    assert cp.info["morse_index"] == 1
    assert cp.energy == pytest.approx(nehari_level(spec, mesh), rel=1e-8)
    assert cp.info["endpoint_energy"] < 0


def test_mountain_pass_regime_checks():
    for spec in (ProblemSpec(5, 2.0, 3.0, 0.1), ProblemSpec(5, 2.0, 1.5), ProblemSpec(5, 2.0, 11.0)):
        with pytest.raises(InvalidExponents):
            mountain_pass(spec, RadialMesh(5, nodes=50))


# ---- non-existence --------------------------------------------------------

def test_probe_regime_check():
    with pytest.raises(InvalidExponents):
        nonexistence_probe(ProblemSpec(5, 2.0, 3.0, -0.1))


@pytest.mark.slow
def test_probe_boundary_case_q_equal_critical():
    cp = nonexistence_probe(ProblemSpec(5, 2.0, 10.0, -0.1), RadialMesh(5, nodes=200))
    assert cp.kind == "trivial" and cp.field.max_abs() < 1e-8
    for cand in cp.info["rejected_candidates"]:
        assert cand["outcome"] != "accepted"


# ---- Pohozaev and Mitidieri -----------------------------------------------

def test_pohozaev_of_zero():
    mesh = RadialMesh(3, nodes=50)
    rep = pohozaev_report(SUBLINEAR, RadialField(mesh, np.zeros(51)))
    assert rep.lhs == rep.rhs == rep.imbalance == 0 and rep.relative_imbalance == 0
    assert rep.normal_factor_min == 0.0


def test_boundary_laplacian_extrapolation():
    # Lap (1 - r^2)^2 at r = 1 is 8 for N = 3
    vals = [boundary_laplacian(_bump(RadialMesh(3, nodes=M))) for M in (200, 400)]
    assert abs(vals[1] - 8) < abs(vals[0] - 8) < 0.05


def test_residual_scale_free(saddle):
    spec, cp = saddle
    assert residual(spec, cp.field) == pytest.approx(cp.residual)
    assert residual(spec, RadialField(cp.field.mesh, np.zeros(cp.field.mesh.nodes + 1))) == 0.0


@pytest.mark.parametrize("N", [2, 3, 5])
@pytest.mark.parametrize("pair", PAIRS)
def test_mitidieri_identity(N, pair):
    (ku, su), (kv, sv) = pair
    res = mitidieri_check(RadialProfile.bump(ku, su), RadialProfile.bump(kv, sv), N)
    assert res.relative < 1e-12


def test_mitidieri_diagonal_and_zero():
    u = RadialProfile.bump(3, (1.0, 0.3))
    res = mitidieri_check(u, u, 3)
    assert res.lhs == pytest.approx(res.rhs, rel=1e-12)
    zero = RadialProfile((0.0,))
    assert mitidieri_check(zero, zero, 3).relative == 0.0
    with pytest.raises(ValueError):
        RadialProfile((1.0, 0.0, -0.5))
    with pytest.raises(ValueError):
        RadialProfile.bump(1)


def test_mitidieri_agrees_with_independent_quadrature():
    u, v = RadialProfile.bump(2, (1.0, 0.5)), RadialProfile.bump(3, (0.3,))
    N = 3
    P, Q = u.poly(), v.poly()
    lap = lambda F, r: F.deriv(2)(r) + (N - 1) * F.deriv()(r) / r
    S = sphere_area(N)
    first = S * quad(lambda r: lap(Q, r) * r * P.deriv()(r) * r ** (N - 1), 0, 1, epsrel=1e-13)[0]
    second = S * quad(lambda r: lap(P, r) * r * Q.deriv()(r) * r ** (N - 1), 0, 1, epsrel=1e-13)[0]
    res = mitidieri_check(u, v, N)
    assert res.lhs == pytest.approx(first + second, rel=1e-11)
