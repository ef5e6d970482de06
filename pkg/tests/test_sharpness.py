import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hrlab.constants import lambda_p
from hrlab.geometry import Ball, Box, RidgeProximity
from hrlab.quadrature import QuadratureSpec, grid_integrate
from hrlab.sharpness import (SequenceField, SequenceParams, laplacian_lower_bound, make_params,
                             rayleigh_hessian, rayleigh_laplacian, ridge_cutoff_jet, sharpness_sweep,
                             smooth_step, theta_eps_jet, theta_eps_profile, theta_profile,
                             u_eps_jet, u_eps_profile)
from sampling import interior_points

DISC = Ball((0.0, 0.0), 1.0)
RECT = Box((0.0, 0.0), (2.0, 1.0))


def _fd_check(f, t, h=1e-6, rtol=1e-5, atol=1e-7):
    v0, v1, v2 = f(t)
    fp, fm = f(t + h)[0], f(t - h)[0]
    assert np.allclose((fp - fm) / (2 * h), v1, rtol=rtol, atol=atol)
    gp, gm = f(t + h)[1], f(t - h)[1]
    assert np.allclose((gp - gm) / (2 * h), v2, rtol=rtol, atol=atol * 100)


def test_smooth_step_endpoints_and_derivatives():
    v, d1, d2 = smooth_step(np.array([-1.0, 0.0, 0.5, 1.0, 2.0]))
    assert np.allclose(v, [0, 0, 0.5, 1, 1]) and d1[0] == d1[-1] == 0
    _fd_check(smooth_step, np.linspace(0.05, 0.95, 37))
    _fd_check(lambda t: smooth_step(t, 0.45), np.linspace(0.05, 0.95, 37))


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_smooth_step_is_monotone(a, b):
    lo, hi = sorted((a, b))
    assert smooth_step(lo)[0] <= smooth_step(hi)[0]


def test_theta_transition_window():
    v = theta_profile(np.array([0.0, 0.25, 0.375, 0.5, 1.0]))[0]
    assert np.allclose(v, [0, 0, 0.5, 1, 1])


def test_profiles_match_finite_differences():
    prm = SequenceParams(2.0, 0.1, 0.12)
    s = np.geomspace(prm.band[0] * 1.01, 0.5, 60)
    _fd_check(lambda t: theta_eps_profile(t, prm), s, h=1e-8, rtol=1e-4, atol=1e-3)
    _fd_check(lambda t: u_eps_profile(t, prm), s, h=1e-8, rtol=1e-4, atol=1e-6)


def test_band_and_alpha():
    prm = SequenceParams(3.0, 0.05, 0.1)
    assert prm.alpha == pytest.approx(5 / 3 + 0.05)
    assert prm.band == pytest.approx((0.05 ** 1.75, 0.05 ** 1.5))
    s = np.array([prm.eps ** 2 * 0.9, prm.band[0] * 0.999, prm.band[1] * 1.001, 0.6])
    assert np.allclose(theta_eps_profile(s, prm)[0], [0, 0, 1, 1])


@pytest.mark.parametrize("bad", [dict(p=1.0, eps=0.1, r=0.1), dict(p=2, eps=0.0, r=0.1),
                                 dict(p=2, eps=0.1, r=0.0)])
def test_params_validation(bad):
    with pytest.raises(ValueError):
        SequenceParams(**bad)


def test_band_must_clear_the_tube():
    with pytest.raises(ValueError):
        make_params(DISC, 2.0, 0.9, r=0.4)


@pytest.mark.parametrize("domain", [DISC, RECT, Ball((0.0, 0.0, 0.0), 1.0)], ids=repr)
def test_jets_vanish_near_boundary_and_ridge(domain):
    prm = make_params(domain, 2.0, 0.1)
    x = interior_points(domain, 3000, np.random.default_rng(0), clearance=1e-4)
    j = u_eps_jet(domain, prm, x, check=False)
    d = domain._delta(x)
    rd = domain.ridge_distance(x)
    dead = (d < prm.eps ** 2) | (rd < prm.r)
    assert dead.any()
    assert np.all(j.u[dead] == 0) and np.all(j.grad[dead] == 0)
    assert np.array_equal(j.lap, np.trace(j.hess, axis1=1, axis2=2))


def test_admissibility_check():
    prm = make_params(DISC, 2.0, 0.1)
    with pytest.raises(RidgeProximity):
        u_eps_jet(DISC, prm, np.array([[0.01, 0.0]]))


@pytest.mark.parametrize("domain", [DISC, RECT], ids=repr)
def test_u_eps_jet_matches_finite_differences(domain):
    prm = make_params(domain, 2.0, 0.2)
    rng = np.random.default_rng(1)
    x = interior_points(domain, 300, rng, clearance=0.02)
    x = x[domain.ridge_distance(x) > 0.5 * prm.r]
    j = u_eps_jet(domain, prm, x)
    h = 1e-6
    for i in range(domain.N):
        e = np.zeros(domain.N)
        e[i] = h
        up, um = u_eps_jet(domain, prm, x + e, check=False), u_eps_jet(domain, prm, x - e, check=False)
        scale = 1 + np.abs(j.grad).max()
        assert np.allclose((up.u - um.u) / (2 * h), j.grad[:, i], atol=1e-6 * scale)
        assert np.allclose((up.grad - um.grad) / (2 * h), j.hess[:, :, i], atol=1e-4 * (1 + np.abs(j.hess).max()))


def test_ridge_cutoff_is_smooth_across_box_diagonals():
    # near a corner two ridge pieces are equally close; the product stays differentiable
    prm = make_params(RECT, 2.0, 0.1)
    x = np.array([[0.3, 0.2 + t] for t in np.linspace(-0.02, 0.02, 9)])
    x = x[RECT.nearest_face(x) == RECT.nearest_face(x[:1])]
    c, g, H = ridge_cutoff_jet(RECT, x, prm.r)
    assert np.all(np.isfinite(g)) and np.all(np.isfinite(H))


@pytest.mark.parametrize("eps", [0.1, 0.02])
def test_theta_gradient_scaling_on_the_band(eps):
    # delta |grad theta_eps| ln(1/eps) equals |theta'(xi)| inside the band
    prm = make_params(DISC, 2.0, eps)
    s = np.geomspace(*prm.band, 400)
    x = np.stack([1.0 - s, np.zeros_like(s)], axis=1)
    _, g, _ = theta_eps_jet(DISC, prm, x)
    scaled = s * np.linalg.norm(g, axis=1) * prm.log_scale
    sup_theta1 = np.max(theta_profile(np.linspace(0, 1, 20001))[1])
    assert np.max(scaled) <= sup_theta1 * (1 + 1e-9)
    assert np.max(scaled) >= 0.99 * sup_theta1


def _grid_quotient(domain, prm):
    fld = SequenceField(domain, prm)
    spec = QuadratureSpec(target_rel_error=1e-8, ridge_margin=prm.r, transverse_panels=4)

    def F(x):
        j = u_eps_jet(domain, prm, x, check=False)
        d = domain._delta(x)
        H = np.sqrt(np.sum(j.hess ** 2, axis=(1, 2)))
        return np.stack([H ** prm.p, np.linalg.norm(j.grad, axis=1) ** prm.p / d ** prm.p])

    res = grid_integrate(domain, F, spec, delta_range=(fld.delta_support[0], None),
                         breakpoints=fld.breakpoints, strict=False)
    return res.value[0] / res.value[1]


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_ball_quotient_by_two_routes(p):
    # the ball sweep uses the co-area formula; the Cartesian grid is the second route
    prm = make_params(DISC, p, 0.1)
    assert rayleigh_hessian(DISC, p, 0.1).value == pytest.approx(_grid_quotient(DISC, prm), rel=1e-6)


def test_laplacian_equals_hessian_quotient_at_p2():
    for eps in (0.2, 0.05):
        qh, ql = rayleigh_hessian(DISC, 2.0, eps), rayleigh_laplacian(DISC, 2.0, eps)
        assert ql.value == pytest.approx(qh.value, rel=1e-9)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_sweep_on_ball_respects_the_lower_bounds(p):
    rows = sharpness_sweep(DISC, p, (0.2, 0.1, 0.05, 0.02))
    lam = lambda_p(p)
    assert all(r.Q_H >= lam - r.Q_H_error for r in rows)
    assert all(r.Q_Lap >= laplacian_lower_bound(p, 2) - r.Q_Lap_error for r in rows)
    assert all(r.decreasing for r in rows)
    assert all(r.gap == pytest.approx(r.Q_H - lam) for r in rows)


@pytest.mark.slow
def test_box_quotient_is_finite_and_above_lambda():
    q = rayleigh_hessian(RECT, 2.0, 0.2)
    assert np.isfinite(q.value) and q.value >= lambda_p(2.0)


def test_sweep_rejects_unsorted_eps():
    with pytest.raises(ValueError):
        sharpness_sweep(DISC, 2.0, (0.1, 0.2))
    assert sharpness_sweep(DISC, 2.0, ()) == []


def test_sweep_threads_give_identical_rows(monkeypatch):
    serial = sharpness_sweep(DISC, 2.0, (0.2, 0.1))
    monkeypatch.setenv("HRLAB_THREADS", "2")
    assert sharpness_sweep(DISC, 2.0, (0.2, 0.1)) == serial
