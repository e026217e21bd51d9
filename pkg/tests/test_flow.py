import math

import numpy as np
import pytest

from ricci3.catalog import catalog_metric
from ricci3.chart import MetricChart
from ricci3.curvature import connection
from ricci3.flow import (ODE_CASES, _gamma_fn, FlowError, StepRejected, VectorField, evolution_residuals,
                         integrate_flow, integrate_geodesic, ode_case, ode_suite,
                         parallel_transport, relative_residual, stencil_derivative)


def hopf():
    e = catalog_metric("round-sphere")
    return e.chart, VectorField.from_chart(e.chart, e.fields["hopf"], "hopf"), e.start


def test_hopf_fibre_closed_form():
    ch, vf, start = hopf()
    tr = integrate_flow(ch, vf, start, dt=1e-3, n=1500)
    s = tr.s
    exact = np.stack([0 * s, np.cos(s), np.sin(s)], axis=1)
    assert np.abs(tr.points - exact).max() < 1e-12
    assert np.allclose(np.abs(tr.observables["omega"]), 2.0, atol=1e-9)


def test_fast_christoffel_matches_connection():
    for name in ("round-sphere", "su2-berger", "nil", "s2xr"):
        ch = catalog_metric(name).chart
        pts = ch.sample(6, 4)
        assert np.allclose(_gamma_fn(ch)(pts), connection(ch, pts, second=False)[2],
                           atol=1e-13), name


def test_hopf_transported_pair_stays_transverse():
    # the fibre is a geodesic, so parallel x, y stay orthogonal to k and the
    # twist keeps one sign
    ch, vf, start = hopf()
    tr = integrate_flow(ch, vf, start, dt=1e-2, n=628)
    g = ch.metric(tr.points)
    F = tr.frames
    gram = np.einsum("nij,nai,nbj->nab", g, F, F)
    assert np.allclose(gram, np.eye(3), atol=1e-8)
    w = tr.observables["omega"]
    assert np.allclose(w, w[0], atol=1e-9)
    assert relative_residual(evolution_residuals(ch, tr)["omega"]).max() < 1e-6


def test_rk4_fourth_order():
    ch, vf, start = hopf()
    errs = []
    for dt in (0.1, 0.05, 0.025):
        tr = integrate_flow(ch, vf, start, dt=dt, n=int(round(1.0 / dt)), monitor=False)
        errs.append(np.abs(tr.endpoint - [0, math.cos(1.0), math.sin(1.0)]).max())
    assert errs[0] / errs[1] > 12 and errs[1] / errs[2] > 12


def test_step_monitor_rejects_large_steps():
    ch, vf, start = hopf()
    with pytest.raises(StepRejected):
        integrate_flow(ch, vf, start, dt=0.5, n=3)


def test_boundary_truncates():
    ch = catalog_metric("flat").chart
    tr = integrate_flow(ch, "1,0,0", (4.0, 0, 0), dt=0.1, n=100)
    assert tr.boundary
    assert tr.points[:, 0].max() < 5.0
    assert len(tr) < 101


def test_radial_flat_flow_laws():
    e = catalog_metric("flat")
    vf = VectorField.from_chart(e.chart, e.fields["radial"], "radial")
    tr = integrate_flow(e.chart, vf, (0.5, 0.2, 0.1), dt=1e-3, n=1000, mu=0.0)
    r0 = np.linalg.norm([0.5, 0.2, 0.1])
    r = r0 + tr.s
    assert np.allclose(tr.observables["theta"], 2 / r, atol=1e-9)
    assert np.allclose(tr.observables["sigma_abs2"], 0.0, atol=1e-12)
    for law in ("omega", "sigma_abs2", "H", "rho_abs2"):
        assert relative_residual(evolution_residuals(e.chart, tr)[law]).max() < 1e-6, law


def test_theta_law_on_cosh_warped():
    a = 0.6
    e = catalog_metric("cosh-warped", {"a": a})
    tr = integrate_flow(e.chart, "k", (0.1, 0.2, -1.5), dt=1e-3, n=3000, mu=2 * a * a)
    res = evolution_residuals(e.chart, tr)
    for law in ("theta", "omega", "sigma_abs2", "H"):
        assert relative_residual(res[law]).max() < 1e-6, law
    # Ric(k,k) = -mu here, so |rho|^2 picks up -(theta/2) Ric(k,k) = mu theta / 2
    assert relative_residual(res["rho_abs2"]).max() > 1e-2
    th = tr.observables["theta"]
    corrected = res["rho_abs2"][0] - a * a * th
    assert np.abs(corrected).max() < 1e-6


def test_transported_pair_stays_orthonormal():
    e = catalog_metric("su2-berger")
    tr = integrate_flow(e.chart, "k", e.start, dt=1e-3, n=800)
    g = e.chart.metric(tr.points)
    F = tr.frames
    gram = np.einsum("nij,nai,nbj->nab", g, F[:, 1:], F[:, 1:])
    assert np.allclose(gram, np.eye(2), atol=1e-9)
    assert tr.drift.max() < 1e-9


def test_geodesic_on_sphere_keeps_speed():
    ch = catalog_metric("round-sphere").chart
    tr = integrate_geodesic(ch, (0.1, 0.2, 0.0), (0.3, 0.1, 0.2), dt=1e-3, n=1000)
    v = tr.frames[:, 0]
    speed = np.einsum("nij,ni,nj->n", ch.metric(tr.points), v, v)
    assert np.allclose(speed, speed[0], rtol=1e-10)


def test_flat_geodesic_is_straight():
    ch = catalog_metric("flat").chart
    tr = integrate_geodesic(ch, (0.0, 0.0, 0.0), (1.0, 0.5, -0.2), dt=1e-2, n=100)
    assert np.allclose(tr.endpoint, [1.0, 0.5, -0.2], atol=1e-12)


def test_parallel_transport_preserves_inner_products():
    ch = MetricChart.from_strings({"g11": "1", "g22": "exp(2*z)", "g33": "1 + x^2"},
                                  "(-2,2)x(-2,2)x(-2,2)")
    tr = integrate_geodesic(ch, (0.1, 0.0, -0.2), (0.2, 0.4, 0.3), dt=1e-3, n=1000)
    v, w = parallel_transport(ch, tr, [1.0, 0.0, 0.5], [0.0, 1.0, 0.0])
    g = ch.metric(tr.points)
    ip = lambda a, b: np.einsum("nij,ni,nj->n", g, a, b)
    assert np.allclose(ip(v, v), ip(v, v)[0], rtol=1e-9)
    assert np.allclose(ip(v, w), ip(v, w)[0], atol=1e-9)
    assert np.allclose(ip(v, tr.frames[:, 0]), ip(v, tr.frames[:, 0])[0], atol=1e-9)


def test_stencil_exact_on_quartics():
    s = np.linspace(0, 1, 21)
    f = 3 * s ** 4 - s ** 3 + 2 * s
    d = stencil_derivative(f, s[1] - s[0])
    assert np.allclose(d, 12 * s ** 3 - 3 * s ** 2 + 2, atol=1e-10)
    with pytest.raises(FlowError):
        stencil_derivative([1, 2, 3], 0.1)


@pytest.mark.parametrize("case", ODE_CASES)
def test_ode_cases_match_closed_forms(case):
    rep = ode_suite(ode_case(case), dt=1e-3)
    assert rep.max_abs_err < 1e-8, case
    assert rep.substitution_residual < 1e-9, case


def test_riccati_closed_form_shift():
    # theta0 != 0 shifts s in the tanh solution
    rep = ode_suite(ode_case("ray3", mu=1.0, theta0=0.5))
    a = math.sqrt(2)
    assert np.allclose(rep.closed_form, a * np.tanh(a * rep.s + math.atanh(0.5 / a)), atol=1e-12)
    assert rep.max_abs_err < 1e-8


def test_h_concave_crossing():
    rep = ode_suite(ode_case("h-concave", S=1.0, h0=1.0, dh0=0.5))
    x = rep.extras
    assert x["tangent_bound_violation"] <= 1e-12
    assert x["zero_crossing"] == pytest.approx(x["zero_crossing_exact"], abs=1e-6)


def test_ode_parameter_errors():
    with pytest.raises(FlowError):
        ode_suite(ode_case("ray3", mu=-1.0))
    with pytest.raises(FlowError):
        ode_case("nonsense")
    with pytest.raises(FlowError):
        ode_suite(ode_case("g-decay", mu=1.0, theta0=3.0))
