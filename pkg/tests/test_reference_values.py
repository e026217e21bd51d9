"""Small hand-checkable values across the modules."""
import math

import numpy as np
import pytest

from ricci3.catalog import catalog_metric
from ricci3.chart import MetricChart, RankDeficient, gram_schmidt
from ricci3.curvature import christoffel, riemann, sectional
from ricci3.expr import eval_jet2, evaluate, parse_expression
from ricci3.flow import (VectorField, evolution_residuals, integrate_flow, integrate_geodesic,
                         parallel_transport)
from ricci3.identities import NA, bianchi_residuals, directional_derivative, scenario_residuals
from ricci3.triad import complex_triad_from, d_matrix, h_function, spin_coefficients


# ---- expressions ------------------------------------------------------------

@pytest.mark.parametrize("text,point,value", [
    ("4/(1+x^2+y^2+z^2)^2", (0, 0, 0), 4.0),
    ("sin(pi)", (0, 0, 0), 0.0),
    ("cosh(0)", (0, 0, 0), 1.0),
    ("exp(z)", (0, 0, 1), math.e),
])
def test_expression_values(text, point, value):
    assert evaluate(parse_expression(text), point) == pytest.approx(value, abs=1e-15)


def test_jet_of_monomial():
    j = eval_jet2(parse_expression("x^2*y"), (2.0, 3.0, 0.0))
    assert j.value == 12.0
    assert np.array_equal(j.gradient, [12.0, 4.0, 0.0])
    # upper triangle order xx, xy, xz, yy, yz, zz
    assert j.hessian_upper[0] == 6.0 and j.hessian_upper[1] == 4.0
    assert np.all(j.hessian_upper[2:] == 0.0)


# ---- chart ------------------------------------------------------------------

def test_gram_schmidt_euclidean():
    u1, u2 = gram_schmidt([2, 0, 0], [1, 1, 0], np.eye(3))
    assert np.allclose(u1, [1, 0, 0]) and np.allclose(u2, [0, 1, 0])


def test_gram_schmidt_weighted():
    g = np.diag([4.0, 1.0, 1.0])
    u1, u2 = gram_schmidt([1, 0, 0], [1, 1, 0], g)
    assert np.allclose(u1, [0.5, 0, 0]) and np.allclose(u2, [0, 1, 0])


def test_gram_schmidt_parallel_rejected():
    with pytest.raises(RankDeficient):
        gram_schmidt([1, 2, 3], [2, 4, 6], np.eye(3))


# ---- curvature --------------------------------------------------------------

def test_flat_christoffel_zero():
    assert np.all(christoffel(catalog_metric("flat").chart, (0.3, -1.0, 2.0)) == 0.0)


def test_exponential_fibre_christoffel():
    ch = MetricChart.from_strings(("1", "0", "0", "1", "0", "exp(2*z)"), "(-2,2)x(-2,2)x(-2,2)")
    z = 0.4
    G = christoffel(ch, (0.1, 0.2, z))
    expected = np.zeros((3, 3, 3))
    expected[2, 2, 2] = 1.0
    assert np.allclose(G, expected, atol=1e-14)


def test_nil_christoffel_against_differences():
    ch = catalog_metric("nil").chart
    p = np.zeros(3)
    G = christoffel(ch, p)
    h = 1e-7
    dg = np.stack([(ch.metric(p + h * e) - ch.metric(p - h * e)) / (2 * h) for e in np.eye(3)],
                  axis=-1)                                     # dg[i, j, a] = d_a g_ij
    g1 = 0.5 * (np.einsum("jli->lij", dg) + np.einsum("ilj->lij", dg) - np.einsum("ijl->lij", dg))
    fd = np.einsum("kl,lij->kij", np.linalg.inv(ch.metric(p)), g1)
    assert np.allclose(G, fd, atol=1e-7)


def test_unit_sphere_riemann_layout():
    ch = catalog_metric("round-sphere").chart
    p = np.array([0.2, -0.1, 0.3])
    g = ch.metric(p)
    R = riemann(ch, p)
    expected = np.einsum("ik,jl->ijkl", g, g) - np.einsum("il,jk->ijkl", g, g)
    assert np.allclose(R, expected, atol=1e-10 * np.abs(expected).max())


@pytest.mark.parametrize("other", [(1, 0, 0), (0, 1, 0), (1, 1, 0)])
def test_s2xr_vertical_planes_flat(other):
    ch = catalog_metric("s2xr").chart
    assert abs(sectional(ch, (1.0, 0.5, 0.0), ((0, 0, 1), other))) < 1e-12


def test_s2xr_horizontal_plane():
    ch = catalog_metric("s2xr", {"r": 2.0}).chart
    assert sectional(ch, (1.0, 0.5, 0.0), ((1, 0, 0), (0, 1, 0))) == pytest.approx(0.25)


def test_round_sphere_bianchi_small():
    ch = catalog_metric("round-sphere").chart
    b1, b2 = bianchi_residuals(ch, ch.sample(10, 3))
    assert np.abs(b1).max() < 1e-6 and np.abs(b2).max() < 1e-6


# ---- triad ------------------------------------------------------------------

def test_reflection_conjugates_m():
    E = np.eye(3)
    t = complex_triad_from(E)
    F = E.copy()
    F[2] = -F[2]
    assert np.allclose(complex_triad_from(F).m, np.conj(t.m))


def test_hopf_d_matrix():
    ch = catalog_metric("round-sphere").chart
    D = d_matrix(ch, (0.1, 0.4, -0.2), mu=2.0)
    assert np.allclose(D.symmetric_tracefree(), 0.0, atol=1e-12)
    assert abs(np.trace(D.entries)) < 1e-12
    skew = D.skew()
    assert np.allclose(np.abs(skew[[0, 1], [1, 0]]), 1.0, atol=1e-12)
    assert skew[0, 1] == pytest.approx(-skew[1, 0])
    assert np.linalg.det(D.entries) == pytest.approx(1.0, abs=1e-12)
    assert D.H == pytest.approx(0.0, abs=1e-12)


def test_zero_d_matrix_h():
    D = d_matrix(catalog_metric("s2xr").chart, (1.0, 0.5, 0.0))
    assert np.allclose(D.entries, 0.0, atol=1e-14)
    assert h_function(D, 1.0) == -0.5


def test_hopf_rho_constant_along_fibre():
    ch = catalog_metric("round-sphere").chart
    p = np.array([0.2, 0.5, -0.1])

    def rho(pts):
        return spin_coefficients(ch, pts).rho

    k = ch.frame_jets(p, order=0)[0][0]
    assert abs(directional_derivative(ch, p, rho, k)) < 1e-9


# ---- scenarios --------------------------------------------------------------

def test_flat_scalar_flat_but_wrong_signature():
    ch = catalog_metric("flat").chart
    rep = scenario_residuals(ch, ch.sample(5, 0), scenario="thm2-constant")
    assert rep.flags["scalar flat"]
    assert not rep.flags["signature (0,+,-)"]
    assert all(r.status == NA for r in rep.relations)
    assert not rep.applicable


# ---- flows ------------------------------------------------------------------

def test_straight_line_flow():
    ch = catalog_metric("flat").chart
    tr = integrate_flow(ch, ("0", "0", "1"), (0, 0, 0), dt=0.1, n=10)
    assert np.allclose(tr.endpoint, [0, 0, 1], atol=1e-14)


def test_nil_geodesic_speed_conserved():
    ch = catalog_metric("nil").chart
    p0 = np.array([0.1, 0.2, 0.0])
    v0 = ch.frame_jets(p0, order=0)[0][0]
    tr = integrate_geodesic(ch, p0, v0, dt=1e-2, n=200)
    v = tr.frames[:, 0]
    speed = np.einsum("ni,nij,nj->n", v, ch.metric(tr.points), v)
    assert np.abs(speed - 1.0).max() < 1e-9


def test_hopf_transport_norm_over_period():
    e = catalog_metric("round-sphere")
    ch = e.chart
    tr = integrate_flow(ch, VectorField.from_chart(ch, e.fields["hopf"]), e.start,
                        dt=2 * np.pi / 1000, n=1000)
    v = parallel_transport(ch, tr, [0.3, 0.0, 0.4])
    nrm = np.einsum("ni,nij,nj->n", v, ch.metric(tr.points), v)
    assert np.abs(nrm - nrm[0]).max() < 1e-8


def test_ell_law_along_nil_flow():
    ch = catalog_metric("nil").chart
    tr = integrate_flow(ch, ("0", "0", "1"),
                        (0.3, -0.2, -2.5), dt=1e-3, n=1000, mu=-0.5)
    res = evolution_residuals(ch, tr, mu=-0.5)
    d, sc = res["ell"]
    assert np.max(np.abs(d) / np.maximum(1.0, sc)) < 1e-9
