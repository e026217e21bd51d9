import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ricci3.catalog import catalog_metric, catalog_names, milnor_ricci
from ricci3.chart import MetricChart, RankDeficient
from ricci3.curvature import (classify, curvature_pack, jacobi_eigh, principal_ricci,
                              principal_ricci_batch, riemann, riemann_from_ricci, sectional)


def _constant_curvature_form(g, K):
    return K * (np.einsum("...ik,...jl->...ijkl", g, g) - np.einsum("...il,...jk->...ijkl", g, g))


@pytest.mark.parametrize("name, r, K", [("round-sphere", 1.0, 1.0), ("round-sphere", 2.0, 0.25),
                                        ("hyperbolic", 1.0, -1.0), ("hyperbolic", 0.5, -4.0)])
def test_space_forms(name, r, K):
    ch = catalog_metric(name, {"r": r}).chart
    pts = ch.sample(20, 11)
    pack = curvature_pack(ch, pts)
    assert np.allclose(pack.R, _constant_curvature_form(pack.g, K), atol=1e-9 * max(1, abs(K)))
    assert np.allclose(pack.ric, 2 * K * pack.g, atol=1e-9)
    assert np.allclose(pack.S, 6 * K, atol=1e-9)


def test_flat_in_cylindrical_coordinates():
    ch = MetricChart.from_strings({"g11": "1", "g22": "r^2", "g33": "1"}, "(0.5,2)x(-3,3)x(-1,1)",
                                  coords=("r", "t", "z"))
    R = riemann(ch, ch.sample(10, 0))
    assert np.abs(R).max() < 1e-13


def test_flat_in_spherical_coordinates():
    ch = MetricChart.from_strings({"g11": "1", "g22": "r^2", "g33": "r^2*sin(t)^2"},
                                  "(0.5,2)x(0.3,2.8)x(-3,3)", coords=("r", "t", "p"))
    R = riemann(ch, ch.sample(10, 0))
    assert np.abs(R).max() < 1e-12


def test_symmetries_and_three_dimensional_reconstruction():
    ch = catalog_metric("su2-berger", {"a": 0.7}).chart
    pack = curvature_pack(ch, ch.sample(8, 4))
    R = pack.R4
    assert np.allclose(R, -np.swapaxes(R, -3, -4), atol=1e-11)
    assert np.allclose(R, -np.swapaxes(R, -1, -2), atol=1e-11)
    assert np.allclose(R, np.transpose(R, (0, 3, 4, 1, 2)), atol=1e-11)
    cyc = R + np.transpose(R, (0, 2, 3, 1, 4)) + np.transpose(R, (0, 3, 1, 2, 4))
    assert np.abs(cyc).max() < 1e-11
    rebuilt = riemann_from_ricci(pack.g, pack.ric, pack.S)
    assert np.allclose(rebuilt, pack.R, atol=1e-10)


def test_sectional_on_sphere_and_degenerate_span():
    ch = catalog_metric("round-sphere", {"r": 2.0}).chart
    p = np.array([0.3, -0.2, 0.5])
    assert sectional(ch, p, ([1, 0, 0], [0.2, 1, 0.3])) == pytest.approx(0.25, abs=1e-10)
    with pytest.raises(RankDeficient):
        sectional(ch, p, ([1, 2, 3], [2, 4, 6]))


def test_sol_sectional_curvatures():
    # e^{2z}dx^2 + e^{-2z}dy^2 + dz^2: K(xy) = 1, K(xz) = K(yz) = -1
    ch = catalog_metric("sol").chart
    p = np.array([0.1, 0.2, 0.3])
    assert sectional(ch, p, ([1, 0, 0], [0, 1, 0])) == pytest.approx(1.0, abs=1e-10)
    assert sectional(ch, p, ([1, 0, 0], [0, 0, 1])) == pytest.approx(-1.0, abs=1e-10)
    assert sectional(ch, p, ([0, 1, 0], [0, 0, 1])) == pytest.approx(-1.0, abs=1e-10)


@pytest.mark.parametrize("name", catalog_names())
def test_catalog_expected_eigenvalues(name):
    e = catalog_metric(name)
    for p in e.chart.sample(6, 9):
        pr = principal_ricci(e.chart, p)
        assert np.allclose(pr.eigenvalues, e.expected_eigenvalues(p), atol=1e-8), name


@pytest.mark.parametrize("name", ["flat", "nil", "sol", "euclidean-e2-group", "su2-berger",
                                  "round-sphere"])
def test_milnor_table(name):
    e = catalog_metric(name)
    pr = principal_ricci(e.chart, e.chart.sample(1, 3)[0])
    assert np.allclose(pr.eigenvalues, e.milnor_eigenvalues(), atol=1e-8)


def test_milnor_formula_hand_values():
    assert np.allclose(np.sort(milnor_ricci([0, 0, 1])), [-0.5, -0.5, 0.5])
    assert np.allclose(np.sort(milnor_ricci([1, -1, 0])), [-2, 0, 0])
    assert np.allclose(milnor_ricci([2, 2, 2]), [2, 2, 2])


def test_eigenvectors_g_orthonormal_and_diagonalise():
    ch = catalog_metric("su2-berger", {"a": 0.4}).chart
    pts = ch.sample(10, 1)
    pack = curvature_pack(ch, pts)
    for n, pr in enumerate(principal_ricci_batch(ch, pts)):
        V = pr.eigenvectors
        assert np.allclose(V.T @ pack.g[n] @ V, np.eye(3), atol=1e-10)
        assert np.allclose(V.T @ pack.ric[n] @ V, np.diag(pr.eigenvalues), atol=1e-10)


def test_s2xr_zero_eigenvector_is_dt():
    e = catalog_metric("s2xr")
    pr = principal_ricci(e.chart, np.array([1.0, 0.5, 0.0]))
    assert pr.signature == ("0", "+", "+")
    v = pr.eigenvectors[:, 0]
    assert np.allclose(np.abs(v), [0, 0, 1], atol=1e-7)


def test_classify_threshold():
    assert classify([-1, 1e-9, 2]) == ("-", "0", "+")
    assert classify([-1, 1e-5, 2], eps_sig=1e-7) == ("-", "+", "+")
    assert classify([1e-12, 0, -1e-12]) == ("0", "0", "0")


sym3 = st.lists(st.floats(-10, 10, allow_nan=False), min_size=6, max_size=6)


@settings(max_examples=200, deadline=None)
@given(sym3)
def test_jacobi_matches_numpy(c):
    a = np.array([[c[0], c[1], c[2]], [c[1], c[3], c[4]], [c[2], c[4], c[5]]])
    lam, v = jacobi_eigh(a)
    ref = np.linalg.eigvalsh(a)
    assert np.allclose(np.sort(lam), ref, atol=1e-12 * max(1.0, np.abs(a).max()))
    assert np.allclose(v.T @ v, np.eye(3), atol=1e-12)
    assert np.allclose(a @ v, v * lam, atol=1e-10 * max(1.0, np.abs(a).max()))


def test_no_catalog_entry_is_minus_plus_plus():
    for name in catalog_names():
        ch = catalog_metric(name).chart
        for pr in principal_ricci_batch(ch, ch.sample(10, 0)):
            assert pr.signature != ("-", "+", "+"), name
