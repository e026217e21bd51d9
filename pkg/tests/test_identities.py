import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ricci3.catalog import catalog_metric
from ricci3.chart import DomainViolation, MetricChart
from ricci3.identities import (DECOMPOSITION, IDENTITIES, bianchi_residuals,
                               curvature_identity_residuals, directional_derivative)

from conftest import FRAMED

A, B, C = "(1 + 0.3*sin(y*z))", "exp(0.4*x + 0.2*z)", "(1 + x^2 + 0.5*y^2)"


def generic_chart():
    """A diagonal metric with no symmetry and its normalised coordinate frame."""
    return MetricChart.from_strings(
        {"g11": A, "g22": B, "g33": C}, "(-1,1)x(-1,1)x(-1,1)",
        frame=(f"0,0,1/sqrt({C})", f"1/sqrt({A}),0,0", f"0,1/sqrt({B}),0"))


def max_rel(res):
    return {n: float(np.max(res.relative(n))) for n in IDENTITIES}


@pytest.mark.parametrize("name", FRAMED)
def test_catalog_frames_satisfy_all_identities(name):
    ch = catalog_metric(name).chart
    res = curvature_identity_residuals(ch, ch.sample(20, 1))
    assert res.passes(), (name, res.worst())
    for d in DECOMPOSITION:
        assert np.max(res.decomposition[d]) < 1e-9


def test_generic_metric_satisfies_identities():
    ch = generic_chart()
    res = curvature_identity_residuals(ch, ch.sample(20, 2))
    assert res.passes(), res.worst()


def test_fourth_order_convergence():
    ch = generic_chart()
    pts = ch.sample(10, 0)
    hs = [0.2, 0.1, 0.05, 0.025]
    errs = [max_rel(curvature_identity_residuals(ch, pts, h=h)) for h in hs]
    for a, b in zip(errs, errs[1:]):
        for n in IDENTITIES:
            if b[n] > 1e-10:
                assert a[n] / b[n] >= 8, (n, a[n], b[n])


@settings(max_examples=10, deadline=None)
@given(st.floats(0, 2 * np.pi))
def test_rotated_frames_still_pass(angle):
    for name in ("nil", "su2-berger"):
        ch = catalog_metric(name).chart
        res = curvature_identity_residuals(ch, ch.sample(5, 3), frame=ch.frame.rotated(angle))
        assert res.passes()


def test_bianchi_pair_matches_full_run():
    ch = generic_chart()
    pts = ch.sample(4, 5)
    b1, b2 = bianchi_residuals(ch, pts)
    full = curvature_identity_residuals(ch, pts)
    assert np.allclose(b1, full.residuals["bid1"]) and np.allclose(b2, full.residuals["bid2"])


def test_tolerance_below_noise_floor_fails():
    ch = catalog_metric("nil").chart
    res = curvature_identity_residuals(ch, ch.sample(20, 0))
    assert not res.passes(tol=1e-15)


def test_directional_derivative_oracle():
    ch = generic_chart()
    p = np.array([0.2, -0.1, 0.3])
    f = lambda q: np.sin(q[:, 0]) * q[:, 1] + q[:, 2] ** 3
    v = np.array([0.5, 1.0, -2.0])
    exact = np.cos(0.2) * -0.1 * 0.5 + np.sin(0.2) * 1.0 + 3 * 0.09 * -2.0
    assert directional_derivative(ch, p, f, v) == pytest.approx(exact, abs=1e-11)


def test_stencil_outside_domain():
    ch = generic_chart()
    with pytest.raises(DomainViolation):
        directional_derivative(ch, np.array([0.99999, 0, 0]), lambda q: q[:, 0], [1, 0, 0], h=1e-3)
