import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ricci3.catalog import catalog_metric
from ricci3.chart import (DomainViolation, MetricChart, NotPositiveDefinite, RankDeficient,
                          SpecError, dumps_spec, gram_schmidt, loads_spec,
                          orthonormality_residuals, parse_domain)

NIL_SPEC = """
[chart]
coords = "x,y,z"
domain = "(-1,1)x(-1,1)x(-1,1)"

[metric]
g11 = "1"
g22 = "1 + x^2"
g23 = "-x"
g33 = "1"

[frame]
k = "0,0,1"
x = "1,0,0"
y = "0,1,x"
"""


def test_parse_domain():
    assert parse_domain("(0,1)x(-2,2)x(3,4.5)") == ((0, 1), (-2, 2), (3, 4.5))
    with pytest.raises(SpecError):
        parse_domain("(1,0)x(0,1)x(0,1)")
    with pytest.raises(SpecError):
        parse_domain("(0,1)x(0,1)")


def test_spec_loads_and_fills_off_diagonals():
    ch = loads_spec(NIL_SPEC)
    g = ch.metric(np.array([0.5, 0.0, 0.0]))
    assert np.allclose(g, [[1, 0, 0], [0, 1.25, -0.5], [0, -0.5, 1]])
    assert ch.frame is not None


@pytest.mark.parametrize("broken", [
    "[chart]\ndomain='(0,1)x(0,1)x(0,1)'\n[metric]\ng11='1'\ng22='1'\n",   # no g33
    "[metric]\ng11='1'\ng22='1'\ng33='1'\n",                               # no chart
    "[chart]\ndomain='(0,1)x(0,1)x(0,1)'\n[metric]\ng11='1'\ng22='1'\ng33='1'\ng44='1'\n",
    "[chart]\ndomain='(0,1)x(0,1)x(0,1)'\n[metric]\ng11='1 +'\ng22='1'\ng33='1'\n",
    "[chart\n",
])
def test_spec_errors(broken):
    with pytest.raises(SpecError):
        loads_spec(broken)


def test_dumps_round_trip_catalog():
    for name in ("nil", "su2-berger", "s2xr"):
        ch = catalog_metric(name).chart
        back = loads_spec(dumps_spec(ch))
        pts = ch.sample(5, 1)
        assert np.allclose(back.metric(pts), ch.metric(pts), rtol=0, atol=1e-14)
        E0, _ = ch.frame_jets(pts)
        E1, _ = back.frame_jets(pts)
        assert np.allclose(E0, E1, atol=1e-14)


def test_domain_violation():
    ch = loads_spec(NIL_SPEC)
    with pytest.raises(DomainViolation):
        ch.check_points(np.array([1.0, 0.0, 0.0]))      # boundary is excluded
    assert ch.contains(np.array([0.99, 0, 0]))


def test_not_positive_definite():
    ch = MetricChart.from_strings({"g11": "1", "g22": "x", "g33": "1"}, "(-1,1)x(-1,1)x(-1,1)")
    ch.check_spd(np.array([[0.5, 0, 0]]))
    with pytest.raises(NotPositiveDefinite):
        ch.check_spd(np.array([[-0.5, 0, 0]]))


def test_catalog_frames_are_orthonormal():
    for name in ("round-sphere", "hyperbolic", "nil", "sol", "euclidean-e2-group",
                 "su2-berger", "s2xr", "cosh-warped"):
        ch = catalog_metric(name).chart
        pts = ch.sample(20, 5)
        E, _ = ch.frame_jets(pts, order=0)
        assert orthonormality_residuals(ch.metric(pts), E).max() < 1e-12, name


def test_gram_schmidt_rank_deficient():
    g = np.diag([1.0, 2.0, 3.0])
    with pytest.raises(RankDeficient):
        gram_schmidt([1, 1, 0], [2, 2, 0], g)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=6, max_size=6))
def test_gram_schmidt_orthonormal(c):
    g = np.array([[2.0, 0.3, 0.1], [0.3, 1.5, -0.2], [0.1, -0.2, 1.0]])
    v1, v2 = np.array(c[:3]), np.array(c[3:])
    try:
        u1, u2 = gram_schmidt(v1, v2, g)
    except RankDeficient:
        return
    assert abs(u1 @ g @ u1 - 1) < 1e-9 and abs(u2 @ g @ u2 - 1) < 1e-9
    assert abs(u1 @ g @ u2) < 1e-9


def test_rotated_frame_stays_orthonormal():
    ch = catalog_metric("nil").chart
    fr = ch.frame.rotated(0.7)
    pts = ch.sample(10, 2)
    E, _ = ch.frame_jets(pts, order=0, frame=fr)
    assert orthonormality_residuals(ch.metric(pts), E).max() < 1e-12
