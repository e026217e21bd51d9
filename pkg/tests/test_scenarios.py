import numpy as np
import pytest

from ricci3.catalog import catalog_metric
from ricci3.chart import FrameField
from ricci3.identities import (FAIL, NA, PASS, d_kernel_frame, numeric_frame_state,
                               scenario_residuals)


def test_thm3_on_s2xr():
    ch = catalog_metric("s2xr").chart
    rep = scenario_residuals(ch, ch.sample(20, 0), scenario="thm3")
    assert all(rep.flags.values()), rep.flags
    assert rep.passed and rep.applicable
    assert rep.relation("R(k,.,.,.) = 0").residual < 1e-9
    assert rep.relation("kappa = 0").status == PASS


def test_thm3_not_applicable_on_nil():
    ch = catalog_metric("nil").chart
    rep = scenario_residuals(ch, ch.sample(5, 0), scenario="thm3")
    assert not rep.flags["Ric(k,.) = 0"]
    assert all(r.status == NA for r in rep.relations)
    assert rep.passed and not rep.applicable


def test_thm1_on_cosh_warped():
    a = 0.7
    ch = catalog_metric("cosh-warped", {"a": a}).chart
    rep = scenario_residuals(ch, ch.sample(10, 1), scenario="thm1", mu=2 * a * a)
    for label in ("k is a Ricci eigenvector", "Ric(k,k) = -mu with mu > 0",
                  "transverse eigenvalues equal (f,f)", "f avoids 0 and -mu"):
        assert rep.flags[label], label
    assert not rep.flags["k[f] = 0"]
    for label in ("kappa = 0", "k[f] = -theta (mu + f)", "k[theta] = 2H - theta^2 + 2mu",
                  "k[omega] = -theta omega", "k[H] = -theta H"):
        r = rep.relation(label)
        assert r.status == PASS and r.residual < 1e-6, label
    # the k[f] = 0 branch does not apply
    assert rep.relation("div k = 0").status == NA


def test_thm1_wrong_mu_not_applicable():
    ch = catalog_metric("cosh-warped").chart
    rep = scenario_residuals(ch, ch.sample(5, 1), scenario="thm1", mu=0.5)
    assert not rep.flags["Ric(k,k) = -mu with mu > 0"]
    assert all(r.status == NA for r in rep.relations)


def test_forced_branch_algebra_on_nil():
    # k = e1 on Nil: Ric(k,k) = -1/2 and D has eigenvalues +-1/2, so the adapted
    # algebraic relations hold with mu = 1/2 even though f differs along k-perp
    ch = catalog_metric("nil").chart
    fr = FrameField.from_strings("1,0,0", "0,1,x", "0,0,1")
    rep = scenario_residuals(ch, ch.sample(5, 1), frame=fr, scenario="thm1", mu=0.5, force=True)
    assert not rep.flags["transverse eigenvalues equal (f,f)"]
    for label in ("div k = 0", "|sigma|^2 - omega^2/4 = mu/2",
                  "rho = -i omega/2 (adapted)", "sigma = -sqrt(mu/2) + i omega/2 (adapted)"):
        r = rep.relation(label)
        assert r.status == NA and r.residual < 1e-9, label


def test_d_kernel_frame_is_eigenframe():
    ch = catalog_metric("nil").chart
    fr = FrameField.from_strings("1,0,0", "0,1,x", "0,0,1")
    pts = ch.sample(5, 2)
    fn = d_kernel_frame(ch, fr, eigenvalue=-0.5)
    st = numeric_frame_state(ch, fn, pts, 1e-4, curvature=False)
    C = st.C
    # D x = -1/2 x: <nabla_x k, x> = -1/2 and <nabla_x k, y> = 0
    assert np.allclose(C[:, 0, 1, 1], -0.5, atol=1e-9)
    assert np.allclose(C[:, 0, 1, 2], 0.0, atol=1e-9)


@pytest.mark.parametrize("scenario", ["thm2-constant", "thm2-closed"])
def test_thm2_hypotheses_fail_on_catalog(scenario):
    for name in ("nil", "sol", "s2xr", "su2-berger"):
        ch = catalog_metric(name).chart
        rep = scenario_residuals(ch, ch.sample(5, 0), scenario=scenario)
        assert not all(rep.flags.values()), name
        assert all(r.status == NA for r in rep.relations)


def test_unknown_scenario():
    ch = catalog_metric("flat").chart
    with pytest.raises(ValueError):
        scenario_residuals(ch, ch.sample(2, 0), scenario="thm9")


def test_status_values():
    assert {PASS, FAIL, NA} == {"PASS", "FAIL", "NOT-APPLICABLE"}
