"""Built-in metric charts with reference frames and closed-form curvature.

Expected principal Ricci curvatures are stored as expressions in the
parameters (and, for the warped product, the coordinates) and are sorted
only after evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chart import MetricChart, SpecError
from .curvature import DEFAULT_EPS_SIG, classify
from .expr import evaluate, parse_expression


class UnknownCatalogEntry(KeyError):
    pass


def milnor_ricci(lam) -> np.ndarray:
    """Ricci eigenvalues of a unimodular Lie group with Milnor frame
    [e2,e3] = l1 e1, [e3,e1] = l2 e2, [e1,e2] = l3 e3."""
    l1, l2, l3 = (float(v) for v in lam)
    m1 = (l2 + l3 - l1) / 2.0
    m2 = (l1 + l3 - l2) / 2.0
    m3 = (l1 + l2 - l3) / 2.0
    return np.array([2.0 * m2 * m3, 2.0 * m1 * m3, 2.0 * m1 * m2])


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    chart: MetricChart
    expected: tuple                       # three expression texts
    milnor_lambda: tuple | None = None    # expression texts, Lie-group entries only
    fields: dict = field(default_factory=dict)
    start: tuple = (0.0, 0.0, 0.0)
    note: str = ""

    @property
    def params(self):
        return self.chart.params

    @property
    def frame(self):
        return self.chart.frame

    def expected_eigenvalues(self, point=(0.0, 0.0, 0.0)) -> np.ndarray:
        coords, params = self.chart.coords, tuple(self.chart.params)
        vals = [evaluate(parse_expression(t, coords, params), point, self.chart.params, coords)
                for t in self.expected]
        return np.sort(np.array(vals))

    def expected_signature(self, point=(0.0, 0.0, 0.0), eps_sig: float = DEFAULT_EPS_SIG):
        return classify(self.expected_eigenvalues(point), eps_sig)

    def milnor_eigenvalues(self) -> np.ndarray | None:
        if self.milnor_lambda is None:
            return None
        lam = [evaluate(parse_expression(t, (), tuple(self.chart.params)), (), self.chart.params, ())
               for t in self.milnor_lambda]
        return np.sort(milnor_ricci(lam))


def _stereo_frame(r: str = "r", sign: int = 1):
    """Orthonormal left-invariant frame of the round 3-sphere of radius r in
    stereographic coordinates: E_a = 1/2 (1-|u|^2) e_a + u_a u + sign e_a x u
    with u = x/r."""
    u = ("(x/%s)" % r, "(y/%s)" % r, "(z/%s)" % r)
    q = f"(1 - {u[0]}^2 - {u[1]}^2 - {u[2]}^2)"
    eps = {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1, (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}
    legs = []
    for a in range(3):
        comps = []
        for c in range(3):
            text = f"{u[a]}*{u[c]}"
            if a == c:
                text = f"0.5*{q} + " + text
            for k in range(3):
                e = eps.get((c, a, k), 0) * sign
                if e:
                    text += f" {'+' if e > 0 else '-'} {u[k]}"
            comps.append(text)
        legs.append(tuple(comps))
    return legs


def _conformal(factor: str):
    return (factor, "0", "0", factor, "0", factor)


def _flat(params):
    chart = MetricChart.from_strings(_conformal("1"), "(-5,5)x(-5,5)x(-5,5)",
                                     frame=("0,0,1", "1,0,0", "0,1,0"), name="flat")
    return CatalogEntry("flat", chart, ("0", "0", "0"), ("0", "0", "0"),
                        fields={"radial": ("x/sqrt(x^2+y^2+z^2)", "y/sqrt(x^2+y^2+z^2)",
                                           "z/sqrt(x^2+y^2+z^2)")},
                        note="Euclidean space; abelian Lie group")


def _round_sphere(params):
    r = params.get("r", 1.0)
    _positive(r, "r")
    phi2 = "4*r^4/(r^2 + x^2 + y^2 + z^2)^2"
    E = _stereo_frame("r")
    chart = MetricChart.from_strings(_conformal(phi2), [(-2 * r, 2 * r)] * 3, params={"r": r},
                                     frame=(E[0], E[1], E[2]), name="round-sphere")
    return CatalogEntry("round-sphere", chart, ("2/r^2",) * 3, ("2/r", "2/r", "2/r"),
                        fields={"hopf": E[0]}, start=(0.0, r, 0.0),
                        note="stereographic chart of the round 3-sphere; Hopf frame")


def _hyperbolic(params):
    r = params.get("r", 1.0)
    _positive(r, "r")
    phi2 = "4*r^4/(r^2 - x^2 - y^2 - z^2)^2"
    c = "(r^2 - x^2 - y^2 - z^2)/(2*r^2)"
    chart = MetricChart.from_strings(_conformal(phi2), [(-r / 2, r / 2)] * 3, params={"r": r},
                                     frame=((0, 0, c), (c, 0, 0), (0, c, 0)), name="hyperbolic")
    return CatalogEntry("hyperbolic", chart, ("-2/r^2",) * 3,
                        note="Poincare ball; conformal coordinate frame")


def _nil(params):
    chart = MetricChart.from_strings(("1", "0", "0", "1 + x^2", "-x", "1"), "(-3,3)x(-3,3)x(-3,3)",
                                     frame=("0,0,1", "1,0,0", "0,1,x"), name="nil")
    return CatalogEntry("nil", chart, ("-1/2", "-1/2", "1/2"), ("0", "0", "1"),
                        note="Heisenberg group, dx^2 + dy^2 + (dz - x dy)^2; k = center")


def _sol(params):
    chart = MetricChart.from_strings(("exp(2*z)", "0", "0", "exp(-2*z)", "0", "1"),
                                     "(-2,2)x(-2,2)x(-2,2)",
                                     frame=("0,0,1", "exp(-z),0,0", "0,exp(z),0"), name="sol")
    return CatalogEntry("sol", chart, ("-2", "0", "0"), ("1", "-1", "0"),
                        note="Sol, e^{2z}dx^2 + e^{-2z}dy^2 + dz^2")


def _e2(params):
    chart = MetricChart.from_strings(_conformal("1"), "(-3,3)x(-3,3)x(-3,3)",
                                     frame=("0,0,1", "cos(z),sin(z),0", "-sin(z),cos(z),0"),
                                     name="euclidean-e2-group")
    return CatalogEntry("euclidean-e2-group", chart, ("0", "0", "0"), ("1", "1", "0"),
                        note="universal cover of E(2), flat left-invariant metric; rotating frame")


def _berger(params):
    a = params.get("a", 0.5)
    _positive(a, "a")
    E = _stereo_frame("1")
    phi2 = "4/(1 + x^2 + y^2 + z^2)^2"
    phi4 = f"({phi2})^2"
    e1 = E[0]
    g = []
    for i, j in ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)):
        term = f"(a^2 - 1)*{phi4}*({e1[i]})*({e1[j]})"
        g.append(f"{phi2} + {term}" if i == j else term)
    k = tuple(f"({c})/a" for c in e1)
    chart = MetricChart.from_strings(g, "(-2,2)x(-2,2)x(-2,2)", params={"a": a},
                                     frame=(k, E[1], E[2]), name="su2-berger")
    return CatalogEntry("su2-berger", chart, ("2*a^2", "4 - 2*a^2", "4 - 2*a^2"),
                        ("2*a", "2/a", "2/a"), fields={"hopf": k}, start=(0.0, 1.0, 0.0),
                        note="Berger sphere: Hopf fibres of the unit sphere scaled by a")


def _s2xr(params):
    r = params.get("r", 1.0)
    _positive(r, "r")
    chart = MetricChart.from_strings(("r^2", "0", "0", "r^2*sin(theta)^2", "0", "1"),
                                     [(0.1, np.pi - 0.1), (-3.0, 3.0), (-10.0, 10.0)],
                                     coords=("theta", "phi", "t"), params={"r": r},
                                     frame=("0,0,1", "1/r,0,0", "0,1/(r*sin(theta)),0"),
                                     name="s2xr")
    return CatalogEntry("s2xr", chart, ("0", "1/r^2", "1/r^2"), fields={"dt": ("0", "0", "1")},
                        start=(1.0, 0.5, 0.0),
                        note="round 2-sphere (polar chart, poles excluded) times a line")


def _cosh_warped(params):
    a = params.get("a", 1.0)
    _positive(a, "a")
    w = "cosh(a*z)^2"
    chart = MetricChart.from_strings((w, "0", "0", w, "0", "1"), "(-2,2)x(-2,2)x(-2,2)",
                                     params={"a": a},
                                     frame=("0,0,1", "1/cosh(a*z),0,0", "0,1/cosh(a*z),0"),
                                     name="cosh-warped")
    f = "-a^2*(1 + tanh(a*z)^2)"
    return CatalogEntry("cosh-warped", chart, ("-2*a^2", f, f),
                        note="dz^2 + cosh(az)^2 (dx^2 + dy^2): eigenvalues -mu, f, f with "
                             "mu = 2a^2 and f never 0 or -mu")


def _positive(v, name):
    if not v > 0:
        raise SpecError(f"parameter {name} must be positive, got {v}")


_BUILDERS = {
    "flat": _flat,
    "round-sphere": _round_sphere,
    "hyperbolic": _hyperbolic,
    "nil": _nil,
    "sol": _sol,
    "euclidean-e2-group": _e2,
    "su2-berger": _berger,
    "s2xr": _s2xr,
    "cosh-warped": _cosh_warped,
}

ALIASES = {"abelian": "flat", "e2": "euclidean-e2-group", "berger": "su2-berger"}


def catalog_names() -> list:
    return list(_BUILDERS)


def catalog_metric(name: str, params: dict | None = None) -> CatalogEntry:
    key = ALIASES.get(name, name)
    if key not in _BUILDERS:
        raise UnknownCatalogEntry(f"unknown catalog entry {name!r}; known: {', '.join(_BUILDERS)}")
    params = {k: float(v) for k, v in (params or {}).items()}
    entry = _BUILDERS[key](params)
    unknown = set(params) - set(entry.chart.params)
    if unknown:
        raise SpecError(f"{key} has no parameters {sorted(unknown)}")
    return entry
