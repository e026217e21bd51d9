"""Residuals of the triad curvature identities and differential Bianchi identities.

Directional derivatives k[f], m[f], mbar[f] of pointwise quantities are
taken by central differences along the straight coordinate line
p + t v(p), which is tangent to the integral curve of v at p, with one
Richardson level (error O(h^4)).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chart import DomainViolation, FrameField, MetricChart
from .curvature import DEFAULT_EPS_SIG, principal_ricci_from
from .triad import SQRT2, sigma_from_shear, triad_state, triad_state_from_vectors

DEFAULT_STEP = 1e-4          # times the chart scale
TOL_IDENTITY = 1e-6
TOL_ALGEBRAIC = 1e-9

IDENTITIES = ("S1", "S2", "S3", "S4", "S5", "bid1", "bid2")
DECOMPOSITION = ("rho_split", "sigma_split", "eps_imaginary")


def _stencil(points, directions, h):
    """Points p + s h v for s in (1, -1, 1/2, -1/2): shape (..., 4, 3)."""
    s = np.array([1.0, -1.0, 0.5, -0.5])
    return points[..., None, :] + h * s[:, None] * directions[..., None, :]


def _richardson(vals, h):
    """vals (..., 4, ...) on the stencil -> derivative."""
    d_h = (vals[:, 0] - vals[:, 1]) / (2.0 * h)
    d_h2 = (vals[:, 2] - vals[:, 3]) / h
    return (4.0 * d_h2 - d_h) / 3.0


def directional_derivative(chart: MetricChart, p, f, direction, h: float | None = None):
    """Derivative of ``f`` (callable on an (n, 3) array of points) at ``p``
    along the vector ``direction``."""
    h = DEFAULT_STEP * chart.scale if h is None else h
    p = np.asarray(p, dtype=float)
    v = np.asarray(direction, dtype=float)
    pts = _stencil(p.reshape(-1, 3), v.reshape(-1, 3), h)       # (n, 4, 3)
    if not np.all(chart.contains(pts)):
        raise DomainViolation("finite-difference stencil leaves the chart domain")
    vals = np.asarray(f(pts.reshape(-1, 3)))
    vals = vals.reshape((pts.shape[0], 4) + vals.shape[1:])
    out = _richardson(vals, h)
    return out[0] if p.ndim == 1 else out


def _quantities(chart, frame, pts):
    st = triad_state(chart, pts, frame)
    sp, r = st.spin, st.ric
    q = {
        "kappa": sp.kappa, "rho": sp.rho, "sigma": sp.sigma, "eps": sp.eps, "beta": sp.beta,
        "Rkk": r["kk"], "Rkm": r["km"], "Rkmb": r["kmb"], "Rmm": r["mm"],
        "Rmbmb": r["mbmb"], "Rmmb": r["mmb"],
    }
    return st, q


@dataclass
class IdentityResiduals:
    residuals: dict            # name -> complex array (n,)
    scales: dict               # name -> real array (n,)
    decomposition: dict        # name -> real array (n,)
    points: np.ndarray
    terms: dict = field(default_factory=dict)

    def relative(self, name):
        return np.abs(self.residuals[name]) / np.maximum(1.0, self.scales[name])

    def passes(self, tol: float = TOL_IDENTITY, tol_algebraic: float = TOL_ALGEBRAIC) -> bool:
        ok = all(np.all(self.relative(n) <= tol) for n in self.residuals)
        return ok and all(np.all(v <= tol_algebraic) for v in self.decomposition.values())

    def worst(self):
        """(name, max relative residual) over all identities."""
        return max(((n, float(np.max(self.relative(n)))) for n in self.residuals),
                   key=lambda t: t[1])


def _frame_derivatives(chart, frame, points, h):
    """Quantities at the points and their derivatives along k, x, y."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(pts)
    st0, q0 = _quantities(chart, frame, pts)
    dirs = st0.E                                           # (n, leg, comp)
    sten = _stencil(np.repeat(pts[:, None, :], 3, axis=1), dirs, h)   # (n, 3, 4, 3)
    if not np.all(chart.contains(sten)):
        raise DomainViolation("finite-difference stencil leaves the chart domain")
    _, qs = _quantities(chart, frame, sten.reshape(-1, 3))
    deriv = {}
    for name, vals in qs.items():
        v = vals.reshape(n * 3, 4)
        d = _richardson(v, h).reshape(n, 3)
        deriv[name] = (d[:, 0], d[:, 1], d[:, 2])          # along k, x, y
    return st0, q0, deriv


def _ops(deriv):
    def K(name):
        return deriv[name][0]

    def M(name, conj=False):
        dx, dy = deriv[name][1], deriv[name][2]
        if conj:
            dx, dy = np.conj(dx), np.conj(dy)
        return (dx - 1j * dy) / SQRT2

    def MB(name, conj=False):
        dx, dy = deriv[name][1], deriv[name][2]
        if conj:
            dx, dy = np.conj(dx), np.conj(dy)
        return (dx + 1j * dy) / SQRT2
    return K, M, MB


def _identity_terms(q, K, M, MB):
    """For each identity: (list of LHS terms, list of RHS terms)."""
    ka, rho, sg, ep, be = q["kappa"], q["rho"], q["sigma"], q["eps"], q["beta"]
    Rkk, Rkm, Rkmb, Rmm = q["Rkk"], q["Rkm"], q["Rkmb"], q["Rmm"]
    Rmbmb, Rmmb = q["Rmbmb"], q["Rmmb"]
    c = np.conj
    return {
        "S1": ([K("rho"), -MB("kappa")],
               [np.abs(ka) ** 2, np.abs(sg) ** 2, rho ** 2, ka * c(be), 0.5 * Rkk]),
        "S2": ([K("sigma"), -M("kappa")],
               [ka ** 2, 2 * sg * ep, sg * (rho + c(rho)), -ka * be, Rmm]),
        "S3": ([M("rho"), -MB("sigma")],
               [2 * sg * c(be), (c(rho) - rho) * ka, Rkm]),
        "S4": ([K("beta"), -M("eps")],
               [sg * (c(ka) - c(be)), ka * (ep - c(rho)), be * (ep + c(rho)), -Rkm]),
        "S5": ([M("beta", conj=True), MB("beta")],
               [np.abs(sg) ** 2, -np.abs(rho) ** 2, -2 * np.abs(be) ** 2, (rho - c(rho)) * ep,
                -Rmmb, 0.5 * Rkk]),
        "bid1": ([K("Rkm"), -0.5 * M("Rkk"), MB("Rmm")],
                 [ka * Rkk, (ep + 2 * rho + c(rho)) * Rkm, sg * Rkmb,
                  -(c(ka) + 2 * c(be)) * Rmm, -ka * Rmmb]),
        "bid2": ([M("Rkmb"), MB("Rkm"), -K("Rmmb"), 0.5 * K("Rkk")],
                 [(rho + c(rho)) * (Rkk - Rmmb), -c(sg) * Rmm, -sg * Rmbmb,
                  -(2 * c(ka) + c(be)) * Rkm, -(2 * ka + be) * Rkmb]),
    }


def curvature_identity_residuals(chart: MetricChart, points, frame: FrameField | None = None,
                                 h: float | None = None,
                                 which=IDENTITIES) -> IdentityResiduals:
    """Residuals LHS - RHS of S1..S5 and bid1/bid2 at each point."""
    frame = frame or chart.frame
    if frame is None:
        raise ValueError("identity residuals need an expression-defined frame")
    h = DEFAULT_STEP * chart.scale if h is None else h
    st, q, deriv = _frame_derivatives(chart, frame, points, h)
    K, M, MB = _ops(deriv)
    terms = _identity_terms(q, K, M, MB)
    residuals, scales = {}, {}
    for name in which:
        lhs, rhs = terms[name]
        residuals[name] = sum(lhs) - sum(rhs)
        scales[name] = np.max(np.abs(np.stack(lhs + rhs)), axis=0)
    sp = st.spin
    C = st.C
    decomposition = {
        "rho_split": np.abs(-2 * sp.rho - (sp.div_k + 1j * sp.omega)),
        "sigma_split": np.abs(sp.sigma - sigma_from_shear(C)),
        "eps_imaginary": np.abs(sp.eps + np.conj(sp.eps)),
    }
    return IdentityResiduals(residuals, scales, decomposition, st.points, terms)


def bianchi_residuals(chart: MetricChart, points, frame: FrameField | None = None,
                      h: float | None = None):
    res = curvature_identity_residuals(chart, points, frame, h, which=("bid1", "bid2"))
    return res.residuals["bid1"], res.residuals["bid2"]


# --------------------------------------------------------------------------
# scenario relations
# --------------------------------------------------------------------------

SCENARIOS = ("thm1", "thm2-constant", "thm2-closed", "thm3")
PASS, FAIL, NA = "PASS", "FAIL", "NOT-APPLICABLE"


@dataclass
class Relation:
    label: str
    kind: str              # "algebraic" or "differential"
    residual: float        # max relative residual over the points it was evaluated on
    status: str
    points: int = 0


@dataclass
class ScenarioReport:
    scenario: str
    flags: dict                         # hypothesis label -> bool
    relations: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def applicable(self) -> bool:
        return any(r.status != NA for r in self.relations)

    @property
    def passed(self) -> bool:
        return all(r.status != FAIL for r in self.relations)

    def relation(self, label) -> Relation:
        for r in self.relations:
            if r.label == label:
                return r
        raise KeyError(label)


def _fd_jacobian(fn, pts, h):
    """Coordinate derivatives of fn (n,3) -> (n, ...) by Richardson central
    differences; result (n, ..., 3)."""
    n = len(pts)
    eye = np.eye(3)
    sten = pts[:, None, None, :] + h * np.array([1.0, -1.0, 0.5, -0.5])[None, None, :, None] \
        * eye[None, :, None, :]                                   # (n, i, 4, 3)
    vals = np.asarray(fn(sten.reshape(-1, 3)))
    vals = vals.reshape((n * 3, 4) + vals.shape[1:])
    d = _richardson(vals, h).reshape((n, 3) + vals.shape[2:])
    return np.moveaxis(d, 1, -1)


class _Relations:
    """Collects labelled residual arrays and turns them into Relations."""

    def __init__(self, tol, tol_algebraic, active):
        self.tol, self.tol_alg, self.active = tol, tol_algebraic, active
        self.items = []

    def add(self, label, kind, residual, scale=0.0, mask=None, active=True):
        r = np.abs(np.asarray(residual, dtype=complex)) / np.maximum(1.0, np.abs(scale))
        r = np.broadcast_to(r, np.shape(r))
        if mask is not None:
            r = r[np.broadcast_to(mask, r.shape)]
        worst = float(np.max(r)) if r.size else 0.0
        if not (self.active and active) or r.size == 0:
            status = NA
        else:
            status = PASS if worst <= (self.tol_alg if kind == "algebraic" else self.tol) else FAIL
        self.items.append(Relation(label, kind, worst, status, int(r.size)))

    def skip(self, label, kind):
        self.items.append(Relation(label, kind, float("nan"), NA, 0))


def _quantities_at(chart, frame, pts, mu):
    st = triad_state(chart, pts, frame)
    sp = st.spin
    theta, omega = sp.div_k, sp.omega
    out = {
        "theta": theta, "omega": omega, "sigma_abs2": sp.abs_sigma_sq,
        "rho": sp.rho, "sigma": sp.sigma, "rho_abs2": sp.rho_abs_sq,
        "f": st.ric["mmb"].real, "S": st.S,
        "H": omega ** 2 / 4 - sp.abs_sigma_sq + theta ** 2 / 4 - mu / 2.0,
    }
    return st, out


def _k_derivatives(chart, frame, pts, names, mu, h):
    """d/dk of the named reference-frame quantities."""
    st = triad_state(chart, pts, frame, curvature=False)
    k = st.E[:, 0, :]

    def fn(p):
        q = _quantities_at(chart, frame, p, mu)[1]
        return np.stack([np.asarray(q[n], dtype=complex) for n in names], axis=-1)
    d = directional_derivative(chart, pts, fn, k, h)
    return {n: d[:, i] for i, n in enumerate(names)}


def _rotate_to(E_ref, v):
    """Frame (k, x, y) with x = v1 x_ref + v2 y_ref and y its rotation by 90
    degrees in k-perp (orientation preserved)."""
    k, xr, yr = E_ref[:, 0], E_ref[:, 1], E_ref[:, 2]
    x = v[:, :1] * xr + v[:, 1:] * yr
    y = -v[:, 1:] * xr + v[:, :1] * yr
    return np.stack([k, x, y], axis=1)


def _fix_sign(v):
    s = np.where(np.abs(v[:, 0]) > 1e-3, np.sign(v[:, 0]), np.sign(v[:, 1]))
    s = np.where(s == 0, 1.0, s)
    return v * s[:, None]


def _null_vector(A):
    """Unit vector in the kernel of each 2x2 matrix (n, 2, 2), from the row
    of larger norm."""
    r0, r1 = A[:, 0], A[:, 1]
    row = np.where((np.linalg.norm(r0, axis=1) >= np.linalg.norm(r1, axis=1))[:, None], r0, r1)
    v = np.stack([-row[:, 1], row[:, 0]], axis=1)
    nrm = np.linalg.norm(v, axis=1)
    v = np.where(nrm[:, None] > 0, v / np.where(nrm > 0, nrm, 1.0)[:, None],
                 np.array([1.0, 0.0]))
    return _fix_sign(v)


def d_kernel_frame(chart, frame, eigenvalue=0.0):
    """Frame function p -> (k, x, y) with D x = eigenvalue * x, where D is
    Z -> nabla_Z k on k-perp."""
    def fn(pts):
        st = triad_state(chart, pts, frame, curvature=False)
        C = st.C
        D = np.stack([np.stack([C[:, 0, 1, 1], C[:, 0, 2, 1]], -1),
                      np.stack([C[:, 0, 1, 2], C[:, 0, 2, 2]], -1)], 1)
        return _rotate_to(st.E, _null_vector(D - eigenvalue * np.eye(2)))
    return fn


def ricci_eigen_frame(chart, frame):
    """Frame function with x along the larger transverse Ricci eigenvalue."""
    def fn(pts):
        st = triad_state(chart, pts, frame)
        R, E = st.ric_coord, st.E
        T = np.einsum("nai,nij,nbj->nab", E[:, 1:], R, E[:, 1:])
        _, w = np.linalg.eigh(T)
        return _rotate_to(E, _fix_sign(w[:, :, 1]))
    return fn


def numeric_frame_state(chart, frame_fn, pts, h, curvature=True):
    """Triad state of a numerically defined frame (coordinate gradients by
    finite differences)."""
    E = frame_fn(pts)
    dE = _fd_jacobian(frame_fn, pts, h)
    return triad_state_from_vectors(chart, pts, E, dE, curvature, check=True)


def _adapted_quantities(chart, frame_fn, h):
    def fn(pts):
        st = numeric_frame_state(chart, frame_fn, pts, h, curvature=False)
        return np.stack([st.spin.omega, st.divs[:, 1], st.divs[:, 2]], axis=-1)
    return fn


def _alpha_d(chart, frame_fn, pts, h):
    """d alpha (k, y) for alpha = g(x, .) by coordinate differences."""
    def alpha(p):
        return np.einsum("nij,nj->ni", chart.metric(p), frame_fn(p)[:, 1])
    da = _fd_jacobian(alpha, pts, h)                 # (n, j, i) = d_i alpha_j
    dalpha = np.swapaxes(da, 1, 2) - da              # d_i alpha_j - d_j alpha_i as [i, j]
    E = frame_fn(pts)
    return np.einsum("nij,ni,nj->n", dalpha, E[:, 0], E[:, 2])


def scenario_residuals(chart: MetricChart, points, frame: FrameField | None = None,
                       scenario: str = "thm3", mu: float | None = None,
                       tol: float = TOL_IDENTITY, tol_algebraic: float = TOL_ALGEBRAIC,
                       eps_sig: float = DEFAULT_EPS_SIG, h: float | None = None,
                       force: bool = False) -> ScenarioReport:
    """Check the hypotheses of a scenario on the sample and evaluate the
    relations they imply.

    Relations whose hypotheses fail are NOT-APPLICABLE. With ``force`` the
    residuals are still computed (for diagnostics) but keep that status.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
    frame = frame or chart.frame
    if frame is None:
        raise ValueError("scenario relations need an expression-defined frame")
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    h = DEFAULT_STEP * chart.scale if h is None else h
    st = triad_state(chart, pts, frame)
    sp, ric = st.spin, st.ric
    eig = np.array([principal_ricci_from(st.g[n], st.ric_coord[n], eps_sig).eigenvalues
                    for n in range(len(pts))])
    eps = eps_sig * max(1.0, float(np.abs(eig).max()))
    run = {"thm1": _thm1, "thm2-constant": _thm2_constant,
           "thm2-closed": _thm2_closed, "thm3": _thm3}[scenario]
    return run(chart, frame, pts, st, sp, ric, eig, eps, mu, tol, tol_algebraic, h, force)


def _ric_k_zero(ric, eps):
    return bool(np.all(np.abs(ric["kk"]) <= eps) and np.all(np.abs(ric["km"]) <= eps))


def _thm1(chart, frame, pts, st, sp, ric, eig, eps, mu, tol, tol_alg, h, force):
    rkk = ric["kk"].real
    if mu is None:
        mu = float(-np.mean(rkk))
    f = ric["mmb"].real
    flags = {
        "k is a Ricci eigenvector": bool(np.all(np.abs(ric["km"]) <= eps)),
        "Ric(k,k) = -mu with mu > 0": bool(mu > 0 and np.all(np.abs(rkk + mu) <= eps)),
        "transverse eigenvalues equal (f,f)": bool(np.all(np.abs(ric["mm"]) <= eps)),
        "f avoids 0 and -mu": bool(np.all(np.abs(f) > eps) and np.all(np.abs(f + mu) > eps)),
    }
    report = ScenarioReport("thm1", flags)
    ok = all(flags.values())
    rel = _Relations(tol, tol_alg, ok)
    if not (ok or force):
        for label, kind in _THM1_LABELS:
            rel.skip(label, kind)
        report.relations = rel.items
        return report
    theta, omega, s2 = sp.div_k, sp.omega, sp.abs_sigma_sq
    H = omega ** 2 / 4 - s2 + theta ** 2 / 4 - mu / 2
    d = _k_derivatives(chart, frame, pts, ("f", "theta", "omega", "sigma_abs2", "H"), mu, h)
    rel.add("kappa = 0", "algebraic", sp.kappa)
    rel.add("k[f] = -theta (mu + f)", "differential", d["f"] + theta * (mu + f),
            np.abs(d["f"]) + np.abs(theta * (mu + f)))
    rel.add("k[theta] = 2H - theta^2 + 2mu", "differential",
            d["theta"] - (2 * H - theta ** 2 + 2 * mu),
            np.abs(d["theta"]) + 2 * np.abs(H) + theta ** 2 + 2 * mu)
    rel.add("k[omega] = -theta omega", "differential", d["omega"] + theta * omega,
            np.abs(d["omega"]) + np.abs(theta * omega))
    rel.add("k[|sigma|^2] = -2 theta |sigma|^2", "differential", d["sigma_abs2"] + 2 * theta * s2,
            np.abs(d["sigma_abs2"]) + np.abs(2 * theta * s2))
    rel.add("k[H] = -theta H", "differential", d["H"] + theta * H,
            np.abs(d["H"]) + np.abs(theta * H))
    # branch k[f] = 0
    kf0 = bool(np.all(np.abs(d["f"]) <= tol * np.maximum(1.0, np.abs(f))))
    flags["k[f] = 0"] = kf0
    branch = ok and kf0
    a = np.sqrt(mu / 2)
    rel.add("div k = 0", "algebraic", theta, active=branch)
    rel.add("|sigma|^2 - omega^2/4 = mu/2", "algebraic", s2 - omega ** 2 / 4 - mu / 2,
            s2 + omega ** 2 / 4 + mu / 2, active=branch)
    if branch or force:
        frame_fn = d_kernel_frame(chart, frame, eigenvalue=a)
        ast = numeric_frame_state(chart, frame_fn, pts, h)
        asp = ast.spin
        w, divx, divy = asp.omega, ast.divs[:, 1], ast.divs[:, 2]
        rel.add("rho = -i omega/2 (adapted)", "algebraic", asp.rho + 0.5j * w,
                np.abs(w), active=branch)
        rel.add("sigma = -sqrt(mu/2) + i omega/2 (adapted)", "algebraic",
                asp.sigma + a - 0.5j * w, a + np.abs(w), active=branch)
        rel.add("eps = 0 (adapted)", "differential", asp.eps, active=branch)
        H_ = 10 * h
        q = _adapted_quantities(chart, frame_fn, h)
        dx = directional_derivative(chart, pts, q, ast.E[:, 1], H_)
        rel.add("x[omega] = 2 sqrt(mu/2) div y - omega div x", "differential",
                dx[:, 0] - 2 * a * divy + w * divx,
                np.abs(dx[:, 0]) + np.abs(2 * a * divy) + np.abs(w * divx), active=branch)
        rel.add("sqrt(mu/2) div x + omega/2 div y = 0", "differential",
                a * divx + w / 2 * divy, np.abs(a * divx) + np.abs(w * divy / 2), active=branch)
        v = -w[:, None] / (2 * a) * ast.E[:, 1] + ast.E[:, 2]
        dv = directional_derivative(chart, pts, q, v, H_)
        fa = ast.ric["mmb"].real
        rel.add("(-omega/(2 sqrt(mu/2)) x + y)[div y] = -f", "differential", dv[:, 2] + fa,
                np.abs(dv[:, 2]) + np.abs(fa), active=branch)
    else:
        for label, kind in _THM1_LABELS[8:]:
            rel.skip(label, kind)
    report.relations = rel.items
    return report


_THM1_LABELS = (
    ("kappa = 0", "algebraic"),
    ("k[f] = -theta (mu + f)", "differential"),
    ("k[theta] = 2H - theta^2 + 2mu", "differential"),
    ("k[omega] = -theta omega", "differential"),
    ("k[|sigma|^2] = -2 theta |sigma|^2", "differential"),
    ("k[H] = -theta H", "differential"),
    ("div k = 0", "algebraic"),
    ("|sigma|^2 - omega^2/4 = mu/2", "algebraic"),
    ("rho = -i omega/2 (adapted)", "algebraic"),
    ("sigma = -sqrt(mu/2) + i omega/2 (adapted)", "algebraic"),
    ("eps = 0 (adapted)", "differential"),
    ("x[omega] = 2 sqrt(mu/2) div y - omega div x", "differential"),
    ("sqrt(mu/2) div x + omega/2 div y = 0", "differential"),
    ("(-omega/(2 sqrt(mu/2)) x + y)[div y] = -f", "differential"),
)


def _scalar_flat_flags(ric, st, eig, eps, sp):
    sig = [tuple("0" if abs(v) <= eps else ("+" if v > 0 else "-") for v in e) for e in eig]
    return {
        "Ric(k,.) = 0": _ric_k_zero(ric, eps),
        "geodesic k (kappa = 0)": bool(np.all(np.abs(sp.kappa) <= eps)),
        "scalar flat": bool(np.all(np.abs(st.S) <= eps)),
        "signature (0,+,-)": all(s == ("-", "0", "+") for s in sig),
    }


def _thm2_constant(chart, frame, pts, st, sp, ric, eig, eps, mu, tol, tol_alg, h, force):
    flags = _scalar_flat_flags(ric, st, eig, eps, sp)
    lam = eig[:, 2]
    flags["lambda constant"] = bool(np.ptp(lam) <= eps)
    report = ScenarioReport("thm2-constant", flags)
    ok = all(flags.values())
    rel = _Relations(tol, tol_alg, ok)
    labels = (("beta = 0", "algebraic"), ("(sigma + sigma_bar) lambda = 0", "algebraic"),
              ("k[rho] = |sigma|^2 + rho^2", "differential"),
              ("k[sigma] = 2 sigma eps + sigma (rho + rho_bar) + lambda", "differential"),
              ("|sigma|^2 - |rho|^2 - i omega eps = 0", "algebraic"),
              ("-i c (sigma - sigma_bar) = lambda, eps = i c", "algebraic"),
              ("k[|sigma|^2] = -2 theta |sigma|^2", "differential"),
              ("k[|rho|^2] = -theta (|sigma|^2 + |rho|^2)", "differential"))
    if not (ok or force):
        for label, kind in labels:
            rel.skip(label, kind)
        report.relations = rel.items
        return report
    frame_fn = ricci_eigen_frame(chart, frame)
    ast = numeric_frame_state(chart, frame_fn, pts, h)
    a = ast.spin
    s2, r2, th = a.abs_sigma_sq, a.rho_abs_sq, a.div_k

    def q(p):
        s = numeric_frame_state(chart, frame_fn, p, h, curvature=False).spin
        return np.stack([s.rho, s.sigma, s.abs_sigma_sq + 0j, s.rho_abs_sq + 0j], axis=-1)
    d = directional_derivative(chart, pts, q, ast.E[:, 0], 10 * h)
    rel.add(labels[0][0], "differential", a.beta)
    rel.add(labels[1][0], "algebraic", (a.sigma + np.conj(a.sigma)) * lam)
    rel.add(labels[2][0], "differential", d[:, 0] - s2 - a.rho ** 2,
            np.abs(d[:, 0]) + s2 + r2)
    rel.add(labels[3][0], "differential",
            d[:, 1] - 2 * a.sigma * a.eps - a.sigma * (a.rho + np.conj(a.rho)) - lam,
            np.abs(d[:, 1]) + np.abs(2 * a.sigma * a.eps) + np.abs(a.sigma * th) + lam)
    rel.add(labels[4][0], "differential", s2 - r2 - 1j * a.omega * a.eps, s2 + r2)
    c = (a.eps / 1j).real
    rel.add(labels[5][0], "differential", -1j * c * (a.sigma - np.conj(a.sigma)) - lam, lam)
    rel.add(labels[6][0], "differential", d[:, 2] + 2 * th * s2, np.abs(d[:, 2]) + np.abs(2 * th * s2))
    rel.add(labels[7][0], "differential", d[:, 3] + th * (s2 + r2),
            np.abs(d[:, 3]) + np.abs(th) * (s2 + r2))
    report.relations = rel.items
    return report


def _thm2_closed(chart, frame, pts, st, sp, ric, eig, eps, mu, tol, tol_alg, h, force):
    flags = _scalar_flat_flags(ric, st, eig, eps, sp)
    flags["divergence-free k"] = bool(np.all(np.abs(sp.div_k) <= eps))
    report = ScenarioReport("thm2-closed", flags)
    ok = all(flags.values())
    rel = _Relations(tol, tol_alg, ok)
    psi = ric["mm"]
    s2, th, w = sp.abs_sigma_sq, sp.div_k, sp.omega
    base = (("sigma psi_bar + sigma_bar psi = 0", "algebraic"),
            ("k[rho] = |sigma|^2 + rho^2", "differential"),
            ("k[sigma] = 2 sigma eps + psi", "differential"),
            ("k[|sigma|^2] = 0", "differential"),
            ("H = omega^2/4 - |sigma|^2 + theta^2/4 = 0", "algebraic"))
    adapted = (("sigma = i omega/2 = rho_bar (adapted)", "algebraic"),
               ("x[omega] = -(div x) omega", "differential"),
               ("<nabla_x x, y> omega = 0", "differential"),
               ("Im psi = 0 (adapted)", "differential"),
               ("x[div x] = -(div x)^2 + psi", "differential"),
               ("d alpha(k,y) + omega~ = 0 (contact)", "differential"))
    if not (ok or force):
        for label, kind in base + adapted:
            rel.skip(label, kind)
        report.relations = rel.items
        return report
    d = _k_derivatives(chart, frame, pts, ("rho", "sigma", "sigma_abs2"), 0.0, h)
    rel.add(base[0][0], "algebraic", sp.sigma * np.conj(psi) + np.conj(sp.sigma) * psi,
            2 * np.abs(sp.sigma * psi))
    rel.add(base[1][0], "differential", d["rho"] - s2 - sp.rho ** 2,
            np.abs(d["rho"]) + s2 + sp.rho_abs_sq)
    rel.add(base[2][0], "differential", d["sigma"] - 2 * sp.sigma * sp.eps - psi,
            np.abs(d["sigma"]) + np.abs(2 * sp.sigma * sp.eps) + np.abs(psi))
    rel.add(base[3][0], "differential", d["sigma_abs2"], np.abs(d["sigma_abs2"]))
    rel.add(base[4][0], "algebraic", w ** 2 / 4 - s2 + th ** 2 / 4, w ** 2 / 4 + s2)
    twist = bool(np.all(np.abs(w) > np.sqrt(tol_alg)))
    flags["omega nowhere zero"] = twist
    _adapted_x_relations(chart, frame, pts, rel, adapted, ok and twist, force, h,
                         lambda ast: ast.ric["mm"], contact=True)
    report.relations = rel.items
    return report


def _adapted_x_relations(chart, frame, pts, rel, labels, active, force, h, source, contact):
    """Relations in the frame with x spanning ker D (requires omega != 0)."""
    if not (active or force):
        for label, kind in labels:
            rel.skip(label, kind)
        return
    frame_fn = d_kernel_frame(chart, frame, 0.0)
    ast = numeric_frame_state(chart, frame_fn, pts, h)
    a = ast.spin
    w, divx = a.omega, ast.divs[:, 1]
    src = source(ast)
    rel.add(labels[0][0], "algebraic",
            np.maximum(np.abs(a.sigma - 0.5j * w), np.abs(np.conj(a.rho) - 0.5j * w)),
            np.abs(w), active=active)
    q = _adapted_quantities(chart, frame_fn, h)
    dx = directional_derivative(chart, pts, q, ast.E[:, 1], 10 * h)
    rel.add(labels[1][0], "differential", dx[:, 0] + divx * w,
            np.abs(dx[:, 0]) + np.abs(divx * w), active=active)
    rel.add(labels[2][0], "differential", ast.C[:, 1, 1, 2] * w, np.abs(w), active=active)
    i = 3
    if contact:
        rel.add(labels[3][0], "differential", np.imag(src), np.abs(src), active=active)
        i = 4
    rhs = src.real if contact else src
    rel.add(labels[i][0], "differential", dx[:, 1] + divx ** 2 - rhs,
            np.abs(dx[:, 1]) + divx ** 2 + np.abs(rhs), active=active)
    if contact:
        C = ast.C
        w_t = C[:, 1, 2, 0] - C[:, 1, 0, 2]          # <nabla_y x, k> - <nabla_k x, y>
        da = _alpha_d(chart, frame_fn, pts, h)
        rel.add(labels[5][0], "differential", da + w_t, np.abs(da) + np.abs(w_t), active=active)


def _thm3(chart, frame, pts, st, sp, ric, eig, eps, mu, tol, tol_alg, h, force):
    S = st.S
    d = _k_derivatives(chart, frame, pts, ("S",), 0.0, h)
    flags = {
        "Ric(k,.) = 0": _ric_k_zero(ric, eps),
        "S > 0": bool(np.all(S > eps)),
        "k[S] = 0": bool(np.all(np.abs(d["S"]) <= tol * np.maximum(1.0, np.abs(S)))),
        "eigenvalues (0,f,f)": bool(np.all(np.abs(ric["mm"]) <= eps)
                                    and np.all(np.abs(eig[:, 0]) <= eps)),
    }
    report = ScenarioReport("thm3", flags)
    ok = all(flags.values())
    rel = _Relations(tol, tol_alg, ok)
    base = (("Ric(m,m_bar) = S/2", "algebraic"), ("kappa = 0", "algebraic"),
            ("div k = 0", "algebraic"), ("omega^2/4 - |sigma|^2 = 0", "algebraic"),
            ("R(k,.,.,.) = 0", "algebraic"),
            ("omega = 0 branch: sigma = rho = 0", "algebraic"))
    adapted = (("sigma = i omega/2 = rho_bar (adapted)", "algebraic"),
               ("x[omega] = -(div x) omega", "differential"),
               ("<nabla_x x, y> omega = 0", "differential"),
               ("x[div x] = -(div x)^2 - S/2", "differential"))
    if not (ok or force):
        for label, kind in base + adapted:
            rel.skip(label, kind)
        report.relations = rel.items
        return report
    w = sp.omega
    rel.add(base[0][0], "algebraic", ric["mmb"] - S / 2, S)
    rel.add(base[1][0], "algebraic", sp.kappa)
    rel.add(base[2][0], "algebraic", sp.div_k)
    rel.add(base[3][0], "algebraic", w ** 2 / 4 - sp.abs_sigma_sq, w ** 2 / 4 + sp.abs_sigma_sq)
    Rk = np.einsum("nijkl,ni->njkl", st.R4, st.E[:, 0])
    rel.add(base[4][0], "algebraic", np.abs(Rk).reshape(len(pts), -1).max(axis=1))
    zero = np.abs(w) <= np.sqrt(tol_alg)
    rel.add(base[5][0], "algebraic", np.maximum(np.abs(sp.sigma), np.abs(sp.rho)), mask=zero)
    if np.all(zero) and not force:
        for label, kind in adapted:
            rel.skip(label, kind)
    else:
        sub = pts if force else pts[~zero]
        _adapted_x_relations(chart, frame, sub, rel, adapted, ok and not np.all(zero), force, h,
                             lambda ast: -ast.S / 2, contact=False)
    flags["omega = 0 on sample"] = bool(np.all(zero))
    report.relations = rel.items
    return report
