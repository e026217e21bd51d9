"""Integral curves, geodesics and parallel transport; evolution laws along
flows; scalar ODE cases with closed-form solutions.

Integration is classical fixed-step RK4. Each step is also redone as two
half steps; the difference (divided by 15) estimates the local error and a
step whose estimate exceeds ``max_local_error`` is rejected with
StepRejected. The trajectory itself advances with the full step, so the
scheme stays plain RK4.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chart import METRIC_INDEX, MetricChart, _vector_jets
from .curvature import connection
from .expr import compile_jet, eval_jet2, parse_expression
from .triad import SQRT2, kinematics

MAX_LOCAL_ERROR = 1e-6
DEFAULT_DT = 1e-3
OBSERVABLES = ("theta", "omega", "sigma_abs2", "rho_abs2", "H", "S", "f")


class StepRejected(ArithmeticError):
    pass


class FlowError(ValueError):
    pass


# --------------------------------------------------------------------------
# vector fields
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VectorField:
    exprs: tuple           # three Exprs
    params: dict
    coords: tuple
    label: str = ""

    @classmethod
    def from_chart(cls, chart: MetricChart, spec, label: str = "") -> "VectorField":
        """``spec`` is 'e1,e2,e3' text, a 3-sequence of texts, or one of the
        frame legs 'k', 'x', 'y' of the chart's frame."""
        if isinstance(spec, str) and spec in ("k", "x", "y"):
            if chart.frame is None:
                raise FlowError(f"chart {chart.name!r} has no frame to take {spec!r} from")
            exprs = chart.frame.exprs["kxy".index(spec)]
            return cls(tuple(exprs), dict(chart.params), chart.coords, label or spec)
        return cls(chart.field(spec), dict(chart.params), chart.coords,
                   label or (spec if isinstance(spec, str) else ",".join(spec)))

    def jets(self, points, order: int = 1):
        vals, grads = _vector_jets((self.exprs,), self.params, self.coords, points, order)
        return vals[..., 0, :], (grads[..., 0, :, :] if grads is not None else None)

    def __call__(self, points):
        return self.jets(points, order=0)[0]


_G_IDX = np.zeros((3, 3), dtype=int)
for _n, (_i, _j) in enumerate(METRIC_INDEX):
    _G_IDX[_i, _j] = _G_IDX[_j, _i] = _n


def _gamma_fn(chart: MetricChart):
    """Christoffel symbols at a batch of points, evaluated point by point
    through the scalar jets (much cheaper than the array path for the
    one- or two-point batches RK4 needs)."""
    fns = [compile_jet(e, chart.params, chart.coords, order=1).raw(False) for e in chart.g_exprs]

    def gamma(pts):
        out = np.empty((len(pts), 3, 3, 3))
        for n, p in enumerate(pts):
            x, y, z = float(p[0]), float(p[1]), float(p[2])
            arr = np.array([f(x, y, z) for f in fns])[_G_IDX]      # (3, 3, 4)
            g, dg = arr[..., 0], arr[..., 1:]                    # dg[i, j, a] = d_a g_ij
            # g1[l, i, j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
            g1 = 0.5 * (np.einsum("jli->lij", dg) + np.einsum("ilj->lij", dg)
                        - np.einsum("ijl->lij", dg))
            out[n] = (np.linalg.inv(g) @ g1.reshape(3, 9)).reshape(3, 3, 3)
        return out
    return gamma


def _field_fn(vf: "VectorField"):
    fns = [compile_jet(e, vf.params, vf.coords, order=0).raw(False) for e in vf.exprs]

    def values(pts):
        return np.array([[f(float(p[0]), float(p[1]), float(p[2]))[0] for f in fns]
                         for p in pts])
    return values


# --------------------------------------------------------------------------
# RK4 core
# --------------------------------------------------------------------------

def _rk4(rhs, y, dt):
    """One RK4 step for a batch of states y (m, d) with steps dt (m,)."""
    dt = dt[:, None]
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


class _Outside(Exception):
    pass


def _run(rhs, y0, dt, n, inside, max_local_error=MAX_LOCAL_ERROR, monitor=True,
         post=None):
    """Fixed-step RK4 from y0; returns (states (N, d), boundary_hit, errors)."""
    ys = [np.asarray(y0, dtype=float)]
    errs = [0.0]
    y = ys[0]

    def guarded(z):
        if not np.all(inside(z[:, :3])):
            raise _Outside
        return rhs(z)

    boundary = False
    for _ in range(n):
        try:
            if monitor:
                pair = _rk4(guarded, np.stack([y, y]), np.array([dt, 0.5 * dt]))
                y_full, y_half = pair[0], pair[1]
                y_two = _rk4(guarded, y_half[None], np.array([0.5 * dt]))[0]
                err = float(np.max(np.abs(y_full - y_two))) / 15.0
                if err > max_local_error:
                    raise StepRejected(
                        f"local error estimate {err:.3g} exceeds {max_local_error:.3g}; "
                        f"reduce dt")
            else:
                y_full = _rk4(guarded, y[None], np.array([dt]))[0]
                err = float("nan")
        except _Outside:
            boundary = True
            break
        if not np.all(inside(y_full[None, :3])):
            boundary = True
            break
        if post is not None:
            y_full = post(y_full)
        y = y_full
        ys.append(y)
        errs.append(err)
    return np.array(ys), boundary, np.array(errs)


def _transport_rhs(gamma, vel, vecs):
    """dv^k/ds = -Gamma^k_ij gamma'^i v^j for (m, nv, 3) vectors."""
    return -np.einsum("mkij,mi,mvj->mvk", gamma, vel, vecs)


# --------------------------------------------------------------------------
# trajectories
# --------------------------------------------------------------------------

@dataclass
class Trajectory:
    s: np.ndarray                  # (N,)
    points: np.ndarray             # (N, 3)
    frames: np.ndarray             # (N, 3, 3): k = gamma', x, y (x, y transported)
    observables: dict              # name -> (N,)
    drift: np.ndarray              # (N,) orthonormality drift removed at each step
    boundary: bool = False
    dt: float = DEFAULT_DT
    kind: str = "flow"             # "flow" or "geodesic"
    field: VectorField | None = None
    local_error: np.ndarray | None = None
    mu: float | None = None

    def __len__(self):
        return len(self.s)

    @property
    def endpoint(self) -> np.ndarray:
        return self.points[-1]


def _frame_from(chart, p, kvec):
    """Orthonormal (x, y) in k-perp at p: Gram-Schmidt of the coordinate
    axes least aligned with k."""
    g = chart.metric(p)
    k = kvec / math.sqrt(kvec @ g @ kvec)
    basis = []
    for axis in np.eye(3)[np.argsort(np.abs(g @ k))]:
        w = axis - (k @ g @ axis) * k
        for b in basis:
            w = w - (b @ g @ w) * b
        nrm = math.sqrt(max(w @ g @ w, 0.0))
        if nrm > 1e-6:
            basis.append(w / nrm)
        if len(basis) == 2:
            break
    x, y = basis
    if np.linalg.det(np.stack([k, x, y])) < 0:
        y = -y
    return x, y


def _orthonormalize_pair(g, x, y):
    """Gram-Schmidt on (x, y); returns new pair and the drift removed."""
    gram = np.array([[x @ g @ x, x @ g @ y], [y @ g @ x, y @ g @ y]])
    drift = float(np.max(np.abs(gram - np.eye(2))))
    x = x / math.sqrt(gram[0, 0])
    y = y - (x @ g @ y) * x
    y = y / math.sqrt(y @ g @ y)
    return x, y, drift


def _initial_pair(chart, p0, kvec, frame0):
    if frame0 is None:
        return _frame_from(chart, p0, kvec)
    x, y = (np.asarray(v, dtype=float) for v in frame0)
    return x, y


def integrate_flow(chart: MetricChart, field, p0, dt: float = DEFAULT_DT, n: int = 1000,
                   frame0=None, mu: float | None = None,
                   max_local_error: float = MAX_LOCAL_ERROR, monitor: bool = True) -> Trajectory:
    """Integral curve of ``field`` from p0, carrying two parallel-transported
    vectors (initially orthonormal in k-perp, or ``frame0``)."""
    vf = field if isinstance(field, VectorField) else VectorField.from_chart(chart, field)
    p0 = chart.check_points(np.asarray(p0, dtype=float))
    if dt <= 0 or n < 1:
        raise FlowError("dt must be positive and n at least 1")
    k0 = vf(p0)
    x0, y0 = _initial_pair(chart, p0, k0, frame0)

    gam, field_values = _gamma_fn(chart), _field_fn(vf)

    def rhs(z):
        p = z[:, :3]
        vel = field_values(p)
        gamma = gam(p)
        dv = _transport_rhs(gamma, vel, z[:, 3:].reshape(-1, 2, 3))
        return np.concatenate([vel, dv.reshape(-1, 6)], axis=1)

    drifts = [0.0]

    def post(z):
        g = chart.metric(z[:3])
        x, y, d = _orthonormalize_pair(g, z[3:6], z[6:9])
        drifts.append(d)
        return np.concatenate([z[:3], x, y])

    states, boundary, errs = _run(rhs, np.concatenate([p0, x0, y0]), dt, n, chart.contains,
                                  max_local_error, monitor, post)
    return _finish(chart, vf, states, boundary, errs, np.array(drifts), dt, mu, "flow")


def integrate_geodesic(chart: MetricChart, p0, v0, dt: float = DEFAULT_DT, n: int = 1000,
                       frame0=None, mu: float | None = None,
                       max_local_error: float = MAX_LOCAL_ERROR,
                       monitor: bool = True) -> Trajectory:
    """Geodesic with initial velocity v0, with a transported pair in v0-perp."""
    p0 = chart.check_points(np.asarray(p0, dtype=float))
    v0 = np.asarray(v0, dtype=float)
    x0, y0 = _initial_pair(chart, p0, v0, frame0)

    gam = _gamma_fn(chart)

    def rhs(z):
        p, vel = z[:, :3], z[:, 3:6]
        gamma = gam(p)
        vecs = z[:, 3:].reshape(-1, 3, 3)        # velocity is transported too
        dv = _transport_rhs(gamma, vel, vecs)
        return np.concatenate([vel, dv.reshape(-1, 9)], axis=1)

    drifts = [0.0]

    def post(z):
        g = chart.metric(z[:3])
        x, y, d = _orthonormalize_pair(g, z[6:9], z[9:12])
        drifts.append(d)
        return np.concatenate([z[:6], x, y])

    states, boundary, errs = _run(rhs, np.concatenate([p0, v0, x0, y0]), dt, n, chart.contains,
                                  max_local_error, monitor, post)
    return _finish(chart, None, states, boundary, errs, np.array(drifts), dt, mu, "geodesic")


def _finish(chart, vf, states, boundary, errs, drifts, dt, mu, kind):
    N = len(states)
    s = dt * np.arange(N)
    pts = states[:, :3]
    if kind == "flow":
        kval, kgrad = vf.jets(pts, order=1)
        xv, yv = states[:, 3:6], states[:, 6:9]
    else:
        kval, kgrad = states[:, 3:6], None
        xv, yv = states[:, 6:9], states[:, 9:12]
    frames = np.stack([kval, xv, yv], axis=1)
    obs = observables_along(chart, pts, kval, kgrad, xv, yv, mu) if kgrad is not None else {}
    return Trajectory(s, pts, frames, obs, drifts[:N], boundary, dt, kind, vf, errs, mu)


def observables_along(chart, pts, kval, kgrad, xv, yv, mu=None) -> dict:
    """theta, omega, |sigma|^2, |rho|^2, H, S and f = Ric(m, mbar) with the
    transverse vectors made orthonormal to k."""
    g, ginv, gamma, dgamma = connection(chart, pts)
    kn = kval / np.sqrt(np.einsum("nij,ni,nj->n", g, kval, kval))[:, None]
    x = xv - np.einsum("nij,ni,nj->n", g, kn, xv)[:, None] * kn
    x = x / np.sqrt(np.einsum("nij,ni,nj->n", g, x, x))[:, None]
    y = yv - np.einsum("nij,ni,nj->n", g, kn, yv)[:, None] * kn \
        - np.einsum("nij,ni,nj->n", g, x, yv)[:, None] * x
    y = y / np.sqrt(np.einsum("nij,ni,nj->n", g, y, y))[:, None]
    kin = kinematics(g, gamma, kval, kgrad, x, y)
    from .curvature import riemann_4form_from
    R4 = riemann_4form_from(g, gamma, dgamma)
    ric = np.einsum("nil,nijkl->njk", ginv, R4)
    ric = 0.5 * (ric + np.swapaxes(ric, 1, 2))
    S = np.einsum("njk,njk->n", ginv, ric)
    m = (x - 1j * y) / SQRT2
    f = np.einsum("nij,ni,nj->n", ric, m, np.conj(m)).real
    theta, omega = kin["div_k"], kin["omega"]
    s2 = np.abs(kin["sigma"]) ** 2
    mu_ = 0.0 if mu is None else mu
    return {
        "theta": theta, "omega": omega, "sigma_abs2": s2,
        "rho_abs2": np.abs(kin["rho"]) ** 2,
        "H": omega ** 2 / 4 - s2 + theta ** 2 / 4 - mu_ / 2,
        "S": S, "f": f,
    }


def parallel_transport(chart: MetricChart, trajectory: Trajectory, v0, w0=None):
    """Transport v0 (and optionally w0) along the trajectory's curve on the
    same grid. Returns (N, 3) or a pair of such arrays."""
    vecs0 = [np.asarray(v0, dtype=float)] + ([np.asarray(w0, dtype=float)] if w0 is not None else [])
    nv = len(vecs0)
    dt, n = trajectory.dt, len(trajectory) - 1
    if trajectory.kind == "flow":
        gam, field_values = _gamma_fn(chart), _field_fn(trajectory.field)

        def rhs(z):
            p = z[:, :3]
            vel = field_values(p)
            gamma = gam(p)
            dv = _transport_rhs(gamma, vel, z[:, 3:].reshape(-1, nv, 3))
            return np.concatenate([vel, dv.reshape(-1, 3 * nv)], axis=1)
        y0 = np.concatenate([trajectory.points[0]] + vecs0)
    else:
        gam = _gamma_fn(chart)

        def rhs(z):
            p, vel = z[:, :3], z[:, 3:6]
            gamma = gam(p)
            dv = _transport_rhs(gamma, vel, z[:, 3:].reshape(-1, nv + 1, 3))
            return np.concatenate([vel, dv.reshape(-1, 3 * (nv + 1))], axis=1)
        y0 = np.concatenate([trajectory.points[0], trajectory.frames[0, 0]] + vecs0)
    states, _, _ = _run(rhs, y0, dt, n, chart.contains, monitor=False)
    off = 3 if trajectory.kind == "flow" else 6
    out = [states[:, off + 3 * i: off + 3 * i + 3] for i in range(nv)]
    return out[0] if nv == 1 else tuple(out)


# --------------------------------------------------------------------------
# evolution laws along a trajectory
# --------------------------------------------------------------------------

def stencil_derivative(values, dt):
    """Fourth-order finite-difference derivative on a uniform grid (five-point
    central stencil, one-sided five-point formulas at the two ends on each side)."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    if n < 5:
        raise FlowError("at least 5 samples are needed for the derivative stencil")
    d = np.empty(n)
    d[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * dt)
    fw = np.array([-25, 48, -36, 16, -3]) / (12 * dt)
    d[0] = fw @ v[:5]
    d[1] = np.array([-3, -10, 18, -6, 1]) / (12 * dt) @ v[:5]
    d[-1] = -fw @ v[::-1][:5]
    d[-2] = -(np.array([-3, -10, 18, -6, 1]) / (12 * dt)) @ v[::-1][:5]
    return d


EVOLUTION_LAWS = ("omega", "sigma_abs2", "H", "rho_abs2", "ell", "theta")


def evolution_residuals(chart: MetricChart, trajectory: Trajectory, mu: float | None = None) -> dict:
    """Residuals d/ds(obs) - RHS for
      omega:      k[omega] = -theta omega
      sigma_abs2: k[|sigma|^2] = -2 theta |sigma|^2
      H:          k[H] = -theta H
      rho_abs2:   k[|rho|^2] = -theta (|sigma|^2 + |rho|^2)
      theta:      k[theta] = 2H - theta^2 + 2 mu   (only when mu is given)
      ell:        k[1/H] = theta / H               (only when H never vanishes)
    Each entry maps to (residual, scale).

    The rho_abs2 law needs a geodesic k with Ric(k,k) = 0; otherwise the
    right side gains -(theta/2) Ric(k,k). The theta and H laws assume
    Ric(k,k) = -mu with equal transverse eigenvalues."""
    obs = trajectory.observables
    if not obs:
        raise FlowError("trajectory carries no observables")
    if len(trajectory) < 5:
        raise FlowError("at least 5 samples are needed for the derivative stencil")
    mu_ = trajectory.mu if mu is None else mu
    th, w, s2, r2 = obs["theta"], obs["omega"], obs["sigma_abs2"], obs["rho_abs2"]
    H = w ** 2 / 4 - s2 + th ** 2 / 4 - (0.0 if mu_ is None else mu_) / 2
    dt = trajectory.dt
    d = {name: stencil_derivative(v, dt) for name, v in
         (("omega", w), ("sigma_abs2", s2), ("H", H), ("rho_abs2", r2), ("theta", th))}
    out = {
        "omega": (d["omega"] + th * w, np.abs(d["omega"]) + np.abs(th * w)),
        "sigma_abs2": (d["sigma_abs2"] + 2 * th * s2, np.abs(d["sigma_abs2"]) + np.abs(2 * th * s2)),
        "H": (d["H"] + th * H, np.abs(d["H"]) + np.abs(th * H)),
        "rho_abs2": (d["rho_abs2"] + th * (s2 + r2),
                     np.abs(d["rho_abs2"]) + np.abs(th) * (s2 + r2)),
    }
    if np.all(np.abs(H) > 1e-8):
        ell = 1.0 / H
        d_ell = stencil_derivative(ell, dt)
        out["ell"] = (d_ell - th * ell, np.abs(d_ell) + np.abs(th * ell))
    if mu_ is not None:
        rhs = 2 * H - th ** 2 + 2 * mu_
        out["theta"] = (d["theta"] - rhs, np.abs(d["theta"]) + np.abs(2 * H) + th ** 2 + 2 * mu_)
    return out


def relative_residual(pair) -> np.ndarray:
    res, scale = pair
    return np.abs(res) / np.maximum(1.0, scale)


# --------------------------------------------------------------------------
# scalar ODE cases
# --------------------------------------------------------------------------

ODE_CASES = ("ray3", "tanh-closed-form", "raylast", "g-decay", "ell-affine", "ell-jacobi",
             "h-concave")


@dataclass(frozen=True)
class OdeCase:
    id: str
    params: dict = field(default_factory=dict)
    s_range: tuple = (-5.0, 5.0)

    def __post_init__(self):
        if self.id not in ODE_CASES:
            raise FlowError(f"unknown ODE case {self.id!r}; choose from {', '.join(ODE_CASES)}")

    def p(self, name):
        return float(self.params.get(name, _ODE_DEFAULTS[self.id][name]))


_ODE_DEFAULTS = {
    "ray3": {"mu": 1.0, "theta0": 0.0},
    "tanh-closed-form": {"mu": 1.0},
    "raylast": {"theta0": 1.0},
    "g-decay": {"mu": 1.0, "theta0": 0.0, "g0": 2.0},
    "ell-affine": {"mu": 1.0, "c1": 0.0, "c2": 0.0},
    "ell-jacobi": {"psi": 1.0, "ell0": 1.0, "dell0": 0.0},
    "h-concave": {"S": 1.0, "h0": 1.0, "dh0": 0.5},
}

_DEFAULT_RANGES = {"ray3": (0.0, 5.0), "raylast": (0.0, 5.0), "g-decay": (0.0, 5.0),
                   "ell-affine": (-2.0, 2.0), "ell-jacobi": (-2.0, 2.0), "h-concave": (0.0, 5.0),
                   "tanh-closed-form": (-5.0, 5.0)}


def ode_case(case_id: str, s_range=None, **params) -> OdeCase:
    return OdeCase(case_id, {k: float(v) for k, v in params.items()},
                   tuple(s_range) if s_range is not None else _DEFAULT_RANGES.get(case_id, (-5.0, 5.0)))


def _riccati_closed(mu, theta0, s0):
    """Solution of theta' = -theta^2 + 2 mu with theta(s0) = theta0, as text
    in the variable x, or None where it is not defined on the whole range."""
    a = math.sqrt(2 * mu)
    if abs(abs(theta0) - a) <= 1e-15 * max(1.0, a):
        return f"{theta0!r} + 0*x"
    if abs(theta0) < a:
        c = math.atanh(theta0 / a)
        return f"{a!r}*tanh({a!r}*(x - ({s0!r})) + ({c!r}))"
    c = math.atanh(a / theta0)          # coth branch
    return f"{a!r}/tanh({a!r}*(x - ({s0!r})) + ({c!r}))"


@dataclass
class OdeReport:
    case: OdeCase
    s: np.ndarray
    numeric: np.ndarray
    closed_form: np.ndarray | None
    closed_text: str | None
    substitution_residual: float | None
    extras: dict = field(default_factory=dict)

    @property
    def abs_err(self):
        return None if self.closed_form is None else np.abs(self.numeric - self.closed_form)

    @property
    def max_abs_err(self) -> float:
        return float("nan") if self.closed_form is None else float(np.max(self.abs_err))


def _ode_spec(case: OdeCase):
    """(rhs(s, y), y0, index of the reported component, closed-form text,
    substitution-residual function of the closed-form jet (value, d1, d2, s))."""
    s0 = case.s_range[0]
    cid = case.id
    if cid in ("ray3", "tanh-closed-form"):
        mu = case.p("mu")
        if mu <= 0:
            raise FlowError("mu must be positive")
        a = math.sqrt(2 * mu)
        theta0 = case.p("theta0") if cid == "ray3" else a * math.tanh(a * s0)
        text = (_riccati_closed(mu, theta0, s0) if cid == "ray3"
                else f"{a!r}*tanh({a!r}*x)")
        return (lambda s, y: np.array([-y[0] ** 2 + 2 * mu]), [theta0], 0, text,
                lambda v, d1, d2, s: d1 + v ** 2 - 2 * mu)
    if cid == "raylast":
        t0 = case.p("theta0")
        text = f"{t0!r}/(1 + {t0!r}*(x - ({s0!r})))"
        return (lambda s, y: np.array([-y[0] ** 2]), [t0], 0, text,
                lambda v, d1, d2, s: d1 + v ** 2)
    if cid == "g-decay":
        mu, t0, g0 = case.p("mu"), case.p("theta0"), case.p("g0")
        a = math.sqrt(2 * mu)
        if abs(t0) >= a:
            raise FlowError("g-decay needs |theta0| < sqrt(2 mu) (tanh solution)")
        c = math.atanh(t0 / a)
        text = f"{g0 * math.cosh(c)!r}/cosh({a!r}*(x - ({s0!r})) + ({c!r}))"
        theta_text = f"{a!r}*tanh({a!r}*(x - ({s0!r})) + ({c!r}))"
        theta = parse_expression(theta_text)

        def sub(v, d1, d2, s):
            th = eval_jet2(theta, np.stack([s, 0 * s, 0 * s], -1)).value
            return d1 + th * v
        return (lambda s, y: np.array([-y[0] ** 2 + 2 * mu, -y[0] * y[1]]), [t0, g0], 1, text, sub)
    if cid == "ell-affine":
        mu, c1, c2 = case.p("mu"), case.p("c1"), case.p("c2")
        if mu <= 0:
            raise FlowError("mu must be positive")
        a = math.sqrt(2 * mu)
        text = (f"-1/{mu!r} + {c1!r}*exp({a!r}*(x - ({s0!r}))) "
                f"+ {c2!r}*exp(-{a!r}*(x - ({s0!r})))")
        return (lambda s, y: np.array([y[1], 2 + 2 * mu * y[0]]),
                [-1 / mu + c1 + c2, a * (c1 - c2)], 0, text,
                lambda v, d1, d2, s: d2 - 2 - 2 * mu * v)
    if cid == "ell-jacobi":
        psi, l0, dl0 = case.p("psi"), case.p("ell0"), case.p("dell0")
        t = f"(x - ({s0!r}))"
        if psi > 0:
            b = math.sqrt(psi)
            text = f"{l0!r}*cosh({b!r}*{t}) + {dl0 / b!r}*sinh({b!r}*{t})"
        elif psi < 0:
            b = math.sqrt(-psi)
            text = f"{l0!r}*cos({b!r}*{t}) + {dl0 / b!r}*sin({b!r}*{t})"
        else:
            text = f"{l0!r} + {dl0!r}*{t}"
        return (lambda s, y: np.array([y[1], psi * y[0]]), [l0, dl0], 0, text,
                lambda v, d1, d2, s: d2 - psi * v)
    # h-concave
    S, h0, dh0 = case.p("S"), case.p("h0"), case.p("dh0")
    if S <= 0:
        raise FlowError("h-concave needs S > 0")
    b = math.sqrt(S / 2)
    t = f"(x - ({s0!r}))"
    text = f"{h0!r}*cos({b!r}*{t}) + {dh0 / b!r}*sin({b!r}*{t})"
    return (lambda s, y: np.array([y[1], -S / 2 * y[0]]), [h0, dh0], 0, text,
            lambda v, d1, d2, s: d2 + S / 2 * v)


def rk4_scalar(rhs, y0, s0, dt, n):
    """Plain RK4 for a small system y' = rhs(s, y); returns (n+1, d)."""
    y = np.asarray(y0, dtype=float)
    out = np.empty((n + 1, len(y)))
    out[0] = y
    s = s0
    for i in range(n):
        k1 = rhs(s, y)
        k2 = rhs(s + dt / 2, y + dt / 2 * k1)
        k3 = rhs(s + dt / 2, y + dt / 2 * k2)
        k4 = rhs(s + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        s = s0 + (i + 1) * dt
        out[i + 1] = y
    return out


def closed_form_residual(text: str, residual_fn, s) -> np.ndarray:
    """Substitute a closed form (text in x) into its ODE via exact jets."""
    expr = parse_expression(text)
    s = np.asarray(s, dtype=float)
    jet = eval_jet2(expr, np.stack([s, 0 * s, 0 * s], axis=-1))
    return residual_fn(jet.value, jet.gradient[..., 0], jet.hessian[..., 0, 0], s)


def ode_suite(case: OdeCase, s_range=None, dt: float = DEFAULT_DT) -> OdeReport:
    """Integrate the case's ODE with RK4 and compare with its closed form."""
    if s_range is not None:
        case = OdeCase(case.id, case.params, tuple(s_range))
    s0, s1 = case.s_range
    if not s1 > s0:
        raise FlowError("the s range must be increasing")
    n = int(round((s1 - s0) / dt))
    if n < 1:
        raise FlowError("dt larger than the s range")
    s = s0 + dt * np.arange(n + 1)
    rhs, y0, comp, text, sub = _ode_spec(case)
    ys = rk4_scalar(rhs, y0, s0, dt, n)
    numeric = ys[:, comp]
    closed = eval_jet2(parse_expression(text), np.stack([s, 0 * s, 0 * s], -1)).value
    subres = float(np.max(np.abs(closed_form_residual(text, sub, s))))
    report = OdeReport(case, s, numeric, np.asarray(closed, dtype=float), text, subres)
    if case.id == "h-concave":
        report.extras.update(_concavity(ys[:, 0], ys[:, 1], s, case))
    return report


def _concavity(h, dh, s, case):
    """Tangent-line bound at s0 and the first zero crossing of h."""
    tangent = h[0] + dh[0] * (s - s[0])
    bound = float(np.max(h - tangent))
    idx = np.nonzero((h[:-1] > 0) & (h[1:] <= 0))[0]
    crossing = None
    if idx.size:
        i = idx[0]
        crossing = float(s[i] + (s[i + 1] - s[i]) * h[i] / (h[i] - h[i + 1]))
    S, h0, dh0 = case.p("S"), case.p("h0"), case.p("dh0")
    b = math.sqrt(S / 2)
    phi = math.atan2(dh0 / b, h0)
    exact = s[0] + (math.pi / 2 + phi) / b
    return {"tangent_bound_violation": bound, "zero_crossing": crossing,
            "zero_crossing_exact": exact}
