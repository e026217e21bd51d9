"""Complex triads, spin coefficients and the shear/twist/divergence of k.

Frames are {k, x, y} with m = (x - i y)/sqrt(2). Inner products are the
complex-bilinear extension of g, so <m, m> = 0 and <m, conj(m)> = 1.
All batch functions broadcast over leading point dimensions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chart import FrameField, MetricChart, orthonormality_residuals
from .curvature import connection, riemann_4form_from

SQRT2 = np.sqrt(2.0)
FRAME_TOL = 1e-8

# complex triad in frame components (k, x, y)
K_ = np.array([1.0, 0.0, 0.0], dtype=complex)
M_ = np.array([0.0, 1.0, -1.0j]) / SQRT2
MB_ = np.conj(M_)


class FrameError(ValueError):
    pass


@dataclass(frozen=True)
class ComplexTriad:
    k: np.ndarray
    m: np.ndarray
    mbar: np.ndarray

    def relations(self, g) -> dict:
        """Residuals of the null/normalisation relations."""
        ip = lambda u, v: np.einsum("...ij,...i,...j->...", g, u, v)
        return {
            "<m,m>": np.abs(ip(self.m, self.m)),
            "<mbar,mbar>": np.abs(ip(self.mbar, self.mbar)),
            "<k,m>": np.abs(ip(self.k, self.m)),
            "<k,mbar>": np.abs(ip(self.k, self.mbar)),
            "<m,mbar>-1": np.abs(ip(self.m, self.mbar) - 1.0),
            "<k,k>-1": np.abs(ip(self.k, self.k) - 1.0),
        }


def complex_triad_from(frame_vals, g=None) -> ComplexTriad:
    """Triad from frame vectors (..., 3 legs, 3 comps). If ``g`` is given the
    frame is checked for orthonormality."""
    E = np.asarray(frame_vals, dtype=float)
    if g is not None:
        res = orthonormality_residuals(g, E)
        if np.max(res) > FRAME_TOL:
            raise FrameError(f"frame is not orthonormal (max residual {np.max(res):.3g})")
    k = E[..., 0, :].astype(complex)
    m = (E[..., 1, :] - 1j * E[..., 2, :]) / SQRT2
    return ComplexTriad(k, m, np.conj(m))


def complex_triad(chart: MetricChart, p, frame: FrameField | None = None) -> ComplexTriad:
    pts = chart.check_points(p)
    E, _ = chart.frame_jets(pts, order=0, frame=frame)
    return complex_triad_from(E, chart.metric(pts))


@dataclass(frozen=True)
class SpinCoefficients:
    kappa: np.ndarray
    rho: np.ndarray
    sigma: np.ndarray
    eps: np.ndarray
    beta: np.ndarray
    div_k: np.ndarray
    omega: np.ndarray
    abs_sigma_sq: np.ndarray

    @property
    def rho_abs_sq(self):
        return np.abs(self.rho) ** 2


def covariant_jacobian(gamma, vals, grads):
    """nabla_i V^c for vector fields: (..., leg, i, c)."""
    return np.swapaxes(grads, -1, -2) + np.einsum("...cij,...aj->...aic", gamma, vals)


def divergence(gamma, vals, grads):
    """div V = d_i V^i + Gamma^i_ij V^j for each leg."""
    return (np.einsum("...aii->...a", grads)
            + np.einsum("...iij,...aj->...a", gamma, vals))


@dataclass(frozen=True)
class TriadState:
    """Everything the identities need at a batch of points."""
    points: np.ndarray
    g: np.ndarray
    E: np.ndarray          # frame vectors (..., leg, comp)
    C: np.ndarray          # C[..., a, b, c] = <nabla_{e_b} e_a, e_c>
    divs: np.ndarray       # div of each leg
    spin: SpinCoefficients
    ric: dict | None       # triad Ricci components (complex)
    ric_coord: np.ndarray | None
    R4: np.ndarray | None
    S: np.ndarray | None


def _spin_from_C(C, div_k):
    def sc(V, W, U):
        return np.einsum("...abc,a,b,c->...", C.astype(complex), V, W, U)
    kappa = -sc(K_, K_, M_)
    rho = -sc(K_, MB_, M_)
    sigma = -sc(K_, M_, M_)
    eps = sc(M_, K_, MB_)
    beta = sc(M_, M_, MB_)
    omega = C[..., 0, 2, 1] - C[..., 0, 1, 2]
    return SpinCoefficients(kappa, rho, sigma, eps, beta, div_k, omega, np.abs(sigma) ** 2)


def triad_ricci(ric_coord, R4, E) -> dict:
    """Ricci components on the triad, both from the coordinate Ricci tensor
    and from the contraction R(k,.,.,k) + R(m,.,.,mbar) + R(mbar,.,.,m)."""
    k = E[..., 0, :].astype(complex)
    m = (E[..., 1, :] - 1j * E[..., 2, :]) / SQRT2
    mb = np.conj(m)
    ric = lambda u, v: np.einsum("...ij,...i,...j->...", ric_coord, u, v)

    def ric_r(u, v):
        out = 0
        for a, b in ((k, k), (m, mb), (mb, m)):
            out = out + np.einsum("...ijkl,...i,...j,...k,...l->...", R4, a, u, v, b)
        return out

    comps = {"kk": (k, k), "km": (k, m), "kmb": (k, mb), "mm": (m, m),
             "mbmb": (mb, mb), "mmb": (m, mb)}
    return {name: ric(u, v) for name, (u, v) in comps.items()} | \
        {"R_" + name: ric_r(u, v) for name, (u, v) in comps.items()}


def triad_state(chart: MetricChart, points, frame: FrameField | None = None,
                curvature: bool = True, check: bool = True) -> TriadState:
    pts = chart.check_points(points)
    E, dE = chart.frame_jets(pts, order=1, frame=frame)
    return triad_state_from_vectors(chart, pts, E, dE, curvature, check)


def triad_state_from_vectors(chart: MetricChart, pts, E, dE, curvature: bool = True,
                             check: bool = True) -> TriadState:
    """Triad state for frame values ``E`` (..., leg, comp) with coordinate
    gradients ``dE`` (..., leg, comp, i), however they were obtained."""
    g, ginv, gamma, dgamma = connection(chart, pts, second=curvature)
    if check:
        res = orthonormality_residuals(g, E)
        if np.max(res) > FRAME_TOL:
            raise FrameError(f"frame is not orthonormal (max residual {np.max(res):.3g})")
    nab = covariant_jacobian(gamma, E, dE)                  # (..., a, i, c)
    C = np.einsum("...bi,...aid,...de,...ce->...abc", E, nab, g, E)
    divs = divergence(gamma, E, dE)
    spin = _spin_from_C(C, divs[..., 0])
    ric = ric_coord = R4 = S = None
    if curvature:
        R4 = riemann_4form_from(g, gamma, dgamma)
        ric_coord = np.einsum("...il,...ijkl->...jk", ginv, R4)
        ric_coord = 0.5 * (ric_coord + np.swapaxes(ric_coord, -1, -2))
        S = np.einsum("...jl,...jl->...", ginv, ric_coord)
        ric = triad_ricci(ric_coord, R4, E)
    return TriadState(pts, g, E, C, divs, spin, ric, ric_coord, R4, S)


def spin_coefficients(chart: MetricChart, p, frame: FrameField | None = None) -> SpinCoefficients:
    """kappa, rho, sigma, eps, beta with div k, omega and |sigma|^2 at p."""
    frame = frame or chart.frame
    if not isinstance(frame, FrameField):
        raise FrameError("spin coefficients need an expression-defined frame")
    return triad_state(chart, p, frame, curvature=False).spin


def ricci_from_triad(chart: MetricChart, p, frame: FrameField | None = None) -> dict:
    """Ric(k,k), Ric(k,m), Ric(m,m), Ric(m,mbar) via the triad contraction."""
    st = triad_state(chart, p, frame)
    r = st.ric
    return {"kk": r["R_kk"], "km": r["R_km"], "mm": r["R_mm"], "mmb": r["R_mmb"]}


def sigma_from_shear(C):
    """sigma from the real shear formula
    1/2(<D_y k,y> - <D_x k,x>) + i/2(<D_y k,x> + <D_x k,y>)."""
    return (0.5 * (C[..., 0, 2, 2] - C[..., 0, 1, 1])
            + 0.5j * (C[..., 0, 2, 1] + C[..., 0, 1, 2]))


# --------------------------------------------------------------------------
# kinematics with pointwise transverse vectors (used along trajectories)
# --------------------------------------------------------------------------

def kinematics(g, gamma, kval, kgrad, xv, yv) -> dict:
    """kappa, rho, sigma, div k, omega of a unit field k given its value and
    coordinate gradient, with transverse vectors x, y at the same point."""
    nab = covariant_jacobian(gamma, kval[..., None, :], kgrad[..., None, :, :])[..., 0, :, :]
    basis = np.stack([kval, xv, yv], axis=-2)
    Ck = np.einsum("...bi,...id,...de,...ce->...bc", basis, nab, g, basis)  # <nabla_b k, e_c>
    C = np.zeros(Ck.shape[:-2] + (3, 3, 3))
    C[..., 0, :, :] = Ck
    div_k = divergence(gamma, kval[..., None, :], kgrad[..., None, :, :])[..., 0]
    spin = _spin_from_C(C, div_k)
    return {"kappa": spin.kappa, "rho": spin.rho, "sigma": spin.sigma,
            "div_k": div_k, "omega": spin.omega, "C": C}


# --------------------------------------------------------------------------
# the endomorphism Z -> nabla_Z k on k-perp
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DMatrix:
    entries: np.ndarray     # [[<D_x k,x>, <D_y k,x>], [<D_x k,y>, <D_y k,y>]]
    div_k: float
    omega: float
    sigma: complex
    mu: float | None = None
    H: float | None = None

    def closed_form(self) -> np.ndarray:
        s, w, t = self.sigma, self.omega, self.div_k
        return (np.array([[-s.real, w / 2 + s.imag], [-w / 2 + s.imag, s.real]])
                + 0.5 * t * np.eye(2))

    def symmetric_tracefree(self) -> np.ndarray:
        a = self.entries
        sym = 0.5 * (a + a.T)
        return sym - 0.5 * np.trace(sym) * np.eye(2)

    def skew(self) -> np.ndarray:
        a = self.entries
        return 0.5 * (a - a.T)


def d_matrix_from(C, div_k, spin_sigma, omega) -> DMatrix:
    entries = np.array([[C[0, 1, 1], C[0, 2, 1]], [C[0, 1, 2], C[0, 2, 2]]])
    return DMatrix(entries, float(div_k), float(omega), complex(spin_sigma))


def d_matrix(chart: MetricChart, p, frame: FrameField | None = None,
             mu: float | None = None) -> DMatrix:
    st = triad_state(chart, np.asarray(p, dtype=float), frame, curvature=False)
    D = d_matrix_from(st.C, st.spin.div_k, st.spin.sigma, st.spin.omega)
    if mu is not None:
        D = DMatrix(D.entries, D.div_k, D.omega, D.sigma, mu, h_function(D, mu))
    return D


def h_function(dmatrix: DMatrix, mu: float) -> float:
    """H = det D - mu/2."""
    return float(np.linalg.det(dmatrix.entries) - mu / 2.0)


def h_from_invariants(omega, abs_sigma_sq, div_k, mu):
    return omega ** 2 / 4.0 - abs_sigma_sq + div_k ** 2 / 4.0 - mu / 2.0
