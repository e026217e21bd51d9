"""Levi-Civita connection and curvature of a metric chart.

Index conventions
-----------------
``gamma[..., k, i, j]`` is Gamma^k_ij.

``riemann`` returns R_ijkl with R_ijkl = <R(d_i, d_j) d_l, d_k>, where
R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z. With this
layout the unit sphere has R_ijkl = g_ik g_jl - g_il g_jk and the Ricci
tensor is the (1,3) contraction Ric_jl = g^ik R_ijkl = 2 g_jl.
``riemann_4form`` gives R(X,Y,Z,W) = <R(X,Y)Z, W>, the form the triad
identities are written in, so that Ric(Y,Z) = sum_a R(e_a, Y, Z, e_a).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chart import MetricChart, NotPositiveDefinite, RankDeficient

DEFAULT_EPS_SIG = 1e-7


class EigenNonConvergence(ArithmeticError):
    pass


def _inv_spd(g):
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("metric is not positive definite") from None
    return np.linalg.inv(g)


def connection(chart: MetricChart, points, second: bool = True):
    """Metric, inverse metric, Christoffel symbols and (optionally) their
    first derivatives ``dgamma[..., m, k, i, j] = d_m Gamma^k_ij``."""
    pts = chart.check_points(points)
    g, dg, d2g = chart.metric_jets(pts, order=2 if second else 1)
    ginv = _inv_spd(g)
    # first kind: G1[l,i,j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    g1 = 0.5 * (np.einsum("...ijl->...lij", dg) + np.einsum("...jil->...lij", dg) - dg)
    gamma = np.einsum("...kl,...lij->...kij", ginv, g1)
    if not second:
        return g, ginv, gamma, None
    dg1 = 0.5 * (np.einsum("...mijl->...mlij", d2g) + np.einsum("...mjil->...mlij", d2g)
                 - d2g)
    dginv = -np.einsum("...ka,...mab,...bl->...mkl", ginv, dg, ginv)
    dgamma = (np.einsum("...mkl,...lij->...mkij", dginv, g1)
              + np.einsum("...kl,...mlij->...mkij", ginv, dg1))
    return g, ginv, gamma, dgamma


def christoffel(chart: MetricChart, p) -> np.ndarray:
    """Gamma^k_ij at p (shape (..., 3, 3, 3), index order k, i, j)."""
    return connection(chart, p, second=False)[2]


def _riemann_up(gamma, dgamma):
    """Rup[..., i, j, k, l] = l-component of R(d_i, d_j) d_k."""
    t1 = np.einsum("...iljk->...ijkl", dgamma)           # d_i Gamma^l_jk
    t2 = np.einsum("...jlik->...ijkl", dgamma)           # d_j Gamma^l_ik
    t3 = np.einsum("...lim,...mjk->...ijkl", gamma, gamma)
    t4 = np.einsum("...ljm,...mik->...ijkl", gamma, gamma)
    return t1 - t2 + t3 - t4


def riemann_4form_from(g, gamma, dgamma):
    """R(d_i, d_j, d_k, d_l) = <R(d_i,d_j) d_k, d_l>."""
    rup = _riemann_up(gamma, dgamma)
    return np.einsum("...ijkn,...nl->...ijkl", rup, g)


def riemann_4form(chart: MetricChart, p) -> np.ndarray:
    g, _, gamma, dgamma = connection(chart, p)
    return riemann_4form_from(g, gamma, dgamma)


def riemann(chart: MetricChart, p) -> np.ndarray:
    """R_ijkl in the (1,3)-contracted layout (unit sphere: g_ik g_jl - g_il g_jk)."""
    return np.swapaxes(riemann_4form(chart, p), -1, -2)


@dataclass(frozen=True)
class CurvaturePack:
    g: np.ndarray
    gamma: np.ndarray
    R: np.ndarray          # R_ijkl, (1,3)-contraction layout
    ric: np.ndarray
    S: np.ndarray

    @property
    def R4(self) -> np.ndarray:
        """R(d_i,d_j,d_k,d_l) = <R(d_i,d_j)d_k, d_l>."""
        return np.swapaxes(self.R, -1, -2)


def curvature_pack(chart: MetricChart, p) -> CurvaturePack:
    g, ginv, gamma, dgamma = connection(chart, p)
    R4 = riemann_4form_from(g, gamma, dgamma)
    R = np.swapaxes(R4, -1, -2)
    ric = np.einsum("...ik,...ijkl->...jl", ginv, R)
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    S = np.einsum("...jl,...jl->...", ginv, ric)
    return CurvaturePack(g, gamma, R, ric, S)


def ricci(chart: MetricChart, p):
    """(Ric_jl, S)."""
    pack = curvature_pack(chart, p)
    return pack.ric, pack.S


def riemann_from_ricci(g, ric, S):
    """Rebuild R_ijkl from Ricci (the Weyl tensor vanishes in dimension 3),
    R_ijkl = g_ik P_jl - g_il P_jk + g_jl P_ik - g_jk P_il, P = Ric - (S/4) g."""
    P = ric - (np.asarray(S)[..., None, None] / 4.0) * g
    return (np.einsum("...ik,...jl->...ijkl", g, P) - np.einsum("...il,...jk->...ijkl", g, P)
            + np.einsum("...jl,...ik->...ijkl", g, P) - np.einsum("...jk,...il->...ijkl", g, P))


def sectional(chart: MetricChart, p, span) -> float:
    """Sectional curvature of the plane spanned by two vectors at p."""
    u, v = (np.asarray(w, dtype=float) for w in span)
    pack = curvature_pack(chart, p)
    g = pack.g
    area2 = (u @ g @ u) * (v @ g @ v) - (u @ g @ v) ** 2
    if area2 <= 1e-24 * (u @ g @ u) * (v @ g @ v):
        raise RankDeficient("span is degenerate")
    num = np.einsum("ijkl,i,j,k,l->", pack.R4, u, v, v, u)
    return float(num / area2)


# --------------------------------------------------------------------------
# principal Ricci curvatures
# --------------------------------------------------------------------------

def jacobi_eigh(a, max_sweeps: int = 50):
    """Cyclic Jacobi rotations for a symmetric 3x3 matrix.

    Returns (eigenvalues, eigenvectors as columns), unsorted, in the order
    the diagonal ends up in.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.abs(a).max(), 1e-300)
    for _ in range(max_sweeps):
        off = sum(a[p, q] ** 2 for p in range(n) for q in range(p + 1, n))
        if off <= (1e-17 * scale) ** 2:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-20 * scale:
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
                v = v @ rot
    raise EigenNonConvergence(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


@dataclass(frozen=True)
class PrincipalRicci:
    eigenvalues: np.ndarray      # ascending
    eigenvectors: np.ndarray     # columns, g-orthonormal
    signature: tuple
    eps_sig: float

    @property
    def signature_str(self) -> str:
        return "(" + ",".join(self.signature) + ")"


def classify(eigenvalues, eps_sig: float = DEFAULT_EPS_SIG) -> tuple:
    lam = np.asarray(eigenvalues, dtype=float)
    tol = eps_sig * max(1.0, float(np.abs(lam).max()))
    return tuple("0" if abs(x) <= tol else ("+" if x > 0 else "-") for x in lam)


def principal_ricci_from(g, ric, eps_sig: float = DEFAULT_EPS_SIG,
                         cluster_tol: float = 1e-8) -> PrincipalRicci:
    """Eigen-decomposition of g^-1 Ric at one point."""
    L = np.linalg.cholesky(g)
    Linv = np.linalg.inv(L)
    a = Linv @ ric @ Linv.T
    a = 0.5 * (a + a.T)
    lam, w = jacobi_eigh(a)
    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    vecs = Linv.T @ w[:, order]      # g-orthonormal eigenvectors of g^-1 Ric
    # fix each eigenspace basis by projecting the coordinate axes in index order
    tol = cluster_tol * max(1.0, float(np.abs(lam).max()))
    out = np.zeros((3, 3))
    i = 0
    while i < 3:
        j = i + 1
        while j < 3 and lam[j] - lam[j - 1] <= tol:
            j += 1
        block = vecs[:, i:j]
        basis = []
        for axis in np.eye(3):
            w_ = block @ (block.T @ g @ axis)
            for b in basis:
                w_ = w_ - (b @ g @ w_) * b
            nrm = np.sqrt(max(w_ @ g @ w_, 0.0))
            if nrm > 1e-6 * np.sqrt(axis @ g @ axis):
                basis.append(w_ / nrm)
            if len(basis) == j - i:
                break
        out[:, i:j] = np.array(basis).T
        i = j
    return PrincipalRicci(lam, out, classify(lam, eps_sig), eps_sig)


def principal_ricci(chart: MetricChart, p, eps_sig: float = DEFAULT_EPS_SIG) -> PrincipalRicci:
    if eps_sig <= 0:
        raise ValueError("eps_sig must be positive")
    pack = curvature_pack(chart, np.asarray(p, dtype=float))
    return principal_ricci_from(pack.g, pack.ric, eps_sig)


def principal_ricci_batch(chart: MetricChart, points, eps_sig: float = DEFAULT_EPS_SIG):
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    pack = curvature_pack(chart, pts)
    return [principal_ricci_from(pack.g[n], pack.ric[n], eps_sig) for n in range(len(pts))]
