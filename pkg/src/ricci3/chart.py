"""Metric charts, frame fields and the metric spec file format."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .expr import (DEFAULT_COORDS, HESS_INDEX, Expr, ExprError, compile_jet, free_names,
                   parse_expression)
from .rng import sample_box

# metric entries in storage order; symmetric completion is implied
METRIC_KEYS = ("g11", "g12", "g13", "g22", "g23", "g33")
METRIC_INDEX = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
FRAME_LEGS = ("k", "x", "y")


class SpecError(ValueError):
    """Malformed metric spec (file or strings)."""


class DomainViolation(ValueError):
    """A point lies outside the open domain box of a chart."""


class NotPositiveDefinite(ValueError):
    pass


class RankDeficient(ValueError):
    pass


def parse_domain(text: str) -> tuple:
    parts = [p.strip() for p in re.split(r"\)\s*x\s*\(", text.strip())]
    if len(parts) != 3 or not parts[0].startswith("(") or not parts[-1].endswith(")"):
        raise SpecError(f"domain must look like '(a,b)x(c,d)x(e,f)', got {text!r}")
    parts[0], parts[-1] = parts[0][1:], parts[-1][:-1]
    box = []
    for part in parts:
        try:
            lo, hi = (float(v) for v in part.split(","))
        except ValueError:
            raise SpecError(f"bad interval {part!r} in domain {text!r}") from None
        if not lo < hi:
            raise SpecError(f"empty interval ({lo},{hi}) in domain")
        box.append((lo, hi))
    return tuple(box)


def format_domain(box) -> str:
    return "x".join(f"({lo!r},{hi!r})" for lo, hi in box)


def _parse(text: str, coords, params) -> Expr:
    try:
        return parse_expression(text, coords, params)
    except ExprError as exc:
        raise SpecError(str(exc)) from exc


@dataclass(frozen=True)
class FrameField:
    """Three vector fields (k, x, y) given by coordinate component expressions."""
    texts: tuple            # ((k1,k2,k3), (x1,x2,x3), (y1,y2,y3))
    exprs: tuple
    coords: tuple = DEFAULT_COORDS

    @classmethod
    def from_strings(cls, k, x, y, coords=DEFAULT_COORDS, params=()) -> "FrameField":
        legs = []
        for leg in (k, x, y):
            if isinstance(leg, str):
                leg = [c.strip() for c in leg.split(",")]
            if len(leg) != 3:
                raise SpecError("each frame vector needs three components")
            legs.append(tuple(str(c) for c in leg))
        exprs = tuple(tuple(_parse(c, coords, params) for c in leg) for leg in legs)
        return cls(tuple(legs), exprs, tuple(coords))

    def jets(self, params, points, order: int = 1):
        """Frame values (..., 3 legs, 3 comps) and, for order >= 1, first
        derivatives (..., leg, comp, d/dx_i)."""
        return _vector_jets(self.exprs, params, self.coords, points, order)

    def rotated(self, angle: float) -> "FrameField":
        """Rotate (x, y) in the plane k-perp by a constant angle."""
        c, s = repr(float(np.cos(angle))), repr(float(np.sin(angle)))
        (xt, yt) = self.texts[1], self.texts[2]
        x = tuple(f"({c})*({a}) + ({s})*({b})" for a, b in zip(xt, yt))
        y = tuple(f"-({s})*({a}) + ({c})*({b})" for a, b in zip(xt, yt))
        params = _params_in(self.exprs)
        return FrameField.from_strings(self.texts[0], x, y, self.coords, params)


def _params_in(exprs) -> tuple:
    names = set()
    for leg in exprs:
        for e in leg:
            names |= free_names(e)[1]
    return tuple(sorted(names))


def _vector_jets(exprs, params, coords, points, order):
    pts = np.asarray(points, dtype=float)
    scalar = pts.ndim == 1
    X = (float(pts[0]), float(pts[1]), float(pts[2])) if scalar else (pts[..., 0], pts[..., 1], pts[..., 2])
    shape = pts.shape[:-1]
    nleg = len(exprs)
    val = np.zeros(shape + (nleg, 3))
    grad = np.zeros(shape + (nleg, 3, 3)) if order >= 1 else None
    with np.errstate(all="ignore"):
        for a, leg in enumerate(exprs):
            for c, e in enumerate(leg):
                out = compile_jet(e, params, coords, order=min(order, 1)).raw(not scalar)(*X)
                val[..., a, c] = out[0]
                if order >= 1:
                    for i in range(3):
                        grad[..., a, c, i] = out[1 + i]
    return val, grad


@dataclass(frozen=True)
class MetricChart:
    """A single coordinate chart on an open box with metric components g_ij."""
    g_texts: tuple
    g_exprs: tuple
    domain: tuple
    coords: tuple = DEFAULT_COORDS
    params: Mapping[str, float] = field(default_factory=dict)
    frame: FrameField | None = None
    name: str = "user"

    @classmethod
    def from_strings(cls, g, domain, coords=DEFAULT_COORDS, params=None, frame=None,
                     name: str = "user") -> "MetricChart":
        """``g`` maps 'g11'..'g33' to expression text (or is a 6-sequence in
        g11, g12, g13, g22, g23, g33 order). Missing off-diagonals are zero."""
        params = {k: float(v) for k, v in (params or {}).items()}
        coords = tuple(coords)
        if len(coords) != 3 or len(set(coords)) != 3:
            raise SpecError(f"need three distinct coordinate names, got {coords}")
        if isinstance(g, Mapping):
            missing = [k for k in ("g11", "g22", "g33") if k not in g]
            if missing:
                raise SpecError(f"metric is missing {missing}")
            unknown = set(g) - set(METRIC_KEYS)
            if unknown:
                raise SpecError(f"unknown metric keys {sorted(unknown)}")
            texts = tuple(str(g.get(k, "0")) for k in METRIC_KEYS)
        else:
            texts = tuple(str(t) for t in g)
            if len(texts) != 6:
                raise SpecError("metric needs six components")
        exprs = tuple(_parse(t, coords, tuple(params)) for t in texts)
        if isinstance(domain, str):
            domain = parse_domain(domain)
        domain = tuple((float(lo), float(hi)) for lo, hi in domain)
        if frame is not None and not isinstance(frame, FrameField):
            frame = FrameField.from_strings(*frame, coords=coords, params=tuple(params))
        return cls(texts, exprs, domain, coords, params, frame, name)

    # ---- domain ----------------------------------------------------------
    @property
    def scale(self) -> float:
        return min(hi - lo for lo, hi in self.domain)

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        lo = np.array([b[0] for b in self.domain])
        hi = np.array([b[1] for b in self.domain])
        return np.all((pts > lo) & (pts < hi), axis=-1)

    def check_points(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != 3:
            raise ValueError("points must have a trailing dimension of 3")
        inside = self.contains(pts)
        if not np.all(inside):
            bad = pts.reshape(-1, 3)[~np.asarray(inside).reshape(-1)][0]
            raise DomainViolation(
                f"point {tuple(float(c) for c in bad)} is outside the open domain "
                f"{format_domain(self.domain)}")
        return pts

    def sample(self, n: int, seed: int = 0, margin: float = 0.1) -> np.ndarray:
        return sample_box(self.domain, n, seed, margin)

    # ---- metric ----------------------------------------------------------
    def metric_jets(self, points, order: int = 2):
        """g (...,3,3); dg (...,a,i,j) = d_a g_ij; d2g (...,a,b,i,j)."""
        pts = np.asarray(points, dtype=float)
        scalar = pts.ndim == 1
        X = (float(pts[0]), float(pts[1]), float(pts[2])) if scalar else (pts[..., 0], pts[..., 1], pts[..., 2])
        shape = pts.shape[:-1]
        g = np.zeros(shape + (3, 3))
        dg = np.zeros(shape + (3, 3, 3)) if order >= 1 else None
        d2g = np.zeros(shape + (3, 3, 3, 3)) if order >= 2 else None
        with np.errstate(all="ignore"):
            outs = [compile_jet(e, self.params, self.coords, order).raw(not scalar)(*X)
                    for e in self.g_exprs]
        for (i, j), out in zip(METRIC_INDEX, outs):
            g[..., i, j] = g[..., j, i] = out[0]
            if order >= 1:
                for a in range(3):
                    dg[..., a, i, j] = dg[..., a, j, i] = out[1 + a]
            if order >= 2:
                for n, (a, b) in enumerate(HESS_INDEX):
                    v = out[4 + n]
                    d2g[..., a, b, i, j] = d2g[..., a, b, j, i] = v
                    d2g[..., b, a, i, j] = d2g[..., b, a, j, i] = v
        return g, dg, d2g

    def metric(self, points) -> np.ndarray:
        return self.metric_jets(points, order=0)[0]

    def check_spd(self, points) -> None:
        g = self.metric(points)
        m1 = g[..., 0, 0]
        m2 = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
        m3 = np.linalg.det(g)
        if not (np.all(m1 > 0) and np.all(m2 > 0) and np.all(m3 > 0)):
            raise NotPositiveDefinite("metric is not positive definite at some sampled point")

    # ---- frame -----------------------------------------------------------
    def frame_jets(self, points, order: int = 1, frame: FrameField | None = None):
        frame = frame or self.frame
        if frame is None:
            raise SpecError(f"chart {self.name!r} has no frame")
        return frame.jets(self.params, points, order)

    def with_frame(self, frame: FrameField | None) -> "MetricChart":
        return MetricChart(self.g_texts, self.g_exprs, self.domain, self.coords,
                           self.params, frame, self.name)

    def field(self, spec) -> tuple:
        """Parse a vector field from 'e1,e2,e3' text or a 3-sequence of texts."""
        if isinstance(spec, str):
            spec = [c.strip() for c in spec.split(",")]
        if len(spec) != 3:
            raise SpecError("a vector field needs three components")
        return tuple(_parse(str(c), self.coords, tuple(self.params)) for c in spec)


def inner(g, u, v):
    """Complex-bilinear g(u, v) with broadcasting over leading dims."""
    return np.einsum("...ij,...i,...j->...", g, u, v)


def orthonormality_residuals(g, frame_vals) -> np.ndarray:
    """The six residuals |<e_a,e_b> - delta_ab| in order kk, xx, yy, kx, ky, xy."""
    gram = np.einsum("...ij,...ai,...bj->...ab", g, frame_vals, frame_vals)
    pairs = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
    return np.stack([np.abs(gram[..., a, b] - (a == b)) for a, b in pairs], axis=-1)


def gram_schmidt(v1, v2, metric_at_p):
    """Orthonormalise (v1, v2) with respect to the metric at a point."""
    g = np.asarray(metric_at_p, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    n11, n22, n12 = v1 @ g @ v1, v2 @ g @ v2, v1 @ g @ v2
    area2 = n11 * n22 - n12 * n12
    if n11 <= 0 or n22 <= 0 or area2 <= 1e-12 * n11 * n22:
        raise RankDeficient("vectors are (numerically) linearly dependent")
    u1 = v1 / np.sqrt(n11)
    w = v2 - (u1 @ g @ v2) * u1
    u2 = w / np.sqrt(w @ g @ w)
    return u1, u2


# --------------------------------------------------------------------------
# spec files
# --------------------------------------------------------------------------

def _unquote(v) -> str:
    return v if isinstance(v, str) else repr(v)


def loads_spec(text: str, name: str = "user") -> MetricChart:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"cannot parse metric spec: {exc}") from exc
    for section in ("chart", "metric"):
        if section not in doc:
            raise SpecError(f"metric spec is missing the [{section}] section")
    chart = doc["chart"]
    coords = tuple(c.strip() for c in chart.get("coords", "x,y,z").split(","))
    if "domain" not in chart:
        raise SpecError("[chart] needs a domain")
    params = {}
    for k, v in doc.get("params", {}).items():
        try:
            params[k] = float(v)
        except (TypeError, ValueError):
            raise SpecError(f"parameter {k!r} is not a number") from None
    metric = {k: _unquote(v) for k, v in doc["metric"].items()}
    frame = None
    if "frame" in doc:
        fr = doc["frame"]
        missing = [leg for leg in FRAME_LEGS if leg not in fr]
        if missing:
            raise SpecError(f"[frame] is missing {missing}")
        frame = FrameField.from_strings(fr["k"], fr["x"], fr["y"], coords, tuple(params))
    return MetricChart.from_strings(metric, chart["domain"], coords, params, frame, name)


def load_spec(path) -> MetricChart:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return loads_spec(text, name=str(path))


def _q(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def dumps_spec(chart: MetricChart) -> str:
    lines = ["[chart]", f"coords = {_q(','.join(chart.coords))}",
             f"domain = {_q(format_domain(chart.domain))}", ""]
    if chart.params:
        lines.append("[params]")
        lines += [f"{k} = {v!r}" for k, v in chart.params.items()]
        lines.append("")
    lines.append("[metric]")
    lines += [f"{k} = {_q(t)}" for k, t in zip(METRIC_KEYS, chart.g_texts)]
    if chart.frame is not None:
        lines += ["", "[frame]"]
        lines += [f"{leg} = {_q(','.join(t))}" for leg, t in zip(FRAME_LEGS, chart.frame.texts)]
    return "\n".join(lines) + "\n"
