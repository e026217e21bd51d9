"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
3 runtime domain error. RICCI3_THREADS sets the worker count for per-point
work; output order is always the input point order.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .catalog import UnknownCatalogEntry, catalog_metric, catalog_names
from .chart import (DomainViolation, MetricChart, NotPositiveDefinite, RankDeficient, SpecError,
                    dumps_spec, load_spec)
from .curvature import DEFAULT_EPS_SIG, EigenNonConvergence, principal_ricci_batch
from .expr import ExprDomainError, ExprError
from .flow import (DEFAULT_DT, ODE_CASES, FlowError, StepRejected, VectorField,
                   evolution_residuals, integrate_flow, ode_case, ode_suite)
from .identities import (IDENTITIES, SCENARIOS, TOL_ALGEBRAIC, TOL_IDENTITY,
                         curvature_identity_residuals, scenario_residuals)
from .triad import FrameError, triad_state

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DOMAIN = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    catalog: str | None = None
    spec: str | None = None
    params: dict = field(default_factory=dict)
    points: list = field(default_factory=list)
    samples: int | None = None
    seed: int = 0
    grid: tuple | None = None
    tol_identity: float = TOL_IDENTITY
    tol_algebraic: float = TOL_ALGEBRAIC
    eps_sig: float = DEFAULT_EPS_SIG
    output: str = "text"
    threads: int = 1


def fmt(v) -> str:
    """Round-trip decimal formatting."""
    return format(float(v) + 0.0, ".17g")


def _threads() -> int:
    raw = os.environ.get("RICCI3_THREADS")
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"RICCI3_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("RICCI3_THREADS must be at least 1")
    return n


def _parse_point(text: str) -> tuple:
    try:
        vals = tuple(float(c) for c in text.split(","))
    except ValueError:
        raise UsageError(f"cannot parse point {text!r}") from None
    if len(vals) != 3:
        raise UsageError(f"a point needs three coordinates, got {text!r}")
    return vals


def _parse_param(text: str):
    if "=" not in text:
        raise UsageError(f"--param expects name=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k.strip(), float(v)
    except ValueError:
        raise UsageError(f"parameter {k!r} is not a number") from None


def _parse_grid(text: str) -> tuple:
    try:
        dims = tuple(int(c) for c in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"cannot parse grid {text!r}; expected NxNxN") from None
    if len(dims) != 3 or min(dims) < 1:
        raise UsageError(f"cannot parse grid {text!r}; expected NxNxN")
    return dims


def _config(args) -> RunConfig:
    cfg = RunConfig(
        catalog=getattr(args, "catalog", None), spec=getattr(args, "spec", None),
        params=dict(_parse_param(p) for p in (getattr(args, "param", None) or [])),
        points=[_parse_point(p) for p in (getattr(args, "point", None) or [])],
        samples=getattr(args, "samples", None), seed=getattr(args, "seed", 0) or 0,
        grid=_parse_grid(args.grid) if getattr(args, "grid", None) else None,
        tol_identity=getattr(args, "tol", TOL_IDENTITY),
        tol_algebraic=getattr(args, "tol_algebraic", TOL_ALGEBRAIC),
        eps_sig=getattr(args, "eps_sig", DEFAULT_EPS_SIG),
        output=getattr(args, "output", "text"), threads=_threads())
    if cfg.eps_sig <= 0 or cfg.tol_identity <= 0 or cfg.tol_algebraic <= 0:
        raise UsageError("tolerances must be positive")
    return cfg


def _source(cfg: RunConfig):
    """(chart, catalog entry or None)."""
    if bool(cfg.catalog) == bool(cfg.spec):
        raise UsageError("give exactly one of --catalog or --spec")
    if cfg.catalog:
        entry = catalog_metric(cfg.catalog, cfg.params)
        return entry.chart, entry
    chart = load_spec(cfg.spec)
    if cfg.params:
        unknown = set(cfg.params) - set(chart.params)
        if unknown:
            raise UsageError(f"spec has no parameters {sorted(unknown)}")
        chart = replace(chart, params={**chart.params, **cfg.params})
    return chart, None


def _points(cfg: RunConfig, chart: MetricChart, default_samples: int | None) -> np.ndarray:
    if cfg.points:
        return chart.check_points(np.array(cfg.points, dtype=float))
    n = cfg.samples if cfg.samples is not None else default_samples
    if n is None:
        centre = [(lo + hi) / 2 for lo, hi in chart.domain]
        return np.array([centre])
    if n < 1:
        raise UsageError("--samples must be at least 1")
    return chart.sample(n, cfg.seed)


def _chunks(points, threads):
    if threads <= 1 or len(points) < 2:
        return [points]
    return [c for c in np.array_split(points, min(threads, len(points))) if len(c)]


def _parallel(fn, points, threads):
    """Apply fn to chunks of points; results in point order."""
    chunks = _chunks(points, threads)
    if len(chunks) == 1:
        return [fn(chunks[0])]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def _emit(out, lines):
    for line in lines:
        out.write(line + "\n")


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------

def cmd_report(cfg: RunConfig, out) -> int:
    chart, _ = _source(cfg)
    pts = _points(cfg, chart, None)
    chart.check_spd(pts)

    def work(chunk):
        prs = principal_ricci_batch(chart, chunk, cfg.eps_sig)
        st = triad_state(chart, chunk) if chart.frame is not None else None
        return prs, st, np.atleast_1d(_scalar_curvature(chart, chunk))

    rows = []
    for prs, st, S in _parallel(work, pts, cfg.threads):
        for n, pr in enumerate(prs):
            row = {"eigenvalues": [float(v) for v in pr.eigenvalues],
                   "eigenvectors": [[float(c) for c in pr.eigenvectors[:, j]] for j in range(3)],
                   "signature": pr.signature_str, "S": float(S[n])}
            if st is not None:
                sp = st.spin
                for name in ("kappa", "rho", "sigma", "eps", "beta"):
                    v = complex(getattr(sp, name)[n])
                    row[name] = [v.real, v.imag]
                row["div_k"] = float(sp.div_k[n])
                row["omega"] = float(sp.omega[n])
                row["sigma_abs2"] = float(sp.abs_sigma_sq[n])
                row["rho_abs2"] = float(sp.rho_abs_sq[n])
            rows.append(row)
    for p, row in zip(pts, rows):
        row["point"] = [float(c) for c in p]
    if cfg.output == "json":
        _emit(out, (json.dumps(r, sort_keys=False) for r in rows))
    elif cfg.output == "csv":
        cols = ["x", "y", "z", "lambda1", "lambda2", "lambda3", "signature", "S"]
        extra = ["div_k", "omega", "sigma_abs2", "rho_abs2"] if chart.frame is not None else []
        _emit(out, [",".join(cols + extra)])
        for r in rows:
            vals = [fmt(c) for c in r["point"]] + [fmt(v) for v in r["eigenvalues"]]
            vals += [r["signature"], fmt(r["S"])] + [fmt(r[k]) for k in extra]
            _emit(out, [",".join(vals)])
    else:
        for r in rows:
            lines = [f"point        {', '.join(fmt(c) for c in r['point'])}",
                     f"eigenvalues  {', '.join(fmt(v) for v in r['eigenvalues'])}",
                     f"signature    {r['signature']}",
                     f"S            {fmt(r['S'])}"]
            for j, v in enumerate(r["eigenvectors"]):
                lines.append(f"eigenvector{j + 1} {', '.join(fmt(c) for c in v)}")
            if "kappa" in r:
                for name in ("kappa", "rho", "sigma", "eps", "beta"):
                    re_, im_ = r[name]
                    lines.append(f"{name:<12} {fmt(re_)} {'+' if im_ >= 0 else '-'} "
                                 f"{fmt(abs(im_))}i")
                for name in ("div_k", "omega", "sigma_abs2", "rho_abs2"):
                    lines.append(f"{name:<12} {fmt(r[name])}")
            _emit(out, lines + [""])
    return EXIT_OK


def _scalar_curvature(chart, pts):
    from .curvature import curvature_pack
    return curvature_pack(chart, pts).S


# --------------------------------------------------------------------------
# verify
# --------------------------------------------------------------------------

def cmd_verify(cfg: RunConfig, out, scenario: str | None = None, mu: float | None = None) -> int:
    chart, _ = _source(cfg)
    if chart.frame is None:
        raise UsageError("verify needs a metric with a frame")
    pts = _points(cfg, chart, 50)
    if scenario:
        return _verify_scenario(cfg, chart, pts, scenario, mu, out)
    results = _parallel(lambda c: curvature_identity_residuals(chart, c), pts, cfg.threads)
    names = list(IDENTITIES) + ["rho_split", "sigma_split", "eps_imaginary"]
    rel = {n: np.concatenate([r.relative(n) for r in results]) for n in IDENTITIES}
    rel.update({n: np.concatenate([r.decomposition[n] for r in results])
                for n in ("rho_split", "sigma_split", "eps_imaginary")})
    tols = {n: (cfg.tol_identity if n in IDENTITIES else cfg.tol_algebraic) for n in names}
    failed = [n for n in names if np.max(rel[n]) > tols[n]]
    if cfg.output == "json":
        for n in names:
            i = int(np.argmax(rel[n]))
            _emit(out, [json.dumps({"check": n, "max_residual": float(rel[n][i]),
                                    "tol": tols[n], "pass": n not in failed,
                                    "worst_point": [float(c) for c in pts[i]]})])
    elif cfg.output == "csv":
        _emit(out, ["check,max_residual,tol,pass,worst_x,worst_y,worst_z"])
        for n in names:
            i = int(np.argmax(rel[n]))
            _emit(out, [",".join([n, fmt(rel[n][i]), fmt(tols[n]), str(n not in failed).lower()]
                                 + [fmt(c) for c in pts[i]])])
    else:
        _emit(out, [f"chart {chart.name}: {len(pts)} points", f"{'check':<14} {'max residual':>24}  tol"])
        for n in names:
            mark = "FAIL" if n in failed else "ok"
            _emit(out, [f"{n:<14} {fmt(np.max(rel[n])):>24}  {tols[n]:.0e} {mark}"])
        if failed:
            worst = max(failed, key=lambda n: np.max(rel[n]) / tols[n])
            i = int(np.argmax(rel[worst]))
            _emit(out, [f"FAILED: {', '.join(failed)}; worst point for {worst}: "
                        f"({', '.join(fmt(c) for c in pts[i])})"])
        else:
            _emit(out, ["all residuals within tolerance"])
    return EXIT_FAIL if failed else EXIT_OK


def _verify_scenario(cfg, chart, pts, scenario, mu, out) -> int:
    rep = scenario_residuals(chart, pts, scenario=scenario, mu=mu, tol=cfg.tol_identity,
                             tol_algebraic=cfg.tol_algebraic, eps_sig=cfg.eps_sig)
    if cfg.output == "json":
        _emit(out, [json.dumps({"scenario": rep.scenario, "flags": rep.flags})])
        for r in rep.relations:
            _emit(out, [json.dumps({"relation": r.label, "kind": r.kind,
                                    "residual": None if np.isnan(r.residual) else r.residual,
                                    "status": r.status})])
    else:
        _emit(out, [f"scenario {rep.scenario} on {chart.name}: {len(pts)} points"])
        for k, v in rep.flags.items():
            _emit(out, [f"  hypothesis {k}: {'holds' if v else 'fails'}"])
        for r in rep.relations:
            res = "-" if np.isnan(r.residual) else format(r.residual, ".3e")
            _emit(out, [f"  {r.status:<15} {res:>10}  {r.label}"])
    return EXIT_OK if rep.passed else EXIT_FAIL


# --------------------------------------------------------------------------
# flow
# --------------------------------------------------------------------------

_ODE_OPTS = ("mu", "theta0", "g0", "c1", "c2", "psi", "ell0", "dell0", "S", "h0", "dh0")


def cmd_flow(cfg: RunConfig, args, out) -> int:
    if args.ode:
        return _flow_ode(args, out, cfg)
    chart, entry = _source(cfg)
    spec = args.field or "k"
    if entry is not None and spec in entry.fields:
        vf = VectorField.from_chart(chart, entry.fields[spec], label=spec)
    else:
        vf = VectorField.from_chart(chart, spec)
    if args.start:
        start = _parse_point(args.start)
    elif entry is not None:
        start = entry.start
    else:
        start = tuple((lo + hi) / 2 for lo, hi in chart.domain)
    tr = integrate_flow(chart, vf, start, dt=args.dt, n=args.steps, mu=args.mu)
    if tr.boundary and len(tr) - 1 < 10:
        raise DomainViolation(f"trajectory left the domain after {len(tr) - 1} steps")
    res = evolution_residuals(chart, tr, args.mu) if len(tr) >= 5 else {}
    cols = ["theta", "omega", "sigma_abs2", "rho_abs2", "H", "S"]
    if cfg.output == "text":
        p = tr.endpoint
        lines = [f"flow of {vf.label} on {chart.name}: {len(tr) - 1} steps of {fmt(tr.dt)}",
                 f"endpoint     {', '.join(fmt(c) for c in p)}",
                 f"boundary     {'hit (truncated)' if tr.boundary else 'no'}",
                 f"frame drift  {fmt(np.max(tr.drift))}"]
        for c in cols:
            v = tr.observables[c]
            lines.append(f"{c:<12} min {fmt(v.min())}  max {fmt(v.max())}")
        for name, (r, sc) in res.items():
            lines.append(f"res_{name:<8} {fmt(np.max(np.abs(r) / np.maximum(1.0, sc)))}")
        _emit(out, lines)
        return EXIT_OK
    rcols = list(res)
    header = ["s"] + cols + [f"res_{n}" for n in rcols]
    rows = []
    for i in range(len(tr)):
        rows.append([tr.s[i]] + [tr.observables[c][i] for c in cols] + [res[n][0][i] for n in rcols])
    if cfg.output == "json":
        _emit(out, (json.dumps(dict(zip(header, map(float, r)))) for r in rows))
    else:
        _emit(out, [",".join(header)])
        _emit(out, (",".join(fmt(v) for v in r) for r in rows))
    return EXIT_OK


def _text(v) -> str:
    if isinstance(v, (bool, np.bool_)) or v is None or isinstance(v, str):
        return str(v)
    try:
        return fmt(v)
    except (TypeError, ValueError):
        return str(v)


def _flow_ode(args, out, cfg) -> int:
    params = {k: getattr(args, k) for k in _ODE_OPTS if getattr(args, k, None) is not None}
    rng = None
    if args.range:
        try:
            lo, hi = (float(c) for c in args.range.split(","))
        except ValueError:
            raise UsageError(f"cannot parse --range {args.range!r}") from None
        rng = (lo, hi)
    rep = ode_suite(ode_case(args.ode, rng, **params), dt=args.dt)
    if cfg.output == "text":
        lines = [f"ODE case {args.ode} on [{fmt(rep.s[0])}, {fmt(rep.s[-1])}], dt {fmt(args.dt)}",
                 f"closed form          {rep.closed_text}",
                 f"max abs error        {fmt(rep.max_abs_err)}",
                 f"substitution residual {_text(rep.substitution_residual)}"]
        lines += [f"{k:<20} {_text(v)}" for k, v in rep.extras.items()]
        _emit(out, lines)
        return EXIT_OK
    if rep.closed_form is None:
        raise UsageError(f"case {args.ode} has no closed form to compare against")
    err = rep.abs_err
    if cfg.output == "json":
        _emit(out, (json.dumps({"s": float(s), "numeric": float(a), "closed_form": float(b),
                                "abs_err": float(e)})
                    for s, a, b, e in zip(rep.s, rep.numeric, rep.closed_form, err)))
    else:
        _emit(out, ["s,numeric,closed_form,abs_err"])
        _emit(out, (f"{fmt(s)},{fmt(a)},{fmt(b)},{fmt(e)}"
                    for s, a, b, e in zip(rep.s, rep.numeric, rep.closed_form, err)))
    return EXIT_OK


# --------------------------------------------------------------------------
# classify
# --------------------------------------------------------------------------

def grid_points(domain, dims) -> np.ndarray:
    """Cell centres of an N1 x N2 x N3 grid over the open box."""
    axes = [lo + (np.arange(n) + 0.5) * (hi - lo) / n for (lo, hi), n in zip(domain, dims)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def cmd_classify(cfg: RunConfig, out) -> int:
    chart, _ = _source(cfg)
    pts = _points(cfg, chart, None) if (cfg.points or cfg.samples) else \
        grid_points(chart.domain, cfg.grid or (5, 5, 5))
    chart.check_spd(pts)
    prs = [pr for chunk in _parallel(lambda c: principal_ricci_batch(chart, c, cfg.eps_sig),
                                     pts, cfg.threads) for pr in chunk]
    sigs = [pr.signature_str for pr in prs]
    hist = {}
    for s in sigs:
        hist[s] = hist.get(s, 0) + 1
    mixed = len(hist) > 1
    if cfg.output == "json":
        for p, pr in zip(pts, prs):
            _emit(out, [json.dumps({"point": [float(c) for c in p],
                                    "eigenvalues": [float(v) for v in pr.eigenvalues],
                                    "signature": pr.signature_str})])
    elif cfg.output == "csv":
        _emit(out, ["x,y,z,lambda1,lambda2,lambda3,signature"])
        for p, pr in zip(pts, prs):
            _emit(out, [",".join([fmt(c) for c in p] + [fmt(v) for v in pr.eigenvalues]
                                 + [pr.signature_str])])
    else:
        _emit(out, [f"chart {chart.name}: {len(pts)} points"])
        for s, c in sorted(hist.items(), key=lambda t: (-t[1], t[0])):
            _emit(out, [f"{100.0 * c / len(pts):6.2f}% {s} ({c})"])
        _emit(out, ["mixed signature: " + ("yes" if mixed else "no")])
    return EXIT_OK


# --------------------------------------------------------------------------
# catalog
# --------------------------------------------------------------------------

def cmd_catalog(args, out) -> int:
    if args.action == "list":
        for name in catalog_names():
            e = catalog_metric(name)
            exp = ", ".join(e.expected)
            _emit(out, [f"{name:<20} ({exp})  {e.note}"])
        return EXIT_OK
    if not args.name:
        raise UsageError("catalog show needs a name")
    params = dict(_parse_param(p) for p in (args.param or []))
    e = catalog_metric(args.name, params)
    out.write(dumps_spec(e.chart))
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _source_opts(p):
    g = p.add_argument_group("metric source")
    g.add_argument("--catalog", help="catalog entry name")
    g.add_argument("--spec", help="metric spec file (TOML)")
    g.add_argument("--param", action="append", metavar="NAME=VALUE", help="parameter value")
    p.add_argument("--output", choices=("text", "csv", "json"), default="text",
                   help="output mode (json = one object per line)")
    p.add_argument("--eps-sig", type=float, default=DEFAULT_EPS_SIG, dest="eps_sig",
                   help="relative threshold for a zero principal curvature")


def _sample_opts(p):
    p.add_argument("--point", action="append", metavar="X,Y,Z", help="evaluation point")
    p.add_argument("--samples", type=int, help="number of random points")
    p.add_argument("--seed", type=int, default=0, help="seed for random points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ricci3", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("report", help="curvature and kinematics at points")
    _source_opts(p)
    _sample_opts(p)

    p = sub.add_parser("verify", help="identity residual sweep")
    _source_opts(p)
    _sample_opts(p)
    p.add_argument("--tol", type=float, default=TOL_IDENTITY, help="identity tolerance")
    p.add_argument("--tol-algebraic", type=float, default=TOL_ALGEBRAIC, dest="tol_algebraic")
    p.add_argument("--scenario", choices=SCENARIOS, help="check scenario relations instead")
    p.add_argument("--mu", type=float, help="mu for scenario thm1")

    p = sub.add_parser("flow", help="integral curves and ODE cases")
    _source_opts(p)
    p.add_argument("--field", help="k, x, y, a catalog field name or 'e1,e2,e3'")
    p.add_argument("--start", metavar="X,Y,Z")
    p.add_argument("--dt", type=float, default=DEFAULT_DT)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--ode", choices=ODE_CASES, help="run a scalar ODE case instead")
    p.add_argument("--range", metavar="A,B", help="s range for --ode")
    for name in _ODE_OPTS:
        p.add_argument(f"--{name}", type=float, default=None)
    p.set_defaults(output="csv")

    p = sub.add_parser("classify", help="signature map over a grid")
    _source_opts(p)
    _sample_opts(p)
    p.add_argument("--grid", metavar="NxNxN", help="grid size (default 5x5x5)")

    p = sub.add_parser("catalog", help="list or show catalog entries")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("name", nargs="?")
    p.add_argument("--param", action="append", metavar="NAME=VALUE")
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        if args.command == "catalog":
            return cmd_catalog(args, out)
        cfg = _config(args)
        if args.command == "report":
            return cmd_report(cfg, out)
        if args.command == "verify":
            return cmd_verify(cfg, out, args.scenario, args.mu)
        if args.command == "flow":
            if args.dt <= 0 or args.steps < 1:
                raise UsageError("--dt must be positive and --steps at least 1")
            return cmd_flow(cfg, args, out)
        return cmd_classify(cfg, out)
    except (UsageError, SpecError, ExprError, UnknownCatalogEntry, FlowError, FrameError,
            OSError) as exc:
        if isinstance(exc, ExprDomainError):
            return _fail(exc, EXIT_DOMAIN)
        return _fail(exc, EXIT_USAGE)
    except (DomainViolation, NotPositiveDefinite, RankDeficient, ExprDomainError, StepRejected,
            EigenNonConvergence, ArithmeticError) as exc:
        return _fail(exc, EXIT_DOMAIN)


def _fail(exc, code) -> int:
    msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
    sys.stderr.write(f"ricci3: error: {msg}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
