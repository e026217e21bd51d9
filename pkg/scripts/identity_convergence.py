"""Max relative identity residual against the finite-difference step.

Prints a CSV table (entry, h, S1..bid2) so the fourth-order decay and the
round-off floor can be read off directly.
"""
import argparse
import csv
import sys

import numpy as np

from ricci3.catalog import catalog_metric
from ricci3.chart import DomainViolation, MetricChart
from ricci3.identities import IDENTITIES, curvature_identity_residuals

A, B, C = "(1 + 0.3*sin(y*z))", "exp(0.4*x + 0.2*z)", "(1 + x^2 + 0.5*y^2)"


def generic():
    return MetricChart.from_strings(
        {"g11": A, "g22": B, "g33": C}, "(-1,1)x(-1,1)x(-1,1)",
        frame=(f"0,0,1/sqrt({C})", f"1/sqrt({A}),0,0", f"0,1/sqrt({B}),0"), name="generic")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("entries", nargs="*", default=["generic", "s2xr", "cosh-warped", "su2-berger"])
    ap.add_argument("--samples", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--levels", type=int, default=8, help="number of step halvings")
    args = ap.parse_args(argv)

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["entry", "h"] + list(IDENTITIES))
    for name in args.entries:
        ch = generic() if name == "generic" else catalog_metric(name).chart
        pts = ch.sample(args.samples, args.seed)
        h = 0.02 * ch.scale
        for _ in range(args.levels):
            try:
                res = curvature_identity_residuals(ch, pts, h=h)
            except DomainViolation:
                h /= 2
                continue
            w.writerow([name, f"{h:.4g}"] + [f"{np.max(res.relative(n)):.3e}" for n in IDENTITIES])
            h /= 2


if __name__ == "__main__":
    main()
