"""RK4 accuracy on a Hopf fibre of the unit sphere.

The fibre through (0,1,0) in the stereographic chart is (0, cos s, sin s);
the table lists the endpoint error and its ratio as dt halves, plus the
spread of omega along the curve.
"""
import argparse
import math

import numpy as np

from ricci3.catalog import catalog_metric
from ricci3.flow import VectorField, integrate_flow


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--length", type=float, default=2 * math.pi)
    ap.add_argument("--dt", type=float, nargs="+", default=[0.1, 0.05, 0.025, 0.0125, 0.00625])
    args = ap.parse_args(argv)

    e = catalog_metric("round-sphere")
    vf = VectorField.from_chart(e.chart, e.fields["hopf"], "hopf")
    print("dt,steps,endpoint_error,ratio,omega_spread")
    prev = None
    for dt in args.dt:
        n = int(round(args.length / dt))
        tr = integrate_flow(e.chart, vf, e.start, dt=dt, n=n, monitor=False)
        s = tr.s[-1]
        err = float(np.max(np.abs(tr.endpoint - [0.0, math.cos(s), math.sin(s)])))
        ratio = "" if prev is None else f"{prev / err:.2f}"
        w = tr.observables["omega"]
        print(f"{dt},{n},{err:.3e},{ratio},{w.max() - w.min():.3e}")
        prev = err


if __name__ == "__main__":
    main()
