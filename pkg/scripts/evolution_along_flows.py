"""Evolution-law residuals along integral curves of the reference fields."""
import argparse

import numpy as np

from ricci3.catalog import catalog_metric
from ricci3.flow import VectorField, evolution_residuals, integrate_flow, relative_residual

RUNS = (("nil", "k", (0.3, -0.2, -2.5), -0.5),
        ("s2xr", "dt", None, 0.0),
        ("flat", "radial", (0.5, 0.2, 0.1), 0.0),
        ("cosh-warped", "k", (0.1, 0.2, -1.5), 2.0),
        ("round-sphere", "hopf", None, -2.0))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--length", type=float, default=3.0)
    ap.add_argument("--dt", type=float, default=1e-3)
    args = ap.parse_args(argv)
    print("entry,field,steps,law,max_relative_residual")
    for name, field, start, mu in RUNS:
        e = catalog_metric(name)
        spec = e.fields.get(field, field)
        vf = VectorField.from_chart(e.chart, spec, field)
        tr = integrate_flow(e.chart, vf, start or e.start, dt=args.dt,
                            n=int(round(args.length / args.dt)), mu=mu)
        for law, pair in evolution_residuals(e.chart, tr).items():
            print(f"{name},{field},{len(tr) - 1},{law},{np.max(relative_residual(pair)):.3e}")


if __name__ == "__main__":
    main()
