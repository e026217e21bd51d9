"""Ricci signature over grids for every catalog entry, and the Berger
family as its fibre scale a varies (the signature flips at a = sqrt 2)."""
import argparse

import numpy as np

from ricci3.catalog import catalog_metric, catalog_names
from ricci3.cli import grid_points
from ricci3.curvature import principal_ricci_batch


def histogram(chart, n):
    prs = principal_ricci_batch(chart, grid_points(chart.domain, (n, n, n)))
    counts = {}
    for pr in prs:
        counts[pr.signature_str] = counts.get(pr.signature_str, 0) + 1
    return counts, len(prs)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=4)
    args = ap.parse_args(argv)

    print("entry,signature,fraction")
    for name in catalog_names():
        counts, n = histogram(catalog_metric(name).chart, args.grid)
        for sig, c in sorted(counts.items()):
            print(f"{name},{sig},{c / n:.3f}")
    print()
    print("a,lambda1,lambda2,lambda3,signature")
    for a in np.round(np.linspace(0.25, 2.0, 8), 3):
        e = catalog_metric("su2-berger", {"a": float(a)})
        pr = principal_ricci_batch(e.chart, np.array([[0.1, 0.2, 0.3]]))[0]
        lam = ",".join(f"{v:.6f}" for v in pr.eigenvalues)
        print(f"{a},{lam},{pr.signature_str}")


if __name__ == "__main__":
    main()
