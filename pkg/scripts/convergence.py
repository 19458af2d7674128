"""Chartwise distance between the fiber metric and the limit metric on a fixed z_2 grid."""
import argparse
import math

import numpy as np

from tropkahler.harness import load
from tropkahler.metric import chartwise_convergence


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--input", default="cubic")
    ap.add_argument("--chart", default="1,1;1,0;2,0")
    ap.add_argument("--grid", type=int, default=20)
    ap.add_argument("--t-grid", default="1e-2,1e-4,1e-6,1e-8")
    args = ap.parse_args()
    fam = load(args.input).family()
    order = tuple(tuple(int(c) for c in m.split(",")) for m in args.chart.split(";"))
    u = np.linspace(-1.0, 1.0, args.grid)
    v = np.linspace(-0.9 * math.pi, 0.9 * math.pi, args.grid)
    grid = [complex(np.exp(a + 1j * b)) for a in u for b in v]
    ts = [float(x) for x in args.t_grid.split(",")]
    rep = chartwise_convergence(fam, order, grid, ts)
    for t, e in zip(rep.t_values, rep.errors):
        # the error decays like 1 / log(1/t)^2, so this column should be roughly flat
        print(f"t={t:.0e}  sup rel error={e:.5g}  error*log(1/t)^2={e * math.log(1 / t) ** 2:.4g}")
    print("monotone:", rep.monotone)


if __name__ == "__main__":
    main()
