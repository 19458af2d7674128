"""Ratio of the limit metric to the complete hyperbolic metric on the thrice-punctured sphere."""
import argparse

from tropkahler.hyperbolic import compare_limit_metric, einstein_factor, pants_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--chart", default="1,1;1,0;2,0")
    ap.add_argument("--grids", default="10,20,40")
    args = ap.parse_args()
    order = tuple(tuple(int(c) for c in m.split(",")) for m in args.chart.split(";"))
    print(f"Einstein factor {einstein_factor():.10f}")
    for n in (int(x) for x in args.grids.split(",")):
        lo, hi = compare_limit_metric(order, pants_grid(n)).window
        print(f"{n:3d}x{n:<3d} ratio window [{lo:.4f}, {hi:.4f}]")


if __name__ == "__main__":
    main()
