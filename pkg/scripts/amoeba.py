"""Amoeba of a fiber over the tropical curve, as SVG, plus its distance to the curve."""
import argparse
import math
from pathlib import Path

from tropkahler.degeneration import FamilyParameter
from tropkahler.harness import amoeba_svg, load, realize, sample_plans
from tropkahler.tropical import log_map, tropical_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--input", default="cubic")
    ap.add_argument("--t", type=float, default=1e-4)
    ap.add_argument("--per-chart", type=int, default=60)
    ap.add_argument("--out", default="out/amoeba.svg")
    args = ap.parse_args()
    doc = load(args.input).with_(per_chart=args.per_chart)
    fam = doc.family()
    t = FamilyParameter(args.t)
    pts = [log_map(realize(fam, plan, t).point) for plan in sample_plans(fam, doc)]
    curve = tropical_curve(fam)
    big_l = -math.log(t.r)
    worst = max(curve.distance(p / big_l) for p in pts)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(amoeba_svg(fam, t, pts))
    print(f"{len(pts)} points, max rescaled distance to the tropical curve {worst:.4f}; wrote {out}")


if __name__ == "__main__":
    main()
