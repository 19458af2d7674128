"""Scaling shift of the toric potential on every interior edge of the cubic subdivision."""
import argparse

import numpy as np

from tropkahler.harness import cell_id, load
from tropkahler.lattice import strata
from tropkahler.moment import MomentError, edge_datum, interior_samples, scaling_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--input", default="cubic")
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()
    fam = load(args.input).family()
    rng = np.random.default_rng(args.seed)
    edges = sorted(s.cell for s in strata(fam.subdivision).strata if s.dimension == 1)
    for e in edges:
        try:
            d = edge_datum(e, fam.subdivision)
            ex = scaling_experiment(d, [10.0, 100.0, 1000.0], interior_samples(d, args.samples, rng))
        except MomentError as exc:
            print(f"{cell_id(e.ordered):>12}  skipped: {exc}")
            continue
        shifts = " ".join(f"{s.shift:.4f}" for s in ex.shifts)
        print(f"{cell_id(e.ordered):>12}  shifts {shifts}  spread {ex.spread:.1e}  "
              f"exponent {ex.exponent:.6f} ({ex.match})")


if __name__ == "__main__":
    main()
