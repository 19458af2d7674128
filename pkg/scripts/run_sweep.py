"""Seeded t-sweep over a problem document; writes sweep/summary/cauchy CSVs and prints the summary."""
import argparse

from tropkahler.harness import emit, load, run_sweep, sweep_tables


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--input", default="cubic")
    ap.add_argument("--per-chart", type=int, default=None)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out-dir", default="out/sweep")
    args = ap.parse_args()
    doc = load(args.input)
    if args.per_chart:
        doc = doc.with_(per_chart=args.per_chart)
    result = run_sweep(doc, workers=args.workers)
    for path in emit(sweep_tables(result), args.out_dir):
        print("wrote", path)
    for d in result.summary.per_t:
        lo = min((w[0] for w in d["windows"].values()), default=float("nan"))
        hi = max((w[1] for w in d["windows"].values()), default=float("nan"))
        print(f"t={d['t']:.0e}  rows={d['rows']}  errors={d['errors']}  max|phi|={d['max_abs_phi']:.6f}  "
              f"max|K|={d['max_abs_curvature']:.4g}  window=[{lo:.4f}, {hi:.4f}]")
    for c in result.summary.cauchy:
        print(f"t={c['t']:.0e}  phi change={c['phi']:.3%}  window change={c['window']:.3%}")


if __name__ == "__main__":
    main()
