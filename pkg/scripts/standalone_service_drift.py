"""Standalone-service drift: one masked window per service, all three modes."""

import argparse
from pathlib import Path

from tickdrift.report import read_csv
from tickdrift.runner import TABLE1, run_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out"))
    args = ap.parse_args()
    res = run_suite("table1", args.out)
    _, rows = read_csv(args.out / "table1" / "comparison.csv")
    got = {(r["scenario"], r["mode"]): r["value"] for r in rows if r["metric"] == "final_drift_ms"}
    print(f"{'service':<22}{'reference ms':>14}{'uncomp. ms':>12}{'comp. ms':>10}{'base ms':>9}")
    for name, ref in TABLE1.items():
        print(f"{name:<22}{ref:>14}{got[name, 'uncompensated']:>12}{got[name, 'compensated']:>10}"
              f"{got[name, 'baseline']:>9}")
    return 0 if res.ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
