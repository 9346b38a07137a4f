"""Drift growth under periodic secure checks, for a grid of rates and durations.

Writes one CSV of (rate, duration, simulated drift rate, expected drift rate)
plus the per-scenario drift-over-time samples from the fig-drift suite.
"""

import argparse
from pathlib import Path

from tickdrift.drift import expected_drift_rate
from tickdrift.report import read_csv, write_csv
from tickdrift.runner import FIG_DRIFT_DURATIONS, FIG_DRIFT_RATES, run_suite
from tickdrift.timebase import TickConfig, ms


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    res = run_suite("fig-drift", args.out, seed=args.seed)
    _, rows = read_csv(args.out / "fig-drift" / "comparison.csv")
    sim = {r["scenario"]: int(r["value"]) for r in rows
           if r["mode"] == "uncompensated" and r["metric"] == "final_drift_ticks"}
    cfg = TickConfig(ms(0.1))
    table = []
    for rate in FIG_DRIFT_RATES:
        for dur in FIG_DRIFT_DURATIONS:
            exp = expected_drift_rate(rate, {ms(dur): 1}, cfg).expectation
            # each scenario runs one second of checks
            table.append([rate, dur, sim[f"periodic_{rate}hz_{dur}ms"], float(exp)])
            print(f"{rate:>4} Hz  {dur:>5} ms  simulated {table[-1][2]:>4} ticks/s  expected {float(exp):7.1f}")
    write_csv(args.out / "fig-drift" / "rates.csv", "rates", "-", table,
              )
    return 0 if res.ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
