"""Both motor case studies in all modes; prints the headline comparisons."""

import argparse
from pathlib import Path

from tickdrift.plant import plant1_scenario, plant2_scenario, release_lags, release_shift, run_all_modes
from tickdrift.runner import run_suite
from tickdrift.secure import Mode


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--no-files", action="store_true", help="print only, skip the CSV bundle")
    args = ap.parse_args()
    for scn in (plant1_scenario(), plant2_scenario()):
        runs = run_all_modes(scn)
        base, unc = runs[Mode.BASELINE], runs[Mode.UNCOMPENSATED]
        print(f"== {scn.name}")
        for mode, run in runs.items():
            m = run.metrics
            print(f"  {mode.value:<14} rmse {m.rmse:.5g}  mean|e| {m.mean_abs_err:.4g}  peak|e| {m.peak_abs_err:.4g}"
                  f"  max dev {m.max_state_dev:.4g} / {m.max_command_dev:.4g} V")
        print(f"  final release lag {release_lags(base, unc)[-1]} ticks")
        if len(scn.windows) == 1:
            sh = release_shift(base, unc, scn.windows[0][0])
            print(f"  next release {sh.base_next / 1e9:.4f} s -> {sh.test_next / 1e9:.4f} s, {sh.skipped} skipped")
    if not args.no_files:
        for name in ("plant1", "plant2"):
            run_suite(name, args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
