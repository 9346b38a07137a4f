"""Sweep-vs-replay oracle plus the exhaustive round-robin check, with mutation sanity runs."""

import argparse

from tickdrift.oracle import MUTATIONS, run_round_robin_oracle, run_sweep_oracle


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cases", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rep = run_sweep_oracle(args.cases, args.seed)
    print(f"sweep == replay: {rep.cases} cases, {rep.wrap_cases} with wraps, {len(rep.mismatches)} mismatches")
    cases, bad = run_round_robin_oracle()
    print(f"round robin: {cases} cases, {len(bad)} failures")
    for mut in MUTATIONS:
        r = run_sweep_oracle(min(args.cases, 1000), args.seed, mutation=mut)
        print(f"mutation {mut}: caught in {len(r.mismatches)} of {r.cases} cases")
    return 0 if rep.ok and not bad else 3


if __name__ == "__main__":
    raise SystemExit(main())
