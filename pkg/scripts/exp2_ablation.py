"""Placement alone, plus migration, plus the SSD cache, on a read-only skewed run."""

import argparse

from hybridzone.harness import ExperimentConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=1.2)
    ap.add_argument("--ops", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    print("policy,run_throughput,hdd_read_pct,cache_hits,migrations")
    for pol in ("p", "pm", "pmc"):
        rep, _ = run_experiment(ExperimentConfig(policy=pol, workload="custom", read_pct=100.0,
                                                 zipf_alpha=args.alpha, ops=args.ops,
                                                 seed=args.seed))
        print(f"{pol},{rep.summary['run_throughput']:.1f},{rep.reads['hdd_read_pct']:.1f},"
              f"{rep.cache.get('hits', 0)},{len(rep.migrations)}", flush=True)


if __name__ == "__main__":
    main()
