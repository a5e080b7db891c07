"""Basic schemes B1..B4 on a 200 MiB load, then an alpha=0.9 read run.

Prints, per scheme: the largest L0/L1 sizes seen against their targets, the
share of L0+L1 writes that went to the HDD, and the HDD share of reads.
"""

import argparse

from hybridzone.harness import ExperimentConfig, run_experiment

MiB = 1024 * 1024


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--ops", type=int, default=1000)
    args = ap.parse_args()
    print("scheme,max_L0_MiB,target_L0_MiB,max_L1_MiB,target_L1_MiB,l01_hdd_write_pct,hdd_read_pct")
    for h in (1, 2, 3, 4):
        load, _ = run_experiment(ExperimentConfig(policy=f"b{h}", ops=0, seed=args.seed))
        reads, _ = run_experiment(ExperimentConfig(policy=f"b{h}", workload="c", ops=args.ops,
                                                   seed=args.seed))
        s = load.summary
        print(f"b{h},{s['max_L0_size'] / MiB:.2f},{s['target_L0_size'] / MiB:.2f},"
              f"{s['max_L1_size'] / MiB:.2f},{s['target_L1_size'] / MiB:.2f},"
              f"{load.reads['l01_hdd_write_pct']:.1f},{reads.reads['hdd_read_pct']:.1f}")


if __name__ == "__main__":
    main()
