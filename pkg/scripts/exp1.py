"""Run-phase throughput of every placement scheme on the YCSB core workloads."""

import argparse

from hybridzone.harness import ExperimentConfig, run_experiment

POLICIES = ("b1", "b2", "b3", "b4", "auto", "hhzs")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workloads", default="a,b,c,d,e,f")
    ap.add_argument("--policies", default=",".join(POLICIES))
    ap.add_argument("--seeds", default="1")
    ap.add_argument("--ops", type=int, default=1000)
    args = ap.parse_args()
    print("workload,seed,policy,run_throughput,hdd_read_pct")
    for wl in args.workloads.split(","):
        for seed in map(int, args.seeds.split(",")):
            for pol in args.policies.split(","):
                rep, _ = run_experiment(ExperimentConfig(policy=pol, workload=wl, seed=seed,
                                                         ops=args.ops))
                print(f"{wl},{seed},{pol},{rep.summary['run_throughput']:.1f},"
                      f"{rep.reads['hdd_read_pct']:.1f}", flush=True)


if __name__ == "__main__":
    main()
