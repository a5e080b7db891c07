"""Tail latencies (simulated seconds) per scheme under a throttled workload A."""

import argparse

from hybridzone.harness import ExperimentConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rate", type=float, default=100.0, help="target ops/s")
    ap.add_argument("--ops", type=int, default=1000)
    ap.add_argument("--policies", default="b3,auto,hhzs")
    args = ap.parse_args()
    print("policy,op,p99_ms,p99.9_ms,p99.99_ms")
    for pol in args.policies.split(","):
        rep, _ = run_experiment(ExperimentConfig(policy=pol, workload="a", ops=args.ops,
                                                 target_rate=args.rate))
        for op, pct in rep.latency.items():
            p = [1000 * pct[q] for q in (99.0, 99.9, 99.99)]
            print(f"{pol},{op},{p[0]:.2f},{p[1]:.2f},{p[2]:.2f}", flush=True)


if __name__ == "__main__":
    main()
