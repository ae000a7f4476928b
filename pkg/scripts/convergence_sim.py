#!/usr/bin/env python3
"""Run randomized multi-client convergence simulations and report.

    python scripts/convergence_sim.py --seeds 20 --clients 4 --ops 50

Each seed drives a fresh server plus N offline-first clients through a
random schedule of inserts, edits, deletes, and mid-run syncs, settles
everyone with two sync rounds, and verifies convergence, gap-free commit
stamps, and that no committed update was lost.
"""

import argparse
import sys
import time

sys.path.insert(0, "src")

from xbook.simulate import SimConfig, run_simulation  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--clients", type=int, default=4)
    parser.add_argument("--ops", type=int, default=50)
    parser.add_argument("--projects", type=int, default=1)
    args = parser.parse_args()

    failures = 0
    started = time.monotonic()
    for seed in range(args.seeds):
        config = SimConfig(seed=seed, clients=args.clients, operations=args.ops,
                           projects=args.projects)
        outcome = run_simulation(config)
        errors = outcome.errors()
        stamps = sum(outcome.max_stamps.values())
        status = "ok" if not errors else "FAIL"
        print(f"seed {seed:>3}  clients={config.clients} ops={config.operations} "
              f"commits={stamps:>4}  {status}")
        for error in errors:
            print(f"         {error}")
            failures += 1
    elapsed = time.monotonic() - started
    print(f"\n{args.seeds} simulations in {elapsed:.1f}s, {failures} failure(s)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
