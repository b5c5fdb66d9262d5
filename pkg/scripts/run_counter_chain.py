#!/usr/bin/env python3
"""Refresh-count study on the shared-counter chain.

Every transaction increments the same counter, so each depends on all
earlier ones. Earliest-first scheduling settles each transaction once
(about 2k transaction refreshes for k transactions); the inverted
priority order repairs late transactions over and over (about k^2/4).

Usage: python3 scripts/run_counter_chain.py [--k 64]
"""

import argparse
import math

from txnrepair.bench import WorkloadConfig, make_workload, run_repair, run_serial


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--k", type=int, default=64)
    ap.add_argument("--variant", default="shared", choices=["shared", "shift"])
    args = ap.parse_args()

    k = args.k
    height = max(1, math.ceil(math.log2(k)))
    cfg = WorkloadConfig(name="counter_chain", txns=k, variant=args.variant)
    wl = make_workload(cfg)
    oracle = run_serial(wl)
    for mode in ("earliest", "inverted"):
        rep = run_repair(wl, workers=1, height=height, priority_mode=mode)
        ok = rep.hash(wl.schema) == oracle.hash(wl.schema)
        print(
            f"{mode:9s} k={k} txn_refreshes={rep.txn_refreshes} "
            f"op_refreshes={rep.op_refreshes} verified={ok}"
        )


if __name__ == "__main__":
    main()
