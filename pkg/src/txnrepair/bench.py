"""Workload generators, baselines and the benchmark CLI.

Workloads produce lists of transactions (parsed rule lists plus their
key lock sets). Three executors share them:

  - serial: one transaction at a time against the committed state (the
    correctness oracle);
  - lock: two-phase row locking with ordered acquisition, threaded;
  - repair: the lock-free repair engine.

`--verify` compares the repair engine's final state hash against the
serial oracle and dumps the first divergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .engine import Engine, EngineConfig
from .pstore import (
    DbVersion,
    PredicateSig,
    Schema,
    apply_deltas,
    export_snapshot,
    full_scan,
    store_upsert,
)
from .rulelang import parse_rules
from .txn import EVALUATED, TxnExec
from .values import INT64


@dataclass
class WorkloadConfig:
    name: str = "sku"
    n: int = 1000  # key-space size
    alpha: float = 1.0  # contention knob: each txn touches ~alpha*sqrt(n) keys
    txns: int = 64
    seed: int = 0
    variant: str = "shared"  # counter_chain: "shared" | "shift"


@dataclass
class Workload:
    schema: Schema
    db: DbVersion
    txns: list  # parsed rule lists
    locksets: list  # per txn: sorted tuple of (pred_id, key) it may touch
    key_sets: list = field(default_factory=list)  # sku: raw sku ids per txn


def state_hash(db: DbVersion, schema: Schema) -> str:
    return hashlib.sha256(export_snapshot(db, schema).encode()).hexdigest()


def _bump_rules(schema, pred, key, delta):
    return parse_rules(
        f"^{pred}[$k] = v <- v = {pred}@start[$k] + $d.",
        schema,
        params={"k": key, "d": delta},
    )


def gen_sku_keysets(cfg: WorkloadConfig) -> list:
    """Just the per-transaction sku sets (for contention statistics);
    skips database and rule construction."""
    rng = np.random.default_rng(cfg.seed)
    p = min(1.0, cfg.alpha / cfg.n**0.5)
    out = []
    for _ in range(cfg.txns):
        count = int(rng.binomial(cfg.n, p))
        out.append(sorted(int(s) for s in rng.choice(cfg.n, size=count, replace=False)))
    return out


def gen_sku(cfg: WorkloadConfig) -> Workload:
    """Inventory adjustments: each transaction touches every sku
    independently with probability alpha/sqrt(n), so two transactions
    share alpha**2 skus in expectation."""
    rng = np.random.default_rng(cfg.seed)
    schema = Schema.from_sigs([PredicateSig("inventory", 0, (INT64,), (INT64,))])
    db = DbVersion()
    sig = schema.sig("inventory")
    for s in range(cfg.n):
        db = store_upsert(db, sig, (s,), (int(rng.integers(0, 1000)),))
    p = min(1.0, cfg.alpha / cfg.n**0.5)
    txns, locksets, key_sets = [], [], []
    for _ in range(cfg.txns):
        count = int(rng.binomial(cfg.n, p))
        skus = sorted(int(s) for s in rng.choice(cfg.n, size=count, replace=False))
        rules = []
        for s in skus:
            d = int(rng.integers(-5, 6))
            rules.extend(_bump_rules(schema, "inventory", s, d))
        txns.append(rules)
        locksets.append(tuple((0, (s,)) for s in skus))
        key_sets.append(skus)
    return Workload(schema, db, txns, locksets, key_sets)


def gen_counter_chain(cfg: WorkloadConfig) -> Workload:
    """k transactions forming one dependency chain."""
    schema = Schema.from_sigs([PredicateSig("cnt", 0, (INT64,), (INT64,))])
    db = DbVersion()
    sig = schema.sig("cnt")
    nkeys = 1 if cfg.variant == "shared" else cfg.txns
    for k in range(nkeys):
        db = store_upsert(db, sig, (k,), (0,))
    txns, locksets = [], []
    for i in range(cfg.txns):
        if cfg.variant == "shared":
            txns.append(_bump_rules(schema, "cnt", 0, 1))
            locksets.append(((0, (0,)),))
        else:
            # txn i writes key i from key i-1: a shifting chain
            src = max(i - 1, 0)
            rules = parse_rules(
                "^cnt[$k] = v <- v = cnt@start[$s] + 1.",
                schema,
                params={"k": i, "s": src},
            )
            txns.append(rules)
            locksets.append(tuple(sorted({(0, (src,)), (0, (i,))})))
    return Workload(schema, db, txns, locksets)


def gen_random_rules(cfg: WorkloadConfig) -> Workload:
    """Mixed random transactions: bumps, guarded transfers, read-only
    probes. Bounded key space and predicate count."""
    import random

    rnd = random.Random(cfg.seed)
    npreds = rnd.randint(1, 4)
    nkeys = min(cfg.n, 64)
    sigs = [PredicateSig(f"p{i}", i, (INT64,), (INT64,)) for i in range(npreds)]
    schema = Schema.from_sigs(sigs)
    db = DbVersion()
    for s in sigs:
        for k in range(nkeys):
            db = store_upsert(db, s, (k,), (rnd.randrange(0, 100),))
    txns, locksets = [], []
    for _ in range(min(cfg.txns, 32)):
        pred = rnd.choice(sigs).name
        pid = schema.sig(pred).pred_id
        kind = rnd.random()
        if kind < 0.4:
            k = rnd.randrange(nkeys)
            txns.append(_bump_rules(schema, pred, k, rnd.randrange(-20, 30)))
            locksets.append(((pid, (k,)),))
        elif kind < 0.8:
            a, b = rnd.sample(range(nkeys), 2)
            amt = rnd.randrange(0, 80)
            rules = parse_rules(
                f"""
^{pred}[$a] = x <- x = {pred}@start[$a] - $m.
^{pred}[$b] = y <- y = {pred}@start[$b] + $m.
false <- {pred}[$a] = v, v < 0.
""",
                schema,
                params={"a": a, "b": b, "m": amt},
            )
            txns.append(rules)
            locksets.append(tuple(sorted({(pid, (a,)), (pid, (b,))})))
        else:
            # read-only: derives a tuple, requests no changes
            k = rnd.randrange(nkeys)
            rules = parse_rules(
                f"probe(v) <- {pred}[$k] = v.", schema, params={"k": k}
            )
            txns.append(rules)
            locksets.append(((pid, (k,)),))
    return Workload(schema, db, txns, locksets)


GENERATORS = {
    "sku": gen_sku,
    "counter_chain": gen_counter_chain,
    "random_rules": gen_random_rules,
}


def make_workload(cfg: WorkloadConfig) -> Workload:
    return GENERATORS[cfg.name](cfg)


# ---- executors ----


@dataclass
class RunReport:
    mode: str
    db: DbVersion
    statuses: list
    seconds: float
    txn_refreshes: int = 0
    op_refreshes: int = 0

    def hash(self, schema) -> str:
        return state_hash(self.db, schema)


def run_serial(wl: Workload) -> RunReport:
    t0 = time.perf_counter()
    db = wl.db
    statuses = []
    for i, rules in enumerate(wl.txns):
        txn = TxnExec(wl.schema, rules, txn_id=i)
        out = txn.evaluate(db)
        statuses.append(out.status)
        if out.status == EVALUATED:
            db = apply_deltas(db, wl.schema, out.deltas)
    return RunReport("serial", db, statuses, time.perf_counter() - t0,
                     txn_refreshes=len(wl.txns))


def run_lock(wl: Workload, workers: int = 1) -> RunReport:
    """Two-phase row locking over the workload's declared key sets.

    Locks are acquired in global key order (no deadlocks). Transactions
    still execute in admission order per key, because each waits for its
    whole lock set; the committed state matches the serial oracle for
    the key-local workloads this baseline supports.
    """
    t0 = time.perf_counter()
    locks = {}
    for ls in wl.locksets:
        for key in ls:
            locks.setdefault(key, threading.Lock())
    state_lock = threading.Lock()
    shared = {"db": wl.db}
    statuses = [None] * len(wl.txns)
    next_txn = [0]

    def work():
        while True:
            with state_lock:
                i = next_txn[0]
                if i >= len(wl.txns):
                    return
                next_txn[0] += 1
            held = [locks[k] for k in wl.locksets[i]]
            for lk in held:
                lk.acquire()
            try:
                with state_lock:
                    db = shared["db"]
                txn = TxnExec(wl.schema, wl.txns[i], txn_id=i)
                out = txn.evaluate(db)
                statuses[i] = out.status
                if out.status == EVALUATED:
                    with state_lock:
                        shared["db"] = apply_deltas(shared["db"], wl.schema, out.deltas)
            finally:
                for lk in reversed(held):
                    lk.release()

    threads = [threading.Thread(target=work) for _ in range(max(workers, 1))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    return RunReport("lock", shared["db"], statuses, time.perf_counter() - t0,
                     txn_refreshes=len(wl.txns))


def run_repair(wl: Workload, workers=1, height=5, commit_strategy="padded",
               priority_mode="earliest", seed=0, randomize_ties=False) -> RunReport:
    t0 = time.perf_counter()
    eng = Engine(
        wl.schema,
        wl.db,
        EngineConfig(
            workers=workers,
            height=height,
            commit_strategy=commit_strategy,
            priority_mode=priority_mode,
            seed=seed,
            randomize_ties=randomize_ties,
        ),
    )
    rep = eng.run(wl.txns)
    return RunReport(
        "repair",
        rep.db,
        rep.statuses,
        time.perf_counter() - t0,
        txn_refreshes=rep.metrics.txn_refreshes,
        op_refreshes=rep.metrics.op_refreshes,
    )


def first_divergence(a: DbVersion, b: DbVersion, schema: Schema):
    sa = dict(((p, k), v) for p, k, v in full_scan(a, schema))
    sb = dict(((p, k), v) for p, k, v in full_scan(b, schema))
    for ident in sorted(set(sa) | set(sb)):
        if sa.get(ident) != sb.get(ident):
            return ident, sa.get(ident), sb.get(ident)
    return None


# ---- CLI ----

CSV_FIELDS = [
    "workload", "alpha", "workers", "txns", "seconds",
    "throughput", "speedup", "txn_refreshes", "op_refreshes",
]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="txnrepair-bench",
                                 description="transaction repair benchmark")
    ap.add_argument("--workload", choices=sorted(GENERATORS), default="sku")
    ap.add_argument("--n", type=int, default=1000, help="key-space size")
    ap.add_argument("--alpha", type=float, default=1.0, help="contention knob")
    ap.add_argument("--txns", type=int, default=64)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--variant", default="shared", help="counter_chain: shared|shift")
    ap.add_argument("--commit-strategy", choices=["simple", "padded"], default="padded")
    ap.add_argument("--priority-mode", choices=["earliest", "inverted"], default="earliest")
    ap.add_argument("--height", type=int, default=5, help="circuit tree height")
    ap.add_argument("--modes", default="serial,lock,repair",
                    help="comma list of executors to run")
    ap.add_argument("--csv", metavar="PATH", default=None)
    ap.add_argument("--json", metavar="PATH", default=None)
    ap.add_argument("--verify", action="store_true",
                    help="check repair result against the serial oracle")
    args = ap.parse_args(argv)

    cfg = WorkloadConfig(name=args.workload, n=args.n, alpha=args.alpha,
                         txns=args.txns, seed=args.seed, variant=args.variant)
    wl = make_workload(cfg)

    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    if args.verify and "serial" not in modes:
        modes.insert(0, "serial")
    reports = {}
    for mode in modes:
        if mode == "serial":
            reports[mode] = run_serial(wl)
        elif mode == "lock":
            reports[mode] = run_lock(wl, workers=args.workers)
        elif mode == "repair":
            reports[mode] = run_repair(
                wl, workers=args.workers, height=args.height,
                commit_strategy=args.commit_strategy,
                priority_mode=args.priority_mode, seed=args.seed,
            )
        else:
            ap.error(f"unknown mode {mode}")

    base = reports.get("serial")
    rows = []
    for mode, rep in reports.items():
        speedup = base.seconds / rep.seconds if base and rep.seconds > 0 else 0.0
        row = {
            "workload": f"{args.workload}:{mode}",
            "alpha": args.alpha,
            "workers": args.workers if mode != "serial" else 1,
            "txns": len(wl.txns),
            "seconds": round(rep.seconds, 6),
            "throughput": round(len(wl.txns) / rep.seconds, 3) if rep.seconds > 0 else 0.0,
            "speedup": round(speedup, 4),
            "txn_refreshes": rep.txn_refreshes,
            "op_refreshes": rep.op_refreshes,
        }
        rows.append(row)
        print("  ".join(f"{k}={row[k]}" for k in CSV_FIELDS))

    rc = 0
    if args.verify:
        want = reports["serial"]
        for mode in ("repair", "lock"):
            rep = reports.get(mode)
            if rep is None:
                continue
            if rep.hash(wl.schema) != want.hash(wl.schema):
                div = first_divergence(want.db, rep.db, wl.schema)
                print(f"VERIFY FAILED ({mode}): first divergence {div}", file=sys.stderr)
                rc = 1
            else:
                print(f"verify ok ({mode}): {rep.hash(wl.schema)[:16]}")

    if args.csv:
        new = True
        try:
            with open(args.csv) as f:
                new = not f.readline()
        except FileNotFoundError:
            pass
        with open(args.csv, "a", newline="") as f:
            w = csv.DictWriter(f, fieldnames=CSV_FIELDS)
            if new:
                w.writeheader()
            w.writerows(rows)
    if args.json:
        with open(args.json, "w") as f:
            json.dump(rows, f, indent=2)
    return rc


if __name__ == "__main__":
    raise SystemExit(main())
