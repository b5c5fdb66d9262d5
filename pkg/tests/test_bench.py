"""Workload generators and the benchmark CLI."""

import csv
from itertools import combinations

import pytest

from txnrepair.bench import (
    WorkloadConfig,
    first_divergence,
    gen_sku_keysets,
    main,
    make_workload,
    run_lock,
    run_repair,
    run_serial,
)
from txnrepair.pstore import DbVersion, store_upsert


def test_generators_deterministic():
    for name in ("sku", "counter_chain", "random_rules"):
        cfg = WorkloadConfig(name=name, n=100, txns=8, seed=3)
        a, b = make_workload(cfg), make_workload(cfg)
        assert [str(r) for rs in a.txns for r in rs] == [
            str(r) for rs in b.txns for r in rs
        ]
        assert a.locksets == b.locksets


def test_locksets_sorted():
    wl = make_workload(WorkloadConfig(name="random_rules", txns=16, seed=1))
    for ls in wl.locksets:
        assert list(ls) == sorted(ls)


def test_sku_overlap_statistic():
    # mean pairwise sku overlap concentrates near alpha^2
    cfg = WorkloadConfig(name="sku", n=4000, alpha=4.0, txns=40, seed=0)
    sets = [set(s) for s in gen_sku_keysets(cfg)]
    overlaps = [len(a & b) for a, b in combinations(sets, 2)]
    mean = sum(overlaps) / len(overlaps)
    assert 0.75 * 16 <= mean <= 1.25 * 16


def test_counter_chain_shift_variant():
    wl = make_workload(WorkloadConfig(name="counter_chain", txns=5, variant="shift"))
    got = run_serial(wl)
    # txn i sets cnt[i] = cnt[i-1] + 1; txn 0 bumps itself
    vals = {k[0]: v[0] for _, k, v in __import__("txnrepair.pstore", fromlist=["full_scan"]).full_scan(got.db, wl.schema)}
    assert vals == {0: 1, 1: 2, 2: 3, 3: 4, 4: 5}


def test_three_executors_agree():
    wl = make_workload(WorkloadConfig(name="sku", n=80, alpha=2.0, txns=12, seed=5))
    serial = run_serial(wl)
    lock = run_lock(wl, workers=2)
    repair = run_repair(wl, workers=1, height=3)
    assert serial.hash(wl.schema) == lock.hash(wl.schema) == repair.hash(wl.schema)
    assert first_divergence(serial.db, repair.db, wl.schema) is None


def test_first_divergence_reports_smallest_key():
    wl = make_workload(WorkloadConfig(name="counter_chain", txns=1))
    other = store_upsert(wl.db, wl.schema.sig("cnt"), (0,), (9,))
    ident, a, b = first_divergence(wl.db, other, wl.schema)
    assert ident == (0, (0,)) and a == (0,) and b == (9,)


def test_cli_writes_csv(tmp_path):
    out = tmp_path / "rows.csv"
    rc = main([
        "--workload", "counter_chain", "--txns", "8", "--height", "3",
        "--csv", str(out), "--verify",
    ])
    assert rc == 0
    with open(out) as f:
        rows = list(csv.DictReader(f))
    assert {r["workload"] for r in rows} == {
        "counter_chain:serial", "counter_chain:lock", "counter_chain:repair"
    }
    for r in rows:
        assert float(r["seconds"]) >= 0
        assert int(r["txns"]) == 8


def test_cli_modes_subset(tmp_path):
    rc = main(["--workload", "sku", "--n", "50", "--txns", "4",
               "--modes", "repair", "--verify"])
    assert rc == 0  # --verify pulls the serial oracle in automatically
