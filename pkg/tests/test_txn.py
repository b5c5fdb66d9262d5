"""Transaction execution: isolated evaluation, failure, repair."""

import random

import pytest

from txnrepair.pstore import DbVersion, PredicateSig, Schema, store_upsert
from txnrepair.rulelang import parse_rules
from txnrepair.signal import retract, upsert
from txnrepair.txn import EVALUATED, FAILED, TxnExec, make_null_txn
from txnrepair.values import INT64

SCHEMA = Schema.from_sigs([PredicateSig("bal", 0, (INT64,), (INT64,))])


def make_db(entries):
    db = DbVersion()
    for k, v in entries.items():
        db = store_upsert(db, SCHEMA.sig("bal"), (k,), (v,))
    return db


def transfer(src, dst, amount):
    return parse_rules(
        """
^bal[$a] = x <- x = bal@start[$a] - $m.
^bal[$b] = y <- y = bal@start[$b] + $m.
false <- bal[$a] = v, v < 0.
""",
        SCHEMA,
        params={"a": src, "b": dst, "m": amount},
    )


def deltas_as_dict(out):
    return {rec.key: rec.value for rec in out.deltas}


def test_transfer_succeeds():
    txn = TxnExec(SCHEMA, transfer(1, 2, 30))
    out = txn.evaluate(make_db({1: 100, 2: 5}))
    assert out.status == EVALUATED
    assert deltas_as_dict(out) == {(1,): (70,), (2,): (35,)}


def test_overdraft_fails_with_empty_deltas():
    txn = TxnExec(SCHEMA, transfer(1, 2, 30))
    out = txn.evaluate(make_db({1: 10, 2: 5}))
    assert out.status == FAILED
    assert out.deltas == []
    assert out.constraint_hits == 1
    assert out.sens  # sensitivity output survives failure


def test_conflicting_upserts_fail():
    rules = parse_rules(
        "^bal[$k] = v <- v = bal@start[$k] + 1.\n"
        "^bal[$k] = w <- w = bal@start[$k] + 2.\n",
        SCHEMA,
        params={"k": 1},
    )
    txn = TxnExec(SCHEMA, rules)
    out = txn.evaluate(make_db({1: 0}))
    assert out.status == FAILED
    assert out.conflicts == [("bal", (1,), ((1,), (2,)))]


def test_agreeing_upserts_are_fine():
    rules = parse_rules(
        "^bal[$k] = v <- v = bal@start[$k] + 1.\n"
        "^bal[$k] = w <- w = bal@start[$k] + 1.\n",
        SCHEMA,
        params={"k": 1},
    )
    out = TxnExec(SCHEMA, rules).evaluate(make_db({1: 0}))
    assert out.status == EVALUATED
    assert deltas_as_dict(out) == {(1,): (1,)}


def test_repair_tracks_correction():
    txn = TxnExec(SCHEMA, transfer(1, 2, 30))
    out = txn.evaluate(make_db({1: 100, 2: 5}))
    assert deltas_as_dict(out) == {(1,): (70,), (2,): (35,)}
    # another transaction changed bal[1] underneath us
    out = txn.repair([(upsert(0, (1,), (50,)), True)])
    assert out.status == EVALUATED
    assert deltas_as_dict(out) == {(1,): (20,), (2,): (35,)}


def test_repair_can_fail_and_recover():
    txn = TxnExec(SCHEMA, transfer(1, 2, 30))
    txn.evaluate(make_db({1: 100, 2: 5}))
    corr = upsert(0, (1,), (10,))
    out = txn.repair([(corr, True)])
    assert out.status == FAILED and out.deltas == []
    # correction withdrawn: back to the snapshot value
    out = txn.repair([(corr, False)])
    assert out.status == EVALUATED
    assert deltas_as_dict(out) == {(1,): (70,), (2,): (35,)}


def test_null_txn():
    out = make_null_txn(SCHEMA).evaluate(make_db({}))
    assert out.status == EVALUATED and out.deltas == [] and out.sens == []


def test_sens_covers_read_keys():
    txn = TxnExec(SCHEMA, transfer(1, 2, 30))
    out = txn.evaluate(make_db({1: 100, 2: 5}))
    for key in ((1,), (2,)):
        assert any(r.pred_id == 0 and r.contains(key) for r in out.sens)


class _CorrModel:
    """Oracle-side view of a correction signal: identity -> record, with
    replacement emitting the removal/insertion pair the signal would."""

    def __init__(self):
        self.content = {}

    def set(self, rec):
        changes = []
        old = self.content.get(rec.identity())
        if old == rec:
            return changes
        if old is not None:
            changes.append((old, False))
        self.content[rec.identity()] = rec
        changes.append((rec, True))
        return changes

    def all_changes(self):
        return [(rec, True) for rec in self.content.values()]


def test_repair_matches_fresh_eval_fuzz():
    """Random correction streams: incremental repair must agree with a
    fresh evaluation given the final corrections."""
    for seed in range(120):
        rnd = random.Random(seed)
        base = make_db({k: rnd.randrange(0, 120) for k in range(6)})
        a, b = rnd.sample(range(6), 2)
        txn = TxnExec(SCHEMA, transfer(a, b, rnd.randrange(0, 100)))
        txn.evaluate(base)
        model = _CorrModel()
        for _ in range(rnd.randint(1, 5)):
            key = (rnd.randrange(6),)
            rec = (retract(0, key) if rnd.random() < 0.2
                   else upsert(0, key, (rnd.randrange(0, 120),)))
            changes = model.set(rec)
            if changes:
                txn.repair(changes)
        fresh = TxnExec(SCHEMA, list(txn.rules))
        want = fresh.evaluate(base, model.all_changes())
        got = txn.outputs()
        assert got.status == want.status, seed
        assert deltas_as_dict(got) == deltas_as_dict(want), seed
