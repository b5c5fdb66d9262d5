import pytest
from hypothesis import given
from hypothesis import strategies as st

from txnrepair.pstore import (
    DbVersion,
    PredicateSig,
    Schema,
    apply_deltas,
    export_snapshot,
    full_scan,
    import_snapshot,
    store_iter,
    store_lookup,
    store_retract,
    store_scan,
    store_upsert,
)
from txnrepair.signal import retract, upsert
from txnrepair.values import INT64, STRING, SchemaError


@pytest.fixture
def schema():
    return Schema.from_sigs([
        PredicateSig("bal", 0, (INT64,), (INT64,)),
        PredicateSig("tag", 1, (STRING,)),
    ])


def test_schema_lookup(schema):
    assert schema.sig("bal").pred_id == 0
    assert schema.sig_by_id(1).name == "tag"
    assert "bal" in schema and "nope" not in schema
    with pytest.raises(SchemaError):
        schema.sig("nope")


def test_schema_rejects_duplicates():
    with pytest.raises(SchemaError):
        Schema.from_sigs([
            PredicateSig("p", 0, (INT64,)),
            PredicateSig("p", 1, (INT64,)),
        ])


def test_snapshots_are_immutable(schema):
    db0 = DbVersion()
    db1 = store_upsert(db0, schema.sig("bal"), (1,), (10,))
    db2 = store_upsert(db1, schema.sig("bal"), (1,), (20,))
    db3 = store_retract(db2, schema.sig("bal"), (1,))
    assert store_lookup(db0, schema.sig("bal"), (1,)) is None
    assert store_lookup(db1, schema.sig("bal"), (1,)) == (10,)
    assert store_lookup(db2, schema.sig("bal"), (1,)) == (20,)
    assert store_lookup(db3, schema.sig("bal"), (1,)) is None


def test_type_checks(schema):
    with pytest.raises(SchemaError):
        store_upsert(DbVersion(), schema.sig("bal"), ("x",), (1,))
    with pytest.raises(SchemaError):
        store_upsert(DbVersion(), schema.sig("bal"), (1,), ("x",))


def test_relation_records_have_empty_value(schema):
    db = store_upsert(DbVersion(), schema.sig("tag"), ("a",))
    assert store_lookup(db, schema.sig("tag"), ("a",)) == ()


def test_store_iter_seeks(schema):
    db = DbVersion()
    for k in (1, 3, 5):
        db = store_upsert(db, schema.sig("bal"), (k,), (0,))
    cur = store_iter(db, schema.sig("bal"), from_key=(2,))
    assert cur.key == (3,)


@given(st.dictionaries(st.integers(0, 50), st.integers(0, 9), max_size=25))
def test_export_import_round_trip(entries):
    schema = Schema.from_sigs([PredicateSig("bal", 0, (INT64,), (INT64,))])
    db = DbVersion()
    for k, v in entries.items():
        db = store_upsert(db, schema.sig("bal"), (k,), (v,))
    text = export_snapshot(db, schema)
    db2 = import_snapshot(text, schema)
    assert export_snapshot(db2, schema) == text
    assert list(full_scan(db2, schema)) == list(full_scan(db, schema))


def test_apply_deltas(schema):
    db = store_upsert(DbVersion(), schema.sig("bal"), (1,), (10,))
    db2 = apply_deltas(db, schema, [
        upsert(0, (1,), (11,)),
        upsert(0, (2,), (5,)),
        retract(0, (1,)),
    ])
    assert store_lookup(db2, schema.sig("bal"), (1,)) is None
    assert store_lookup(db2, schema.sig("bal"), (2,)) == (5,)
    # source branch unchanged
    assert store_lookup(db, schema.sig("bal"), (1,)) == (10,)


def test_full_scan_order():
    schema = Schema.from_sigs([
        PredicateSig("b", 7, (INT64,)),
        PredicateSig("a", 3, (INT64,)),
    ])
    db = DbVersion()
    db = store_upsert(db, schema.sig("b"), (1,))
    db = store_upsert(db, schema.sig("a"), (2,))
    assert [p for p, _, _ in full_scan(db, schema)] == [3, 7]
