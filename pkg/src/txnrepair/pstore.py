"""Persistent, versioned predicate storage.

A DbVersion is an immutable snapshot mapping each predicate to the root
of a persistent ordered tree. Branching is O(1) (reuse the snapshot);
updates path-copy and return a new DbVersion, so any previously obtained
version replays to identical scans forever.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from . import ptree
from .values import SchemaError, validate_tuple


@dataclass(frozen=True)
class PredicateSig:
    name: str
    pred_id: int
    key_types: tuple
    value_types: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "key_types", tuple(self.key_types))
        object.__setattr__(self, "value_types", tuple(self.value_types))

    @property
    def is_relation(self) -> bool:
        return len(self.value_types) == 0

    @property
    def arity(self) -> int:
        return len(self.key_types)

    def check_key(self, key) -> tuple:
        return validate_tuple(self.key_types, key, f"{self.name} key")

    def check_value(self, value) -> tuple:
        return validate_tuple(self.value_types, value, f"{self.name} value")


@dataclass(frozen=True)
class Schema:
    predicates: tuple

    def __post_init__(self):
        object.__setattr__(self, "predicates", tuple(self.predicates))
        by_name = {}
        by_id = {}
        for sig in self.predicates:
            if sig.name in by_name:
                raise SchemaError(f"duplicate predicate {sig.name}")
            by_name[sig.name] = sig
            by_id[sig.pred_id] = sig
        object.__setattr__(self, "_by_name", by_name)
        object.__setattr__(self, "_by_id", by_id)

    def sig(self, name: str) -> PredicateSig:
        try:
            return self._by_name[name]
        except KeyError:
            raise SchemaError(f"unknown predicate {name}") from None

    def sig_by_id(self, pred_id: int) -> PredicateSig:
        return self._by_id[pred_id]

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    @staticmethod
    def from_sigs(sigs: Iterable[PredicateSig]) -> "Schema":
        return Schema(tuple(sigs))

    @staticmethod
    def from_json(text: str) -> "Schema":
        doc = json.loads(text)
        sigs = []
        for i, p in enumerate(doc["predicates"]):
            sigs.append(
                PredicateSig(
                    name=p["name"],
                    pred_id=p.get("pred_id", i),
                    key_types=tuple(p.get("key_types", ())),
                    value_types=tuple(p.get("value_types", ())),
                )
            )
        return Schema(tuple(sigs))

    def to_json(self) -> str:
        return json.dumps(
            {
                "predicates": [
                    {
                        "name": s.name,
                        "pred_id": s.pred_id,
                        "key_types": list(s.key_types),
                        "value_types": list(s.value_types),
                    }
                    for s in self.predicates
                ]
            },
            indent=2,
        )


_EMPTY_ROOTS: dict = {}


@dataclass(frozen=True)
class DbVersion:
    """Immutable database snapshot; safe to share across workers."""

    version_id: int = 0
    roots: dict = field(default_factory=dict)  # pred_id -> ptree root

    def root(self, pred_id: int):
        return self.roots.get(pred_id)

    def _with_root(self, pred_id: int, root) -> "DbVersion":
        new_roots = dict(self.roots)
        if root is None:
            new_roots.pop(pred_id, None)
        else:
            new_roots[pred_id] = root
        return DbVersion(self.version_id + 1, new_roots)


def store_upsert(db: DbVersion, sig: PredicateSig, key, value=()) -> DbVersion:
    key = sig.check_key(key)
    value = sig.check_value(value)
    return db._with_root(sig.pred_id, ptree.insert(db.root(sig.pred_id), key, value))


def store_retract(db: DbVersion, sig: PredicateSig, key) -> DbVersion:
    key = sig.check_key(key)
    root = db.root(sig.pred_id)
    new_root = ptree.remove(root, key)
    if new_root is root:
        return db
    return db._with_root(sig.pred_id, new_root)


def store_lookup(db: DbVersion, sig: PredicateSig, key):
    """Value tuple for key, or None if absent. Relations return () when present."""
    key = sig.check_key(key)
    return ptree.get(db.root(sig.pred_id), key)


def store_iter(db: DbVersion, sig: PredicateSig, from_key=None) -> ptree.Cursor:
    """Ordered seekable cursor over records with key >= from_key."""
    cur = ptree.Cursor(db.root(sig.pred_id))
    if from_key is not None:
        cur.seek(tuple(from_key))
    return cur


def store_scan(db: DbVersion, sig: PredicateSig) -> Iterator[tuple]:
    return ptree.items(db.root(sig.pred_id))


def full_scan(db: DbVersion, schema: Schema) -> Iterator[tuple]:
    """All records in (pred_id, key) order: yields (pred_id, key, value)."""
    for sig in sorted(schema.predicates, key=lambda s: s.pred_id):
        for key, value in store_scan(db, sig):
            yield sig.pred_id, key, value


def apply_deltas(db: DbVersion, schema: Schema, records) -> DbVersion:
    """Apply delta records (pred_id, key, value, sign) to a branch of db."""
    roots = dict(db.roots)
    for rec in records:
        pred_id, key, value, sign = rec.pred_id, rec.key, rec.value, rec.sign
        root = roots.get(pred_id)
        if sign > 0:
            roots[pred_id] = ptree.insert(root, key, value if value is not None else ())
        else:
            new_root = ptree.remove(root, key)
            if new_root is None:
                roots.pop(pred_id, None)
            else:
                roots[pred_id] = new_root
    return DbVersion(db.version_id + 1, roots)


def export_snapshot(db: DbVersion, schema: Schema) -> str:
    """Line-delimited `pred_name<TAB>key_json<TAB>value_json` records."""
    lines = []
    for pred_id, key, value in full_scan(db, schema):
        sig = schema.sig_by_id(pred_id)
        lines.append(f"{sig.name}\t{json.dumps(list(key))}\t{json.dumps(list(value))}")
    return "\n".join(lines) + ("\n" if lines else "")


def import_snapshot(text: str, schema: Schema, base: Optional[DbVersion] = None) -> DbVersion:
    db = base if base is not None else DbVersion()
    for line in text.splitlines():
        if not line.strip():
            continue
        name, key_json, value_json = line.split("\t")
        sig = schema.sig(name)
        db = store_upsert(db, sig, tuple(json.loads(key_json)), tuple(json.loads(value_json)))
    return db
