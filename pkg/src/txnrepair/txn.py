"""One transaction's execution unit: isolated evaluation plus repair.

A transaction is a set of rules evaluated against an immutable database
snapshot overlaid with corrections (records other transactions changed
underneath it). Evaluation materializes every rule; repair applies
correction changes through the per-rule sensitivity indexes, so the cost
tracks how much of the transaction's reads actually changed.

Failure (violated constraint or conflicting upserts) empties the
requested-delta output but keeps the sensitivity output, which stays
monotone: a failed transaction can recover when later corrections
restore consistency.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import ptree
from .inclftj import RuleMaintainer
from .lftj import Stats, compile_rule
from .pstore import DbVersion, Schema
from .rulelang import FunAtom, Rule, rewrite_for_txn
from .signal import DeltaRecord, SensitivityRecord, retract, sens_interval, upsert
from .views import OverlayView, TreeView, View, patch_tree, view_lookup

UNEVALUATED = "unevaluated"
EVALUATED = "evaluated"
FAILED = "failed"


@dataclass
class TxnOutputs:
    status: str
    deltas: list  # DeltaRecord upserts this txn requests (empty when failed)
    sens: list  # cumulative SensitivityRecords over db predicate keys
    conflicts: list = field(default_factory=list)
    constraint_hits: int = 0


class TxnExec:
    """Evaluate/repair one transaction against a snapshot + corrections."""

    def __init__(self, schema: Schema, rules, txn_id=0, stats: Optional[Stats] = None):
        self.schema = schema
        self.txn_id = txn_id
        self.rules = list(rules)
        self.stats = stats if stats is not None else Stats()
        self.status = UNEVALUATED
        self.rewritten, self.skeleton = rewrite_for_txn(self.rules, schema)
        self.upserted = sorted(
            {h.atom.pred for r in self.rules for h in r.head if h.is_upsert}
        )
        derived_karity = {}
        for r in self.rules:
            for h in r.head:
                if not h.is_upsert:
                    a = h.atom
                    n = len(a.args) if not isinstance(a, FunAtom) else len(
                        a.key_args + a.value_args
                    )
                    derived_karity[a.pred] = n
        self.compiled = [
            compile_rule(r, schema, frozenset(self.upserted), derived_karity)
            for r in self.rules
        ]
        self._derived_karity = derived_karity
        self.base: Optional[DbVersion] = None
        self.corr: dict = {}  # pred name -> {key: (sign, value)}
        # delta support: pred name -> {key: {value: count}}
        self._delta_support: dict = {}
        # out predicate support: pred name -> {tuple: count}
        self._out_support: dict = {}
        self.maintainers: list = [None] * len(self.rules)
        self._topo = self.skeleton.topo_order()
        self._read_preds = sorted(
            {
                v.split(":", 1)[1]
                for rr in self.rewritten
                for v in rr.reads
                if v.startswith(("db:", "end:"))
            }
        )

    # ---- view construction ----

    def _db_view(self, pred: str) -> View:
        sig = self.schema.sig(pred)
        base_view = TreeView(
            self.base.root(sig.pred_id) if self.base else None,
            sig.arity,
            len(sig.value_types),
        )
        patches = self.corr.get(pred)
        if patches:
            return OverlayView(base_view, patch_tree(patches))
        return base_view

    def _delta_content(self, pred: str) -> dict:
        out = {}
        for key, vals in self._delta_support.get(pred, {}).items():
            live = [v for v, c in vals.items() if c > 0]
            if len(live) == 1:
                out[key] = (1, live[0])
            # conflicting keys contribute nothing; the conflict fails the txn
        return out

    def _build_views(self) -> dict:
        views: dict = {}
        for pred in self._read_preds:
            views[f"db:{pred}"] = self._db_view(pred)
        for pred in self.upserted:
            base = views.get(f"db:{pred}")
            if base is None:
                base = self._db_view(pred)
            views[f"end:{pred}"] = OverlayView(base, patch_tree(self._delta_content(pred)))
        for pred, support in self._out_support.items():
            tuples = sorted(t for t, c in support.items() if c > 0)
            views[f"out:{pred}"] = TreeView(
                ptree.from_sorted([(t, ()) for t in tuples]), self._derived_karity[pred], 0
            )
        return views

    # ---- evaluation ----

    def evaluate(self, base: DbVersion, corrections=()) -> TxnOutputs:
        """Full evaluation on a snapshot plus initial corrections."""
        self.base = base
        self.corr = {}
        for rec, inserted in corrections:
            self._apply_corr_record(rec, inserted)
        self._delta_support = {}
        self._out_support = {}
        for vertex in self._topo:
            if not vertex.startswith("rule"):
                continue
            i = int(vertex[4:])
            views = self._build_views()
            m = RuleMaintainer(self.compiled[i], views, stats=self.stats)
            self.maintainers[i] = m
            self._apply_rule_output(i, self._full_diffs(m))
        self._refresh_status()
        return self.outputs()

    def _full_diffs(self, m: RuleMaintainer):
        return [
            {t: (0, c) for t, c in counts.items()} for counts in m.head_counts
        ]

    def _apply_corr_record(self, rec: DeltaRecord, inserted: bool):
        pred = self.schema.sig_by_id(rec.pred_id).name
        patches = self.corr.setdefault(pred, {})
        if inserted:
            patches[rec.key] = (rec.sign, rec.value if rec.sign > 0 else None)
        else:
            cur = patches.get(rec.key)
            if cur == (rec.sign, rec.value if rec.sign > 0 else None):
                del patches[rec.key]

    def _apply_rule_output(self, rule_idx: int, head_diffs) -> dict:
        """Fold one rule's head-count transitions into the shared vertex
        contents; returns pending changed points per downstream vertex."""
        pending: dict = {}
        rr = self.rewritten[rule_idx]
        rule = self.rules[rule_idx]
        for h, diffs in zip(rule.head, head_diffs):
            pred = h.atom.pred
            if h.is_upsert:
                karity = self.schema.sig(pred).arity
                support = self._delta_support.setdefault(pred, {})
                touched = pending.setdefault(f"end:{pred}", [])
                for t, (old_c, new_c) in diffs.items():
                    key, value = t[:karity], t[karity:]
                    vals = support.setdefault(key, {})
                    vals[value] = vals.get(value, 0) + (new_c - old_c)
                    if vals[value] <= 0:
                        del vals[value]
                    touched.append(t)
            else:
                support = self._out_support.setdefault(pred, {})
                touched = pending.setdefault(f"out:{pred}", [])
                for t, (old_c, new_c) in diffs.items():
                    support[t] = support.get(t, 0) + (new_c - old_c)
                    if support[t] <= 0:
                        del support[t]
                    touched.append(t)
        return pending

    # ---- repair ----

    def repair(self, corr_changes) -> TxnOutputs:
        """Apply correction signal changes [(DeltaRecord, inserted)]."""
        if self.status == UNEVALUATED:
            raise RuntimeError("repair before evaluate")
        pending: dict = {}
        for rec, inserted in corr_changes:
            pred = self.schema.sig_by_id(rec.pred_id).name
            pts = pending.setdefault(f"db:{pred}", [])
            old_view = self._db_view(pred)
            old_val = view_lookup(old_view, rec.key)
            if old_val is not None:
                pts.append(rec.key + old_val)
            self._apply_corr_record(rec, inserted)
            new_view = self._db_view(pred)
            new_val = view_lookup(new_view, rec.key)
            if new_val is not None:
                pts.append(rec.key + new_val)
            if pred in self.upserted:
                pending.setdefault(f"end:{pred}", []).extend(pts)
        for vertex in self._topo:
            if not vertex.startswith("rule"):
                continue
            i = int(vertex[4:])
            rr = self.rewritten[i]
            touched = {v: pending[v] for v in rr.reads if pending.get(v)}
            if not touched:
                continue
            views = self._build_views()
            report = self.maintainers[i].apply_changes(views, touched, stats=self.stats)
            downstream = self._apply_rule_output(i, report.head_diffs)
            for v, pts in downstream.items():
                pending.setdefault(v, []).extend(pts)
        self._refresh_status()
        return self.outputs()

    # ---- outputs ----

    def _conflicts(self):
        out = []
        for pred, keys in sorted(self._delta_support.items()):
            for key, vals in sorted(keys.items()):
                live = sorted(v for v, c in vals.items() if c > 0)
                if len(live) > 1:
                    out.append((pred, key, tuple(live)))
        return out

    def _refresh_status(self):
        hits = sum(
            m.constraint_hits for m in self.maintainers if m is not None
        )
        self.status = FAILED if (hits > 0 or self._conflicts()) else EVALUATED

    def delta_records(self):
        if self.status != EVALUATED:
            return []
        out = []
        for pred in sorted(self._delta_support):
            sig = self.schema.sig(pred)
            for key, (sign, value) in sorted(self._delta_content(pred).items()):
                out.append(upsert(sig.pred_id, key, value))
        return out

    def sens_records(self):
        """Cumulative key-space sensitivity over database predicates."""
        seen = set()
        out = []
        for m in self.maintainers:
            if m is None:
                continue
            for e in m.entry_log:
                kind, _, pred = e.vertex.partition(":")
                if kind not in ("db", "end"):
                    continue
                sig = self.schema.sig(pred)
                karity = sig.arity
                rec = SensitivityRecord(sig.pred_id, e.lo[:karity], e.hi[:karity])
                if rec.identity() not in seen:
                    seen.add(rec.identity())
                    out.append(rec)
        return out

    def outputs(self) -> TxnOutputs:
        return TxnOutputs(
            status=self.status,
            deltas=self.delta_records(),
            sens=self.sens_records(),
            conflicts=self._conflicts(),
            constraint_hits=sum(
                m.constraint_hits for m in self.maintainers if m is not None
            ),
        )


def make_null_txn(schema: Schema, txn_id=0) -> TxnExec:
    """A transaction with no rules: evaluates trivially, never fails."""
    return TxnExec(schema, [], txn_id=txn_id)
