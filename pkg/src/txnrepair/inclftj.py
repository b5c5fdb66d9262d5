"""Incremental rule maintenance via recorded sensitivity intervals.

After a full evaluation, every cursor operation's sensitivity interval
sits in a per-input interval index. When input records change, stabbing
the index yields the set of variable-binding prefixes (contexts) whose
join subtrees could have changed; the rule is re-run restricted to the
prefix-minimal contexts against the old and new inputs, and the two
restricted results are diffed. Everything outside the stabbed contexts
is untouched by construction, so the maintained result matches a full
re-evaluation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from .lftj import CompiledRule, SensCollector, SensEntry, Stats, eval_rule


class _INode:
    __slots__ = ("lo", "hi", "entry", "prio", "left", "right", "max_hi")

    def __init__(self, lo, hi, entry, prio):
        self.lo = lo
        self.hi = hi
        self.entry = entry
        self.prio = prio
        self.left = None
        self.right = None
        self.max_hi = hi

    def _pull(self):
        m = self.hi
        if self.left is not None and self.left.max_hi > m:
            m = self.left.max_hi
        if self.right is not None and self.right.max_hi > m:
            m = self.right.max_hi
        self.max_hi = m


class IntervalIndex:
    """Insert-only interval set with stabbing queries.

    Treap keyed by interval low endpoint, augmented with subtree max
    high endpoint, so a stab visits only subtrees that can contain the
    point.
    """

    def __init__(self, seed: int = 0):
        self.root = None
        self._rng = random.Random(seed)
        self.size = 0

    def insert(self, entry: SensEntry):
        self.size += 1
        node = _INode(entry.lo, entry.hi, entry, self._rng.random())
        self.root = self._insert(self.root, node)

    def _insert(self, t, node):
        if t is None:
            return node
        if node.lo < t.lo:
            t.left = self._insert(t.left, node)
            if t.left.prio < t.prio:
                t = self._rot_right(t)
        else:
            t.right = self._insert(t.right, node)
            if t.right.prio < t.prio:
                t = self._rot_left(t)
        t._pull()
        return t

    @staticmethod
    def _rot_right(t):
        l = t.left
        t.left = l.right
        l.right = t
        t._pull()
        l._pull()
        return l

    @staticmethod
    def _rot_left(t):
        r = t.right
        t.right = r.left
        r.left = t
        t._pull()
        r._pull()
        return r

    def stab(self, point: tuple):
        """All entries whose [lo, hi] contains the point tuple."""
        out = []
        stack = [self.root]
        while stack:
            t = stack.pop()
            if t is None or t.max_hi < point:
                continue
            stack.append(t.left)
            if t.lo <= point:
                if point <= t.hi:
                    out.append(t.entry)
                stack.append(t.right)
        return out


def minimal_contexts(entries):
    """Prefix-minimal set of binding contexts from stabbed entries.

    Returns contexts sorted; a context that extends another stabbed
    context is dropped, so restricted re-runs never overlap.
    """
    ctxs = sorted({e.ctx for e in entries}, key=lambda c: (len(c), c))
    out = []
    for c in ctxs:
        if not any(len(m) <= len(c) and c[: len(m)] == m for m in out):
            out.append(c)
    return sorted(out)


@dataclass
class MaintainReport:
    contexts: tuple
    # per head atom: {tuple: (old_count, new_count)} for counts that changed
    head_diffs: list = field(default_factory=list)
    constraint_delta: int = 0
    stats: Optional[Stats] = None


class RuleMaintainer:
    """Holds one rule's materialized result and its sensitivity index."""

    def __init__(self, compiled: CompiledRule, views: dict, stats: Optional[Stats] = None):
        self.compiled = compiled
        self.views = dict(views)
        self.index: dict = {}  # vertex -> IntervalIndex
        self.entry_log: list = []  # every entry ever absorbed, in order
        col = SensCollector()
        res = eval_rule(compiled, views, collector=col, stats=stats)
        self.head_counts = res.head_counts
        self.constraint_hits = res.constraint_hits
        self._absorb(col)

    def _absorb(self, col: SensCollector):
        for e in col.entries:
            self.index.setdefault(e.vertex, IntervalIndex(len(self.index))).insert(e)
            self.entry_log.append(e)

    def result(self):
        from .lftj import RuleResult

        res = RuleResult(head_counts=[dict(h) for h in self.head_counts])
        res.constraint_hits = self.constraint_hits
        return res

    def changed_contexts(self, changed_points: dict):
        """changed_points: vertex -> iterable of full tuples touched."""
        hits = []
        for vertex, points in changed_points.items():
            idx = self.index.get(vertex)
            if idx is None:
                continue
            for t in points:
                hits.extend(idx.stab(tuple(t)))
        return minimal_contexts(hits)

    def apply_changes(
        self, new_views: dict, changed_points: dict, stats: Optional[Stats] = None
    ) -> MaintainReport:
        """Maintain the result across a views change.

        changed_points must cover every record whose presence or payload
        differs between self.views and new_views (stale extra points are
        harmless). Returns the head-tuple count transitions.
        """
        contexts = self.changed_contexts(changed_points)
        report = MaintainReport(contexts=tuple(contexts), stats=stats)
        order = self.compiled.var_order
        n_heads = len(self.head_counts)
        deltas = [dict() for _ in range(n_heads)]
        cdelta = 0
        for ctx in contexts:
            fixed = dict(zip(order, ctx))
            old = eval_rule(self.compiled, self.views, fixed=fixed, stats=stats)
            col = SensCollector()
            new = eval_rule(self.compiled, new_views, fixed=fixed, collector=col, stats=stats)
            self._absorb(col)
            cdelta += new.constraint_hits - old.constraint_hits
            for i in range(n_heads):
                for t, c in old.head_counts[i].items():
                    deltas[i][t] = deltas[i].get(t, 0) - c
                for t, c in new.head_counts[i].items():
                    deltas[i][t] = deltas[i].get(t, 0) + c
        for i in range(n_heads):
            diffs = {}
            counts = self.head_counts[i]
            for t, d in deltas[i].items():
                if d == 0:
                    continue
                old_c = counts.get(t, 0)
                new_c = old_c + d
                if new_c < 0:
                    raise AssertionError(f"support count underflow for {t}")
                diffs[t] = (old_c, new_c)
                if new_c == 0:
                    counts.pop(t, None)
                else:
                    counts[t] = new_c
            report.head_diffs.append(diffs)
        self.constraint_hits += cdelta
        report.constraint_delta = cdelta
        self.views = dict(new_views)
        return report


def changed_points_from_deltas(vertex: str, old_view, records) -> dict:
    """Full-tuple touch points for delta records against one view.

    For an upsert that replaces an existing value both the old and the
    new full tuple are touched; for retractions, the old tuple.
    """
    from .views import view_lookup

    points = []
    for rec in records:
        key = tuple(rec.key)
        old_val = view_lookup(old_view, key)
        if old_val is not None:
            points.append(key + old_val)
        if rec.sign > 0:
            points.append(key + tuple(rec.value or ()))
    return {vertex: points}
