"""Lock-free scheduler: runs transactions through the repair circuit.

Transactions are admitted in serial order to the leaves of a circuit
tree (one epoch per tree filling). Workers pull refresh work off a
priority queue; an operator's priority is (m, d) where m is the latest
transaction position that can influence it and d its depth downstream of
transaction outputs, so work for earlier transactions drains first.
Priority mode "inverted" reverses the transaction component, which is
the pathological schedule for long dependency chains.

The fixpoint of the circuit is schedule independent, so the committed
state is identical for any worker count or tie-breaking choice.
"""

from __future__ import annotations

import heapq
import itertools
import random
import threading
from dataclasses import dataclass, field
from typing import Optional

from .circuit import TreeNode, TxnOp, build_tree, wire_tree
from .domain import build_decomposition, point
from .pstore import DbVersion, Schema, apply_deltas, full_scan
from .txn import EVALUATED, FAILED, TxnExec

EARLIEST = "earliest"
INVERTED = "inverted"


@dataclass
class EngineConfig:
    workers: int = 1
    height: int = 5  # leaf capacity per epoch = 2**height
    commit_strategy: str = "padded"  # "padded" publishes finalized prefixes early
    priority_mode: str = EARLIEST
    randomize_ties: bool = False
    seed: int = 0
    decomp_samples: int = 256


@dataclass
class EngineMetrics:
    txns: int = 0
    failed_txns: int = 0
    epochs: int = 0
    txn_refreshes: int = 0
    op_refreshes: int = 0
    prefix_commits: int = 0

    def as_dict(self):
        return dict(self.__dict__)


@dataclass
class EngineReport:
    db: DbVersion
    statuses: list
    metrics: EngineMetrics


class _Queue:
    """Priority refresh queue; an op is never queued or run twice at once."""

    def __init__(self, prio, tie):
        self._heap: list = []
        self._prio = prio  # op -> priority tuple
        self._tie = tie  # op -> tie-break key factory
        self._state: dict = {}  # op -> "queued" | "running" | "rerun"
        self._lock = threading.Lock()
        self._cv = threading.Condition(self._lock)
        self._active = 0
        self._stopped = False

    def stop(self):
        with self._lock:
            self._stopped = True
            self._cv.notify_all()

    def push(self, op):
        with self._lock:
            st = self._state.get(op)
            if st == "queued":
                return
            if st in ("running", "rerun"):
                self._state[op] = "rerun"
                return
            self._state[op] = "queued"
            heapq.heappush(self._heap, (self._prio[op], self._tie(), op))
            self._cv.notify()

    def pop(self):
        """Next op, or None when the fixpoint is reached."""
        with self._lock:
            while True:
                if self._stopped:
                    return None
                if self._heap:
                    _, _, op = heapq.heappop(self._heap)
                    self._state[op] = "running"
                    self._active += 1
                    return op
                if self._active == 0:
                    self._cv.notify_all()
                    return None
                self._cv.wait()

    def done(self, op):
        with self._lock:
            self._active -= 1
            if self._state.get(op) == "rerun":
                self._state[op] = "queued"
                heapq.heappush(self._heap, (self._prio[op], self._tie(), op))
            else:
                self._state.pop(op, None)
            self._cv.notify_all()


def _op_priorities(ops, leaf_index, mode):
    """(m, d) per op. m is the earliest transaction position the op's
    output (transitively) serves: settling transaction g requires exactly
    the ops with m <= g, so draining by ascending m finishes one
    transaction's corrections before starting the next and each
    transaction repairs at most once. d orders producers before consumers
    within the same m (depth downstream of transaction outputs, with the
    correction->transaction back edges cut to keep the graph acyclic)."""
    producer = {}
    for op in ops:
        for sig in op.output_signals:
            producer[id(sig)] = op
    FAR = 1 << 30

    m_memo: dict = {}

    def m_of(op):
        if op in m_memo:
            return m_memo[op]
        if isinstance(op, TxnOp):
            m_memo[op] = leaf_index[op.leaf.label]
            return m_memo[op]
        m_memo[op] = FAR  # breaks cycles conservatively
        m = FAR
        for sig in op.output_signals:
            for reader in sig.readers:
                m = min(m, m_of(reader))
        m_memo[op] = m
        return m

    d_memo: dict = {}

    def d_of(op):
        if op in d_memo:
            return d_memo[op]
        if isinstance(op, TxnOp):
            d_memo[op] = 0
            return 0
        d_memo[op] = 0
        d = 0
        for sig in op.input_signals:
            p = producer.get(id(sig))
            if p is not None:
                d = max(d, (0 if isinstance(p, TxnOp) else d_of(p)) + 1)
        d_memo[op] = d
        return d

    mp_memo: dict = {}

    def m_prod(op):
        """Latest transaction position feeding the op (inverted mode keys
        on this: serving the newest transactions first maximizes churn)."""
        if op in mp_memo:
            return mp_memo[op]
        if isinstance(op, TxnOp):
            mp_memo[op] = leaf_index[op.leaf.label]
            return mp_memo[op]
        mp_memo[op] = 0
        m = 0
        for sig in op.input_signals:
            p = producer.get(id(sig))
            if p is not None:
                m = max(m, m_prod(p))
        mp_memo[op] = m
        return m

    out = {}
    for op in ops:
        d = d_of(op)
        if mode == INVERTED:
            out[op] = (-m_prod(op), d)
        else:
            out[op] = (m_of(op), d)
    return out


class Engine:
    def __init__(self, schema: Schema, base: DbVersion, config: Optional[EngineConfig] = None):
        self.schema = schema
        self.db = base
        self.config = config or EngineConfig()
        self.metrics = EngineMetrics()

    def _decomposition(self):
        pts = []
        for pred_id, key, _value in full_scan(self.db, self.schema):
            pts.append(point(pred_id, key))
        if len(pts) > self.config.decomp_samples:
            stride = len(pts) / self.config.decomp_samples
            pts = [pts[int(i * stride)] for i in range(self.config.decomp_samples)]
        return build_decomposition(pts, self.config.height)

    def run(self, txns) -> EngineReport:
        """txns: list of parsed rule lists, in serial order."""
        statuses = []
        cap = 2 ** self.config.height
        for lo in range(0, max(len(txns), 1), cap):
            chunk = txns[lo : lo + cap]
            if not chunk and lo > 0:
                break
            statuses.extend(self._run_epoch(chunk, first_id=lo))
        self.metrics.txns = len(txns)
        self.metrics.failed_txns = sum(1 for s in statuses if s != EVALUATED)
        return EngineReport(db=self.db, statuses=statuses, metrics=self.metrics)

    def _run_epoch(self, chunk, first_id=0):
        self.metrics.epochs += 1
        cfg = self.config
        decomp = self._decomposition()
        root = build_tree(cfg.height)
        ops = list(wire_tree(root, decomp))
        leaves = list(root.leaves())
        leaf_index = {leaf.label: i for i, leaf in enumerate(leaves)}
        txn_ops = []
        for i, rules in enumerate(chunk):
            leaf = leaves[i]
            leaf.txn = TxnExec(self.schema, rules, txn_id=first_id + i)
            op = TxnOp(leaf, self.db)
            ops.append(op)
            txn_ops.append(op)

        prio = _op_priorities(ops, leaf_index, cfg.priority_mode)
        seq = itertools.count()
        if cfg.randomize_ties:
            rng = random.Random(cfg.seed * 1_000_003 + first_id)
            tie = lambda: (rng.random(), next(seq))
        else:
            tie = lambda: (0.0, next(seq))
        queue = _Queue(prio, tie)

        committed_prefix = [0]
        errors: list = []

        def work():
            while True:
                op = queue.pop()
                if op is None:
                    return
                try:
                    changed = op.refresh()
                    self.metrics.op_refreshes += 1
                    if isinstance(op, TxnOp):
                        self.metrics.txn_refreshes += 1
                    if changed:
                        for sig in op.output_signals:
                            for reader in list(sig.readers):
                                queue.push(reader)
                    if cfg.commit_strategy == "padded":
                        self._note_prefix(txn_ops, queue, committed_prefix)
                except BaseException as exc:  # keep done() paired with pop()
                    errors.append(exc)
                    queue.stop()
                finally:
                    queue.done(op)

        for op in txn_ops:
            queue.push(op)
        if cfg.workers <= 1:
            work()
        else:
            threads = [threading.Thread(target=work) for _ in range(cfg.workers)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        if errors:
            raise errors[0]

        # fixpoint reached: finalize every leaf in serial order and commit
        statuses = []
        for leaf in leaves:
            if leaf.txn is None:
                continue
            out = leaf.txn.outputs()
            statuses.append(out.status)
            if out.status == EVALUATED:
                self.db = apply_deltas(self.db, self.schema, out.deltas)
        return statuses

    def _note_prefix(self, txn_ops, queue, committed_prefix):
        """Track how far the finalized prefix has advanced (metrics only;
        the committed state is published at epoch end either way)."""
        with queue._lock:
            pending_m = None
            for entry in queue._heap:
                m = entry[0][0]
                pending_m = m if pending_m is None else min(pending_m, m)
        n = committed_prefix[0]
        while n < len(txn_ops):
            op = txn_ops[n]
            if op.leaf.txn is None or op.leaf.txn.status == "unevaluated":
                break
            if pending_m is not None and abs(pending_m) <= n:
                break
            n += 1
        if n > committed_prefix[0]:
            self.metrics.prefix_commits += n - committed_prefix[0]
            committed_prefix[0] = n
