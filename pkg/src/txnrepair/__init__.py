"""Embedded in-memory transaction engine with lock-free repair.

Declarative rule-based transactions run in isolated database branches;
conflicts are detected and repaired through a circuit of delta,
sensitivity and correction signals, committing a fully serializable
history without locks.
"""

__version__ = "0.1.0"

from .engine import Engine, EngineConfig, EngineReport
from .pstore import DbVersion, PredicateSig, Schema
from .rulelang import ParseError, parse_rules
from .txn import EVALUATED, FAILED, UNEVALUATED, TxnExec

__all__ = [
    "Engine",
    "EngineConfig",
    "EngineReport",
    "DbVersion",
    "PredicateSig",
    "Schema",
    "ParseError",
    "parse_rules",
    "TxnExec",
    "EVALUATED",
    "FAILED",
    "UNEVALUATED",
    "__version__",
]
