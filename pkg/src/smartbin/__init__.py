"""Hardware-free smart-trashcan stack.

Ships the kiosk controller state machine, simulated sensor/actuator
devices under a virtual clock, a pluggable waste classifier, an
in-process token reward ledger, append-only disposal persistence, the
analytics pipeline, and a deterministic replay harness that reproduces
the 5-day experiment end to end.
"""

from .analytics import FlowMatrix, TemporalStats, accuracy, flow_matrix, follow_rate, temporal_stats
from .classify import ConfusionTable, classify_simulated, fit_confusion_table
from .fsm import ControllerConfig, run_session, step
from .ledger import Ledger, RewardService, Wallet, bootstrap_ledger, parse_qr
from .model import (
    BinColor,
    ClassificationOutcome,
    DisposalRecord,
    SessionOutcome,
    decode_record,
    encode_record,
)
from .replay import ScenarioSpec, canonical_control, canonical_itrash, generate_trace, replay
from .store import EventStore

__version__ = "0.1.0"

__all__ = [
    "BinColor",
    "ClassificationOutcome",
    "ConfusionTable",
    "ControllerConfig",
    "DisposalRecord",
    "EventStore",
    "FlowMatrix",
    "Ledger",
    "RewardService",
    "ScenarioSpec",
    "SessionOutcome",
    "TemporalStats",
    "Wallet",
    "accuracy",
    "bootstrap_ledger",
    "canonical_control",
    "canonical_itrash",
    "classify_simulated",
    "decode_record",
    "encode_record",
    "fit_confusion_table",
    "flow_matrix",
    "follow_rate",
    "generate_trace",
    "parse_qr",
    "replay",
    "run_session",
    "step",
    "temporal_stats",
]
