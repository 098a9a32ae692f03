"""Real-time collaborative learning sessions with proactive nudges.

A session is an append-only event log; everything else (whiteboard, chat,
lightbulb state, agent context) is a pure fold over it. The gateway
serializes command admission per session, the lightbulb engine streams the
same events through four trigger detectors, and boss-mentions are routed to
one of four specialized agents.
"""

from .config import Mode, SessionConfig, TriggerParams
from .eventlog import EventLogWriter, replay_file, write_log
from .gateway import Gateway, ManualClock, RealClock
from .model import (
    SessionEvent, SessionState, TriggerKind, apply_event, empty_state, fold,
    parse_mentions,
)
from .synth import Scenario, generate
from .triggers import LightbulbEngine, oracle_scan

__version__ = "0.1.0"

__all__ = [
    "EventLogWriter",
    "Gateway",
    "LightbulbEngine",
    "ManualClock",
    "Mode",
    "RealClock",
    "Scenario",
    "SessionConfig",
    "SessionEvent",
    "SessionState",
    "TriggerKind",
    "TriggerParams",
    "apply_event",
    "empty_state",
    "fold",
    "generate",
    "oracle_scan",
    "parse_mentions",
    "replay_file",
    "write_log",
    "__version__",
]
