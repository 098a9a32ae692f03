"""Session and trigger configuration.

All tunables live here as plain dataclasses so sessions can be configured
from JSON (HTTP create-session body, CLI --config file) without touching
code. Durations are seconds in config and converted to milliseconds at the
point of use; event timestamps are always milliseconds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path


class Mode(str, Enum):
    """Session condition.

    ORCHESTRATED: boss-mention requests are routed to one of four
    specialized agents and the proactive lightbulb engine runs.
    GENERIC: one unrouted reactive assistant, no trigger engine.
    """

    ORCHESTRATED = "orchestrated"
    GENERIC = "generic"


DEFAULT_GROUP_SIZE_LIMIT = 6
DEFAULT_DURATION_LIMIT_S = 120 * 60


class ConfigError(ValueError):
    """Raised for invalid session or trigger configuration."""


def _default_frustration_lexicon() -> tuple[str, ...]:
    text = resources.files("teamroom").joinpath("profiles/frustration_lexicon.txt").read_text("utf-8")
    return tuple(_parse_lexicon_text(text))


def _parse_lexicon_text(text: str) -> list[str]:
    phrases = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            phrases.append(line.lower())
    return phrases


def load_frustration_lexicon(path: str | Path) -> tuple[str, ...]:
    """Load a frustration lexicon file: one phrase per line, UTF-8, # comments."""
    return tuple(_parse_lexicon_text(Path(path).read_text("utf-8")))


@dataclass(frozen=True)
class TriggerParams:
    """Thresholds for the four proactive trigger detectors.

    Defaults are tuned for a 120-minute session with 4-6 members and are
    configuration, not constants.
    """

    t_inactive_s: float = 180.0        # individual silence span before an inactivity nudge
    w_participation_s: float = 120.0   # window length for the decline comparison
    decline_ratio: float = 0.5         # current window must fall below ratio * previous window
    min_prev_rate: int = 4             # previous window floor; avoids noise near zero
    t_stall_s: float = 300.0           # chat-without-whiteboard-progress span
    cooldown_s: float = 300.0          # per (kind, target) refractory period
    tick_s: float = 5.0                # evaluation cadence for time-based detectors
    frustration_lexicon: tuple[str, ...] = field(default_factory=_default_frustration_lexicon)

    def __post_init__(self) -> None:
        for name in ("t_inactive_s", "w_participation_s", "t_stall_s", "cooldown_s", "tick_s"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if not 0 < self.decline_ratio <= 1:
            raise ConfigError("decline_ratio must be in (0, 1]")
        if self.min_prev_rate < 0:
            raise ConfigError("min_prev_rate must be >= 0")
        object.__setattr__(
            self, "frustration_lexicon", tuple(p.lower() for p in self.frustration_lexicon)
        )

    @classmethod
    def from_dict(cls, raw: dict) -> "TriggerParams":
        known = {
            "t_inactive_s", "w_participation_s", "decline_ratio", "min_prev_rate",
            "t_stall_s", "cooldown_s", "tick_s", "frustration_lexicon",
        }
        unknown = set(raw) - known - {"frustration_lexicon_file"}
        if unknown:
            raise ConfigError(f"unknown trigger params: {sorted(unknown)}")
        kwargs = {k: v for k, v in raw.items() if k in known}
        if "frustration_lexicon" in kwargs:
            kwargs["frustration_lexicon"] = tuple(kwargs["frustration_lexicon"])
        if "frustration_lexicon_file" in raw:
            kwargs["frustration_lexicon"] = load_frustration_lexicon(raw["frustration_lexicon_file"])
        return cls(**kwargs)

    def override(self, **kwargs) -> "TriggerParams":
        """Copy with the given non-None fields replaced (CLI flag overrides)."""
        changes = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **changes) if changes else self


@dataclass(frozen=True)
class SessionConfig:
    session_id: str
    group_size_limit: int = DEFAULT_GROUP_SIZE_LIMIT
    duration_limit_s: float = DEFAULT_DURATION_LIMIT_S
    mode: Mode = Mode.ORCHESTRATED
    trigger_params: TriggerParams = field(default_factory=TriggerParams)
    task_prompt: str = ""

    def __post_init__(self) -> None:
        if not self.session_id:
            raise ConfigError("session_id must be non-empty")
        if self.group_size_limit < 2:
            raise ConfigError("group_size_limit must be >= 2")
        if self.duration_limit_s <= 0:
            raise ConfigError("duration_limit_s must be > 0")
        if not isinstance(self.mode, Mode):
            object.__setattr__(self, "mode", Mode(self.mode))

    @classmethod
    def from_dict(cls, raw: dict) -> "SessionConfig":
        known = {"session_id", "group_size_limit", "duration_limit_s", "mode", "task_prompt"}
        unknown = set(raw) - known - {"trigger_params"}
        if unknown:
            raise ConfigError(f"unknown session config keys: {sorted(unknown)}")
        kwargs = {k: v for k, v in raw.items() if k in known}
        if "mode" in kwargs:
            try:
                kwargs["mode"] = Mode(kwargs["mode"])
            except ValueError:
                raise ConfigError(f"mode must be one of {[m.value for m in Mode]}") from None
        if "trigger_params" in raw:
            kwargs["trigger_params"] = TriggerParams.from_dict(raw["trigger_params"])
        return cls(**kwargs)


def load_session_config(path: str | Path) -> SessionConfig:
    """Load a SessionConfig from a JSON file."""
    try:
        raw = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must contain a JSON object")
    return SessionConfig.from_dict(raw)
