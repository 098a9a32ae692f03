"""Keyword lexicons shared by the intent classifier and the mock provider.

Lexicons are configuration (profiles/lexicons.json, overridable per
deployment); matching is deterministic so routing decisions are auditable
and reproducible offline.
"""

from __future__ import annotations

import json
import re
from importlib import resources
from pathlib import Path

# Fixed precedence for the metacognitive tiers; anything unmatched is
# knowledge support, the safest fallback for a factual question.
INTENT_ORDER = ("planning", "monitoring", "reflection")
DEFAULT_INTENT = "knowledge"


def load_intent_lexicons(config_dir: str | Path | None = None) -> dict[str, tuple[str, ...]]:
    """Load intent keyword lists, from config_dir/lexicons.json if given."""
    if config_dir is not None:
        raw = json.loads((Path(config_dir) / "lexicons.json").read_text("utf-8"))
    else:
        raw = json.loads(
            resources.files("teamroom").joinpath("profiles/lexicons.json").read_text("utf-8"))
    lexicons = {}
    for intent in INTENT_ORDER:
        phrases = raw.get(intent, [])
        lexicons[intent] = tuple(p.lower() for p in phrases)
    return lexicons


def _phrase_pattern(phrase: str) -> re.Pattern:
    return re.compile(r"\b" + re.escape(phrase) + r"\b")


class KeywordMatcher:
    """Word-bounded, case-insensitive phrase matching with fixed precedence."""

    def __init__(self, lexicons: dict[str, tuple[str, ...]]):
        self._patterns = {
            intent: [_phrase_pattern(p) for p in lexicons.get(intent, ())]
            for intent in INTENT_ORDER
        }

    def match(self, text: str) -> str:
        """Return the first intent whose lexicon hits, else the default."""
        lowered = text.lower()
        for intent in INTENT_ORDER:
            if any(p.search(lowered) for p in self._patterns[intent]):
                return intent
        return DEFAULT_INTENT


_default_matcher: KeywordMatcher | None = None


def default_matcher() -> KeywordMatcher:
    global _default_matcher
    if _default_matcher is None:
        _default_matcher = KeywordMatcher(load_intent_lexicons())
    return _default_matcher
