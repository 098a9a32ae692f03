"""Text-generation backend abstraction.

Everything that talks to a model goes through a Provider: a real HTTP
chat-completion client for deployments, and a deterministic rule-based mock
for tests and offline replay. Failures are returned as values, never raised
past this boundary, so callers always degrade gracefully.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from typing import Protocol

import requests

from .lexicon import DEFAULT_INTENT, KeywordMatcher, default_matcher


@dataclass(frozen=True)
class ProviderPrompt:
    """A single completion request.

    When label_constraint is set the call is a classification: any output
    outside the set must be treated as a failure by the caller.
    """

    system: str
    user_turns: tuple[tuple[str, str], ...]  # (role, text) pairs, oldest first
    max_tokens: int = 512
    label_constraint: tuple[str, ...] | None = None


@dataclass(frozen=True)
class ProviderFailure:
    detail: str


@dataclass(frozen=True)
class ProviderTimeout(ProviderFailure):
    pass


@dataclass(frozen=True)
class ProviderHttpError(ProviderFailure):
    status: int = 0


@dataclass(frozen=True)
class ProviderMalformed(ProviderFailure):
    pass


class Provider(Protocol):
    def complete(self, prompt: ProviderPrompt, timeout_s: float | None = None) -> str | ProviderFailure:
        ...


_PARTICIPATION_RE = re.compile(r"^participation:\s*(.+)$", re.IGNORECASE | re.MULTILINE)
_REQUEST_RE = re.compile(r"^student request[^:]*:\s*(.+)$", re.IGNORECASE | re.MULTILINE)
_DRAFT_RE = re.compile(r"^draft:\s*(.+)$", re.IGNORECASE | re.MULTILINE)

_PERSONAS = ("planning", "monitoring", "reflection", "knowledge", "lightbulb", "assistant")


class MockProvider:
    """Deterministic stand-in for the model backend.

    Rule-based, not fixture-based, so generated inputs of any shape get a
    stable answer: identical prompts yield identical outputs. Classification
    prompts are answered with the same keyword lexicons the fallback
    classifier uses; generation prompts get a per-persona template that
    embeds a recognizable slice of the supplied context.
    """

    def __init__(self, matcher: KeywordMatcher | None = None):
        self._matcher = matcher or default_matcher()

    def complete(self, prompt: ProviderPrompt, timeout_s: float | None = None) -> str | ProviderFailure:
        user_text = "\n".join(text for _, text in prompt.user_turns)

        if prompt.label_constraint:
            intent = self._matcher.match(user_text)
            for label in prompt.label_constraint:
                if label.lower() == intent:
                    return label
            for label in prompt.label_constraint:
                if label.lower() == DEFAULT_INTENT:
                    return label
            return prompt.label_constraint[0]

        persona = "assistant"
        lowered_system = prompt.system.lower()
        for candidate in _PERSONAS:
            if candidate in lowered_system:
                persona = candidate
                break

        if persona == "lightbulb":
            draft = _DRAFT_RE.search(user_text)
            base = draft.group(1).strip() if draft else user_text.strip()[:120]
            return f"{base} We're stronger when everyone pitches in!"

        request = _REQUEST_RE.search(user_text)
        asked = request.group(1).strip() if request else user_text.strip()[:80]

        if persona == "planning":
            return (f"Planning step: let's split \"{asked}\" into small parts and agree "
                    f"who takes each one. What should the very first step be?")
        if persona == "monitoring":
            participation = _PARTICIPATION_RE.search(user_text)
            counts = participation.group(1).strip() if participation else "no activity recorded yet"
            return (f"Monitoring check: contributions so far: {counts}. "
                    f"Compare the whiteboard against the task and fill the biggest gap next.")
        if persona == "reflection":
            return (f"Reflection prompt: looking at \"{asked}\", name one thing that went "
                    f"well and one thing to try differently next time.")
        if persona == "knowledge":
            return (f"Knowledge answer: about \"{asked}\", here is the key fact your "
                    f"design needs, connected to the notes already on your board.")
        return f"Assistant reply: regarding \"{asked}\", here is a direct answer."


class HttpProvider:
    """Chat-completion HTTP client (standard messages-array wire format).

    One retry on transient failures (timeouts, connection errors, 5xx), so
    total latency stays within 2x the per-attempt timeout. Non-transient
    HTTP errors fail immediately.
    """

    def __init__(self, endpoint: str, api_key: str | None = None, model: str = "",
                 timeout_s: float = 10.0, retries: int = 1):
        self.endpoint = endpoint
        self.api_key = api_key
        self.model = model
        self.timeout_s = timeout_s
        self.retries = max(0, retries)

    def _body(self, prompt: ProviderPrompt) -> dict:
        messages = [{"role": "system", "content": prompt.system}]
        messages += [{"role": role, "content": text} for role, text in prompt.user_turns]
        return {"model": self.model, "messages": messages, "max_tokens": prompt.max_tokens}

    def complete(self, prompt: ProviderPrompt, timeout_s: float | None = None) -> str | ProviderFailure:
        timeout = timeout_s if timeout_s is not None else self.timeout_s
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        failure: ProviderFailure = ProviderTimeout("no attempt made")
        for attempt in range(self.retries + 1):
            try:
                response = requests.post(
                    self.endpoint, json=self._body(prompt), headers=headers, timeout=timeout)
            except requests.Timeout:
                failure = ProviderTimeout(f"timed out after {timeout}s")
                continue
            except requests.ConnectionError as exc:
                failure = ProviderHttpError(f"connection failed: {exc}", status=0)
                continue
            if response.status_code >= 500:
                failure = ProviderHttpError(f"server error {response.status_code}",
                                            status=response.status_code)
                continue
            if response.status_code != 200:
                return ProviderHttpError(f"http {response.status_code}",
                                         status=response.status_code)
            try:
                body = response.json()
                text = body["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError):
                return ProviderMalformed("response body is not chat-completion shaped")
            if not isinstance(text, str):
                return ProviderMalformed("completion content is not text")
            return text
        return failure


def provider_from_env() -> Provider:
    """Build the provider from TEAMROOM_PROVIDER_* env vars; mock when unset."""
    endpoint = os.environ.get("TEAMROOM_PROVIDER_URL")
    if not endpoint:
        return MockProvider()
    return HttpProvider(
        endpoint=endpoint,
        api_key=os.environ.get("TEAMROOM_PROVIDER_KEY"),
        model=os.environ.get("TEAMROOM_PROVIDER_MODEL", ""),
        timeout_s=float(os.environ.get("TEAMROOM_PROVIDER_TIMEOUT_S", "10")),
        retries=int(os.environ.get("TEAMROOM_PROVIDER_RETRIES", "1")),
    )
