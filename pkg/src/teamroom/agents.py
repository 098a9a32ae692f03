"""Boss-agent orchestration: intent routing and reply generation.

A boss-mention becomes an AgentRequest; the orchestrator classifies it as
knowledge support or one of the three metacognitive phases, routes it to the
matching specialized agent profile, grounds the prompt in a shared
chat+whiteboard snapshot, and returns the reply payload. Classification is
three-tier: constrained provider label, keyword fallback, knowledge default;
so a reply always comes back, and with the mock provider the whole path is a
pure function.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .config import Mode
from .lexicon import KeywordMatcher, default_matcher
from .model import AgentReply, ChatEntry, Note, NoteLink, SessionState
from .provider import Provider, ProviderFailure, ProviderPrompt


class Intent(str, Enum):
    KNOWLEDGE = "knowledge"
    PLANNING = "planning"
    MONITORING = "monitoring"
    REFLECTION = "reflection"


METACOGNITIVE_INTENTS = (Intent.PLANNING, Intent.MONITORING, Intent.REFLECTION)
SPECIALIST_AGENT_IDS = ("planning", "monitoring", "reflection", "knowledge")
GENERIC_AGENT_ID = "assistant"

CLASSIFICATION_LABELS = ("Knowledge", "Planning", "Monitoring", "Reflection")

APOLOGY_TEXT = ("Sorry, I couldn't reach my helper brain just now. "
                "Please ask me again in a moment.")


@dataclass(frozen=True)
class AgentProfile:
    agent_id: str
    display_name: str
    system_prompt: str
    response_style: str


@dataclass(frozen=True)
class AgentRequest:
    """A routed student request: a chat message that mentioned the boss."""

    requester: str
    message: ChatEntry
    at_seq: int


@dataclass(frozen=True)
class ContextSnapshot:
    """Shared real-time chat+whiteboard view handed to every agent.

    A pure projection of the session fold at at_seq: nothing newer leaks in.
    """

    at_seq: int
    task_prompt: str
    elapsed_s: float
    participants: dict[str, str]            # id -> display name
    recent_chat: tuple[ChatEntry, ...]
    notes: tuple[Note, ...]
    links: tuple[NoteLink, ...]
    note_counts: dict[str, int]             # per-author note count
    participation: dict[str, int]           # per-participant event count


@dataclass(frozen=True)
class OrchestratorConfig:
    chat_window: int = 30
    prompt_char_budget: int = 6000
    provider_timeout_s: float = 10.0
    reply_max_tokens: int = 512


def load_profiles(config_dir: str | Path | None = None) -> dict[str, AgentProfile]:
    """Load agent profiles from a config directory (default: packaged files)."""
    profiles = {}
    for agent_id in SPECIALIST_AGENT_IDS + (GENERIC_AGENT_ID,):
        if config_dir is not None and (Path(config_dir) / f"{agent_id}.json").exists():
            raw = json.loads((Path(config_dir) / f"{agent_id}.json").read_text("utf-8"))
        else:
            raw = json.loads(
                resources.files("teamroom").joinpath(f"profiles/{agent_id}.json").read_text("utf-8"))
        profiles[agent_id] = AgentProfile(
            agent_id=raw["agent_id"],
            display_name=raw.get("display_name", raw["agent_id"]),
            system_prompt=raw["system_prompt"],
            response_style=raw.get("response_style", ""),
        )
    return profiles


def build_snapshot(state: SessionState, task_prompt: str, now_ms: int,
                   chat_window: int = 30) -> ContextSnapshot:
    """Project the folded session state into the view agents see."""
    started = state.started_at if state.started_at is not None else now_ms
    note_counts: dict[str, int] = {}
    for note in state.notes.values():
        note_counts[note.author] = note_counts.get(note.author, 0) + 1
    return ContextSnapshot(
        at_seq=state.last_seq,
        task_prompt=task_prompt,
        elapsed_s=max(0.0, (now_ms - started) / 1000.0),
        participants={pid: p.display_name for pid, p in state.participants.items()},
        recent_chat=state.chat[-chat_window:] if chat_window > 0 else (),
        notes=tuple(state.notes.values()),
        links=tuple(state.links.values()),
        note_counts=note_counts,
        participation=dict(state.event_counts),
    )


def _name(ctx: ContextSnapshot, author: str) -> str:
    return ctx.participants.get(author, author)


def _render_chat_line(ctx: ContextSnapshot, entry: ChatEntry) -> str:
    return f"[{_name(ctx, entry.author)}] {entry.body}"


def render_context(ctx: ContextSnapshot, chat_lines: list[str]) -> str:
    """Render the snapshot sections the prompt templates rely on."""
    parts = [f"Task: {ctx.task_prompt or '(none given)'}",
             f"Elapsed: {ctx.elapsed_s / 60.0:.1f} min"]

    if ctx.notes:
        parts.append("Whiteboard notes:")
        for note in ctx.notes:
            parts.append(f"- [{_name(ctx, note.author)}] ({note.kind.value}) {note.content}")
    else:
        parts.append("Whiteboard notes: (no notes yet)")

    if ctx.links:
        parts.append("Note links:")
        note_label = {n.note_id: n.content[:30] for n in ctx.notes}
        for link in ctx.links:
            parts.append(f"- {note_label.get(link.from_note, link.from_note)!r} -> "
                         f"{note_label.get(link.to_note, link.to_note)!r}")
    else:
        parts.append("Note links: (none)")

    def counts_line(label: str, counts: dict[str, int]) -> str:
        if not counts:
            return f"{label}: (none)"
        rendered = ", ".join(f"{_name(ctx, pid)}={n}" for pid, n in counts.items())
        return f"{label}: {rendered}"

    parts.append(counts_line("Notes per member", ctx.note_counts))
    parts.append(counts_line("Participation", ctx.participation))

    if chat_lines:
        parts.append("Recent chat:")
        parts.extend(chat_lines)
    else:
        parts.append("Recent chat: (none)")
    return "\n".join(parts)


def assemble_prompt(profile: AgentProfile, request: AgentRequest, ctx: ContextSnapshot,
                    config: OrchestratorConfig = OrchestratorConfig()) -> ProviderPrompt:
    """Deterministic prompt assembly; oldest chat lines are dropped first
    when the rendered context exceeds the character budget."""
    chat_lines = [_render_chat_line(ctx, entry) for entry in ctx.recent_chat]
    request_line = (f"Student request ({_name(ctx, request.requester)}): "
                    f"{request.message.body}")

    def rendered(lines: list[str]) -> str:
        return render_context(ctx, lines) + "\n" + request_line

    text = rendered(chat_lines)
    while len(text) > config.prompt_char_budget and chat_lines:
        chat_lines.pop(0)
        text = rendered(chat_lines)

    system = profile.system_prompt
    if profile.response_style:
        system += f"\nStyle: {profile.response_style}"
    return ProviderPrompt(
        system=system,
        user_turns=(("user", text),),
        max_tokens=config.reply_max_tokens,
    )


class Orchestrator:
    """The boss agent: classify, route, ground, reply.

    One instance per gateway; holds no per-session state, so requests from
    different sessions can be processed in parallel.
    """

    def __init__(self, provider: Provider,
                 profiles: dict[str, AgentProfile] | None = None,
                 matcher: KeywordMatcher | None = None,
                 config: OrchestratorConfig = OrchestratorConfig()):
        self.provider = provider
        self.profiles = profiles or load_profiles()
        self.matcher = matcher or default_matcher()
        self.config = config
        missing = [a for a in SPECIALIST_AGENT_IDS + (GENERIC_AGENT_ID,) if a not in self.profiles]
        if missing:
            raise ValueError(f"missing agent profiles: {missing}")

    def classify_intent(self, request: AgentRequest, ctx: ContextSnapshot) -> Intent:
        """Constrained provider label; keyword fallback; knowledge default."""
        prompt = ProviderPrompt(
            system=("Classify the student's request for a group facilitator. "
                    "Reply with exactly one word: Knowledge (a factual or how-to "
                    "question), Planning (organizing or dividing the work), "
                    "Monitoring (checking progress or time), or Reflection "
                    "(reviewing how the work went). "
                    f"The group's task: {ctx.task_prompt or '(none given)'}"),
            user_turns=(("user", request.message.body),),
            max_tokens=4,
            label_constraint=CLASSIFICATION_LABELS,
        )
        result = self.provider.complete(prompt, timeout_s=self.config.provider_timeout_s)
        if isinstance(result, str):
            label = result.strip().lower()
            for intent in Intent:
                if intent.value == label:
                    return intent
        # out-of-set output or provider failure: deterministic keyword tier
        return Intent(self.matcher.match(request.message.body))

    def route(self, intent: Intent) -> AgentProfile:
        """Total mapping: each intent has exactly one specialized agent."""
        return self.profiles[intent.value]

    def handle_request(self, request: AgentRequest, ctx: ContextSnapshot,
                       mode: Mode = Mode.ORCHESTRATED) -> AgentReply:
        """Produce the reply payload for one boss-mention.

        Never raises: provider failures yield a fixed apology reply so the
        session cannot hang on a silent agent.
        """
        if mode is Mode.GENERIC:
            profile = self.profiles[GENERIC_AGENT_ID]
            intent = None
        else:
            intent = self.classify_intent(request, ctx)
            profile = self.route(intent)

        prompt = assemble_prompt(profile, request, ctx, self.config)
        result = self.provider.complete(prompt, timeout_s=self.config.provider_timeout_s)
        body = result if isinstance(result, str) and result.strip() else APOLOGY_TEXT
        if isinstance(result, ProviderFailure):
            body = APOLOGY_TEXT
        return AgentReply(
            agent_id=profile.agent_id,
            body=body,
            intent=intent.value if intent is not None else None,
            request_seq=request.at_seq,
        )
