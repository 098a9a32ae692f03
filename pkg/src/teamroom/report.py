"""Offline transcript reports: text summary, CSV tables, figures.

Everything here is derived from a log file alone, with the mock provider,
so a report run twice gives identical output and never needs the network.
The heavy lifting is elsewhere: fold for state, oracle_scan for the trigger
timeline, the orchestrator's fallback classifier for the routing table.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .agents import (
    AgentRequest, Orchestrator, OrchestratorConfig, build_snapshot, load_profiles,
)
from .config import TriggerParams
from .lexicon import default_matcher
from .model import (
    Chat, ChatEntry, SessionEvent, SessionState, TriggerFired, apply_event,
    empty_state, event_author, is_participant_event, is_whiteboard_event,
)
from .provider import MockProvider
from .triggers import Metrics, TriggerFiring, oracle_scan


@dataclass
class RecordedFiring:
    seq: int
    at: int
    kind: str
    target: str | None


@dataclass
class RoutingRow:
    seq: int
    at: int
    author: str
    body: str
    intent: str


@dataclass
class ReplayReport:
    events: list[SessionEvent]
    state: SessionState
    params: TriggerParams
    firings: list[TriggerFiring]
    metrics: Metrics
    recorded: list[RecordedFiring]
    routing: list[RoutingRow]
    baseline_firings: list[TriggerFiring] | None = None
    activity: dict[str, list[int]] = field(default_factory=dict)

    @property
    def t0(self) -> int | None:
        return self.events[0].at if self.events else None


def build_report(events: list[SessionEvent], params: TriggerParams,
                 baseline_params: TriggerParams | None = None,
                 task_prompt: str = "") -> ReplayReport:
    """Analyze one complete log; pure besides the deterministic mock provider."""
    metrics = Metrics()
    firings = oracle_scan(events, params, metrics=metrics)
    baseline = (oracle_scan(events, baseline_params)
                if baseline_params is not None else None)

    orchestrator = Orchestrator(
        MockProvider(), load_profiles(), default_matcher(), OrchestratorConfig())
    state = empty_state()
    routing: list[RoutingRow] = []
    recorded: list[RecordedFiring] = []
    activity: dict[str, list[int]] = {}
    for event in events:
        state = apply_event(state, event)
        payload = event.payload
        if isinstance(payload, TriggerFired):
            recorded.append(RecordedFiring(
                event.seq, event.at, payload.kind.value, payload.target))
        if isinstance(payload, Chat) and "boss" in payload.mentions:
            entry = ChatEntry(event.seq, event.at, payload.author, payload.body,
                              tuple(payload.mentions))
            request = AgentRequest(payload.author, entry, event.seq)
            ctx = build_snapshot(state, task_prompt, event.at)
            intent = orchestrator.classify_intent(request, ctx)
            routing.append(RoutingRow(
                event.seq, event.at, payload.author, payload.body, intent.value))
        author = _participant_author(event)
        if author is not None:
            activity.setdefault(author, []).append(event.at)

    return ReplayReport(events, state, params, firings, metrics,
                        recorded, routing, baseline, activity)


def _participant_author(event: SessionEvent):
    return event_author(event) if is_participant_event(event) else None


def match_recorded(report: ReplayReport) -> dict:
    """Compare the log's TriggerFired events against the oracle timeline.

    The live engine ticks on the wall clock while the oracle ticks from the
    first event, so timestamps may disagree by up to one tick.
    """
    tolerance = report.params.tick_s * 1000.0
    unmatched = list(report.firings)
    matched = 0
    extra: list[RecordedFiring] = []
    for rec in report.recorded:
        hit = next(
            (f for f in unmatched
             if f.kind.value == rec.kind and f.target == rec.target
             and abs(f.at - rec.at) <= tolerance),
            None)
        if hit is None:
            extra.append(rec)
        else:
            unmatched.remove(hit)
            matched += 1
    return {"matched": matched, "extra_in_log": extra, "missing_from_log": unmatched}


def _offset(t0: int | None, at: int) -> str:
    if t0 is None:
        return "--:--"
    total = max(0, int(round((at - t0) / 1000)))
    return f"{total // 60:02d}:{total % 60:02d}"


def _display(state: SessionState, pid: str | None) -> str:
    if pid is None:
        return "(group)"
    participant = state.participants.get(pid)
    return f"{participant.display_name} [{pid}]" if participant else pid


def render_text(report: ReplayReport) -> str:
    """The human-readable replay report, one string."""
    state = report.state
    t0 = report.t0
    lines: list[str] = []
    out = lines.append

    out("session replay")
    out("==============")
    if not report.events:
        out("empty log: no events, nothing to report")
        return "\n".join(lines) + "\n"
    span_s = (report.events[-1].at - t0) / 1000.0
    out(f"events: {len(report.events)}   span: {span_s / 60.0:.1f} min   "
        f"participants: {len(state.participants)}")
    out("")

    out("participation")
    out("-------------")
    for pid, participant in state.participants.items():
        count = state.event_counts.get(pid, 0)
        out(f"  {participant.display_name:<10} [{pid}]  {count} events")
    out("")

    out("whiteboard")
    out("----------")
    out(f"  {len(state.notes)} notes, {len(state.links)} links")
    for nid, note in state.notes.items():
        out(f'  note {nid} by {_display(state, note.author)}: "{note.content}" '
            f"at ({note.position.x:.0f}, {note.position.y:.0f})")
    for lid, link in state.links.items():
        out(f"  link {lid}: {link.from_note} -> {link.to_note}")
    out("")

    out("trigger timeline (oracle)")
    out("-------------------------")
    if not report.firings:
        out("  no firings")
    for firing in report.firings:
        out(f"  +{_offset(t0, firing.at)}  {firing.kind.value:<22} "
            f"{_display(state, firing.target):<18} {firing.detail}")
    counts = report.metrics.to_dict()
    out(f"  fired: {json.dumps(counts['fired'], sort_keys=True)}")
    out(f"  suppressed: {json.dumps(counts['suppressed'], sort_keys=True)}")
    out("")

    if report.recorded:
        check = match_recorded(report)
        out("recorded vs oracle")
        out("------------------")
        out(f"  recorded TriggerFired events: {len(report.recorded)}, "
            f"matched: {check['matched']}, "
            f"extra in log: {len(check['extra_in_log'])}, "
            f"missing from log: {len(check['missing_from_log'])}")
        out("")

    out("routing (intent per boss mention)")
    out("---------------------------------")
    if not report.routing:
        out("  no boss mentions")
    for row in report.routing:
        excerpt = row.body if len(row.body) <= 60 else row.body[:57] + "..."
        out(f"  +{_offset(t0, row.at)}  {_display(state, row.author):<18} "
            f"{row.intent:<10} {excerpt!r}")
    out("")

    if report.baseline_firings is not None:
        out("what-if vs baseline params")
        out("--------------------------")
        current = _kind_counts(report.firings)
        base = _kind_counts(report.baseline_firings)
        for kind in sorted(set(current) | set(base)):
            delta = current.get(kind, 0) - base.get(kind, 0)
            out(f"  {kind:<22} baseline {base.get(kind, 0):>3}  "
                f"now {current.get(kind, 0):>3}  delta {delta:+d}")
        out("")

    return "\n".join(lines) + "\n"


def _kind_counts(firings: list[TriggerFiring]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for firing in firings:
        counts[firing.kind.value] = counts.get(firing.kind.value, 0) + 1
    return counts


def write_tables(report: ReplayReport, outdir: str | Path) -> list[Path]:
    """CSV tables plus a metrics JSON; returns the paths written."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = report.t0
    written = []

    path = outdir / "triggers.csv"
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["at_ms", "offset_s", "kind", "target",
                         "stat_name", "stat_value", "detail"])
        for f in report.firings:
            writer.writerow([
                f.at, (f.at - t0) / 1000.0 if t0 is not None else "",
                f.kind.value, f.target or "", f.evidence.stat_name,
                f"{f.evidence.stat_value:.3f}", f.detail])
    written.append(path)

    path = outdir / "participation.csv"
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["participant_id", "display_name", "events",
                         "chats", "whiteboard_ops"])
        per_type = _per_type_counts(report.events)
        for pid, participant in report.state.participants.items():
            chats, wb = per_type.get(pid, (0, 0))
            writer.writerow([pid, participant.display_name,
                             report.state.event_counts.get(pid, 0), chats, wb])
    written.append(path)

    path = outdir / "routing.csv"
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["seq", "at_ms", "author", "intent", "body"])
        for row in report.routing:
            writer.writerow([row.seq, row.at, row.author, row.intent, row.body])
    written.append(path)

    path = outdir / "metrics.json"
    payload = {
        "events": len(report.events),
        "participants": len(report.state.participants),
        "triggers": report.metrics.to_dict(),
        "boss_mentions": len(report.routing),
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")
    written.append(path)
    return written


def _per_type_counts(events: list[SessionEvent]) -> dict[str, tuple[int, int]]:
    counts: dict[str, list[int]] = {}
    for event in events:
        author = _participant_author(event)
        if author is None:
            continue
        slot = counts.setdefault(author, [0, 0])
        if isinstance(event.payload, Chat):
            slot[0] += 1
        elif is_whiteboard_event(event):
            slot[1] += 1
    return {pid: (c[0], c[1]) for pid, c in counts.items()}


KIND_COLORS = {
    "inactivity": "#d62728",
    "frustration": "#9467bd",
    "participation_decline": "#ff7f0e",
    "progress_stall": "#2ca02c",
}


def write_figures(report: ReplayReport, outdir: str | Path) -> list[Path]:
    """Two PNGs: the activity timeline with trigger markers, and a
    per-participant participation bar chart."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    state = report.state
    t0 = report.t0 or 0
    written = []

    fig, ax = plt.subplots(figsize=(11, 4.5))
    pids = list(state.participants)
    for row, pid in enumerate(pids):
        times = [(at - t0) / 60000.0 for at in report.activity.get(pid, [])]
        ax.scatter(times, [row] * len(times), s=12,
                   label=state.participants[pid].display_name)
    seen_kinds = set()
    for firing in report.firings:
        kind = firing.kind.value
        ax.axvline((firing.at - t0) / 60000.0,
                   color=KIND_COLORS.get(kind, "#333333"), alpha=0.6,
                   linewidth=1.2,
                   label=kind if kind not in seen_kinds else None)
        seen_kinds.add(kind)
    ax.set_yticks(range(len(pids)))
    ax.set_yticklabels([state.participants[p].display_name for p in pids])
    ax.set_xlabel("minutes from session start")
    ax.set_title("activity timeline with trigger firings")
    if pids or seen_kinds:
        ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    path = outdir / "timeline.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    per_type = _per_type_counts(report.events)
    names = [state.participants[p].display_name for p in pids]
    chats = [per_type.get(p, (0, 0))[0] for p in pids]
    wb = [per_type.get(p, (0, 0))[1] for p in pids]
    ax.bar(names, chats, label="chat")
    ax.bar(names, wb, bottom=chats, label="whiteboard")
    ax.set_ylabel("events")
    ax.set_title("participation per member")
    if names:
        ax.legend()
    fig.tight_layout()
    path = outdir / "participation.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written
