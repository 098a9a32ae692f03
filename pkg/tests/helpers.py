"""Shared test plumbing: scripted gateway sessions on a manual clock.

simulate_session drives a real Gateway with randomized but seeded client
behavior (chat, whiteboard edits, frustrated outbursts, going quiet,
acknowledging the lightbulb) and returns the transcript from disk. Tests
assert properties on that transcript; nothing here peeks at engine state.
"""

from __future__ import annotations

import random

from teamroom.config import Mode, SessionConfig, TriggerParams
from teamroom.eventlog import log_path, replay_file
from teamroom.gateway import Gateway, ManualClock
from teamroom.provider import MockProvider

# Small thresholds so short simulated sessions hit every detector.
FAST_PARAMS = TriggerParams(
    t_inactive_s=30.0, w_participation_s=20.0, decline_ratio=0.5,
    min_prev_rate=4, t_stall_s=45.0, cooldown_s=40.0, tick_s=5.0)

SAFE_LINES = (
    "let's try the ramp", "good idea", "adding a note for that",
    "can someone check the base?", "looks solid to me", "next piece goes here",
)
FRUSTRATED_LINE = "i give up, this is too hard"
MENTION_LINES = (
    "@boss how should we divide the work?",
    "@boss what materials are waterproof?",
    "@boss how are we doing on time?",
    "@boss what went well today?",
)


def make_gateway(data_dir, clock=None, elaborate=False) -> tuple[Gateway, ManualClock]:
    clock = clock or ManualClock()
    gateway = Gateway(data_dir, provider=MockProvider(), clock=clock,
                      durable=False, elaborate_nudges=elaborate)
    return gateway, clock


def simulate_session(data_dir, seed: int, mode: Mode = Mode.ORCHESTRATED,
                     duration_s: float = 600.0, params: TriggerParams = FAST_PARAMS,
                     ack_prob: float = 0.5, session_id: str | None = None):
    """Run one scripted session end to end; returns the persisted events."""
    rng = random.Random(seed)
    gateway, clock = make_gateway(data_dir)
    sid = session_id or f"sim-{seed}"
    gateway.create_session(SessionConfig(
        sid, mode=mode, trigger_params=params, task_prompt="build a marble run"))

    members = []
    for i in range(rng.randint(2, 5)):
        conn = gateway.connect(sid)
        result = gateway.handle_command(sid, conn, "join", {"display_name": f"Kid{i}"})
        assert result["ok"], result
        members.append((result["participant_id"], conn))
        clock.advance(rng.randint(200, 2000))

    note_ids: list[str] = []
    end = clock.now_ms() + duration_s * 1000.0
    quiet_pid = members[0][0] if rng.random() < 0.6 else None

    while clock.now_ms() < end:
        clock.advance(rng.randint(1_000, 9_000))
        gateway.tick(sid)
        pid, conn = rng.choice(members)
        if pid == quiet_pid:
            continue
        roll = rng.random()
        state = gateway.session_state(sid)
        if state.lightbulb_flashing and rng.random() < ack_prob:
            gateway.handle_command(sid, conn, "lightbulb_ack", {})
            continue
        if roll < 0.5:
            if rng.random() < 0.08:
                body = rng.choice(MENTION_LINES)
            elif rng.random() < 0.06:
                body = FRUSTRATED_LINE
            else:
                body = rng.choice(SAFE_LINES)
            gateway.handle_command(sid, conn, "chat", {"body": body})
        elif roll < 0.8 or not note_ids:
            result = gateway.handle_command(sid, conn, "note_create", {
                "kind": "text", "content": rng.choice(SAFE_LINES),
                "position": {"x": rng.uniform(0, 1000), "y": rng.uniform(0, 600)}})
            if result["ok"]:
                note_ids.append(result["note_id"])
        elif len(note_ids) >= 2 and roll < 0.9:
            src, dst = rng.sample(note_ids, 2)
            gateway.handle_command(sid, conn, "link_create", {"from": src, "to": dst})
        else:
            gateway.handle_command(sid, conn, "note_update", {
                "note_id": rng.choice(note_ids),
                "position": {"x": rng.uniform(0, 1000), "y": rng.uniform(0, 600)}})

    gateway.drain_agents(sid)
    path = log_path(data_dir, sid)
    metrics = gateway.close_session(sid)
    return replay_file(path), metrics
