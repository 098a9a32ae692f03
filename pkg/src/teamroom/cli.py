"""Operator entry points: serve, replay, synth.

Exit codes: 0 success, 1 usage problems, 2 data problems (corrupt logs, bad
config/scenario content). Click maps usage errors to 2 by default, so main()
drives the group with standalone_mode off and does its own mapping.
"""

from __future__ import annotations

import json
import logging
import sys
import threading
from pathlib import Path

import click

from .config import (
    ConfigError, Mode, SessionConfig, TriggerParams, load_frustration_lexicon,
)
from .eventlog import (
    CorruptRecord, LOG_SUFFIX, StorageFailure, replay_file, write_log,
)
from .model import EventError
from .report import build_report, render_text, write_figures, write_tables
from .synth import BadSpec, PRESETS, generate, load_scenario

log = logging.getLogger(__name__)


@click.group()
def cli() -> None:
    """Collaborative session service with proactive nudges and routed agents."""


def _trigger_options(fn):
    options = [
        click.option("--t-inactive", type=float, default=None,
                     help="Individual inactivity threshold, seconds."),
        click.option("--w-participation", type=float, default=None,
                     help="Participation window length, seconds."),
        click.option("--decline-ratio", type=float, default=None,
                     help="Decline fires when current < ratio * previous."),
        click.option("--min-prev-rate", type=int, default=None,
                     help="Previous-window floor for the decline detector."),
        click.option("--t-stall", type=float, default=None,
                     help="Progress stall threshold, seconds."),
        click.option("--cooldown", type=float, default=None,
                     help="Per (kind, target) cooldown, seconds."),
        click.option("--tick", type=float, default=None,
                     help="Timer tick for time-based detectors, seconds."),
        click.option("--lexicon", type=click.Path(exists=True, dir_okay=False),
                     default=None, help="Frustration lexicon file, one phrase per line."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must contain a JSON object")
    return raw


def _resolve_params(config_raw: dict, t_inactive, w_participation, decline_ratio,
                    min_prev_rate, t_stall, cooldown, tick, lexicon) -> tuple[TriggerParams, bool]:
    """Config-file params plus flag overrides; reports whether flags changed anything."""
    base = TriggerParams.from_dict(config_raw.get("trigger_params", {}))
    overrides = {
        "t_inactive_s": t_inactive,
        "w_participation_s": w_participation,
        "decline_ratio": decline_ratio,
        "min_prev_rate": min_prev_rate,
        "t_stall_s": t_stall,
        "cooldown_s": cooldown,
        "tick_s": tick,
    }
    if lexicon is not None:
        overrides["frustration_lexicon"] = load_frustration_lexicon(lexicon)
    resolved = base.override(**overrides)
    return resolved, resolved != base


def _params_banner(params: TriggerParams) -> str:
    return (f"t_inactive={params.t_inactive_s:g}s "
            f"w_participation={params.w_participation_s:g}s "
            f"decline_ratio={params.decline_ratio:g} "
            f"min_prev_rate={params.min_prev_rate} "
            f"t_stall={params.t_stall_s:g}s "
            f"cooldown={params.cooldown_s:g}s tick={params.tick_s:g}s "
            f"lexicon={len(params.frustration_lexicon)} phrases")


@cli.command()
@click.option("--bind", default="127.0.0.1:8877", show_default=True,
              help="host:port to listen on.")
@click.option("--data-dir", type=click.Path(file_okay=False), default="./data",
              show_default=True, help="Directory for event logs and metrics.")
@click.option("--mode", type=click.Choice([m.value for m in Mode]),
              default=Mode.ORCHESTRATED.value, show_default=True,
              help="Default mode for new sessions.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Session/trigger defaults as JSON.")
@click.option("--check", is_flag=True, hidden=True,
              help="Validate configuration and print the banner without binding.")
@_trigger_options
def serve(bind, data_dir, mode, config_path, check, **trigger_flags) -> None:
    """Run the realtime gateway."""
    try:
        host, port_text = bind.rsplit(":", 1)
        port = int(port_text)
    except ValueError:
        raise click.UsageError(f"--bind must be host:port, got {bind!r}")
    config_raw = _load_config_file(config_path)
    if "mode" in config_raw:
        mode = config_raw["mode"]
    try:
        default_mode = Mode(mode)
    except ValueError:
        raise ConfigError(f"mode must be one of {[m.value for m in Mode]}")
    params, _ = _resolve_params(config_raw, **trigger_flags)
    task_prompt = str(config_raw.get("task_prompt", ""))

    click.echo(f"teamroom gateway on http://{host}:{port}  data={data_dir}")
    click.echo(f"mode={default_mode.value}  {_params_banner(params)}")
    if check:
        return

    from .gateway import Gateway
    from .server import build_app
    import uvicorn

    gateway = Gateway(data_dir)
    app = build_app(gateway, default_mode=default_mode,
                    default_trigger_params=params, default_task_prompt=task_prompt)

    stop = threading.Event()

    def ticker() -> None:
        while not stop.wait(params.tick_s):
            try:
                gateway.tick()
            except Exception:
                log.exception("tick pass failed")

    threading.Thread(target=ticker, name="ticker", daemon=True).start()
    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    finally:
        stop.set()
        gateway.close()


@cli.command()
@click.argument("log_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Trigger params as JSON (what-if baseline).")
@click.option("--report-dir", type=click.Path(file_okay=False), default=None,
              help="Also write CSV tables, metrics JSON, and PNG figures here.")
@_trigger_options
def replay(log_file, config_path, report_dir, **trigger_flags) -> None:
    """Re-analyze a transcript offline: state, triggers, routing.

    Read-only and network-free; the deterministic mock provider is always
    used, so the same log produces the same report.
    """
    config_raw = _load_config_file(config_path)
    params, overridden = _resolve_params(config_raw, **trigger_flags)
    baseline = TriggerParams.from_dict(config_raw.get("trigger_params", {})) if overridden else None

    events = replay_file(log_file)
    report = build_report(events, params, baseline_params=baseline)
    click.echo(render_text(report), nl=False)

    if report_dir is not None:
        written = write_tables(report, report_dir)
        written += write_figures(report, report_dir)
        for path in written:
            click.echo(f"wrote {path}")


@cli.command()
@click.option("--scenario", default="mixed", show_default=True,
              help=f"Preset name ({', '.join(sorted(PRESETS))}) or a JSON scenario file.")
@click.option("--participants", type=int, default=None,
              help="Override the scenario's participant count.")
@click.option("--duration-min", type=float, default=None,
              help="Override the scenario's duration, minutes.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Generator seed; same scenario + seed gives identical bytes.")
@click.option("-o", "--out", type=click.Path(dir_okay=False), default=None,
              help=f"Output path [default: <scenario>-seed<seed>{LOG_SUFFIX}].")
def synth(scenario, participants, duration_min, seed, out) -> None:
    """Generate a synthetic session log."""
    spec = load_scenario(
        scenario, participants=participants,
        duration_s=duration_min * 60.0 if duration_min is not None else None)
    events = generate(spec, seed)
    path = Path(out) if out is not None else Path(f"{spec.name}-seed{seed}{LOG_SUFFIX}")
    write_log(path, events)
    span_min = ((events[-1].at - events[0].at) / 60000.0) if events else 0.0
    click.echo(f"wrote {path}: {len(events)} events, "
               f"{spec.participants} participants, {span_min:.1f} min")


def main(argv: list[str] | None = None) -> None:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.Abort:
        click.echo("aborted", err=True)
        sys.exit(1)
    except (ConfigError, BadSpec, CorruptRecord, StorageFailure, EventError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
