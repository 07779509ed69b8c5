"""Command line interface: replay scenarios, analyze stores, serve the gateway."""

from __future__ import annotations

import json
from pathlib import Path

import click

from . import analytics
from .model import BIN_COLORS, BinColor
from .replay import CANONICAL_SCENARIOS, ScenarioSpec, generate_trace, replay
from .store import EventStore

_PAIRING_ALIASES = {
    "a": analytics.PAIRING_THROWN_VS_REAL,
    "b": analytics.PAIRING_PREDICTED_VS_REAL,
    "c": analytics.PAIRING_CORRECT_PREDICTED_VS_THROWN,
    analytics.PAIRING_THROWN_VS_REAL: analytics.PAIRING_THROWN_VS_REAL,
    analytics.PAIRING_PREDICTED_VS_REAL: analytics.PAIRING_PREDICTED_VS_REAL,
    analytics.PAIRING_CORRECT_PREDICTED_VS_THROWN: analytics.PAIRING_CORRECT_PREDICTED_VS_THROWN,
}


def _resolve_scenario(name: str) -> ScenarioSpec:
    if name in CANONICAL_SCENARIOS:
        return CANONICAL_SCENARIOS[name]()
    path = Path(name)
    if path.exists():
        return ScenarioSpec.load(path)
    raise click.BadParameter(
        f"unknown scenario {name!r}; use one of {', '.join(CANONICAL_SCENARIOS)} or a file path"
    )


def _resolve_pairing(pairing: str) -> str:
    try:
        return _PAIRING_ALIASES[pairing.lower()]
    except KeyError:
        raise click.BadParameter(f"unknown pairing {pairing!r}") from None


def _parse_slot(text: str) -> float:
    text = text.strip().lower()
    if text.endswith("h"):
        return float(text[:-1]) * 3600.0
    if text.endswith("m"):
        return float(text[:-1]) * 60.0
    if text.endswith("s"):
        return float(text[:-1])
    return float(text)


@click.group()
@click.version_option(package_name="smartbin")
def main() -> None:
    """Smart-bin simulation, replay, and analytics toolkit."""


@main.group("replay")
def replay_group() -> None:
    """Generate traces and replay them through the full stack."""


@replay_group.command("run")
@click.option("--scenario", required=True, help="canonical_itrash, canonical_control, or a spec file")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--trace-out", type=click.Path(dir_okay=False), default=None,
              help="Also write the generated stimulus trace")
@click.option("--tick-interval", default=0.1, show_default=True, type=float)
def replay_run(scenario: str, seed: int, out_path: str, trace_out: str | None,
               tick_interval: float) -> None:
    """Replay a scenario and write the resulting record store."""
    spec = _resolve_scenario(scenario)
    trace = generate_trace(spec, seed)
    if trace_out:
        trace.save(trace_out)
    result = replay(trace, tick_interval=tick_interval)
    result.store.export_jsonl(out_path)
    report = analytics.summary(result.store.records())
    click.echo(json.dumps(report, indent=2, sort_keys=True))


@replay_group.command("trace")
@click.option("--scenario", required=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def replay_trace(scenario: str, seed: int, out_path: str) -> None:
    """Generate a stimulus trace without replaying it."""
    trace = generate_trace(_resolve_scenario(scenario), seed)
    trace.save(out_path)
    click.echo(f"{trace.sessions()} sessions, {len(trace.stimuli)} stimuli -> {out_path}")


def _load_store(path: str) -> EventStore:
    if not Path(path).exists():
        raise click.BadParameter(f"store file {path!r} does not exist")
    return EventStore(path)


@main.group("analyze")
def analyze_group() -> None:
    """Metrics over a record store."""


@analyze_group.command("accuracy")
@click.option("--store", "store_path", required=True)
@click.option("--mode", type=click.Choice(["prediction", "disposal"]), required=True)
def analyze_accuracy(store_path: str, mode: str) -> None:
    store = _load_store(store_path)
    value = analytics.accuracy(store.records(), mode)
    click.echo(json.dumps({"mode": mode, "accuracy": value}))


@analyze_group.command("flows")
@click.option("--store", "store_path", required=True)
@click.option("--pairing", required=True, help="A|B|C or a pairing name")
def analyze_flows(store_path: str, pairing: str) -> None:
    store = _load_store(store_path)
    matrix = analytics.flow_matrix(store.records(), _resolve_pairing(pairing))
    click.echo(json.dumps(matrix.to_dict(), indent=2))


@analyze_group.command("temporal")
@click.option("--store", "store_path", required=True)
@click.option("--slot", default="1h", show_default=True, help="Slot width, e.g. 1h or 30m")
@click.option("--days", default=5, show_default=True, type=int)
def analyze_temporal(store_path: str, slot: str, days: int) -> None:
    store = _load_store(store_path)
    stats = analytics.temporal_stats(store.records(), _parse_slot(slot), days)
    payload = []
    for entry in stats:
        if all(not any(entry.counts_per_day[c]) for c in BIN_COLORS):
            continue
        payload.append(
            {
                "slot": f"{entry.slot_start_hour:g}-{entry.slot_end_hour:g}",
                "bins": {
                    color.value: {
                        "median": s.median,
                        "q1": s.q1,
                        "q3": s.q3,
                        "iqr": s.iqr,
                        "whisker_low": s.whisker_low,
                        "whisker_high": s.whisker_high,
                        "outliers": list(s.outliers),
                        "mean": s.mean,
                    }
                    for color, s in entry.per_color.items()
                },
            }
        )
    click.echo(json.dumps(payload, indent=2))


@analyze_group.command("sankey")
@click.option("--store", "store_path", required=True)
@click.option("--pairing", required=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def analyze_sankey(store_path: str, pairing: str, out_path: str) -> None:
    store = _load_store(store_path)
    matrix = analytics.flow_matrix(store.records(), _resolve_pairing(pairing))
    analytics.export_sankey(matrix, out_path)
    click.echo(f"wrote {out_path}")


@analyze_group.command("summary")
@click.option("--store", "store_path", required=True)
def analyze_summary(store_path: str) -> None:
    store = _load_store(store_path)
    click.echo(json.dumps(analytics.summary(store.records()), indent=2, sort_keys=True))


@main.group("store")
def store_group() -> None:
    """Import, export, and annotate record stores."""


@store_group.command("import")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--store", "store_path", required=True, type=click.Path(dir_okay=False))
def store_import(in_path: str, store_path: str) -> None:
    store = EventStore(store_path)
    count = store.import_jsonl(in_path)
    click.echo(f"imported {count} records into {store_path}")


@store_group.command("export")
@click.option("--store", "store_path", required=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def store_export(store_path: str, out_path: str) -> None:
    store = _load_store(store_path)
    store.export_jsonl(out_path)
    click.echo(f"exported {len(store)} records to {out_path}")


@store_group.command("annotate")
@click.option("--store", "store_path", required=True)
@click.option("--record-id", required=True)
@click.option("--bin", "bin_color", type=click.Choice([c.value for c in BinColor]), required=True)
def store_annotate(store_path: str, record_id: str, bin_color: str) -> None:
    store = _load_store(store_path)
    record = store.annotate_real(record_id, BinColor(bin_color))
    click.echo(json.dumps({"record_id": record.record_id, "bin_real": bin_color}))


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--simulation/--no-simulation", default=True, show_default=True)
@click.option("--store", "store_path", default=None, type=click.Path(dir_okay=False))
@click.option("--tick-interval", default=0.1, show_default=True, type=float)
@click.option("--auto-tick/--no-auto-tick", default=True, show_default=True)
def serve_command(host: str, port: int, simulation: bool, store_path: str | None,
                  tick_interval: float, auto_tick: bool) -> None:
    """Serve the kiosk gateway over HTTP."""
    from .gateway import serve

    serve(
        host=host,
        port=port,
        simulation=simulation,
        tick_interval=tick_interval,
        store_path=store_path,
        auto_tick=auto_tick,
    )


if __name__ == "__main__":
    main()
