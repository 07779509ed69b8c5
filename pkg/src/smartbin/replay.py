"""Deterministic trace generation and full-stack replay.

A scenario declares how many items of each (real, predicted, thrown)
combination were presented, how many were presented but never disposed,
and how arrivals spread over the day. :func:`generate_trace` turns that
into a timestamped stimulus script; :func:`replay` drives the controller,
ledger and store over it under the virtual clock and applies the ground
truth tags as post-hoc annotations, standing in for manual review.

The control trashcan has no sensors besides the bins themselves; its
traces replay through a degenerate path that records thrown and real
bins only, with the predicted bin mirroring the thrown one.
"""

from __future__ import annotations

import json
import random
import uuid
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from decimal import Decimal
from pathlib import Path

from .classify import ScriptedClassifier, make_item_image
from .devices import (
    CHANNEL_BIN_PROXIMITY,
    CHANNEL_CAMERA,
    CHANNEL_MAIN_PROXIMITY,
    CHANNEL_NGO,
    DeviceSimulator,
    Stimulus,
    VirtualClock,
)
from .fsm import ControllerConfig, Idle
from .ledger import Ledger, RewardService, bootstrap_ledger
from .model import (
    BIN_COLORS,
    BinColor,
    ClassificationOutcome,
    DisposalRecord,
    SessionOutcome,
)
from .runtime import ControllerRuntime
from .store import EventStore

_CONTROL_NAMESPACE = uuid.UUID("5d02c6a1-7f3e-4b4a-a1f0-3cb6f0f4e7d2")

KIND_ITRASH = "itrash"
KIND_CONTROL = "control"

# Session-internal offsets (seconds from the main proximity trigger).
_CAMERA_DELAY = 0.5
_DISPOSE_DELAY = 3.0
_NGO_DELAY = 15.0  # after the 10 s reward window expires at +13.5
_SLOT_MARGIN = 150.0
_JITTER = 10.0


class InconsistentSpecError(ValueError):
    pass


class ReplayStuckError(RuntimeError):
    """The controller failed to return to Idle after the trace ended."""


@dataclass(frozen=True)
class ScenarioCell:
    real: BinColor
    predicted: BinColor
    thrown: BinColor
    count: int


def default_temporal_weights(start_hour: int = 8, length_hours: int = 12) -> dict[int, float]:
    """Uniform hourly weights with the midday (11:00-14:00) doubled."""
    return {
        hour: 2.0 if 11 <= hour < 14 else 1.0
        for hour in range(start_hour, start_hour + length_hours)
    }


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    kind: str
    cells: tuple[ScenarioCell, ...]
    undisposed: int = 0
    donations: int = 0
    days: int = 5
    day_start_hour: int = 8
    day_length_hours: int = 12
    base_date: date = date(2024, 9, 16)
    temporal_weights: dict[int, float] = field(default_factory=default_temporal_weights)

    def __post_init__(self) -> None:
        if self.kind not in (KIND_ITRASH, KIND_CONTROL):
            raise InconsistentSpecError(f"unknown scenario kind {self.kind!r}")
        if self.days < 1:
            raise InconsistentSpecError("days must be >= 1")
        if not 0 <= self.day_start_hour or self.day_start_hour + self.day_length_hours > 24:
            raise InconsistentSpecError("day window must fit within one calendar day")
        if self.undisposed < 0 or self.donations < 0:
            raise InconsistentSpecError("undisposed and donations must be >= 0")
        if any(cell.count < 0 for cell in self.cells):
            raise InconsistentSpecError("cell counts must be >= 0")
        window = set(range(self.day_start_hour, self.day_start_hour + self.day_length_hours))
        if set(self.temporal_weights) != window:
            raise InconsistentSpecError("temporal weights must cover exactly the day window")
        if any(w <= 0 for w in self.temporal_weights.values()):
            raise InconsistentSpecError("temporal weights must be > 0")
        followable = sum(c.count for c in self.cells if c.predicted == c.thrown)
        if self.donations > followable:
            raise InconsistentSpecError(
                f"{self.donations} donations but only {followable} followed disposals"
            )
        if self.kind == KIND_CONTROL:
            if self.undisposed or self.donations:
                raise InconsistentSpecError("control scenarios have no camera or rewards")
            if any(c.predicted != c.thrown for c in self.cells):
                raise InconsistentSpecError(
                    "control predictions mirror the thrown bin by definition"
                )

    @property
    def total_disposed(self) -> int:
        return sum(cell.count for cell in self.cells)

    @property
    def total_presented(self) -> int:
        return self.total_disposed + self.undisposed

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "cells": [
                {
                    "real": c.real.value,
                    "predicted": c.predicted.value,
                    "thrown": c.thrown.value,
                    "count": c.count,
                }
                for c in self.cells
            ],
            "undisposed": self.undisposed,
            "donations": self.donations,
            "days": self.days,
            "day_start_hour": self.day_start_hour,
            "day_length_hours": self.day_length_hours,
            "base_date": self.base_date.isoformat(),
            "temporal_weights": {str(h): w for h, w in self.temporal_weights.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        kwargs = dict(
            name=data["name"],
            kind=data["kind"],
            cells=tuple(
                ScenarioCell(
                    real=BinColor(c["real"]),
                    predicted=BinColor(c["predicted"]),
                    thrown=BinColor(c["thrown"]),
                    count=int(c["count"]),
                )
                for c in data["cells"]
            ),
            undisposed=int(data.get("undisposed", 0)),
            donations=int(data.get("donations", 0)),
            days=int(data.get("days", 5)),
            day_start_hour=int(data.get("day_start_hour", 8)),
            day_length_hours=int(data.get("day_length_hours", 12)),
        )
        if "base_date" in data:
            kwargs["base_date"] = date.fromisoformat(data["base_date"])
        if "temporal_weights" in data:
            kwargs["temporal_weights"] = {
                int(h): float(w) for h, w in data["temporal_weights"].items()
            }
        else:
            kwargs["temporal_weights"] = default_temporal_weights(
                kwargs["day_start_hour"], kwargs["day_length_hours"]
            )
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ScenarioSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))


def canonical_itrash() -> ScenarioSpec:
    """The 5-day smart-bin dataset: 79 presented, 67 disposed, 2 donations.

    The 55 correctly-predicted items follow the observed thrown split; the
    12 mispredicted ones mostly follow the (wrong) instruction, completing
    the per-bin disposal totals of 24 blue / 25 yellow / 18 brown.
    """
    B, Y, N = BinColor.BLUE, BinColor.YELLOW, BinColor.BROWN
    cells = (
        # correctly predicted (real == predicted)
        ScenarioCell(N, N, N, 9), ScenarioCell(N, N, B, 3), ScenarioCell(N, N, Y, 2),
        ScenarioCell(B, B, B, 9), ScenarioCell(B, B, N, 2),
        ScenarioCell(Y, Y, Y, 20), ScenarioCell(Y, Y, N, 3), ScenarioCell(Y, Y, B, 7),
        # mispredicted (real != predicted)
        ScenarioCell(B, N, N, 3), ScenarioCell(B, N, B, 1),
        ScenarioCell(B, Y, Y, 2),
        ScenarioCell(Y, B, B, 3),
        ScenarioCell(Y, N, N, 1), ScenarioCell(Y, N, Y, 1), ScenarioCell(Y, N, B, 1),
    )
    return ScenarioSpec(name="canonical_itrash", kind=KIND_ITRASH, cells=cells,
                        undisposed=12, donations=2)


def canonical_control() -> ScenarioSpec:
    """The 5-day control trashcan dataset: 89 items, thrown vs real only."""
    B, Y, N = BinColor.BLUE, BinColor.YELLOW, BinColor.BROWN
    cells = tuple(
        ScenarioCell(real, thrown, thrown, count)
        for real, thrown, count in (
            (N, N, 9), (N, B, 6), (N, Y, 3),
            (B, B, 11), (B, N, 15), (B, Y, 10),
            (Y, Y, 22), (Y, B, 6), (Y, N, 7),
        )
    )
    return ScenarioSpec(name="canonical_control", kind=KIND_CONTROL, cells=cells)


CANONICAL_SCENARIOS = {
    "canonical_itrash": canonical_itrash,
    "canonical_control": canonical_control,
}


@dataclass(frozen=True)
class TraceMeta:
    scenario: str
    kind: str
    seed: int
    days: int
    day_start_hour: int
    day_length_hours: int
    base_date: date

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "kind": self.kind,
            "seed": self.seed,
            "days": self.days,
            "day_start_hour": self.day_start_hour,
            "day_length_hours": self.day_length_hours,
            "base_date": self.base_date.isoformat(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TraceMeta":
        return cls(
            scenario=data["scenario"],
            kind=data["kind"],
            seed=int(data["seed"]),
            days=int(data["days"]),
            day_start_hour=int(data["day_start_hour"]),
            day_length_hours=int(data["day_length_hours"]),
            base_date=date.fromisoformat(data["base_date"]),
        )


@dataclass(frozen=True)
class EventTrace:
    """Timestamped stimulus script plus its scenario metadata."""

    meta: TraceMeta
    stimuli: tuple[Stimulus, ...]

    def item_tags(self) -> dict[str, dict]:
        """Ground-truth tags keyed by image payload (camera stimuli only)."""
        tags = {}
        for stimulus in self.stimuli:
            if stimulus.channel == CHANNEL_CAMERA and "item" in stimulus.payload:
                tags[stimulus.payload["image_b64"]] = stimulus.payload["item"]
        return tags

    def sessions(self) -> int:
        if self.meta.kind == KIND_CONTROL:
            return sum(1 for s in self.stimuli if s.channel == CHANNEL_BIN_PROXIMITY)
        return sum(1 for s in self.stimuli if s.channel == CHANNEL_MAIN_PROXIMITY)

    def to_jsonl(self) -> str:
        lines = [json.dumps({"meta": self.meta.to_dict()}, sort_keys=True)]
        lines += [json.dumps(s.to_dict(), sort_keys=True) for s in self.stimuli]
        return "\n".join(lines) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_jsonl())
        return path

    @classmethod
    def load(cls, path) -> "EventTrace":
        meta = None
        stimuli = []
        for line in Path(path).read_text().splitlines():
            if not line.strip():
                continue
            data = json.loads(line)
            if "meta" in data:
                meta = TraceMeta.from_dict(data["meta"])
            else:
                stimuli.append(Stimulus.from_dict(data))
        if meta is None:
            raise ValueError("trace file has no meta line")
        return cls(meta=meta, stimuli=tuple(stimuli))


@dataclass
class _Item:
    item_id: int
    real: BinColor | None
    predicted: BinColor | None
    thrown: BinColor | None
    donate_to: int | None = None


def _apportion(total: int, weights: list[float]) -> list[int]:
    """Largest-remainder apportionment of `total` across weighted buckets."""
    scale = sum(weights)
    if total <= 0 or scale <= 0:
        return [0] * len(weights)
    quotas = [total * w / scale for w in weights]
    base = [int(q) for q in quotas]
    order = sorted(range(len(weights)), key=lambda i: (base[i] - quotas[i], i))
    for i in range(total - sum(base)):
        base[order[i]] += 1
    return base


def _day_epoch(base: date, day: int) -> float:
    return datetime(base.year, base.month, base.day, tzinfo=timezone.utc).timestamp() + day * 86400


def generate_trace(spec: ScenarioSpec, seed: int = 0) -> EventTrace:
    """Expand a scenario into a deterministic, time-ordered stimulus script."""
    rng = random.Random(seed)
    disposed: list[_Item] = []
    next_id = 0
    for cell in spec.cells:
        for _ in range(cell.count):
            disposed.append(_Item(next_id, cell.real, cell.predicted, cell.thrown))
            next_id += 1
    rng.shuffle(disposed)
    remaining_donations = spec.donations
    for item in disposed:
        if remaining_donations and item.thrown == item.predicted:
            item.donate_to = 1 + (spec.donations - remaining_donations) % 4
            remaining_donations -= 1
    undisposed: list[_Item] = []
    for k in range(spec.undisposed):
        undisposed.append(_Item(next_id, None, BIN_COLORS[k % len(BIN_COLORS)], None))
        next_id += 1

    hours = sorted(spec.temporal_weights)
    weights = [spec.temporal_weights[h] for h in hours]
    buckets: dict[tuple[int, int], list[_Item]] = {}

    def allocate(items: list[_Item]) -> None:
        slot_quotas = _apportion(len(items), weights)
        cursor = 0
        for slot_index, quota in enumerate(slot_quotas):
            for k in range(quota):
                day = (k + slot_index) % spec.days
                buckets.setdefault((day, hours[slot_index]), []).append(items[cursor])
                cursor += 1

    allocate(disposed)
    allocate(undisposed)

    stimuli: list[Stimulus] = []
    for (day, hour), items in sorted(buckets.items()):
        usable = 3600.0 - 2 * _SLOT_MARGIN
        spacing = usable / len(items)
        slot_start = _day_epoch(spec.base_date, day) + hour * 3600
        for i, item in enumerate(items):
            start = slot_start + _SLOT_MARGIN + i * spacing + rng.uniform(0.0, _JITTER)
            stimuli.extend(_session_stimuli(spec.kind, item, start))
    stimuli.sort(key=lambda s: s.at)
    meta = TraceMeta(
        scenario=spec.name,
        kind=spec.kind,
        seed=seed,
        days=spec.days,
        day_start_hour=spec.day_start_hour,
        day_length_hours=spec.day_length_hours,
        base_date=spec.base_date,
    )
    return EventTrace(meta=meta, stimuli=tuple(stimuli))


def _session_stimuli(kind: str, item: _Item, start: float) -> list[Stimulus]:
    tag = {
        "id": item.item_id,
        "real": item.real.value if item.real else None,
        "predicted": item.predicted.value if item.predicted else None,
    }
    if kind == KIND_CONTROL:
        return [
            Stimulus(
                at=start,
                channel=CHANNEL_BIN_PROXIMITY,
                payload={"bin": item.thrown.value, "item": tag},
            )
        ]
    image_b64 = make_item_image(item.item_id, item.real)
    out = [
        Stimulus(at=start, channel=CHANNEL_MAIN_PROXIMITY, payload={}),
        Stimulus(
            at=start + _CAMERA_DELAY,
            channel=CHANNEL_CAMERA,
            payload={"image_b64": image_b64, "item": tag},
        ),
    ]
    if item.thrown is not None:
        out.append(
            Stimulus(
                at=start + _DISPOSE_DELAY,
                channel=CHANNEL_BIN_PROXIMITY,
                payload={"bin": item.thrown.value},
            )
        )
        if item.donate_to is not None:
            out.append(
                Stimulus(
                    at=start + _NGO_DELAY,
                    channel=CHANNEL_NGO,
                    payload={"id": item.donate_to},
                )
            )
    return out


@dataclass
class ReplayResult:
    store: EventStore
    ledger: Ledger | None
    runtime: ControllerRuntime | None
    trace: EventTrace


def replay(
    trace: EventTrace,
    tick_interval: float = 0.1,
    config: ControllerConfig | None = None,
    system_funds=Decimal("100.0"),
    store: EventStore | None = None,
) -> ReplayResult:
    """Run the full stack over a trace and annotate ground truth afterwards."""
    store = store if store is not None else EventStore()
    if trace.meta.kind == KIND_CONTROL:
        _replay_control(trace, store)
        return ReplayResult(store=store, ledger=None, runtime=None, trace=trace)
    return _replay_itrash(trace, store, tick_interval, config or ControllerConfig(), system_funds)


def _replay_control(trace: EventTrace, store: EventStore) -> None:
    for stimulus in sorted(trace.stimuli, key=lambda s: s.at):
        if stimulus.channel != CHANNEL_BIN_PROXIMITY:
            continue
        tag = stimulus.payload.get("item", {})
        thrown = BinColor(stimulus.payload["bin"])
        record = DisposalRecord(
            record_id=str(
                uuid.uuid5(
                    _CONTROL_NAMESPACE,
                    f"{trace.meta.scenario}:{trace.meta.seed}:{tag.get('id')}",
                )
            ),
            image_b64="",
            time=datetime.fromtimestamp(int(stimulus.at), tz=timezone.utc),
            bin_predicted=thrown,  # the thrower's own prediction is the throw
            bin_thrown=thrown,
            bin_real=BinColor(tag["real"]) if tag.get("real") else None,
            outcome=SessionOutcome.unclaimed(),
        )
        store.append(record)


def _replay_itrash(
    trace: EventTrace,
    store: EventStore,
    tick_interval: float,
    config: ControllerConfig,
    system_funds,
) -> ReplayResult:
    tags = trace.item_tags()
    outcomes = {
        image: (
            ClassificationOutcome.valid(BinColor(tag["predicted"]))
            if tag.get("predicted")
            else ClassificationOutcome.invalid()
        )
        for image, tag in tags.items()
    }
    start = min((s.at for s in trace.stimuli), default=0.0) - 1.0
    clock = VirtualClock(start)
    sim = DeviceSimulator(clock, tick_interval=tick_interval)
    for stimulus in trace.stimuli:
        sim.inject(stimulus)
    ledger, system_address, ngo_addresses = bootstrap_ledger(system_funds)
    rewards = RewardService(ledger, system_address, ngo_addresses, amount=config.reward_amount)
    runtime = ControllerRuntime(
        clock=clock,
        config=config,
        classifier=ScriptedClassifier(outcomes),
        store=store,
        rewards=rewards,
        led=sim.led,
        lcd=sim.lcd,
    )
    while sim.pending():
        if isinstance(runtime.state, Idle):
            gap = sim.next_due() - clock.now
            if gap > tick_interval:
                runtime.pump(sim.advance(gap, include_ticks=False))
                continue
        runtime.pump(sim.advance(tick_interval))
    deadline = clock.now + config.max_session_seconds + 1.0
    while not isinstance(runtime.state, Idle):
        if clock.now > deadline:
            raise ReplayStuckError(f"controller stuck in {type(runtime.state).__name__}")
        runtime.pump(sim.advance(tick_interval))
    for record in store.records():
        tag = tags.get(record.image_b64)
        if tag and tag.get("real"):
            store.annotate_real(record.record_id, BinColor(tag["real"]))
    return ReplayResult(store=store, ledger=ledger, runtime=runtime, trace=trace)


def run_scenario(
    spec: ScenarioSpec,
    seed: int = 0,
    tick_interval: float = 0.1,
    store: EventStore | None = None,
) -> ReplayResult:
    """Generate the trace for a scenario and replay it in one step."""
    return replay(generate_trace(spec, seed), tick_interval=tick_interval, store=store)
