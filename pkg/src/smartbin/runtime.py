"""Controller runtime: a single-consumer event loop around the pure FSM.

Producers (device simulator, gateway requests) may enqueue concurrently;
exactly one consumer applies transitions, interprets the emitted effects
(classifier calls, LED/LCD writes, reward transfers, record persistence)
and notifies subscribers in order.
"""

from __future__ import annotations

import json
import logging
import threading
from collections import deque
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from . import fsm
from .classify import ClassifierPort
from .devices import SinkLog, TimedEvent, VirtualClock
from .fsm import (
    CaptureImage,
    Classified,
    ControllerConfig,
    ControllerEvent,
    ControllerState,
    DonateMenu,
    IssueReward,
    LcdScreen,
    LedPattern,
    NgoSelected,
    PersistRecord,
    RunClassifier,
    SetLed,
    ShowLcd,
    SideEffect,
)
from .ledger import RewardService
from .store import EventStore

logger = logging.getLogger(__name__)


class NoActiveSessionError(RuntimeError):
    """A donation was requested while no session is awaiting one."""


class InvalidNgoError(ValueError):
    pass


@dataclass(frozen=True)
class EffectLogEntry:
    at: float
    effect: SideEffect


@dataclass(frozen=True)
class Transition:
    at: float
    before: ControllerState
    event: ControllerEvent
    after: ControllerState
    effects: tuple[SideEffect, ...]


def effect_to_dict(entry: EffectLogEntry) -> dict:
    effect = entry.effect
    data: dict = {"at": entry.at, "type": type(effect).__name__}
    if isinstance(effect, SetLed):
        data["pattern"] = effect.pattern.value
    elif isinstance(effect, ShowLcd):
        data["screen"] = effect.screen.value
    elif isinstance(effect, RunClassifier):
        data["image_b64"] = effect.image_b64
    elif isinstance(effect, PersistRecord):
        data["record_id"] = effect.record.record_id
        data["outcome"] = effect.record.outcome.encode()
    elif isinstance(effect, IssueReward):
        data["memo"] = effect.memo
        data["destination"] = repr(effect.destination)
    return data


class ControllerRuntime:
    """Owns the controller state and interprets side effects."""

    def __init__(
        self,
        clock: VirtualClock,
        config: ControllerConfig | None = None,
        classifier: ClassifierPort | None = None,
        store: EventStore | None = None,
        rewards: RewardService | None = None,
        camera: Callable[[], str] | None = None,
        led: SinkLog | None = None,
        lcd: SinkLog | None = None,
    ):
        self.clock = clock
        self.config = config or ControllerConfig()
        self.classifier = classifier
        self.store = store
        self.rewards = rewards
        self.camera = camera
        self.led = led if led is not None else SinkLog()
        self.lcd = lcd if lcd is not None else SinkLog()
        self.state: ControllerState = fsm.IDLE
        self.effect_log: list[EffectLogEntry] = []
        self._queue: deque[TimedEvent] = deque()
        self._listeners: list[Callable[[Transition], None]] = []
        self._lock = threading.RLock()
        self.led.write(clock.now, LedPattern.READY)

    def add_listener(self, listener: Callable[[Transition], None]) -> None:
        self._listeners.append(listener)

    def submit(self, at: float, event: ControllerEvent) -> None:
        """Enqueue one event and drain the queue."""
        with self._lock:
            self._queue.append(TimedEvent(at, event))
            self._drain()

    def submit_all(self, events) -> None:
        with self._lock:
            self._queue.extend(TimedEvent(at, ev) for at, ev in events)
            self._drain()

    def _drain(self) -> None:
        while self._queue:
            at, event = self._queue.popleft()
            before = self.state
            after, effects = fsm.step(before, event, self.config, at)
            self.state = after
            for effect in effects:
                self._apply(at, effect)
            if effects or type(after) is not type(before):
                transition = Transition(at, before, event, after, tuple(effects))
                for listener in self._listeners:
                    listener(transition)

    def _apply(self, at: float, effect: SideEffect) -> None:
        self.effect_log.append(EffectLogEntry(at, effect))
        if isinstance(effect, SetLed):
            self.led.write(at, effect.pattern)
        elif isinstance(effect, ShowLcd):
            self.lcd.write(at, effect.screen)
        elif isinstance(effect, CaptureImage):
            if self.camera is not None:
                self._queue.append(TimedEvent(at, fsm.ImageCaptured(self.camera())))
        elif isinstance(effect, RunClassifier):
            if self.classifier is None:
                logger.warning("no classifier wired; image ignored")
            else:
                outcome = self.classifier.classify(effect.image_b64)
                self._queue.append(TimedEvent(at, Classified(outcome)))
        elif isinstance(effect, PersistRecord):
            if self.store is not None:
                self.store.append(effect.record)
        elif isinstance(effect, IssueReward):
            if self.rewards is not None:
                self.rewards.issue(
                    effect.destination,
                    effect.memo,
                    at=datetime.fromtimestamp(at, tz=timezone.utc),
                )

    def donate(self, ngo_id: int) -> str:
        """Donate the pending reward to an NGO; returns the confirmation text."""
        if ngo_id not in (1, 2, 3, 4):
            raise InvalidNgoError(f"no such NGO endpoint: {ngo_id}")
        with self._lock:
            if not isinstance(self.state, DonateMenu):
                raise NoActiveSessionError("no session is awaiting a donation")
            self.submit(self.clock.now, NgoSelected(ngo_id))
        return "Reward sent!"

    def pump(self, events) -> None:
        """Feed a batch of timed events (e.g. from the device simulator)."""
        self.submit_all(events)

    def snapshot(self) -> dict:
        """JSON-friendly view of the live controller for the state endpoint."""
        with self._lock:
            state = self.state
            detail: dict = {}
            if isinstance(state, fsm.AwaitDisposal):
                detail = {"predicted": state.predicted.value, "deadline": state.deadline}
            elif isinstance(state, fsm.RewardPrompt):
                detail = {
                    "predicted": state.predicted.value,
                    "thrown": state.thrown.value,
                    "deadline": state.deadline,
                }
            elif isinstance(state, fsm.DonateMenu):
                detail = {
                    "predicted": state.predicted.value,
                    "thrown": state.thrown.value,
                    "deadline": state.deadline,
                    "ngo_options": [1, 2, 3, 4],
                }
            elif isinstance(state, fsm.Finalizing):
                detail = {"outcome": state.outcome.encode()}
            led = self.led.last
            lcd = self.lcd.last
            return {
                "state": type(state).__name__,
                "detail": detail,
                "led": led.value if isinstance(led, LedPattern) else None,
                "lcd": lcd.value if isinstance(lcd, LcdScreen) else None,
                "time": self.clock.now,
            }

    def export_effects_jsonl(self, path: str | Path) -> Path:
        """Golden-trace export of the ordered effect log."""
        path = Path(path)
        with path.open("w", encoding="utf-8") as handle:
            for entry in self.effect_log:
                handle.write(json.dumps(effect_to_dict(entry), sort_keys=True) + "\n")
        return path
