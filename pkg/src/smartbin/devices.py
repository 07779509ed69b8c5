"""Simulated device ports: proximity sensors, camera, LED strip, LCD.

The simulator is single-threaded and fully deterministic. Scripted stimuli
are injected with absolute timestamps; advancing the virtual clock emits the
due stimuli as controller events, interleaved with Tick events at a fixed
interval so the controller can evaluate its deadlines.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import NamedTuple

from .fsm import (
    BinSensorTriggered,
    ControllerEvent,
    ImageCaptured,
    MainProximityTriggered,
    NgoSelected,
    QrScanned,
    Tick,
)
from .model import BinColor

DEFAULT_TICK_INTERVAL = 0.1

CHANNEL_MAIN_PROXIMITY = "main_proximity"
CHANNEL_BIN_PROXIMITY = "bin_proximity"
CHANNEL_CAMERA = "camera"
CHANNEL_QR = "qr"
CHANNEL_NGO = "ngo"

CHANNELS = frozenset(
    {CHANNEL_MAIN_PROXIMITY, CHANNEL_BIN_PROXIMITY, CHANNEL_CAMERA, CHANNEL_QR, CHANNEL_NGO}
)


class UnknownChannelError(ValueError):
    pass


@dataclass(frozen=True)
class Stimulus:
    """One scripted external input: {at, channel, payload}."""

    at: float
    channel: str
    payload: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"at": self.at, "channel": self.channel, "payload": self.payload}

    @classmethod
    def from_dict(cls, data: dict) -> "Stimulus":
        return cls(at=float(data["at"]), channel=data["channel"],
                   payload=data.get("payload") or {})


def stimulus_event(stimulus: Stimulus) -> ControllerEvent:
    """Translate a stimulus into the controller event it triggers."""
    channel, payload = stimulus.channel, stimulus.payload
    if channel == CHANNEL_MAIN_PROXIMITY:
        return MainProximityTriggered()
    if channel == CHANNEL_BIN_PROXIMITY:
        return BinSensorTriggered(BinColor(payload["bin"]))
    if channel == CHANNEL_CAMERA:
        return ImageCaptured(payload["image_b64"])
    if channel == CHANNEL_QR:
        return QrScanned(payload["text"])
    if channel == CHANNEL_NGO:
        return NgoSelected(int(payload["id"]))
    raise UnknownChannelError(channel)


class VirtualClock:
    """Injectable monotonic time source (float seconds)."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    @property
    def now(self) -> float:
        return self._now

    def advance(self, seconds: float) -> float:
        if seconds < 0:
            raise ValueError("cannot advance the clock backwards")
        self._now += seconds
        return self._now


class TimedEvent(NamedTuple):
    at: float
    event: ControllerEvent


class SinkLog:
    """Ordered history of values written to an output device (LED or LCD)."""

    def __init__(self) -> None:
        self.history: list[tuple[float, object]] = []

    def write(self, at: float, value) -> None:
        self.history.append((at, value))

    @property
    def last(self):
        return self.history[-1][1] if self.history else None

    def values(self) -> list:
        return [value for _, value in self.history]


class DeviceSimulator:
    """Scripted stand-in for the physical sensor/actuator bundle.

    One main proximity channel, one bin-proximity channel per color, a
    camera, plus QR and NGO console inputs; LED and LCD histories are
    recorded on :attr:`led` and :attr:`lcd` by the runtime.
    """

    def __init__(self, clock: VirtualClock, tick_interval: float = DEFAULT_TICK_INTERVAL):
        if tick_interval <= 0:
            raise ValueError("tick_interval must be > 0")
        self.clock = clock
        self.tick_interval = tick_interval
        self.led = SinkLog()
        self.lcd = SinkLog()
        self._queue: list[tuple[float, int, Stimulus]] = []
        self._seq = 0

    def inject(self, stimulus: Stimulus) -> None:
        """Schedule a stimulus; it fires when the clock reaches its time."""
        if stimulus.channel not in CHANNELS:
            raise UnknownChannelError(stimulus.channel)
        if stimulus.at < self.clock.now:
            raise ValueError(
                f"stimulus at {stimulus.at} is in the past (now={self.clock.now})"
            )
        stimulus_event(stimulus)  # validate payload eagerly
        self._seq += 1
        heapq.heappush(self._queue, (stimulus.at, self._seq, stimulus))

    def pending(self) -> int:
        return len(self._queue)

    def next_due(self) -> float | None:
        return self._queue[0][0] if self._queue else None

    def advance(self, seconds: float, include_ticks: bool = True) -> list[TimedEvent]:
        """Advance the clock, emitting due stimuli and interleaved ticks.

        Events are ordered by timestamp; a stimulus precedes a tick carrying
        the same timestamp, and simultaneous stimuli preserve injection
        order. Ticks land at multiples of the tick interval from the start
        of this advance.
        """
        if seconds < 0:
            raise ValueError("cannot advance the clock backwards")
        start = self.clock.now
        end = start + seconds
        merged: list[tuple[float, int, int, ControllerEvent]] = []
        while self._queue and self._queue[0][0] <= end:
            at, seq, stimulus = heapq.heappop(self._queue)
            merged.append((at, 0, seq, stimulus_event(stimulus)))
        if include_ticks:
            tick_count = int(seconds / self.tick_interval + 1e-9)
            for k in range(1, tick_count + 1):
                at = start + k * self.tick_interval
                merged.append((at, 1, k, Tick(at)))
        merged.sort(key=lambda item: (item[0], item[1], item[2]))
        self.clock.advance(seconds)
        return [TimedEvent(at, event) for at, _, _, event in merged]
