import pytest

from smartbin.devices import (
    DeviceSimulator,
    Stimulus,
    UnknownChannelError,
    VirtualClock,
    stimulus_event,
)
from smartbin.fsm import (
    BinSensorTriggered,
    ImageCaptured,
    MainProximityTriggered,
    NgoSelected,
    QrScanned,
    Tick,
)
from smartbin.model import BinColor


def test_clock_is_monotonic():
    clock = VirtualClock(10.0)
    assert clock.now == 10.0
    clock.advance(2.5)
    assert clock.now == 12.5
    clock.advance(0)
    assert clock.now == 12.5
    with pytest.raises(ValueError):
        clock.advance(-1)


def test_stimulus_channels_map_to_events():
    assert stimulus_event(Stimulus(0, "main_proximity")) == MainProximityTriggered()
    assert stimulus_event(
        Stimulus(1, "bin_proximity", {"bin": "yellow"})
    ) == BinSensorTriggered(BinColor.YELLOW)
    assert stimulus_event(
        Stimulus(2, "camera", {"image_b64": "aQ=="})
    ) == ImageCaptured("aQ==")
    assert stimulus_event(Stimulus(3, "qr", {"text": "x"})) == QrScanned("x")
    assert stimulus_event(Stimulus(4, "ngo", {"id": 2})) == NgoSelected(2)


def test_unknown_channel_is_rejected():
    sim = DeviceSimulator(VirtualClock())
    with pytest.raises(UnknownChannelError):
        sim.inject(Stimulus(at=1.0, channel="microphone"))


def test_stimulus_in_the_past_is_rejected():
    sim = DeviceSimulator(VirtualClock(100.0))
    with pytest.raises(ValueError):
        sim.inject(Stimulus(at=99.0, channel="main_proximity"))


def test_advance_with_no_stimuli_emits_only_ticks():
    sim = DeviceSimulator(VirtualClock(0.0), tick_interval=0.1)
    events = sim.advance(10.0)
    assert len(events) == 100
    assert all(isinstance(e.event, Tick) for e in events)
    assert events[0].at == pytest.approx(0.1)
    assert events[-1].at == pytest.approx(10.0)


def test_advance_zero_is_identity():
    sim = DeviceSimulator(VirtualClock(5.0))
    assert sim.advance(0) == []
    assert sim.clock.now == 5.0


def test_due_stimuli_merge_with_ticks_in_order():
    # Oracle: independently merge the two sorted streams and compare.
    sim = DeviceSimulator(VirtualClock(0.0), tick_interval=0.5)
    sim.inject(Stimulus(at=1.0, channel="main_proximity"))
    sim.inject(Stimulus(at=2.0, channel="bin_proximity", payload={"bin": "blue"}))
    events = sim.advance(3.0)

    ticks = [(0.5 * k, Tick(0.5 * k)) for k in range(1, 7)]
    stimuli = [(1.0, MainProximityTriggered()), (2.0, BinSensorTriggered(BinColor.BLUE))]
    expected = sorted(
        [(at, 1, ev) for at, ev in ticks] + [(at, 0, ev) for at, ev in stimuli],
        key=lambda item: (item[0], item[1]),
    )
    assert [(e.at, e.event) for e in events] == [(at, ev) for at, _, ev in expected]


def test_simultaneous_stimuli_preserve_injection_order():
    sim = DeviceSimulator(VirtualClock(0.0))
    sim.inject(Stimulus(at=1.0, channel="qr", payload={"text": "first"}))
    sim.inject(Stimulus(at=1.0, channel="qr", payload={"text": "second"}))
    events = [e.event for e in sim.advance(1.0) if isinstance(e.event, QrScanned)]
    assert events == [QrScanned("first"), QrScanned("second")]


def test_stimulus_beats_tick_at_equal_timestamp():
    sim = DeviceSimulator(VirtualClock(0.0), tick_interval=1.0)
    sim.inject(Stimulus(at=1.0, channel="main_proximity"))
    events = sim.advance(1.0)
    assert [type(e.event) for e in events] == [MainProximityTriggered, Tick]


def test_future_stimuli_stay_queued():
    sim = DeviceSimulator(VirtualClock(0.0))
    sim.inject(Stimulus(at=5.0, channel="main_proximity"))
    sim.advance(1.0)
    assert sim.pending() == 1
    assert sim.next_due() == 5.0


def test_sink_log_records_ordered_history():
    from smartbin.devices import SinkLog
    from smartbin.fsm import LedPattern

    log = SinkLog()
    assert log.last is None
    log.write(1.0, LedPattern.READY)
    log.write(2.0, LedPattern.PROCESSING)
    assert log.values() == [LedPattern.READY, LedPattern.PROCESSING]
    assert log.last is LedPattern.PROCESSING


def test_stimulus_round_trips_through_dict():
    stimulus = Stimulus(at=3.5, channel="camera", payload={"image_b64": "aQ=="})
    assert Stimulus.from_dict(stimulus.to_dict()) == stimulus
