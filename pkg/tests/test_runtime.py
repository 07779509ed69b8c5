import json

import pytest

from smartbin.classify import TableClassifier, identity_table, make_item_image
from smartbin.devices import VirtualClock
from smartbin.fsm import (
    BinSensorTriggered,
    ImageCaptured,
    LedPattern,
    MainProximityTriggered,
    Tick,
)
from smartbin.ledger import RewardService, bootstrap_ledger
from smartbin.model import BinColor
from smartbin.runtime import ControllerRuntime, InvalidNgoError, NoActiveSessionError
from smartbin.store import EventStore


@pytest.fixture()
def runtime():
    clock = VirtualClock(100.0)
    ledger, system, ngos = bootstrap_ledger()
    return ControllerRuntime(
        clock=clock,
        classifier=TableClassifier(identity_table()),
        store=EventStore(),
        rewards=RewardService(ledger, system, ngos),
    )


def _blue_session_to_menu(runtime):
    image = make_item_image(1, BinColor.BLUE)
    runtime.submit(100.0, MainProximityTriggered())
    runtime.submit(100.5, ImageCaptured(image))
    runtime.submit(103.0, BinSensorTriggered(BinColor.BLUE))
    runtime.clock.advance(13.5 - (runtime.clock.now - 100.0))
    runtime.submit(113.0, Tick(113.0))


def test_classifier_effect_feeds_back_as_event(runtime):
    runtime.submit(100.0, MainProximityTriggered())
    runtime.submit(100.5, ImageCaptured(make_item_image(2, BinColor.YELLOW)))
    assert runtime.snapshot()["state"] == "AwaitDisposal"
    assert runtime.snapshot()["detail"]["predicted"] == "yellow"
    assert runtime.led.last is LedPattern.SOLID_YELLOW


def test_donate_requires_menu(runtime):
    with pytest.raises(NoActiveSessionError):
        runtime.donate(1)
    with pytest.raises(InvalidNgoError):
        runtime.donate(7)
    _blue_session_to_menu(runtime)
    assert runtime.snapshot()["state"] == "DonateMenu"
    assert runtime.donate(2) == "Reward sent!"
    ledger = runtime.rewards.ledger
    assert str(ledger.balance(runtime.rewards.ngo_addresses[2])) == "0.01"


def test_effect_log_exports_as_jsonl(tmp_path, runtime):
    _blue_session_to_menu(runtime)
    runtime.donate(1)
    path = runtime.export_effects_jsonl(tmp_path / "effects.jsonl")
    entries = [json.loads(line) for line in path.read_text().splitlines()]
    kinds = [entry["type"] for entry in entries]
    assert kinds == [
        "CaptureImage", "SetLed",       # session start
        "RunClassifier", "SetLed",      # classification lights the bin
        "ShowLcd",                      # QR prompt after the matching throw
        "ShowLcd",                      # NGO menu after the reward timeout
        "IssueReward", "PersistRecord", "ShowLcd",
    ]
    assert [entry["at"] for entry in entries] == sorted(entry["at"] for entry in entries)
    reward = next(entry for entry in entries if entry["type"] == "IssueReward")
    persist = next(entry for entry in entries if entry["type"] == "PersistRecord")
    assert reward["memo"] == persist["record_id"]


def test_led_history_is_ordered(runtime):
    _blue_session_to_menu(runtime)
    patterns = runtime.led.values()
    assert patterns[0] is LedPattern.READY  # boot state
    assert LedPattern.PROCESSING in patterns
    assert LedPattern.SOLID_BLUE in patterns
