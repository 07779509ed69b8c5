"""Event-driven kiosk controller.

The transition function :func:`step` is pure and total: any (state, event)
pair it does not recognise is a no-op. Timeouts are evaluated only on Tick
events, which keeps the controller friendly to a virtual clock. Effects are
ordered instructions for the runtime (drive LEDs, run the classifier, issue
a reward, persist the session record).

Timestamps are float seconds (UTC epoch); records truncate to whole seconds.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from decimal import Decimal
from enum import Enum
from typing import Union

from .ledger import MalformedPayloadError, NgoWallet, RewardDestination, UserWallet, parse_qr
from .model import (
    BinColor,
    ClassificationOutcome,
    DisposalRecord,
    SessionOutcome,
)

_SESSION_NAMESPACE = uuid.UUID("c3a6f1d8-2b07-4bd1-8f52-6e9d417a20fe")

# How long the error LED lingers after a failed classification before the
# kiosk is ready again.
DEFAULT_RETRY_LINGER = 3.0


class LedPattern(Enum):
    READY = "ready"
    PROCESSING = "processing"
    ERROR = "error"
    SOLID_BLUE = "solid_blue"
    SOLID_YELLOW = "solid_yellow"
    SOLID_BROWN = "solid_brown"


_SOLID = {
    BinColor.BLUE: LedPattern.SOLID_BLUE,
    BinColor.YELLOW: LedPattern.SOLID_YELLOW,
    BinColor.BROWN: LedPattern.SOLID_BROWN,
}


def solid_pattern(color: BinColor) -> LedPattern:
    return _SOLID[color]


class LcdScreen(Enum):
    TRY_AGAIN = "try_again"
    SHOW_QR_PROMPT = "show_qr_prompt"
    NGO_MENU = "ngo_menu"
    REWARD_SENT = "reward_sent"


@dataclass(frozen=True)
class ControllerConfig:
    disposal_timeout: float = 10.0
    reward_timeout: float = 10.0
    donate_timeout: float = 30.0
    reward_amount: Decimal = Decimal("0.01")
    retry_linger: float = DEFAULT_RETRY_LINGER

    def __post_init__(self) -> None:
        for name in ("disposal_timeout", "reward_timeout", "donate_timeout", "retry_linger"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if Decimal(str(self.reward_amount)) <= 0:
            raise ValueError("reward_amount must be > 0")

    @property
    def max_session_seconds(self) -> float:
        """Upper bound on time-to-Idle under advancing ticks alone."""
        return (
            self.disposal_timeout
            + self.reward_timeout
            + self.donate_timeout
            + self.retry_linger
        )


# --- events ----------------------------------------------------------------

@dataclass(frozen=True)
class MainProximityTriggered:
    pass


@dataclass(frozen=True)
class ImageCaptured:
    image_b64: str


@dataclass(frozen=True)
class Classified:
    outcome: ClassificationOutcome


@dataclass(frozen=True)
class BinSensorTriggered:
    bin: BinColor


@dataclass(frozen=True)
class QrScanned:
    payload: str


@dataclass(frozen=True)
class NgoSelected:
    ngo_id: int


@dataclass(frozen=True)
class Tick:
    now: float


ControllerEvent = Union[
    MainProximityTriggered,
    ImageCaptured,
    Classified,
    BinSensorTriggered,
    QrScanned,
    NgoSelected,
    Tick,
]


# --- effects ---------------------------------------------------------------

@dataclass(frozen=True)
class CaptureImage:
    pass


@dataclass(frozen=True)
class RunClassifier:
    image_b64: str


@dataclass(frozen=True)
class SetLed:
    pattern: LedPattern


@dataclass(frozen=True)
class ShowLcd:
    screen: LcdScreen


@dataclass(frozen=True)
class PersistRecord:
    record: DisposalRecord


@dataclass(frozen=True)
class IssueReward:
    destination: RewardDestination
    memo: str


SideEffect = Union[CaptureImage, RunClassifier, SetLed, ShowLcd, PersistRecord, IssueReward]


# --- states ----------------------------------------------------------------

@dataclass(frozen=True)
class Session:
    """Bookkeeping carried by every non-idle state."""

    record_id: str
    started_at: float
    image_b64: str = ""


@dataclass(frozen=True)
class Idle:
    pass


@dataclass(frozen=True)
class Capturing:
    session: Session
    deadline: float


@dataclass(frozen=True)
class Classifying:
    session: Session
    deadline: float


@dataclass(frozen=True)
class PromptRetry:
    session: Session
    deadline: float


@dataclass(frozen=True)
class AwaitDisposal:
    session: Session
    predicted: BinColor
    deadline: float


@dataclass(frozen=True)
class RewardPrompt:
    session: Session
    predicted: BinColor
    thrown: BinColor
    disposed_at: float
    deadline: float


@dataclass(frozen=True)
class DonateMenu:
    session: Session
    predicted: BinColor
    thrown: BinColor
    disposed_at: float
    deadline: float


@dataclass(frozen=True)
class Finalizing:
    session: Session
    outcome: SessionOutcome


ControllerState = Union[
    Idle, Capturing, Classifying, PromptRetry, AwaitDisposal, RewardPrompt, DonateMenu, Finalizing
]

IDLE = Idle()

_NO_EFFECTS: list[SideEffect] = []


class EventOrderingError(ValueError):
    """Event timestamps regressed within one session drive."""


def session_id(started_at: float) -> str:
    """Deterministic UUID-format session id derived from the start instant."""
    return str(uuid.uuid5(_SESSION_NAMESPACE, format(started_at, ".6f")))


def _record_time(now: float) -> datetime:
    return datetime.fromtimestamp(int(now), tz=timezone.utc)


def _make_record(
    session: Session,
    at: float,
    outcome: SessionOutcome,
    predicted: BinColor | None = None,
    thrown: BinColor | None = None,
) -> DisposalRecord:
    return DisposalRecord(
        record_id=session.record_id,
        image_b64=session.image_b64,
        time=_record_time(at),
        bin_predicted=predicted,
        bin_thrown=thrown,
        bin_real=None,
        outcome=outcome,
    )


def step(
    state: ControllerState,
    event: ControllerEvent,
    config: ControllerConfig,
    now: float,
) -> tuple[ControllerState, list[SideEffect]]:
    """Apply one event; returns the next state and the ordered effects.

    Total by construction: every unhandled combination falls through to a
    no-op. Deterministic: equal inputs always produce equal outputs.
    """
    if isinstance(state, Idle):
        if isinstance(event, MainProximityTriggered):
            session = Session(record_id=session_id(now), started_at=now)
            return (
                Capturing(session, deadline=now + config.disposal_timeout),
                [CaptureImage(), SetLed(LedPattern.PROCESSING)],
            )
        return state, _NO_EFFECTS

    if isinstance(state, Capturing):
        if isinstance(event, ImageCaptured):
            session = replace(state.session, image_b64=event.image_b64)
            return (
                Classifying(session, deadline=now + config.disposal_timeout),
                [RunClassifier(event.image_b64)],
            )
        if isinstance(event, Tick) and event.now >= state.deadline:
            # Camera never answered; abort so the kiosk cannot wedge.
            return IDLE, [SetLed(LedPattern.READY)]
        return state, _NO_EFFECTS

    if isinstance(state, Classifying):
        if isinstance(event, Classified):
            if event.outcome.is_valid:
                color = event.outcome.color
                return (
                    AwaitDisposal(state.session, color, deadline=now + config.disposal_timeout),
                    [SetLed(solid_pattern(color))],
                )
            return (
                PromptRetry(state.session, deadline=now + config.retry_linger),
                [SetLed(LedPattern.ERROR), ShowLcd(LcdScreen.TRY_AGAIN)],
            )
        if isinstance(event, Tick) and event.now >= state.deadline:
            return IDLE, [SetLed(LedPattern.READY)]
        return state, _NO_EFFECTS

    if isinstance(state, PromptRetry):
        if isinstance(event, Tick) and event.now >= state.deadline:
            # Invalid classification attempts are recorded too, with no
            # predicted bin; analytics exclude them via the absent fields.
            record = _make_record(state.session, event.now, SessionOutcome.timeout())
            return IDLE, [PersistRecord(record), SetLed(LedPattern.READY)]
        return state, _NO_EFFECTS

    if isinstance(state, AwaitDisposal):
        if isinstance(event, BinSensorTriggered):
            if event.bin == state.predicted:
                return (
                    RewardPrompt(
                        state.session,
                        predicted=state.predicted,
                        thrown=event.bin,
                        disposed_at=now,
                        deadline=now + config.reward_timeout,
                    ),
                    [ShowLcd(LcdScreen.SHOW_QR_PROMPT)],
                )
            record = _make_record(
                state.session, now, SessionOutcome.incorrect(),
                predicted=state.predicted, thrown=event.bin,
            )
            return (
                Finalizing(state.session, record.outcome),
                [SetLed(LedPattern.ERROR), PersistRecord(record)],
            )
        if isinstance(event, Tick) and event.now >= state.deadline:
            record = _make_record(
                state.session, event.now, SessionOutcome.timeout(), predicted=state.predicted
            )
            return Finalizing(state.session, record.outcome), [PersistRecord(record)]
        return state, _NO_EFFECTS

    if isinstance(state, RewardPrompt):
        if isinstance(event, QrScanned):
            try:
                address = parse_qr(event.payload)
            except MalformedPayloadError:
                return state, _NO_EFFECTS  # treated as no scan
            record = _make_record(
                state.session, state.disposed_at, SessionOutcome.rewarded(),
                predicted=state.predicted, thrown=state.thrown,
            )
            return (
                Finalizing(state.session, record.outcome),
                [
                    IssueReward(UserWallet(address), memo=state.session.record_id),
                    PersistRecord(record),
                    ShowLcd(LcdScreen.REWARD_SENT),
                ],
            )
        if isinstance(event, Tick) and event.now >= state.deadline:
            return (
                DonateMenu(
                    state.session,
                    predicted=state.predicted,
                    thrown=state.thrown,
                    disposed_at=state.disposed_at,
                    deadline=event.now + config.donate_timeout,
                ),
                [ShowLcd(LcdScreen.NGO_MENU)],
            )
        return state, _NO_EFFECTS

    if isinstance(state, DonateMenu):
        if isinstance(event, NgoSelected) and event.ngo_id in (1, 2, 3, 4):
            record = _make_record(
                state.session, state.disposed_at, SessionOutcome.donated(event.ngo_id),
                predicted=state.predicted, thrown=state.thrown,
            )
            return (
                Finalizing(state.session, record.outcome),
                [
                    IssueReward(NgoWallet(event.ngo_id), memo=state.session.record_id),
                    PersistRecord(record),
                    ShowLcd(LcdScreen.REWARD_SENT),
                ],
            )
        if isinstance(event, Tick) and event.now >= state.deadline:
            record = _make_record(
                state.session, state.disposed_at, SessionOutcome.unclaimed(),
                predicted=state.predicted, thrown=state.thrown,
            )
            return Finalizing(state.session, record.outcome), [PersistRecord(record)]
        return state, _NO_EFFECTS

    if isinstance(state, Finalizing):
        if isinstance(event, Tick):
            return IDLE, [SetLed(LedPattern.READY)]
        return state, _NO_EFFECTS

    return state, _NO_EFFECTS


def run_session(
    events,
    config: ControllerConfig | None = None,
) -> tuple[DisposalRecord | None, list[SideEffect]]:
    """Drive one session from Idle over (time, event) pairs.

    Returns the persisted record, if any, and the full ordered effect log.
    Raises :class:`EventOrderingError` if timestamps regress.
    """
    config = config or ControllerConfig()
    state: ControllerState = IDLE
    effects: list[SideEffect] = []
    record: DisposalRecord | None = None
    last = float("-inf")
    for at, event in events:
        if at < last:
            raise EventOrderingError(f"event at {at} arrived after {last}")
        last = at
        state, emitted = step(state, event, config, at)
        effects.extend(emitted)
        for effect in emitted:
            if isinstance(effect, PersistRecord) and record is None:
                record = effect.record
    return record, effects
