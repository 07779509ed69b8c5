"""Shared vocabulary: bin colors, classification outcomes, disposal records.

Everything here is an immutable value type; records are validated on
construction and round-trip losslessly through the JSONL encoding.
"""

from __future__ import annotations

import base64
import binascii
import json
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum


class BinColor(Enum):
    """Three-way municipal sorting category."""

    BLUE = "blue"      # paper and cardboard
    YELLOW = "yellow"  # plastic
    BROWN = "brown"    # organic


# Canonical ordering used by matrices, tables and exports.
BIN_COLORS: tuple[BinColor, ...] = (BinColor.BLUE, BinColor.YELLOW, BinColor.BROWN)


@dataclass(frozen=True)
class ClassificationOutcome:
    """Result of classifying one presented item: a bin color, or invalid.

    Invalid outcomes carry no color; the kiosk asks the user to present
    the item again.
    """

    color: BinColor | None

    @classmethod
    def valid(cls, color: BinColor) -> "ClassificationOutcome":
        return cls(color)

    @classmethod
    def invalid(cls) -> "ClassificationOutcome":
        return cls(None)

    @property
    def is_valid(self) -> bool:
        return self.color is not None


class OutcomeKind(Enum):
    CORRECT_REWARDED = "correct_rewarded"
    CORRECT_UNCLAIMED = "correct_unclaimed"
    CORRECT_DONATED = "correct_donated"
    INCORRECT_BIN = "incorrect_bin"
    TIMEOUT = "timeout"


_CORRECT_KINDS = frozenset(
    {OutcomeKind.CORRECT_REWARDED, OutcomeKind.CORRECT_UNCLAIMED, OutcomeKind.CORRECT_DONATED}
)


@dataclass(frozen=True)
class SessionOutcome:
    """How one kiosk session ended. Donations carry the receiving NGO id."""

    kind: OutcomeKind
    ngo_id: int | None = None

    def __post_init__(self) -> None:
        if self.kind is OutcomeKind.CORRECT_DONATED:
            if self.ngo_id is None:
                raise ValueError("donated outcome requires an ngo_id")
        elif self.ngo_id is not None:
            raise ValueError(f"{self.kind.value} outcome must not carry an ngo_id")

    @classmethod
    def rewarded(cls) -> "SessionOutcome":
        return cls(OutcomeKind.CORRECT_REWARDED)

    @classmethod
    def unclaimed(cls) -> "SessionOutcome":
        return cls(OutcomeKind.CORRECT_UNCLAIMED)

    @classmethod
    def donated(cls, ngo_id: int) -> "SessionOutcome":
        return cls(OutcomeKind.CORRECT_DONATED, ngo_id)

    @classmethod
    def incorrect(cls) -> "SessionOutcome":
        return cls(OutcomeKind.INCORRECT_BIN)

    @classmethod
    def timeout(cls) -> "SessionOutcome":
        return cls(OutcomeKind.TIMEOUT)

    @property
    def is_correct_disposal(self) -> bool:
        return self.kind in _CORRECT_KINDS

    def encode(self) -> str:
        if self.kind is OutcomeKind.CORRECT_DONATED:
            return f"{self.kind.value}:{self.ngo_id}"
        return self.kind.value

    @classmethod
    def decode(cls, text: str) -> "SessionOutcome":
        kind_text, _, ngo_text = text.partition(":")
        kind = OutcomeKind(kind_text)
        if kind is OutcomeKind.CORRECT_DONATED:
            return cls(kind, int(ngo_text))
        if ngo_text:
            raise ValueError(f"unexpected suffix in outcome {text!r}")
        return cls(kind)


class MissingFieldError(ValueError):
    """A record lacks a field the requested computation needs."""

    def __init__(self, record_id: str, fields: tuple[str, ...]):
        self.record_id = record_id
        self.fields = fields
        super().__init__(f"record {record_id}: missing {', '.join(fields)}")


def new_record_id() -> str:
    return str(uuid.uuid4())


def _require_utc_seconds(time: datetime) -> datetime:
    if time.tzinfo is None:
        raise ValueError("record time must be timezone-aware")
    return time.astimezone(timezone.utc).replace(microsecond=0)


@dataclass(frozen=True)
class DisposalRecord:
    """One completed kiosk interaction.

    ``bin_predicted`` is absent when classification never produced a valid
    label, ``bin_thrown`` is absent when the item was never disposed, and
    ``bin_real`` is absent until manual annotation. The image is opaque
    base64 text.
    """

    record_id: str
    image_b64: str
    time: datetime
    bin_predicted: BinColor | None
    bin_thrown: BinColor | None
    bin_real: BinColor | None
    outcome: SessionOutcome

    def __post_init__(self) -> None:
        try:
            base64.b64decode(self.image_b64, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise ValueError(f"image_b64 is not valid base64: {exc}") from exc
        object.__setattr__(self, "time", _require_utc_seconds(self.time))
        if self.outcome.is_correct_disposal:
            if self.bin_thrown is None or self.bin_thrown != self.bin_predicted:
                raise ValueError(
                    f"outcome {self.outcome.encode()} requires bin_thrown = bin_predicted"
                )
        if self.outcome.kind is OutcomeKind.TIMEOUT and self.bin_thrown is not None:
            raise ValueError("timeout outcome requires bin_thrown to be absent")

    @property
    def disposed(self) -> bool:
        return self.bin_thrown is not None


def is_correct_prediction(record: DisposalRecord) -> bool:
    """True iff the predicted bin matches the manually annotated real bin."""
    missing = tuple(
        name
        for name, value in (("bin_predicted", record.bin_predicted), ("bin_real", record.bin_real))
        if value is None
    )
    if missing:
        raise MissingFieldError(record.record_id, missing)
    return record.bin_predicted == record.bin_real


def is_followed_instruction(record: DisposalRecord) -> bool:
    """True iff the user threw the item into the bin the kiosk indicated."""
    missing = tuple(
        name
        for name, value in (("bin_predicted", record.bin_predicted), ("bin_thrown", record.bin_thrown))
        if value is None
    )
    if missing:
        raise MissingFieldError(record.record_id, missing)
    return record.bin_thrown == record.bin_predicted


def _color_text(color: BinColor | None) -> str | None:
    return color.value if color is not None else None


def _color_from(text: str | None) -> BinColor | None:
    return BinColor(text) if text is not None else None


def record_to_dict(record: DisposalRecord) -> dict:
    return {
        "record_id": record.record_id,
        "image_b64": record.image_b64,
        "time": record.time.isoformat(),
        "bin_predicted": _color_text(record.bin_predicted),
        "bin_thrown": _color_text(record.bin_thrown),
        "bin_real": _color_text(record.bin_real),
        "outcome": record.outcome.encode(),
    }


def record_from_dict(data: dict) -> DisposalRecord:
    return DisposalRecord(
        record_id=data["record_id"],
        image_b64=data["image_b64"],
        time=datetime.fromisoformat(data["time"]),
        bin_predicted=_color_from(data["bin_predicted"]),
        bin_thrown=_color_from(data["bin_thrown"]),
        bin_real=_color_from(data["bin_real"]),
        outcome=SessionOutcome.decode(data["outcome"]),
    )


def encode_record(record: DisposalRecord) -> str:
    """Canonical one-line JSON encoding; absent fields become null."""
    return json.dumps(record_to_dict(record), sort_keys=True)


def decode_record(line: str) -> DisposalRecord:
    return record_from_dict(json.loads(line))
