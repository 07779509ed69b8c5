"""Waste-classification port with three implementations.

* :class:`TableClassifier` draws predictions from a row-normalized
  confusion table, seeded and deterministic.
* :class:`ScriptedClassifier` replays a fixed image-to-label mapping
  (used by trace replay).
* :func:`classify_remote` calls a generic vision endpoint over HTTP and
  maps any unparseable reply to Invalid.

Every path yields a label in {blue, yellow, brown} or Invalid; nothing
else is representable.
"""

from __future__ import annotations

import json
import logging
import random
import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol

import httpx

from .model import BIN_COLORS, BinColor, ClassificationOutcome, DisposalRecord, MissingFieldError

logger = logging.getLogger(__name__)

ROW_SUM_TOLERANCE = 1e-9


class ClassifierPort(Protocol):
    def classify(self, image_b64: str) -> ClassificationOutcome: ...


class InvalidTableError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionTable:
    """Probability of each predicted label given the true label.

    ``invalid_rate`` is applied before the row draw: with that probability
    the classifier declines to answer and the outcome is Invalid.
    """

    rows: dict[BinColor, dict[BinColor, float]]
    invalid_rate: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.invalid_rate <= 1.0:
            raise InvalidTableError(f"invalid_rate {self.invalid_rate} outside [0, 1]")
        for true_label in BIN_COLORS:
            row = self.rows.get(true_label)
            if row is None:
                raise InvalidTableError(f"missing row for {true_label.value}")
            if any(p < 0 for p in row.values()):
                raise InvalidTableError(f"negative probability in row {true_label.value}")
            total = sum(row.get(c, 0.0) for c in BIN_COLORS)
            if abs(total - 1.0) > ROW_SUM_TOLERANCE:
                raise InvalidTableError(
                    f"row {true_label.value} sums to {total!r}, expected 1.0"
                )

    def row(self, true_label: BinColor) -> dict[BinColor, float]:
        return {c: self.rows[true_label].get(c, 0.0) for c in BIN_COLORS}

    def to_dict(self) -> dict:
        return {
            "rows": {
                t.value: {c.value: p for c, p in self.row(t).items()} for t in BIN_COLORS
            },
            "invalid_rate": self.invalid_rate,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConfusionTable":
        rows = {
            BinColor(t): {BinColor(c): float(p) for c, p in row.items()}
            for t, row in data["rows"].items()
        }
        return cls(rows=rows, invalid_rate=float(data.get("invalid_rate", 0.0)))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "ConfusionTable":
        return cls.from_dict(json.loads(Path(path).read_text()))


def identity_table(invalid_rate: float = 0.0) -> ConfusionTable:
    return ConfusionTable(
        rows={c: {c: 1.0} for c in BIN_COLORS}, invalid_rate=invalid_rate
    )


def _draw(table: ConfusionTable, true_label: BinColor, rng: random.Random) -> ClassificationOutcome:
    if table.invalid_rate and rng.random() < table.invalid_rate:
        return ClassificationOutcome.invalid()
    u = rng.random()
    cumulative = 0.0
    row = table.rows[true_label]
    for color in BIN_COLORS:
        cumulative += row.get(color, 0.0)
        if u < cumulative:
            return ClassificationOutcome.valid(color)
    return ClassificationOutcome.valid(BIN_COLORS[-1])  # guard against rounding


def classify_simulated(true_label: BinColor, table: ConfusionTable, rng_seed: int) -> ClassificationOutcome:
    """Draw one prediction for an item of the given true label, seeded."""
    return _draw(table, true_label, random.Random(rng_seed))


def simulate_classifications(
    true_labels: Iterable[BinColor], table: ConfusionTable, rng_seed: int
) -> list[ClassificationOutcome]:
    """Seeded stream of draws, one per item, for Monte-Carlo studies."""
    rng = random.Random(rng_seed)
    return [_draw(table, label, rng) for label in true_labels]


# Synthetic images used by the simulator embed their true label as text.

def make_item_image(item_id: int, label: BinColor | None) -> str:
    import base64

    tag = label.value if label else "untagged"
    return base64.b64encode(f"item:{item_id}:{tag}".encode()).decode()


def parse_item_image(image_b64: str) -> BinColor | None:
    import base64

    try:
        _, _, tag = base64.b64decode(image_b64).decode().split(":", 2)
        return BinColor(tag)
    except (ValueError, UnicodeDecodeError):
        return None


class TableClassifier:
    """Classifier port backed by a confusion table and a seeded RNG stream.

    Reads the true label embedded in synthetic images; untagged images are
    Invalid.
    """

    def __init__(self, table: ConfusionTable, rng_seed: int = 0):
        self.table = table
        self._rng = random.Random(rng_seed)

    def classify(self, image_b64: str) -> ClassificationOutcome:
        true_label = parse_item_image(image_b64)
        if true_label is None:
            return ClassificationOutcome.invalid()
        return _draw(self.table, true_label, self._rng)


class ScriptedClassifier:
    """Returns a pre-decided outcome per image; unknown images are Invalid."""

    def __init__(self, outcomes: dict[str, ClassificationOutcome]):
        self._outcomes = dict(outcomes)

    def classify(self, image_b64: str) -> ClassificationOutcome:
        return self._outcomes.get(image_b64, ClassificationOutcome.invalid())


def fit_confusion_table(records: Iterable[DisposalRecord]) -> ConfusionTable:
    """Row-normalized counts of predicted-given-real over annotated records.

    A real class with no records gets an identity row, with a warning.
    """
    counts = {t: {c: 0 for c in BIN_COLORS} for t in BIN_COLORS}
    total = 0
    for record in records:
        if record.bin_predicted is None or record.bin_real is None:
            missing = tuple(
                name
                for name, value in (
                    ("bin_predicted", record.bin_predicted),
                    ("bin_real", record.bin_real),
                )
                if value is None
            )
            raise MissingFieldError(record.record_id, missing)
        counts[record.bin_real][record.bin_predicted] += 1
        total += 1
    if total == 0:
        raise ValueError("cannot fit a confusion table from zero records")
    rows: dict[BinColor, dict[BinColor, float]] = {}
    for true_label in BIN_COLORS:
        row_total = sum(counts[true_label].values())
        if row_total == 0:
            warnings.warn(
                f"no records with real bin {true_label.value}; using identity row",
                stacklevel=2,
            )
            rows[true_label] = {true_label: 1.0}
        else:
            rows[true_label] = {
                c: counts[true_label][c] / row_total for c in BIN_COLORS
            }
    return ConfusionTable(rows=rows)


# --- remote vision endpoint --------------------------------------------------

DEFAULT_PROMPT = (
    "Look at the attached photo of a waste item and answer with exactly one "
    "word: 'blue' if it belongs with paper or cardboard, 'yellow' if it is "
    "plastic, 'brown' if it is organic, or 'invalid' if no single item is "
    "clearly visible."
)


@dataclass(frozen=True)
class RemoteEndpointConfig:
    base_url: str
    auth_token_env: str = "SMARTBIN_VISION_TOKEN"
    timeout: float = 15.0
    max_retries: int = 2
    prompt: str = DEFAULT_PROMPT

    @classmethod
    def load(cls, path) -> "RemoteEndpointConfig":
        data = json.loads(Path(path).read_text())
        return cls(**data)


_LABEL_WORDS = {c.value: c for c in BIN_COLORS}
_WORD_RE = re.compile(r"[a-z]+")


def parse_reply(text: str) -> ClassificationOutcome:
    """Map endpoint reply text to an outcome, case-insensitively.

    Exactly one color word in the reply wins; anything else (including an
    explicit 'invalid') is Invalid.
    """
    words = set(_WORD_RE.findall(text.lower()))
    found = {color for word, color in _LABEL_WORDS.items() if word in words}
    if len(found) == 1 and "invalid" not in words:
        return ClassificationOutcome.valid(found.pop())
    return ClassificationOutcome.invalid()


def classify_remote(
    image_b64: str,
    config: RemoteEndpointConfig,
    transport: httpx.BaseTransport | None = None,
) -> ClassificationOutcome:
    """Send the image to the configured endpoint and parse its reply.

    Timeouts degrade to Invalid with a warning; other transport errors are
    retried up to ``max_retries`` times, then raised.
    """
    import os

    if not image_b64:
        raise ValueError("image must be non-empty")
    headers = {}
    token = os.environ.get(config.auth_token_env)
    if token:
        headers["Authorization"] = f"Bearer {token}"
    body = {"prompt": config.prompt, "image_b64": image_b64}
    with httpx.Client(timeout=config.timeout, transport=transport) as client:
        for attempt in range(config.max_retries + 1):
            try:
                response = client.post(config.base_url, json=body, headers=headers)
            except httpx.TimeoutException:
                logger.warning("vision endpoint timed out; treating reply as invalid")
                return ClassificationOutcome.invalid()
            except httpx.TransportError:
                if attempt == config.max_retries:
                    raise
                continue
            if response.status_code >= 400:
                logger.warning(
                    "vision endpoint returned %s; treating reply as invalid",
                    response.status_code,
                )
                return ClassificationOutcome.invalid()
            return parse_reply(_reply_text(response))
    raise AssertionError("unreachable")


def _reply_text(response: httpx.Response) -> str:
    try:
        data = response.json()
    except (json.JSONDecodeError, ValueError):
        return response.text
    if isinstance(data, dict):
        for key in ("label", "reply", "text", "content"):
            if isinstance(data.get(key), str):
                return data[key]
    return response.text


# Table fitted to the canonical 5-day disposal dataset: brown items were
# always predicted brown; blue and yellow rows carry the observed error mass.
PAPER_FIT_TABLE = ConfusionTable(
    rows={
        BinColor.BROWN: {BinColor.BROWN: 1.0},
        BinColor.BLUE: {
            BinColor.BLUE: 11 / 17,
            BinColor.BROWN: 4 / 17,
            BinColor.YELLOW: 2 / 17,
        },
        BinColor.YELLOW: {
            BinColor.YELLOW: 30 / 36,
            BinColor.BLUE: 3 / 36,
            BinColor.BROWN: 3 / 36,
        },
    },
)

# Share of presented items that are ignored as presentation noise (people
# testing the kiosk with phones or wallets) in the noisy scenario.
PRESENTATION_NOISE_RATE = 12 / 79


def presentation_noise_table() -> ConfusionTable:
    return ConfusionTable(rows=PAPER_FIT_TABLE.rows, invalid_rate=PRESENTATION_NOISE_RATE)

# Real-label mixture of the canonical disposed dataset (blue, yellow, brown).
CANONICAL_REAL_MIX: dict[BinColor, float] = {
    BinColor.BLUE: 17 / 67,
    BinColor.YELLOW: 36 / 67,
    BinColor.BROWN: 14 / 67,
}


def mixture_accuracy(table: ConfusionTable, mix: dict[BinColor, float]) -> float:
    """Analytic probability that a draw matches the true label."""
    return sum(weight * table.rows[label].get(label, 0.0) for label, weight in mix.items())
