"""Metrics over disposal records: accuracy, flow matrices, follow rates,
hourly boxplot statistics, and Sankey export.

Records whose item was never disposed (``bin_thrown`` absent) are excluded
from every metric here; they are presentation noise, not interactions.
All functions are pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Sequence

from .model import BIN_COLORS, BinColor, DisposalRecord, OutcomeKind

PAIRING_THROWN_VS_REAL = "thrown_vs_real"
PAIRING_PREDICTED_VS_REAL = "predicted_vs_real"
PAIRING_CORRECT_PREDICTED_VS_THROWN = "correct_predicted_vs_thrown"

PAIRINGS = (
    PAIRING_THROWN_VS_REAL,
    PAIRING_PREDICTED_VS_REAL,
    PAIRING_CORRECT_PREDICTED_VS_THROWN,
)

# Axis names per pairing: rows first, columns second.
_AXES = {
    PAIRING_THROWN_VS_REAL: ("real", "thrown"),
    PAIRING_PREDICTED_VS_REAL: ("real", "predicted"),
    PAIRING_CORRECT_PREDICTED_VS_THROWN: ("predicted", "thrown"),
}


class EmptyInputError(ValueError):
    pass


class MissingAnnotationError(ValueError):
    def __init__(self, field: str, record_ids: Sequence[str]):
        self.field = field
        self.record_ids = list(record_ids)
        ids = ", ".join(self.record_ids[:5])
        more = "" if len(self.record_ids) <= 5 else f" (+{len(self.record_ids) - 5} more)"
        super().__init__(f"records missing {field}: {ids}{more}")


def _disposed(records: Iterable[DisposalRecord]) -> list[DisposalRecord]:
    return [r for r in records if r.disposed]


def _require(records: list[DisposalRecord], field: str) -> None:
    missing = [r.record_id for r in records if getattr(r, field) is None]
    if missing:
        raise MissingAnnotationError(field, missing)


AccuracyMode = Literal["prediction", "disposal"]


def accuracy(records: Iterable[DisposalRecord], mode: AccuracyMode) -> float:
    """Fraction of disposed items whose predicted (or thrown) bin is real."""
    disposed = _disposed(records)
    if not disposed:
        raise EmptyInputError("no disposed records to score")
    _require(disposed, "bin_real")
    if mode == "prediction":
        _require(disposed, "bin_predicted")
        correct = sum(1 for r in disposed if r.bin_predicted == r.bin_real)
    elif mode == "disposal":
        correct = sum(1 for r in disposed if r.bin_thrown == r.bin_real)
    else:
        raise ValueError(f"unknown accuracy mode {mode!r}")
    return correct / len(disposed)


@dataclass(frozen=True)
class FlowMatrix:
    """3x3 count table behind one Sankey diagram."""

    pairing: str
    counts: dict[tuple[BinColor, BinColor], int]

    @property
    def axis_a(self) -> str:
        return _AXES[self.pairing][0]

    @property
    def axis_b(self) -> str:
        return _AXES[self.pairing][1]

    def cell(self, row: BinColor, col: BinColor) -> int:
        return self.counts.get((row, col), 0)

    def row(self, row: BinColor) -> dict[BinColor, int]:
        return {c: self.cell(row, c) for c in BIN_COLORS}

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def diagonal(self) -> int:
        return sum(self.cell(c, c) for c in BIN_COLORS)

    def to_dict(self) -> dict:
        return {
            "pairing": self.pairing,
            "axis_a": self.axis_a,
            "axis_b": self.axis_b,
            "counts": {
                row.value: {col.value: self.cell(row, col) for col in BIN_COLORS}
                for row in BIN_COLORS
            },
            "total": self.total,
        }


def flow_matrix(records: Iterable[DisposalRecord], pairing: str) -> FlowMatrix:
    """Exact 3x3 counts for the requested axis pairing.

    The correct_predicted_vs_thrown pairing keeps only records whose
    prediction matched the annotated real bin.
    """
    if pairing not in PAIRINGS:
        raise ValueError(f"unknown pairing {pairing!r}")
    disposed = _disposed(records)
    if not disposed:
        raise EmptyInputError("no disposed records to tabulate")
    _require(disposed, "bin_real")
    counts: dict[tuple[BinColor, BinColor], int] = {}
    if pairing == PAIRING_THROWN_VS_REAL:
        pairs = [(r.bin_real, r.bin_thrown) for r in disposed]
    elif pairing == PAIRING_PREDICTED_VS_REAL:
        _require(disposed, "bin_predicted")
        pairs = [(r.bin_real, r.bin_predicted) for r in disposed]
    else:
        _require(disposed, "bin_predicted")
        pairs = [
            (r.bin_predicted, r.bin_thrown)
            for r in disposed
            if r.bin_predicted == r.bin_real
        ]
    for row, col in pairs:
        counts[(row, col)] = counts.get((row, col), 0) + 1
    return FlowMatrix(pairing=pairing, counts=counts)


def follow_rate(records: Iterable[DisposalRecord]) -> float:
    """Among correctly predicted disposed items, fraction thrown as told."""
    followed, total = follow_stats(records)["overall"]
    return followed / total


def follow_stats(records: Iterable[DisposalRecord]) -> dict:
    """(followed, qualifying) pairs, overall and per predicted color."""
    disposed = _disposed(records)
    _require(disposed, "bin_real")
    _require(disposed, "bin_predicted")
    qualifying = [r for r in disposed if r.bin_predicted == r.bin_real]
    if not qualifying:
        raise EmptyInputError("no correctly predicted disposed records")
    stats: dict = {"overall": (0, 0)}
    followed = sum(1 for r in qualifying if r.bin_thrown == r.bin_predicted)
    stats["overall"] = (followed, len(qualifying))
    for color in BIN_COLORS:
        of_color = [r for r in qualifying if r.bin_predicted == color]
        stats[color] = (
            sum(1 for r in of_color if r.bin_thrown == color),
            len(of_color),
        )
    return stats


# --- hourly boxplot statistics ----------------------------------------------

def percentile(sorted_values: Sequence[float], p: float) -> float:
    """Linear interpolation between closest ranks; input must be sorted."""
    if not sorted_values:
        raise ValueError("percentile of empty data")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be within [0, 1]")
    position = p * (len(sorted_values) - 1)
    lower = int(position)
    if lower == len(sorted_values) - 1:
        return float(sorted_values[-1])
    fraction = position - lower
    return sorted_values[lower] + (sorted_values[lower + 1] - sorted_values[lower]) * fraction


@dataclass(frozen=True)
class BoxStats:
    median: float
    q1: float
    q3: float
    iqr: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]
    mean: float


def box_stats(values: Sequence[float]) -> BoxStats:
    """Boxplot summary: quartiles, 1.5*IQR whiskers clamped to data, outliers."""
    data = sorted(values)
    q1 = percentile(data, 0.25)
    median = percentile(data, 0.5)
    q3 = percentile(data, 0.75)
    iqr = q3 - q1
    low_fence = q1 - 1.5 * iqr
    high_fence = q3 + 1.5 * iqr
    inside = [v for v in data if low_fence <= v <= high_fence]
    whisker_low = inside[0] if inside else q1
    whisker_high = inside[-1] if inside else q3
    outliers = tuple(v for v in data if v < low_fence or v > high_fence)
    mean = sum(data) / len(data)
    return BoxStats(median, q1, q3, iqr, whisker_low, whisker_high, outliers, mean)


@dataclass(frozen=True)
class TemporalStats:
    """Disposals per day falling in one hour-of-day slot, per bin color."""

    slot_start_hour: float
    slot_end_hour: float
    per_color: dict[BinColor, BoxStats]
    counts_per_day: dict[BinColor, tuple[int, ...]]


def temporal_stats(
    records: Iterable[DisposalRecord],
    slot_seconds: float = 3600.0,
    days: int = 5,
) -> list[TemporalStats]:
    """Per-slot boxplot statistics of daily disposal counts by thrown bin.

    ``slot_seconds`` must divide 24 hours. Day indices are calendar offsets
    from the earliest disposed record; slots with no records yield all-zero
    statistics.
    """
    day_seconds = 86400
    slots = day_seconds / slot_seconds
    if abs(slots - round(slots)) > 1e-9:
        raise ValueError("slot width must divide 24 hours")
    slots = round(slots)
    if days < 1:
        raise ValueError("days must be >= 1")
    disposed = _disposed(records)
    counts = {
        slot: {color: [0] * days for color in BIN_COLORS} for slot in range(slots)
    }
    if disposed:
        first_day = min(r.time for r in disposed).date()
        for record in disposed:
            offset = (record.time.date() - first_day).days
            if not 0 <= offset < days:
                continue
            second_of_day = (
                record.time.hour * 3600 + record.time.minute * 60 + record.time.second
            )
            slot = int(second_of_day // slot_seconds)
            counts[slot][record.bin_thrown][offset] += 1
    result = []
    hours_per_slot = slot_seconds / 3600.0
    for slot in range(slots):
        per_color = {color: box_stats(counts[slot][color]) for color in BIN_COLORS}
        result.append(
            TemporalStats(
                slot_start_hour=slot * hours_per_slot,
                slot_end_hour=(slot + 1) * hours_per_slot,
                per_color=per_color,
                counts_per_day={
                    color: tuple(counts[slot][color]) for color in BIN_COLORS
                },
            )
        )
    return result


def export_sankey(matrix: FlowMatrix, path: str | Path) -> Path:
    """Write nodes/links JSON for the matrix: 6 nodes, one link per nonzero cell."""
    nodes = [{"name": f"{matrix.axis_a}_{color.value}"} for color in BIN_COLORS]
    nodes += [{"name": f"{matrix.axis_b}_{color.value}"} for color in BIN_COLORS]
    links = []
    for i, row in enumerate(BIN_COLORS):
        for j, col in enumerate(BIN_COLORS):
            value = matrix.cell(row, col)
            if value:
                links.append({"source": i, "target": 3 + j, "value": value})
    path = Path(path)
    path.write_text(
        json.dumps({"pairing": matrix.pairing, "nodes": nodes, "links": links}, indent=2)
    )
    return path


def summary(records: Iterable[DisposalRecord]) -> dict:
    """Headline statistics for one store: counts, accuracies, reward claims."""
    records = list(records)
    disposed = _disposed(records)
    outcome_counts: dict[str, int] = {}
    donations: dict[int, int] = {}
    for record in records:
        key = record.outcome.kind.value
        outcome_counts[key] = outcome_counts.get(key, 0) + 1
        if record.outcome.kind is OutcomeKind.CORRECT_DONATED:
            donations[record.outcome.ngo_id] = donations.get(record.outcome.ngo_id, 0) + 1
    report: dict = {
        "presented": len(records),
        "disposed": len(disposed),
        "undisposed": len(records) - len(disposed),
        "outcomes": outcome_counts,
        "rewards": {
            "claimed": outcome_counts.get(OutcomeKind.CORRECT_REWARDED.value, 0),
            "donated": outcome_counts.get(OutcomeKind.CORRECT_DONATED.value, 0),
            "donations_by_ngo": donations,
        },
    }
    annotated = [r for r in disposed if r.bin_real is not None]
    if annotated and len(annotated) == len(disposed):
        report["accuracy_disposal"] = accuracy(records, "disposal")
        if all(r.bin_predicted is not None for r in disposed):
            report["accuracy_prediction"] = accuracy(records, "prediction")
            try:
                report["follow_rate"] = follow_rate(records)
            except EmptyInputError:
                report["follow_rate"] = None
    return report
