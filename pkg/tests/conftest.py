import base64
from datetime import datetime, timezone

import pytest

from smartbin.model import BinColor, DisposalRecord, SessionOutcome
from smartbin.replay import canonical_control, canonical_itrash, generate_trace, replay

T0 = datetime(2024, 9, 16, 9, 0, 0, tzinfo=timezone.utc)


def make_record(
    record_id="r-1",
    image=b"img",
    time=T0,
    predicted=BinColor.BLUE,
    thrown=BinColor.BLUE,
    real=BinColor.BLUE,
    outcome=None,
) -> DisposalRecord:
    if outcome is None:
        if thrown is None:
            outcome = SessionOutcome.timeout()
        elif predicted is not None and thrown == predicted:
            outcome = SessionOutcome.unclaimed()
        else:
            outcome = SessionOutcome.incorrect()
    return DisposalRecord(
        record_id=record_id,
        image_b64=base64.b64encode(image).decode(),
        time=time,
        bin_predicted=predicted,
        bin_thrown=thrown,
        bin_real=real,
        outcome=outcome,
    )


@pytest.fixture(scope="session")
def itrash_replay():
    return replay(generate_trace(canonical_itrash(), seed=7))


@pytest.fixture(scope="session")
def itrash_records(itrash_replay):
    return itrash_replay.store.records()


@pytest.fixture(scope="session")
def control_replay():
    return replay(generate_trace(canonical_control(), seed=7))


@pytest.fixture(scope="session")
def control_records(control_replay):
    return control_replay.store.records()
