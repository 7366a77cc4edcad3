import json
import os

import pytest

from bridgetrace.model import event_to_row, transfer_to_row
from bridgetrace.store import (
    DatasetLayout,
    SchemaError,
    SchemaVersionError,
    read_validated,
    write_atomic,
    write_text_atomic,
)
from tests.conftest import mk_event, mk_transfer


def test_write_read_round_trip(tmp_path):
    rows = [event_to_row(mk_event(n)) for n in range(1, 4)]
    path = tmp_path / "events.ndj"
    digest = write_atomic(path, rows, "event.v1")
    schema, back = read_validated(path)
    assert schema == "event.v1"
    assert back == rows
    assert len(digest) == 64
    assert path.read_text().splitlines()[0] == "#schema: event.v1"


def test_rewrite_identical_content_same_digest(tmp_path):
    rows = [transfer_to_row(mk_transfer(n)) for n in range(1, 4)]
    d1 = write_atomic(tmp_path / "a.ndj", rows, "transfer.v1")
    d2 = write_atomic(tmp_path / "b.ndj", rows, "transfer.v1")
    assert d1 == d2


def test_invalid_record_leaves_no_file(tmp_path):
    rows = [event_to_row(mk_event(1)), {"eventId": "broken"}]
    path = tmp_path / "bad.ndj"
    with pytest.raises(SchemaError):
        write_atomic(path, rows, "event.v1")
    assert not path.exists()
    assert not list(tmp_path.glob("*.tmp"))  # temp cleaned up


def test_unknown_schema_rejected(tmp_path):
    with pytest.raises(SchemaError, match="unknown schema"):
        write_atomic(tmp_path / "x.ndj", [], "nonsense.v9")


def test_missing_header_rejected(tmp_path):
    path = tmp_path / "noheader.ndj"
    path.write_text('{"eventId": "x"}\n')
    with pytest.raises(SchemaError, match="header"):
        read_validated(path)


def test_corrupt_line_reported_by_number(tmp_path):
    rows = [event_to_row(mk_event(n)) for n in range(1, 9)]
    path = tmp_path / "events.ndj"
    write_atomic(path, rows, "event.v1")
    lines = path.read_text().splitlines()
    lines[6] = lines[6][:-10]  # corrupt line 7
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(SchemaError, match="line 7"):
        read_validated(path)


def test_wrong_schema_for_slot(tmp_path):
    path = tmp_path / "truth.ndj"
    write_atomic(path, [{"eventId": "e1", "txId": "withheld"}], "truth.v1")
    with pytest.raises(SchemaVersionError):
        read_validated(path, expect="match.v1")


def test_truth_schema_accepts_withheld_and_tx(tmp_path):
    rows = [
        {"eventId": "e1", "txId": "withheld"},
        {"eventId": "e2", "txId": "0x" + "ab" * 32},
    ]
    path = tmp_path / "truth.ndj"
    write_atomic(path, rows, "truth.v1")
    _, back = read_validated(path, expect="truth.v1")
    assert back == rows


def test_match_schema_outcome_consistency(tmp_path):
    good = {
        "eventId": "e1",
        "outcome": "unmatched",
        "counterpartTxId": None,
        "elapsedSeconds": None,
        "sourceTimestamp": 5,
        "candidates": [],
    }
    write_atomic(tmp_path / "m.ndj", [good], "match.v1")
    bad = dict(good, outcome="exact")  # exact without counterpart
    with pytest.raises(SchemaError):
        write_atomic(tmp_path / "m2.ndj", [bad], "match.v1")


def test_atomic_rename_never_exposes_partial(tmp_path):
    # a crashing writer must leave either no file or the old complete file
    path = tmp_path / "data.ndj"
    write_atomic(path, [event_to_row(mk_event(1))], "event.v1")
    before = path.read_bytes()

    class Boom(Exception):
        pass

    def exploding_rows():
        yield event_to_row(mk_event(2))
        raise Boom()

    with pytest.raises(Boom):
        write_atomic(path, exploding_rows(), "event.v1")
    assert path.read_bytes() == before
    assert not list(tmp_path.glob("*.tmp"))


def test_text_atomic_write(tmp_path):
    path = tmp_path / "out" / "series.csv"
    digest = write_text_atomic(path, "a,b\n1,2\n")
    assert path.read_text() == "a,b\n1,2\n"
    assert len(digest) == 64


def test_dataset_layout_ensure_and_naming(tmp_path):
    layout = DatasetLayout(tmp_path / "ds").ensure()
    for sub in (layout.raw, layout.events, layout.transfers, layout.matches, layout.reports, layout.manifests):
        assert sub.is_dir()
    name = DatasetLayout.data_filename("ethereum", "deposit", "fungible", "100-200", "event.v1")
    assert name == "ethereum-deposit-fungible-100-200.event.v1.ndj"


def test_rows_are_canonical_json(tmp_path):
    path = tmp_path / "t.ndj"
    write_atomic(path, [transfer_to_row(mk_transfer(1))], "transfer.v1")
    line = path.read_text().splitlines()[1]
    assert line == json.dumps(json.loads(line), sort_keys=True, separators=(",", ":"))
