import io
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cdmpoisson.arrival import CdmEvent
from cdmpoisson.errors import DomainError, SchemaError
from cdmpoisson.ingestion import (ColumnMapping, RawCdmRecord, build_events, events_to_records,
                                  parse_csv, read_events, split_events, write_csv)


def test_parse_single_row():
    records, report = parse_csv(b"event_id,time_to_tca\n7,2.5\n")
    assert records == [RawCdmRecord("7", 2.5)]
    assert report.rows_read == 1 and report.rows_rejected == 0


@pytest.mark.parametrize("bad", ["NaN", "inf", "-1", "0", "", "abc"])
def test_parse_rejects_bad_times(bad):
    records, report = parse_csv(f"event_id,time_to_tca\n1,{bad}\n1,3.0\n".encode())
    assert records == [RawCdmRecord("1", 3.0)]
    assert report.rows_rejected == 1


def test_parse_missing_id_rejected():
    _, report = parse_csv(b"event_id,time_to_tca\n,2.0\n")
    assert report.rows_rejected == 1


def test_parse_missing_column():
    with pytest.raises(SchemaError):
        parse_csv(b"event_id,other\n1,2\n")


def test_parse_empty_file():
    with pytest.raises(SchemaError):
        parse_csv(b"")


def test_parse_custom_columns_and_text_stream():
    fh = io.StringIO("id,ttca,miss_distance\na,4,100\na,1,50\n")
    records, _ = parse_csv(fh, ColumnMapping("id", "ttca"))
    assert [r.time_to_tca for r in records] == [4.0, 1.0]


def test_parse_unreadable_path(tmp_path):
    with pytest.raises(OSError):
        parse_csv(str(tmp_path / "nope.csv"))


def test_build_events_examples():
    events, report = build_events([RawCdmRecord("a", t) for t in (3.5, 5.0, 2.0)])
    assert events == [CdmEvent("a", (0.0, 1.5, 3.0), 5.0)]
    events, report = build_events([RawCdmRecord("b", t) for t in (4.0, 4.0, 1.0)])
    assert events[0].arrival_offsets == (0.0, 3.0)
    assert report.duplicates_collapsed == 1
    events, report = build_events([RawCdmRecord("c", 2.0)])
    assert events == [] and report.events_dropped_short == 1


raw_rows = st.lists(st.tuples(st.sampled_from("abcdefg"),
                              st.one_of(st.floats(0.01, 7.0), st.sampled_from([1.0, 2.0]),
                                        st.just(float("nan")), st.just(-1.0))), max_size=60)


@given(raw_rows)
def test_rows_are_conserved(rows):
    text = "event_id,time_to_tca\n" + "".join(f"{e},{t!r}\n" for e, t in rows)
    events, report = read_events_text(text)
    kept_rows = sum(len(e.arrival_offsets) for e in events)
    assert report.rows_read == len(rows)
    assert (kept_rows + report.events_dropped_short + report.duplicates_collapsed
            + report.rows_rejected) == report.rows_read
    assert report.events_kept == len(events)


def read_events_text(text):
    records, r1 = parse_csv(text.encode())
    events, r2 = build_events(records)
    return events, r1.merge(r2)


@st.composite
def corpora(draw):
    n = draw(st.integers(1, 8))
    out = []
    for k in range(n):
        gaps = draw(st.lists(st.floats(1e-3, 3.0), min_size=1, max_size=12))
        offs = np.concatenate([[0.0], np.cumsum(gaps)])
        out.append(CdmEvent(f"ev{k}", tuple(offs), float(offs[-1]) + draw(st.floats(0.1, 5.0))))
    return out


@given(corpora())
def test_round_trip_through_records(events):
    rebuilt, _ = build_events(events_to_records(events))
    by_id = {e.event_id: e for e in rebuilt}
    for e in events:
        got = by_id[e.event_id].arrival_offsets
        assert len(got) == len(e.arrival_offsets)
        assert np.allclose(got, e.arrival_offsets, rtol=0, atol=1e-12 * max(1.0, e.tca_offset))


def test_csv_round_trip(tmp_path):
    events = [CdmEvent("x", (0.0, 0.1, 2.0 / 3.0), 3.3), CdmEvent("y", (0.0, 1e-3), 2.0)]
    path = tmp_path / "c.csv"
    with open(path, "w", newline="") as fh:
        write_csv(events, fh)
    back, report = read_events(str(path))
    assert report.events_kept == 2
    for a, b in zip(events, back):
        assert np.allclose(a.arrival_offsets, b.arrival_offsets, rtol=0, atol=1e-12)


def _dummy(n):
    return [CdmEvent(f"id{k}", (0.0, 1.0), 3.0) for k in range(n)]


def test_split_is_deterministic():
    events = _dummy(4)
    a = split_events(events, 0.5, seed=1)
    b = split_events(events, 0.5, seed=1)
    assert a == b
    assert len(a[0]) == 2 and len(a[1]) == 2


def test_split_order_independent():
    events = _dummy(200)
    shuffled = events[:]
    random.Random(3).shuffle(shuffled)
    tr1, te1 = split_events(events, 0.5, seed=9)
    tr2, te2 = split_events(shuffled, 0.5, seed=9)
    assert {e.event_id for e in te1} == {e.event_id for e in te2}
    assert {e.event_id for e in tr1} == {e.event_id for e in tr2}


def test_split_seed_matters():
    events = _dummy(200)
    assert {e.event_id for e in split_events(events, 0.5, 1)[1]} != \
        {e.event_id for e in split_events(events, 0.5, 2)[1]}


@pytest.mark.parametrize("n, frac", [(50_523 * 2, 0.5), (7, 0.3), (1, 0.5), (10, 0.99)])
def test_split_sizes_and_partition(n, frac):
    events = _dummy(n)
    train, test = split_events(events, frac, seed=0)
    assert abs(len(test) - frac * n) <= 1
    ids_tr = {e.event_id for e in train}
    ids_te = {e.event_id for e in test}
    assert not ids_tr & ids_te
    assert len(ids_tr | ids_te) == n


def test_split_errors():
    with pytest.raises(DomainError):
        split_events([], 0.5, 0)
    with pytest.raises(DomainError):
        split_events(_dummy(3), 1.0, 0)
