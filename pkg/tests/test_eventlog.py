from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairpm.eventlog import (ABSENT, PAD_ACTIVITY, CsvMapping, Event, EventLog,
                             LogValidationError, Trace, XesParseError,
                             extract_prefixes, parse_csv, parse_xes, split_folds,
                             write_xes)

T0 = datetime(2024, 3, 1, 9, 0, tzinfo=timezone.utc)


def ev(case, act, minutes, **payload):
    return Event(case_id=case, activity=act,
                 timestamp=T0 + timedelta(minutes=minutes), payload=payload)


def simple_trace(case="c1", acts=("A", "B", "C"), attrs=None):
    events = tuple(ev(case, a, i) for i, a in enumerate(acts))
    return Trace(case_id=case, events=events, case_attributes=attrs or {})


@pytest.fixture()
def fixture_log():
    """Three traces with mixed-kind attributes, used for round-trip checks."""
    t1 = simple_trace("c1", ("register", "triage", "treat"),
                      {"age": 61.5, "gender": "female"})
    t2 = Trace(case_id="c2",
               events=(ev("c2", "register", 0, resource="desk-1", cost=12),
                       ev("c2", "treat", 30, urgent=True)),
               case_attributes={"age": 44.0, "gender": "male"})
    t3 = simple_trace("c3", ("register",), {"age": 29.25, "gender": "female"})
    return EventLog.from_traces([t1, t2, t3])


# -- data model ----------------------------------------------------------------

def test_event_requires_activity():
    with pytest.raises(LogValidationError):
        Event(case_id="c", activity="", timestamp=T0)


def test_payload_lookup_returns_absent_marker():
    e = ev("c", "A", 0, cost=3)
    assert e.attr("cost") == 3
    assert e.attr("missing") is ABSENT
    assert not ABSENT  # falsy but distinct from None/0
    assert ABSENT is not None


def test_trace_rejects_foreign_events():
    with pytest.raises(LogValidationError):
        Trace(case_id="c1", events=(ev("c2", "A", 0),))


def test_trace_rejects_decreasing_timestamps():
    with pytest.raises(LogValidationError):
        Trace(case_id="c", events=(ev("c", "A", 5), ev("c", "B", 0)))


def test_alphabet_is_sorted_and_exact(fixture_log):
    assert fixture_log.activity_alphabet == ("register", "treat", "triage")


def test_case_attribute_schema_kinds(fixture_log):
    assert fixture_log.case_attribute_schema == (
        ("age", "numeric"), ("gender", "categorical"))


# -- XES -----------------------------------------------------------------------

def test_parse_xes_minimal_document():
    doc = b"""<?xml version="1.0"?>
    <log>
      <trace>
        <string key="concept:name" value="t1"/>
        <event>
          <string key="concept:name" value="start"/>
          <date key="time:timestamp" value="2024-03-01T09:00:00.000Z"/>
        </event>
        <event>
          <string key="concept:name" value="end"/>
          <date key="time:timestamp" value="2024-03-01T09:05:00.000Z"/>
        </event>
      </trace>
    </log>"""
    log = parse_xes(doc)
    assert len(log.traces) == 1
    assert len(log.traces[0].events) == 2
    assert len(log.activity_alphabet) <= 2


def test_parse_xes_empty_log():
    log = parse_xes(b"<log/>")
    assert log.traces == ()
    assert log.activity_alphabet == ()


def test_parse_xes_malformed_reports_position():
    with pytest.raises(XesParseError) as err:
        parse_xes(b"<log>\n<trace>\n</log>")
    assert err.value.line is not None


def test_parse_xes_missing_activity_names_trace():
    doc = b"""<log><trace><string key="concept:name" value="bad-case"/>
      <event><date key="time:timestamp" value="2024-03-01T09:00:00Z"/></event>
    </trace></log>"""
    with pytest.raises(LogValidationError, match="bad-case"):
        parse_xes(doc)


def test_parse_xes_missing_timestamp_names_trace():
    doc = b"""<log><trace><string key="concept:name" value="case-7"/>
      <event><string key="concept:name" value="start"/></event>
    </trace></log>"""
    with pytest.raises(LogValidationError, match="case-7"):
        parse_xes(doc)


def test_xes_round_trip_field_equality(fixture_log):
    again = parse_xes(write_xes(fixture_log))
    assert again == fixture_log


def test_xes_round_trip_empty():
    log = EventLog.from_traces([])
    assert parse_xes(write_xes(log)) == log


def test_xes_round_trip_generated_log(cs_small):
    # round-trip oracle at scale: trace count and all attribute values survive
    log = cs_small.log
    again = parse_xes(write_xes(log))
    assert len(again.traces) == len(log.traces)
    assert again == log


# -- CSV -----------------------------------------------------------------------

CSV_MAPPING = CsvMapping(case_id="case", activity="activity", timestamp="ts",
                         case_columns=("gender",), event_columns=("resource",))


def test_parse_csv_single_case():
    data = ("case,activity,ts,gender,resource\n"
            "c1,start,2024-03-01T09:00:00Z,f,r1\n"
            "c1,mid,2024-03-01T09:10:00Z,f,r2\n"
            "c1,end,2024-03-01T09:20:00Z,f,r1\n")
    log = parse_csv(data, CSV_MAPPING)
    assert len(log.traces) == 1
    trace = log.traces[0]
    assert [e.activity for e in trace.events] == ["start", "mid", "end"]
    assert trace.case_attributes == {"gender": "f"}
    assert trace.events[1].attr("resource") == "r2"


def test_parse_csv_sorts_by_timestamp_stably():
    data = ("case,activity,ts,gender,resource\n"
            "c1,second,2024-03-01T10:00:00Z,f,r\n"
            "c1,first,2024-03-01T09:00:00Z,f,r\n"
            "c1,tie-a,2024-03-01T11:00:00Z,f,r\n"
            "c1,tie-b,2024-03-01T11:00:00Z,f,r\n")
    log = parse_csv(data, CSV_MAPPING)
    assert [e.activity for e in log.traces[0].events] == [
        "first", "second", "tie-a", "tie-b"]


def test_parse_csv_case_column_must_be_constant():
    data = ("case,activity,ts,gender,resource\n"
            "c9,start,2024-03-01T09:00:00Z,f,r\n"
            "c9,end,2024-03-01T09:10:00Z,m,r\n")
    with pytest.raises(LogValidationError) as err:
        parse_csv(data, CSV_MAPPING)
    assert "c9" in str(err.value) and "gender" in str(err.value)


def test_parse_csv_rejects_undeclared_columns():
    data = "case,activity,ts,gender,resource,extra\nc,x,2024-03-01T09:00:00Z,f,r,1\n"
    with pytest.raises(LogValidationError, match="extra"):
        parse_csv(data, CSV_MAPPING)


# -- prefixes --------------------------------------------------------------------

def test_extract_prefixes_enumeration():
    log = EventLog.from_traces([simple_trace("c", ("A", "B", "C", "D"))])
    prefixes = extract_prefixes(log, window=3)
    got = [([e.activity for e in p.events], p.target_activity) for p in prefixes]
    assert got == [
        ([PAD_ACTIVITY, PAD_ACTIVITY, "A"], "B"),
        ([PAD_ACTIVITY, "A", "B"], "C"),
        (["A", "B", "C"], "D"),
    ]
    assert [p.length for p in prefixes] == [1, 2, 3]


def test_extract_prefixes_short_trace_contributes_nothing():
    log = EventLog.from_traces([simple_trace("c", ("A",))])
    assert extract_prefixes(log, window=3) == []


def test_prefix_count_law_on_generated_log(cs_small):
    log = cs_small.log
    expected = sum(max(len(t.events) - 1, 0) for t in log.traces)
    for window in (1, 3, 5):
        assert len(extract_prefixes(log, window)) == expected


def test_prefix_targets_match_source_traces(cs_small):
    log = cs_small.log
    by_case = {t.case_id: t for t in log.traces}
    for p in extract_prefixes(log, 3):
        assert p.target_activity == by_case[p.source_case_id].events[p.length].activity


# -- folds ----------------------------------------------------------------------

def ten_trace_log():
    return EventLog.from_traces(
        [simple_trace(f"c{i}", ("A", "B")) for i in range(10)])


def test_split_folds_sizes():
    folds = split_folds(ten_trace_log(), 5, seed=1)
    assert len(folds) == 5
    for train_log, val_log in folds:
        assert len(val_log.traces) == 2
        assert len(train_log.traces) == 8


def test_split_folds_deterministic():
    a = split_folds(ten_trace_log(), 5, seed=9)
    b = split_folds(ten_trace_log(), 5, seed=9)
    assert [[t.case_id for t in val.traces] for _, val in a] == \
        [[t.case_id for t in val.traces] for _, val in b]


def test_split_folds_partition_laws(cs_small):
    log = cs_small.log
    folds = split_folds(log, 5, seed=2)
    all_ids = {t.case_id for t in log.traces}
    val_sets = [{t.case_id for t in val.traces} for _, val in folds]
    assert set().union(*val_sets) == all_ids
    for i in range(len(val_sets)):
        for j in range(i + 1, len(val_sets)):
            assert not (val_sets[i] & val_sets[j])
    for (train_log, val_log), val_ids in zip(folds, val_sets):
        assert {t.case_id for t in train_log.traces} == all_ids - val_ids


def test_split_folds_errors():
    with pytest.raises(ValueError):
        split_folds(ten_trace_log(), 11, seed=0)
    with pytest.raises(ValueError):
        split_folds(ten_trace_log(), 1, seed=0)


@settings(max_examples=40, deadline=None)
@given(lengths=st.lists(st.integers(min_value=1, max_value=6), min_size=2,
                        max_size=12),
       window=st.integers(min_value=1, max_value=4),
       k=st.integers(min_value=2, max_value=4))
def test_prefix_and_fold_properties(lengths, window, k):
    acts = "ABCDEF"
    traces = [simple_trace(f"c{i}", tuple(acts[:n])) for i, n in enumerate(lengths)]
    log = EventLog.from_traces(traces)
    prefixes = extract_prefixes(log, window)
    assert len(prefixes) == sum(max(n - 1, 0) for n in lengths)
    assert all(len(p.events) == window for p in prefixes)
    if k <= len(traces):
        folds = split_folds(log, k, seed=0)
        sizes = sorted(len(val.traces) for _, val in folds)
        assert sizes[-1] - sizes[0] <= 1
        assert sum(sizes) == len(traces)
