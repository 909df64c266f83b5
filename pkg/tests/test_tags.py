import pytest
from hypothesis import given
from hypothesis import strategies as st

from rcl.errors import MicrostepOverflowError, TimeOverflowError
from rcl.tags import (FOREVER, MICROSTEP_MAX, MSEC, Tag, format_time, parse_time, tag_compare, tag_delay,
                      tag_from_json, tag_to_json, timer_next)

times = st.integers(min_value=0, max_value=10**15)
steps = st.integers(min_value=0, max_value=1000)
tags = st.builds(Tag, times, steps)
delays = st.integers(min_value=0, max_value=10**12)


@pytest.mark.parametrize("a,b,want", [
    (Tag(0, 0), Tag(0, 0), 0),
    (Tag(10 * MSEC, 0), Tag(10 * MSEC, 1), -1),
    (Tag(3 * MSEC, 7), Tag(10 * MSEC, 0), -1),
])
def test_compare_examples(a, b, want):
    assert tag_compare(a, b) == want
    assert tag_compare(b, a) == -want


@pytest.mark.parametrize("tag,delay,want", [
    (Tag(5 * MSEC, 2), 10 * MSEC, Tag(15 * MSEC, 0)),
    (Tag(5 * MSEC, 2), 0, Tag(5 * MSEC, 3)),
    (Tag(0, 0), 0, Tag(0, 1)),
])
def test_delay_examples(tag, delay, want):
    assert tag_delay(tag, delay) == want


def test_delay_overflows():
    with pytest.raises(MicrostepOverflowError):
        tag_delay(Tag(0, MICROSTEP_MAX), 0)
    with pytest.raises(TimeOverflowError):
        tag_delay(Tag(2**63 - 5, 0), 10)
    with pytest.raises(ValueError):
        tag_delay(Tag(0, 0), -1)


@pytest.mark.parametrize("args,want", [
    ((0, 30 * MSEC, 0), Tag(0, 0)),
    ((0, 30 * MSEC, 2), Tag(60 * MSEC, 0)),
    ((5 * MSEC, 30 * MSEC, 1), Tag(35 * MSEC, 0)),
])
def test_timer_examples(args, want):
    assert timer_next(*args) == want


def test_one_shot_timer_has_one_occurrence():
    assert timer_next(7, 0, 0) == Tag(7, 0)
    with pytest.raises(ValueError):
        timer_next(7, 0, 1)


@pytest.mark.parametrize("text,ns", [
    ("0", 0), ("3 ms", 3 * MSEC), ("10 ms", 10 * MSEC), ("30 ms", 30 * MSEC),
    ("7 ns", 7), ("2 us", 2000), ("1 s", 10**9), ("1 sec", 10**9), ("2 min", 120 * 10**9),
])
def test_parse_time(text, ns):
    assert parse_time(text) == ns


@pytest.mark.parametrize("bad", ["5", "3 weeks", "ms", "", "1.5 ms"])
def test_parse_time_rejects(bad):
    with pytest.raises(ValueError):
        parse_time(bad)


def test_forever_is_absorbing():
    assert tag_delay(FOREVER, 10) == FOREVER
    assert Tag(2**62, 5) < FOREVER


@given(tags, tags, tags)
def test_total_order(a, b, c):
    assert tag_compare(a, b) == -tag_compare(b, a)
    assert (tag_compare(a, b) == 0) == (a == b)
    if tag_compare(a, b) <= 0 and tag_compare(b, c) <= 0:
        assert tag_compare(a, c) <= 0


@given(tags, delays)
def test_delay_strictly_progresses(t, d):
    assert tag_delay(t, d) > t


@given(tags, st.integers(1, 10**12), st.integers(1, 10**12))
def test_delay_composes_in_time(t, d1, d2):
    assert tag_delay(t, d1 + d2).time == tag_delay(tag_delay(t, d1), d2).time


@given(st.integers(0, 10**9), st.integers(1, 10**9), st.integers(0, 1000))
def test_timer_strictly_increasing(offset, period, k):
    assert timer_next(offset, period, k) < timer_next(offset, period, k + 1)


@given(st.integers(0, 10**15))
def test_format_parse_roundtrip(ns):
    assert parse_time(format_time(ns)) == ns


@given(tags)
def test_json_roundtrip(t):
    assert tag_from_json(tag_to_json(t)) == t


def test_json_rejects_garbage():
    for bad in ({"t": 1.5, "m": 0}, {"t": 0, "m": -1}, {"t": True, "m": 0}):
        with pytest.raises(ValueError):
            tag_from_json(bad)
