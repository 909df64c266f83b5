import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rcl.errors import ValueKindError
from rcl.values import ABSENT, coerce, decode_value, encode_value, kind_of, render, values_equal

values = st.one_of(
    st.none(), st.booleans(), st.integers(-(2**63), 2**63 - 1),
    st.floats(allow_nan=True), st.text(), st.binary(),
)


@given(values)
def test_encode_roundtrip(v):
    back = decode_value(encode_value(v))
    assert values_equal(v, back)
    assert kind_of(back) == kind_of(v)


def test_floats_compare_bitwise():
    assert values_equal(math.nan, math.nan)
    assert not values_equal(0.0, -0.0)
    assert not values_equal(1, 1.0)


def test_absent_is_distinct():
    assert not ABSENT
    assert values_equal(ABSENT, ABSENT)
    assert not values_equal(ABSENT, None)
    assert decode_value(encode_value(ABSENT)) is ABSENT


def test_coerce():
    assert coerce("float", 3) == 3.0 and isinstance(coerce("float", 3), float)
    assert coerce("void", 17) is None
    with pytest.raises(ValueKindError):
        coerce("int", "x")
    with pytest.raises(ValueKindError):
        coerce("int", 2**63)


def test_render():
    assert render(None) == "()"
    assert render(True) == "true"
    assert render(2.0) == "2.0"
    assert render(7) == "7"
