import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tspmdf.codec import (
    CodecError,
    OffsetCode,
    decode,
    decode_array,
    encode,
    encode_array,
    max_offset,
    one_hot_array,
    one_hot_features,
)


@pytest.mark.parametrize(
    "code, value",
    [
        (OffsetCode(1, (1, 2, 3, 4)), 0.1234),
        (OffsetCode(-1, (9, 9, 9, 9)), -0.9999),
        (OffsetCode(1, (0, 0, 0, 0)), 0.0),
    ],
)
def test_decode_examples(code, value):
    assert decode(code) == pytest.approx(value, abs=1e-15)


@pytest.mark.parametrize(
    "x, M, sign, digits",
    [
        (0.56789, 4, 1, (5, 6, 7, 8)),
        (-0.05, 2, -1, (0, 5)),
        (0.0, 4, 1, (0, 0, 0, 0)),
        (-0.0, 3, 1, (0, 0, 0)),
        (-0.00001, 4, 1, (0, 0, 0, 0)),
        (0.29, 2, 1, (2, 9)),
        (0.9999999, 4, 1, (9, 9, 9, 9)),
    ],
)
def test_encode_examples(x, M, sign, digits):
    assert encode(x, M) == OffsetCode(sign, digits)


def test_invalid_codes():
    with pytest.raises(CodecError):
        OffsetCode(1, (10,))
    with pytest.raises(CodecError):
        OffsetCode(0, (1,))
    with pytest.raises(CodecError):
        OffsetCode(1, ())
    with pytest.raises(CodecError):
        OffsetCode(1, (-1, 2))


@pytest.mark.parametrize("x", [1.0, -1.0, 1.5, float("nan"), float("inf")])
def test_encode_range(x):
    with pytest.raises(CodecError):
        encode(x, 4)


def test_one_hot_examples():
    v = one_hot_features(OffsetCode(1, (3,)))
    assert v.tolist() == [0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0]
    w = one_hot_features(OffsetCode(-1, (0, 0)))
    assert len(w) == 22 and w.sum() == 3 and w[0] == 1 and w[2] == 1 and w[12] == 1


def test_max_offset():
    assert max_offset(4) == 0.9999
    assert decode(encode(max_offset(4), 4)) == 0.9999


@settings(max_examples=300, deadline=None)
@given(st.floats(-1, 1, exclude_min=True, exclude_max=True), st.sampled_from([1, 2, 4, 6]))
def test_round_trip_error_and_truncation(x, M):
    y = decode(encode(x, M))
    assert abs(y - x) < 10.0**-M
    assert abs(y) <= abs(x) + 1e-12


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 6).flatmap(lambda M: st.tuples(st.sampled_from([-1, 1]), st.lists(st.integers(0, 9), min_size=M, max_size=M))))
def test_encode_decode_idempotent_on_canonical(args):
    sign, digits = args
    code = OffsetCode(sign, tuple(digits))
    if not code.is_canonical:
        code = OffsetCode(1, code.digits)
    assert encode(decode(code), code.M) == code


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3).flatmap(lambda M: st.tuples(st.sampled_from([-1, 1]), st.lists(st.integers(0, 9), min_size=M, max_size=M))))
def test_one_hot_sum(args):
    sign, digits = args
    v = one_hot_features(OffsetCode(sign, tuple(digits)))
    assert v.sum() == len(digits) + 1 and len(v) == 2 + 10 * len(digits)


def test_one_hot_injective_on_canonical_codes():
    import itertools

    seen = set()
    for sign in (-1, 1):
        for digits in itertools.product(range(10), repeat=2):
            code = OffsetCode(sign, digits)
            if code.is_canonical:
                key = one_hot_features(code).tobytes()
                assert key not in seen
                seen.add(key)
    assert len(seen) == 199


def test_array_versions_match_scalar():
    x = np.random.default_rng(0).uniform(-1, 1, (50, 2))
    signs, digits = encode_array(x, 3)
    np.testing.assert_array_equal(decode_array(signs, digits).shape, (50, 2))
    for idx in np.ndindex(50, 2):
        code = encode(x[idx], 3)
        assert (signs[idx], tuple(digits[idx])) == (code.sign, code.digits)
        np.testing.assert_array_equal(one_hot_array(signs, digits)[idx], one_hot_features(code))


@pytest.mark.parametrize("M", [1, 2, 4, 6])
def test_bulk_round_trip(M):
    x = np.random.default_rng(M).uniform(-1, 1, 100_000)
    x = x[np.abs(x) < 1]
    signs, digits = encode_array(x, M)
    assert np.all(np.abs(decode_array(signs, digits) - x) < 10.0**-M)
    assert np.all(signs[~digits.any(axis=-1)] == 1)
