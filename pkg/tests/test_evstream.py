import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evfb.evstream import (EventFormatError, EventStream, Label, StreamValidationError, Window,
                           concatenate, decode_mask, encode_binary, encode_mask, n_windows,
                           read_mask, read_stream, slice_windows, window_slices, write_mask,
                           write_stream)

from conftest import random_stream


def test_csv_row_maps_fields(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("t_us,x,y,p,label\n1000,5,7,1,2\n")
    s = read_stream(f)
    assert len(s) == 1 and s.labeled
    assert (s.t[0], s.x[0], s.y[0], s.p[0]) == (1000, 5, 7, 1)
    assert s.label[0] == Label.HOT_PIXEL


def test_header_only_binary_is_empty(tmp_path):
    f = tmp_path / "e.evs"
    write_stream(EventStream.empty(10, 10), f)
    assert f.stat().st_size == 9
    assert len(read_stream(f)) == 0


def test_one_labeled_event_is_14_bytes():
    s = EventStream(4, 4, [7], [1], [2], [1], [1])
    assert len(encode_binary(s)) == 9 + 14
    assert len(encode_binary(s.without_labels())) == 9 + 13


def test_binary_layout_is_little_endian():
    s = EventStream(640, 480, [0x0102030405060708], [3], [4], [-1])
    b = encode_binary(s)
    assert b[:4] == bytes.fromhex("45565331")
    assert b[4:6] == (640).to_bytes(2, "little") and b[6:8] == (480).to_bytes(2, "little")
    assert b[8] == 0
    assert b[9:17] == (0x0102030405060708).to_bytes(8, "little")
    assert b[21] == 0  # polarity -1 stored as 0


@pytest.mark.parametrize("fmt", ["binary", "csv"])
def test_round_trip_100k(tmp_path, fmt):
    s = random_stream(1, n=100_000, width=1280, height=720, span_us=30_000_000)
    f = tmp_path / ("s.evs" if fmt == "binary" else "s.csv")
    write_stream(s, f)
    assert read_stream(f) == s
    if fmt == "binary":
        write_stream(read_stream(f), tmp_path / "again.evs")
        assert (tmp_path / "again.evs").read_bytes() == f.read_bytes()


def test_truncated_record_reports_offset(tmp_path):
    s = random_stream(2, n=3)
    f = tmp_path / "t.evs"
    f.write_bytes(encode_binary(s)[:-5])
    with pytest.raises(EventFormatError) as e:
        read_stream(f)
    assert e.value.offset == 9 + 2 * 14


def test_bad_magic(tmp_path):
    f = tmp_path / "m.evs"
    f.write_bytes(b"XXXX" + bytes(5))
    with pytest.raises(EventFormatError):
        read_stream(f)


def test_csv_bad_line_reports_line(tmp_path):
    f = tmp_path / "b.csv"
    f.write_text("t_us,x,y,p\n1,1,1,1\n2,1,oops,0\n")
    with pytest.raises(EventFormatError) as e:
        read_stream(f)
    assert "3" in str(e.value)


def test_unsorted_is_rejected(tmp_path):
    f = tmp_path / "u.csv"
    f.write_text("t_us,x,y,p\n5,1,1,1\n4,1,1,0\n")
    with pytest.raises(StreamValidationError):
        read_stream(f)


def test_out_of_bounds_rejected():
    with pytest.raises(StreamValidationError):
        EventStream(4, 4, [0], [4], [0], [1])


def test_equal_timestamps_keep_order():
    s = EventStream(8, 8, [5, 5, 5], [1, 2, 3], [0, 0, 0], [1, 1, 1])
    assert list(s.x) == [1, 2, 3]


def _enumerate_windows(span_s, w, stride):
    k, out = 0, 0
    while True:
        start = k * stride
        if start >= span_s - 1e-12 and k > 0:
            break
        out += 1
        if start + w >= span_s - 1e-12:
            break
        k += 1
    return out


def test_ten_second_stream_gives_46_slices():
    s = EventStream(4, 4, np.arange(0, 10_000_000, 1000), np.zeros(10_000, int), np.zeros(10_000, int),
                    np.ones(10_000, int))
    sl = slice_windows(s, 1.0, 0.2)
    assert len(sl) == 46 == _enumerate_windows(10, 1, 0.2) == n_windows(10, 1, 0.2)
    assert sl[-1].t[0] <= 9_000_000


@pytest.mark.parametrize("span,w,stride", [(30, 1, 0.2), (30, 7, 1.4), (20, 20, 4), (10, 3, 0.6)])
def test_window_count_matches_enumeration(span, w, stride):
    assert n_windows(span, w, stride) == _enumerate_windows(span, w, stride)


def test_full_window_is_identity():
    s = random_stream(3, n=500)
    sl = slice_windows(s, s.span / 1e6, s.span / 1e6)
    assert len(sl) == 1 and sl[0] == s


def test_half_open_boundary():
    s = EventStream(4, 4, [0, 1_000_000], [0, 1], [0, 0], [1, 1])
    first = slice_windows(s, 1.0, 1.0)[0]
    assert list(first.t) == [0]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 400), st.integers(1, 50))
def test_tiling_windows_partition_events(seed, n, window_ms):
    s = random_stream(seed, n=n)
    parts = slice_windows(s, window_ms / 1000, window_ms / 1000)
    assert concatenate(parts) == s
    for p in parts:
        assert np.all(np.diff(p.t) >= 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 300), st.integers(1, 300_000))
def test_window_slices_cover_stream(seed, n, w):
    s = random_stream(seed, n=n)
    sl = window_slices(s, w)
    idx = np.concatenate([np.arange(len(s))[x] for x in sl]) if sl else np.zeros(0, int)
    assert np.array_equal(idx, np.arange(len(s)))


def test_window_rejects_nonpositive_duration():
    with pytest.raises(ValueError):
        Window(0, 0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.booleans(), max_size=200))
def test_mask_round_trip(bits):
    m = np.array(bits, dtype=bool)
    data = encode_mask(m)
    assert data[:4] == bytes.fromhex("4D534B31")
    assert int.from_bytes(data[4:12], "little") == len(bits)
    assert np.array_equal(decode_mask(data), m)


def test_mask_file(tmp_path):
    m = np.array([1, 0, 0, 0, 0, 0, 0, 0, 1], dtype=bool)
    write_mask(m, tmp_path / "m.bin")
    raw = (tmp_path / "m.bin").read_bytes()
    assert raw[12:] == bytes([0b00000001, 0b00000001])
    assert np.array_equal(read_mask(tmp_path / "m.bin"), m)


def test_stream_is_immutable():
    s = random_stream(0, n=10)
    with pytest.raises((AttributeError, ValueError)):
        s.t[0] = 5
    with pytest.raises(AttributeError):
        s.width = 3
