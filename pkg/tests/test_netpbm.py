import numpy as np
import pytest

from snaketrack import netpbm
from snaketrack.errors import DecodeError


def test_p2_ascii_with_comments():
    data = b"P2\n# a comment\n3 2\n# another\n255\n0 128 255\n64 32 16\n"
    arr = netpbm.decode(data)
    assert arr.shape == (2, 3)
    assert arr[0, 0] == 0.0
    assert arr[0, 2] == 1.0
    assert arr[0, 1] == pytest.approx(128 / 255)
    assert arr[1, 2] == pytest.approx(16 / 255)


def test_p5_binary():
    data = b"P5 4 1 255\n" + bytes([0, 85, 170, 255])
    arr = netpbm.decode(data)
    assert arr.shape == (1, 4)
    assert np.allclose(arr[0], [0, 85 / 255, 170 / 255, 1.0])


def test_p5_two_byte_samples_big_endian():
    import struct

    data = b"P5 2 2 65535\n" + struct.pack(">4H", 0, 65535, 32768, 16384)
    arr = netpbm.decode(data)
    assert arr[0, 0] == 0.0
    assert arr[0, 1] == 1.0
    assert arr[1, 0] == pytest.approx(32768 / 65535)
    assert arr[1, 1] == pytest.approx(16384 / 65535)


def test_color_converts_by_luma():
    # pure red, green, blue pixels; weights 0.299 / 0.587 / 0.114
    data = b"P3 3 1 255\n255 0 0  0 255 0  0 0 255\n"
    arr = netpbm.decode(data)
    assert arr[0, 0] == pytest.approx(0.299)
    assert arr[0, 1] == pytest.approx(0.587)
    assert arr[0, 2] == pytest.approx(0.114)


def test_p6_binary_luma():
    data = b"P6 1 1 255\n" + bytes([255, 255, 255])
    arr = netpbm.decode(data)
    assert arr[0, 0] == pytest.approx(1.0)


def test_bad_magic_reports_offset():
    with pytest.raises(DecodeError) as exc:
        netpbm.decode(b"P7 1 1 255\n\x00")
    assert "P7" in str(exc.value)
    assert "byte 0" in str(exc.value)


def test_truncated_raster_reports_offset():
    with pytest.raises(DecodeError) as exc:
        netpbm.decode(b"P5 2 2 255\n\x00\x00\x00")
    assert "truncated" in str(exc.value)
    assert "byte" in str(exc.value)


def test_maxval_out_of_range():
    with pytest.raises(DecodeError):
        netpbm.decode(b"P5 2 2 70000\n" + b"\x00" * 8)
    with pytest.raises(DecodeError):
        netpbm.decode(b"P5 2 2 0\n")


def test_bad_ascii_sample():
    with pytest.raises(DecodeError) as exc:
        netpbm.decode(b"P2 2 2 255\n1 2 3 foo")
    assert "foo" in str(exc.value)


def test_zero_dimension_rejected():
    with pytest.raises(DecodeError):
        netpbm.decode(b"P5 0 2 255\n")


def test_sample_above_maxval_rejected():
    with pytest.raises(DecodeError):
        netpbm.decode(b"P2 1 1 100\n101\n")


def test_pgm_round_trip(tmp_path):
    rng = np.random.RandomState(0)
    gray = rng.randint(0, 256, size=(5, 7)) / 255.0
    path = tmp_path / "out.pgm"
    netpbm.write_pgm(path, gray)
    back = netpbm.read(path)
    assert back.shape == (5, 7)
    assert np.allclose(back, gray)


def test_ppm_round_trip_applies_luma(tmp_path):
    rgb = np.zeros((2, 2, 3), dtype=np.uint8)
    rgb[0, 0] = (255, 0, 0)
    rgb[1, 1] = (0, 0, 255)
    path = tmp_path / "out.ppm"
    netpbm.write_ppm(path, rgb)
    back = netpbm.read(path)
    assert back[0, 0] == pytest.approx(0.299)
    assert back[1, 1] == pytest.approx(0.114)
    assert back[0, 1] == 0.0
