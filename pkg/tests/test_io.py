import json
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from halfsphere import io
from halfsphere.grid import Field, GridSpec
from halfsphere.radon import Sinogram, circle_directions


def small_field(rng, n=1, half=False):
    dims = (5,) * n + (7,)
    g = GridSpec(n, dims, (0.5,) * n + (0.25,), (-1.0,) * n + ((0.25,) if half else (-0.75,)))
    return Field(g, rng.standard_normal(dims), half_space=half)


@pytest.mark.parametrize("n,half", [(1, False), (1, True), (2, True)])
def test_field_round_trip(tmp_path, rng, n, half):
    f = small_field(rng, n, half)
    p = tmp_path / "f.pmt"
    io.write_field(p, f)
    g = io.read_field(p)
    assert g.grid == f.grid and g.half_space == f.half_space
    assert np.array_equal(g.values, f.values)
    assert p.read_bytes()[:4] == b"PMT1"
    assert not (tmp_path / "f.pmt.tmp").exists()


def test_field_header_layout(rng):
    f = small_field(rng)
    buf = io.encode_field(f)
    assert struct.unpack_from("<I", buf, 4) == (1,)
    assert struct.unpack_from("<2I", buf, 8) == (5, 7)
    assert struct.unpack_from("<2d", buf, 16) == (0.5, 0.25)
    assert struct.unpack_from("<2d", buf, 32) == (-1.0, -0.75)
    assert buf[48] == 0
    assert len(buf) == 49 + 8 * 35


@given(st.integers(1, 6), st.integers(2, 9), st.integers(0, 2**31 - 1))
def test_field_encoding_is_lossless(nx, ny, seed):
    rng = np.random.default_rng(seed)
    g = GridSpec(1, (nx + 1, ny), (0.1, 0.01), (-0.3, 0.01))
    f = Field(g, rng.standard_normal(g.dims) * 10.0 ** rng.integers(-300, 300))
    back = io.decode_field(io.encode_field(f))
    assert back.values.tobytes() == f.values.tobytes()


def test_sinogram_round_trip(tmp_path, rng):
    d, _ = circle_directions(6)
    s = Sinogram(1, d, -2.0, 0.125, rng.standard_normal((6, 33)))
    p = tmp_path / "s.pms"
    io.write_sinogram(p, s)
    back = io.read_sinogram(p)
    assert np.array_equal(back.directions, s.directions)
    assert np.array_equal(back.values, s.values)
    assert (back.p0, back.dp, back.n) == (s.p0, s.dp, s.n)
    assert isinstance(io.read_any(p), Sinogram)
    raw = p.read_bytes()
    assert raw[:4] == b"PMS1"
    assert struct.unpack_from("<3I2d", raw, 4) == (1, 6, 33, -2.0, 0.125)
    # first direction's components come before its samples
    assert struct.unpack_from("<2d", raw, 32) == tuple(s.directions[0])


def test_format_errors(rng):
    f = small_field(rng)
    buf = io.encode_field(f)
    with pytest.raises(io.FormatError):
        io.decode_field(b"XXXX" + buf[4:])
    with pytest.raises(io.FormatError):
        io.decode_field(buf[:-8])
    with pytest.raises(io.FormatError):
        io.decode_field(buf[:10])
    with pytest.raises(io.FormatError):
        io.decode_sinogram(buf)
    with pytest.raises(io.FormatError):
        io.decode_field(b"PMT1" + struct.pack("<I", 0))


def test_pgm_preview_n1(tmp_path, rng):
    f = small_field(rng)
    written = io.export_pgm(f, tmp_path / "prev.pgm")
    assert [w.name for w in written] == ["prev.pgm"]
    img = io.read_pgm(written[0])
    assert img.shape == (7, 5)
    side = json.loads((tmp_path / "prev.json").read_text())
    assert side == {"min": float(f.values.min()), "max": float(f.values.max()), "width": 5, "height": 7}
    assert img.min() == 0 and img.max() == 65535
    # top image row is the highest y, left column the smallest x
    v = f.values
    i, j = np.unravel_index(np.argmax(v), v.shape)
    assert img[6 - j, i] == 65535


def test_pgm_preview_n2_writes_three_slices(tmp_path, rng):
    f = small_field(rng, n=2, half=True)
    written = io.export_pgm(f, tmp_path / "vol.pgm")
    assert sorted(w.name for w in written) == ["vol_x0.pgm", "vol_x1.pgm", "vol_y.pgm"]
    for w in written:
        assert w.with_suffix(".json").exists()
        io.read_pgm(w)


def test_pgm_of_constant_image():
    data, lo, hi = io.pgm_bytes(np.full((2, 3), 4.0))
    assert lo == hi == 4.0
    assert data.startswith(b"P5\n3 2\n65535\n")
    assert data.endswith(b"\x00" * 12)
    with pytest.raises(ValueError):
        io.pgm_bytes(np.zeros(4))


def test_dump_json_is_sorted_and_exact(tmp_path):
    text = io.dump_json({"b": 0.1 + 0.2, "a": [1, 2]}, tmp_path / "r.json")
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text)["b"] == 0.1 + 0.2
    assert (tmp_path / "r.json").read_text() == text
