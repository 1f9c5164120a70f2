import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pptnqfe.output import Series, read_csv, rng_stream, write_csv, write_svg


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_csv_round_trip_is_exact(values):
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as tmp:
        path = write_csv(Path(tmp) / "a.csv", ["i", "v"], [(i, v) for i, v in enumerate(values)])
        header, rows = read_csv(path)
    assert header == ["i", "v"]
    assert [float(r[1]) for r in rows] == values
    assert [int(r[0]) for r in rows] == list(range(len(values)))


def test_csv_uses_crlf_and_quotes(tmp_path):
    path = write_csv(tmp_path / "sub" / "b.csv", ["name", "x"], [("a,b", 0.1), ("c", True)])
    raw = path.read_bytes()
    assert raw == b'name,x\r\n"a,b",0.10000000000000001\r\nc,1\r\n'


def test_csv_arity_mismatch(tmp_path):
    with pytest.raises(ValueError, match="row 1"):
        write_csv(tmp_path / "c.csv", ["a", "b"], [(1, 2), (3,)])


def test_csv_io_error_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        write_csv(blocker / "x.csv", ["a"], [(1,)])
    with pytest.raises(OSError, match="missing.csv"):
        read_csv(tmp_path / "missing.csv")


def test_svg_is_well_formed(tmp_path):
    path = write_svg(
        tmp_path / "p.svg",
        [Series("line <1>", [0, 1, 2], [0, 1, 4]), Series("pts", [0.5], [2.0], "scatter")],
        title="t & u",
    )
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg")
    tags = {el.tag.split("}")[1] for el in root.iter()}
    assert {"polyline", "circle", "text"} <= tags
    assert "http" not in path.read_text().replace("http://www.w3.org/2000/svg", "")


def test_svg_empty_series(tmp_path):
    root = ET.parse(write_svg(tmp_path / "e.svg", [])).getroot()
    assert root.tag.endswith("svg")
    ET.parse(write_svg(tmp_path / "f.svg", [Series("nan", [np.nan], [np.nan])]))


def test_rng_streams_are_independent_and_reproducible():
    a = rng_stream(5, "pde").random(4)
    np.testing.assert_array_equal(a, rng_stream(5, "pde").random(4))
    assert not np.allclose(a, rng_stream(5, "regress").random(4))
    assert not np.allclose(a, rng_stream(6, "pde").random(4))
    assert isinstance(rng_stream(2**64 - 1, "classify").bit_generator, np.random.PCG64)
    with pytest.raises(ValueError):
        rng_stream(-1, "pde")
    with pytest.raises(KeyError):
        rng_stream(0, "nope")
