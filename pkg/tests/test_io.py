import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from plumetomo import io
from plumetomo.evaluation import InSituDetection
from plumetomo.exceptions import ParseError, ValidationError
from plumetomo.grid import BeamMeasurement, ConcentrationField, make_grid
from plumetomo.plume import GasSource, Scene
from plumetomo.wind import WindSeries

finite = st.floats(-1e6, 1e6, allow_nan=False)
positive = st.floats(0, 1e6, allow_nan=False)
tmp_ok = settings(deadline=None, max_examples=40, suppress_health_check=[HealthCheck.function_scoped_fixture])


def write(path, text):
    path.write_bytes(text.encode("utf-8"))
    return path


@tmp_ok
@given(st.lists(st.tuples(finite, finite, finite, finite, finite, finite, finite, positive), min_size=1, max_size=20))
def test_measurements_round_trip(tmp_path, rows):
    beams = [BeamMeasurement(r[0], r[1:4], (r[4] + 1.0, *r[5:7]), r[7]) for r in rows]
    p = tmp_path / "m.csv"
    io.write_measurements(beams, p)
    back = io.read_measurements(p)
    assert back == beams
    first = p.read_bytes()
    io.write_measurements(back, p)
    assert p.read_bytes() == first


@tmp_ok
@given(st.lists(st.floats(-1e5, 1e5), min_size=1, max_size=30, unique=True),
       st.data())
def test_wind_round_trip(tmp_path, times, data):
    times = sorted(times)
    w = data.draw(st.lists(st.tuples(finite, finite), min_size=len(times), max_size=len(times)))
    series = WindSeries(times, w)
    p = tmp_path / "w.csv"
    io.write_wind(series, p, epoch="2024-05-01T10:00:00Z")
    assert p.read_text().startswith("# epoch=2024-05-01T10:00:00Z\n")
    back = io.read_wind(p)
    assert back == series
    first = p.read_bytes()
    io.write_wind(back, p, epoch="2024-05-01T10:00:00Z")
    assert p.read_bytes() == first


@tmp_ok
@given(st.lists(st.tuples(finite, finite, finite, finite, st.floats(0, 2000)), min_size=1, max_size=20))
def test_insitu_round_trip(tmp_path, rows):
    dets = [InSituDetection(*r) for r in rows]
    p = tmp_path / "i.csv"
    io.write_insitu(dets, p)
    assert io.read_insitu(p) == dets
    first = p.read_bytes()
    io.write_insitu(io.read_insitu(p), p)
    assert p.read_bytes() == first


@tmp_ok
@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_map_round_trip(tmp_path, nx, ny, data):
    g = make_grid(-3.5, 2.25, 0.5, nx, ny, 1.5)
    values = data.draw(st.lists(st.floats(0, 1e5), min_size=nx * ny, max_size=nx * ny))
    p = tmp_path / "map.csv"
    io.write_map(ConcentrationField(g, values), p)
    back = io.read_map(p)
    assert back.grid == g
    np.testing.assert_array_equal(back.values, values)
    first = p.read_bytes()
    io.write_map(back, p)
    assert p.read_bytes() == first


def test_map_layout(tmp_path):
    p = tmp_path / "map.csv"
    io.write_map(ConcentrationField(make_grid(0, 0, 1, 2, 2), [1.0, 2.0, 3.0, 4.0]), p)
    lines = p.read_text().splitlines()
    assert len(lines) == 9
    assert all(line.startswith("# ") for line in lines[:7])
    values = [float(v) for line in lines[7:] for v in line.split(",")]
    assert sorted(values) == [1, 2, 3, 4]
    # row-major in linear-index order: southern row first
    assert lines[7:] == ["1.0,2.0", "3.0,4.0"]


def test_map_count_mismatch(tmp_path):
    p = tmp_path / "map.csv"
    io.write_map(ConcentrationField(make_grid(0, 0, 1, 2, 2), [1.0, 2.0, 3.0, 4.0]), p)
    write(p, p.read_text().rsplit("\n", 2)[0] + "\n")
    with pytest.raises(ParseError):
        io.read_map(p)


def test_measurements_500_rows(tmp_path):
    header = io.MEASUREMENTS_HEADER
    rows = "".join(f"{k * 0.2},0,0,1.5,10,{k % 7},1.5,{1000 + k}\n" for k in range(500))
    assert len(io.read_measurements(write(tmp_path / "m.csv", header + "\n" + rows))) == 500


def test_measurements_empty(tmp_path):
    assert io.read_measurements(write(tmp_path / "m.csv", io.MEASUREMENTS_HEADER + "\n")) == []


def test_short_row_names_line(tmp_path):
    text = io.MEASUREMENTS_HEADER + "\n0,0,0,1.5,10,0,1.5,1000\n0.2,0,0,1.5,10,0,1.5\n"
    with pytest.raises(ParseError) as err:
        io.read_measurements(write(tmp_path / "m.csv", text))
    assert err.value.lineno == 3
    assert ":3:" in str(err.value)


@pytest.mark.parametrize("bad", ["abc", "nan", "inf", "1e999", "", "0x10", "1,5"])
def test_bad_numbers_rejected(tmp_path, bad):
    text = io.WIND_HEADER + f"\n0,1,0\n1,{bad},0\n"
    with pytest.raises(ParseError) as err:
        io.read_wind(write(tmp_path / "w.csv", text))
    assert err.value.lineno == 3


def test_negative_value_strict(tmp_path):
    p = write(tmp_path / "m.csv", io.MEASUREMENTS_HEADER + "\n0,0,0,1.5,10,0,1.5,-5\n")
    with pytest.raises(ValidationError):
        io.read_measurements(p)
    assert io.read_measurements(p, strict=False)[0].value == -5


def test_bad_header(tmp_path):
    with pytest.raises(ParseError) as err:
        io.read_wind(write(tmp_path / "w.csv", "t,wx,wy\n0,1,0\n"))
    assert err.value.lineno == 1


def test_crlf_rejected(tmp_path):
    with pytest.raises(ParseError):
        io.read_wind(write(tmp_path / "w.csv", io.WIND_HEADER + "\r\n0,1,0\r\n"))


def test_wind_sorted_on_read(tmp_path):
    series = io.read_wind(write(tmp_path / "w.csv", io.WIND_HEADER + "\n2,3,0\n0,1,0\n1,2,0\n"))
    np.testing.assert_array_equal(series.t, [0, 1, 2])
    np.testing.assert_array_equal(series.w[:, 0], [1, 2, 3])


def test_wind_duplicate_timestamp(tmp_path):
    with pytest.raises(ValidationError) as err:
        io.read_wind(write(tmp_path / "w.csv", io.WIND_HEADER + "\n0,1,0\n1,2,0\n1,3,0\n"))
    assert err.value.lineno == 4


def test_insitu_over_range(tmp_path):
    with pytest.raises(ValidationError) as err:
        io.read_insitu(write(tmp_path / "i.csv", io.INSITU_HEADER + "\n0,1,1,1.5,450\n1,1,1,1.5,2500\n"))
    assert err.value.lineno == 3


def test_pgm_mapping(tmp_path):
    g = make_grid(0, 0, 1, 3, 2)
    p = tmp_path / "m.pgm"
    io.write_pgm(ConcentrationField(g, [0, 50, 100, 150, 100, 0]), p, 0, 100)
    assert p.read_bytes().startswith(b"P5\n3 2\n65535\n")
    px = io.read_pgm(p)
    # north row on top
    np.testing.assert_array_equal(px[0], [65535, 65535, 0])
    assert px[1, 0] == 0
    assert abs(px[1, 1] - 32768) <= 1
    io.write_pgm(ConcentrationField(g, np.full(6, 7.0)), p, 7, 8)
    assert not io.read_pgm(p).any()
    with pytest.raises(ValueError):
        io.write_pgm(ConcentrationField(g, np.zeros(6)), p, 1, 1)


def test_scene_round_trip(tmp_path):
    scene = Scene((GasSource(1.5, -2, 300, 2.5, 3), GasSource(0, 0, 50, 1, 2)), 415.5, None, 9)
    p = tmp_path / "scene.txt"
    io.write_scene(scene, p)
    assert io.read_scene(p) == scene
    gusty = scene.with_wind(WindSeries([0, 1, 2], [(1, 0), (2, 0), (1, 1)]))
    io.write_scene(gusty, p)
    assert io.read_scene(p).wind == gusty.wind


def test_scene_errors(tmp_path):
    with pytest.raises(ParseError) as err:
        io.read_scene(write(tmp_path / "s.txt", "background=400\nsource=1,2,3\n"))
    assert err.value.lineno == 2
    with pytest.raises(ValidationError):
        io.read_scene(write(tmp_path / "s.txt", "source=0,0,100,-1,3\n"))
    with pytest.raises(ParseError):
        io.read_scene(write(tmp_path / "s.txt", "colour=blue\n"))


def test_report_formats(tmp_path):
    text = io.write_report({"compensation": "off", "converged": True, "rms": 1.5}, tmp_path / "r.txt",
                           tmp_path / "r.csv")
    assert text == "compensation: off\nconverged: true\nrms: 1.5\n"
    assert (tmp_path / "r.csv").read_text() == "key,value\ncompensation,off\nconverged,true\nrms,1.5\n"
