import numpy as np
import pytest

from ramanem.errors import ParseError
from ramanem.grid import AltitudeGrid, ExtinctionProfile, LidarSignal, build_grid
from ramanem.io import (
    parse_profile_file,
    parse_signal_file,
    read_config,
    read_table,
    write_config,
    write_profile_file,
    write_signal_file,
    write_table,
)


def write(tmp_path, text, name="sig.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestSignalFiles:
    def test_three_rows(self, tmp_path):
        p = write(tmp_path, "z_m,P,sigma\n15,1.0,0.1\n30,0.5,0.1\n45,0.25,0.1\n")
        s = parse_signal_file(p)
        assert s.grid.n == 3 and s.grid.dz == 15 and s.grid.z_min == 15
        np.testing.assert_array_equal(s.P, [1.0, 0.5, 0.25])

    def test_decreasing_row_is_cited(self, tmp_path):
        rows = [15, 30, 45, 60, 50, 75]
        text = "z_m,P,sigma\n" + "".join(f"{z},1,1\n" for z in rows)
        with pytest.raises(ParseError, match="row 5"):
            parse_signal_file(write(tmp_path, text))

    def test_non_uniform_is_cited(self, tmp_path):
        text = "z_m,P,sigma\n15,1,1\n30,1,1\n46,1,1\n60,1,1\n"
        with pytest.raises(ParseError, match="non-uniform"):
            parse_signal_file(write(tmp_path, text))

    def test_comments_and_blank_lines(self, tmp_path):
        clean = "z_m,P,sigma\n15,1.0,0.1\n30,0.5,0.1\n45,0.25,0.1\n"
        noisy = "# header comment\n\nz_m,P,sigma\n# inner\n15,1.0,0.1\n\n30,0.5,0.1\n   \n# x\n45,0.25,0.1\n\n"
        a = parse_signal_file(write(tmp_path, clean, "a.csv"))
        b = parse_signal_file(write(tmp_path, noisy, "b.csv"))
        np.testing.assert_array_equal(a.P, b.P)
        np.testing.assert_array_equal(a.sigma, b.sigma)
        assert a.grid.same_as(b.grid)

    def test_bad_field_reports_line(self, tmp_path):
        with pytest.raises(ParseError, match=":3:"):
            parse_signal_file(write(tmp_path, "z_m,P,sigma\n15,1,1\n30,oops,1\n"))

    def test_missing_column(self, tmp_path):
        with pytest.raises(ParseError, match="sigma"):
            parse_signal_file(write(tmp_path, "z_m,P\n15,1\n30,1\n"))

    def test_round_trip_exact(self, tmp_path, rng):
        g = AltitudeGrid(7.5, 7.5, 123, "trapezoid")
        s = LidarSignal(g, rng.uniform(0, 1, g.n), rng.uniform(0.1, 1, g.n), 532.0)
        write_signal_file(tmp_path / "a.csv", s)
        back = parse_signal_file(tmp_path / "a.csv")
        np.testing.assert_array_equal(back.P, s.P)
        np.testing.assert_array_equal(back.sigma, s.sigma)
        assert back.grid.same_as(g) and back.grid.quadrature == "trapezoid"
        assert back.wavelength == 532.0
        write_signal_file(tmp_path / "b.csv", back)
        assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()


class TestProfileFiles:
    def test_round_trip_with_band(self, tmp_path, rng):
        g = build_grid(15, 900, 15)
        a = rng.uniform(0, 1e-4, g.n)
        p = ExtinctionProfile(g, a, a - 1e-5, a + 1e-5)
        write_profile_file(tmp_path / "p.csv", p)
        back = parse_profile_file(tmp_path / "p.csv")
        np.testing.assert_array_equal(back.alpha, a)
        np.testing.assert_array_equal(back.band_high, a + 1e-5)

    def test_without_band(self, tmp_path):
        g = build_grid(15, 60, 15)
        write_profile_file(tmp_path / "p.csv", ExtinctionProfile(g, np.ones(g.n)))
        back = parse_profile_file(tmp_path / "p.csv")
        assert back.band_low is None


class TestTablesAndConfig:
    def test_table_meta_and_lines(self, tmp_path):
        write_table(tmp_path / "t.csv", ["a", "b"], [[1, 2.5], [3, 4.5]], meta={"k": 0.1})
        cols, data, meta, lines = read_table(tmp_path / "t.csv")
        assert cols == ["a", "b"] and meta == {"k": "0.1"} and lines == [3, 4]
        np.testing.assert_array_equal(data, [[1, 2.5], [3, 4.5]])

    def test_no_header(self, tmp_path):
        with pytest.raises(ParseError):
            read_table(write(tmp_path, "# only comments\n"))

    def test_config_round_trip(self, tmp_path):
        vals = {"z_min": 15.0, "solver": "em", "plots": False, "n": 3}
        write_config(tmp_path / "c.txt", vals)
        assert read_config(tmp_path / "c.txt") == {k: str(v) for k, v in vals.items()}

    def test_config_comments_and_errors(self, tmp_path):
        p = write(tmp_path, "# c\nK = 3  # inline\n\nsolver=lm\n", "c.txt")
        assert read_config(p) == {"K": "3", "solver": "lm"}
        with pytest.raises(ParseError, match=":2:"):
            read_config(write(tmp_path, "K = 3\nbroken\n", "d.txt"))
