import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from llgsav import experiments as ex
from llgsav import io
from llgsav import model
from llgsav import spectral as sp
from llgsav.errors import UsageError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


class TestSnapshots:
    def test_round_trip_bit_exact(self, tmp_path, rng):
        g = sp.Grid((8, 12), (1.0, 2.5), (-0.5, 0.25))
        m = rng.standard_normal((3, 8, 12))
        path = tmp_path / "a.llf"
        io.write_snapshot(path, m, g, 0.125)
        snap = io.read_snapshot(path)
        assert np.array_equal(snap.m, m)
        assert snap.t == 0.125
        assert snap.grid == g
        assert io.meta_path(path).exists()

    def test_one_dimensional(self, tmp_path, rng):
        g = sp.Grid((16,), (3.0,))
        m = rng.standard_normal((3, 16))
        io.write_snapshot(tmp_path / "b.llf", m, g, 1.0)
        assert np.array_equal(io.read_snapshot(tmp_path / "b.llf").m, m)

    def test_header_layout(self, tmp_path):
        g = sp.Grid.square(4, 1.0)
        io.write_snapshot(tmp_path / "c.llf", np.zeros((3, 4, 4)), g, 2.0)
        raw = (tmp_path / "c.llf").read_bytes()
        assert raw[:4] == b"LLF1"
        assert len(raw) == io.HEADER.size + 8 * 48

    def test_bad_magic(self, tmp_path):
        (tmp_path / "x.llf").write_bytes(b"NOPE" + bytes(60))
        with pytest.raises(UsageError, match="magic"):
            io.read_snapshot(tmp_path / "x.llf")

    def test_truncated(self, tmp_path):
        g = sp.Grid.square(4, 1.0)
        path = tmp_path / "t.llf"
        io.write_snapshot(path, np.zeros((3, 4, 4)), g, 0.0)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(UsageError):
            io.read_snapshot(path)

    def test_wrong_shape(self, tmp_path):
        with pytest.raises(UsageError):
            io.write_snapshot(tmp_path / "w.llf", np.zeros((3, 4, 5)), sp.Grid.square(4), 0.0)

    def test_missing_file_has_path(self, tmp_path):
        with pytest.raises(OSError, match="missing.llf"):
            io.read_snapshot(tmp_path / "missing.llf")

    def test_directory_reference(self, tmp_path):
        g = sp.Grid.square(4)
        for t in (0.1, 0.2):
            io.write_snapshot(tmp_path / io.snapshot_name(t), np.full((3, 4, 4), t), g, t)
        ref = io.read_snapshot_dir(tmp_path)
        assert sorted(ref) == [0.1, 0.2] and ref[0.2][0, 0, 0] == 0.2

    def test_empty_directory(self, tmp_path):
        with pytest.raises(UsageError):
            io.read_snapshot_dir(tmp_path)


finite = st.floats(allow_nan=False, allow_infinity=True, width=64)


class TestCsv:
    @given(st.lists(st.tuples(st.integers(0, 10**9), finite, finite), min_size=1, max_size=20))
    def test_round_trip_exact(self, rows):
        import tempfile

        with tempfile.TemporaryDirectory() as d:
            path = Path(d) / "x.csv"
            io.write_csv(path, ["n", "a", "b"], rows)
            schema, header, back = io.read_csv(path)
        assert schema == io.TIMESERIES_SCHEMA
        assert header == ["n", "a", "b"]
        for r, b in zip(rows, back):
            assert b[0] == r[0] and isinstance(b[0], int)
            for u, v in zip(r[1:], b[1:]):
                assert isinstance(v, float)
                assert u == v or (math.isnan(u) and math.isnan(v))

    def test_timeseries(self, tmp_path):
        res = ex.run_simulation(ex.blowup_config(modes=16, dt=1e-4, T=1e-3, cadence=2))
        path = tmp_path / "ts.csv"
        io.write_timeseries(path, res.rows)
        back = io.read_timeseries(path)
        assert back == res.rows
        first = path.read_text().splitlines()[0]
        assert first.startswith("# ") and "timeseries/1" in first

    def test_errors(self, tmp_path):
        rec = ex.ErrorRecord(1e-3, {v: {"linf_h1": 0.1 / 3, "l2_h2": 2.0 ** -20} for v in ex.VARIANTS}, 1e-7)
        io.write_errors(tmp_path / "e.csv", [rec, rec])
        back = io.read_errors(tmp_path / "e.csv")
        assert back == [rec, rec]

    def test_wrong_schema(self, tmp_path):
        io.write_csv(tmp_path / "x.csv", ["a"], [(1.0,)], schema="something-else/9")
        with pytest.raises(UsageError):
            io.read_timeseries(tmp_path / "x.csv")


class TestConfig:
    @pytest.mark.parametrize("name", ["manufactured.cfg", "blowup.cfg", "self_reference.cfg", "uniform.cfg"])
    def test_shipped_configs_parse(self, name):
        cf = io.load_config(CONFIGS / name)
        assert cf.run.problem == name.split(".")[0]

    def test_values(self):
        cf = io.load_config(CONFIGS / "blowup.cfg")
        p = cf.run.params
        assert (p.S, p.beta, p.K0, p.w, p.order, p.dt) == (0.5, 1.0, 0.1, 1, 2, 1e-5)
        assert cf.run.snapshot_times == ex.BLOWUP_TIMES
        assert cf.directory == "out/blowup"

    @pytest.mark.parametrize("name", ["manufactured.cfg", "blowup.cfg", "self_reference.cfg", "uniform.cfg"])
    def test_round_trip_idempotent(self, name):
        cf = io.load_config(CONFIGS / name)
        text = io.serialize_config(cf)
        again = io.parse_config(text)
        assert io.serialize_config(again) == text
        assert again.run == cf.run

    def test_unknown_key_named(self):
        text = "[params]\ndt = 1e-3\nstepsize = 2\n"
        with pytest.raises(io.ConfigError, match=r"<config>:3: unknown key 'stepsize'"):
            io.parse_config(text)

    def test_unknown_section(self):
        with pytest.raises(io.ConfigError, match="unknown section"):
            io.parse_config("[physics]\nx = 1\n")

    def test_physical_validation(self):
        with pytest.raises(io.ConfigError, match="K0"):
            io.parse_config("[params]\nK0 = -1\n")

    def test_bad_value_has_line(self):
        with pytest.raises(io.ConfigError, match=r":2: bad value for params.order"):
            io.parse_config("[params]\norder = two\n")

    def test_grid_arity(self):
        with pytest.raises(io.ConfigError):
            io.parse_config("[grid]\ndims = 2\nmodes = 16\n")

    def test_syntax_error(self):
        with pytest.raises(io.ConfigError):
            io.parse_config("dt = 1\n")

    def test_relative_initial_resolved(self, tmp_path):
        (tmp_path / "run.cfg").write_text("[problem]\nkind = custom\ninitial = start.llf\n")
        cf = io.load_config(tmp_path / "run.cfg")
        assert cf.run.options["initial"] == str(tmp_path / "start.llf")

    def test_meta_records_config(self, tmp_path):
        cf = io.load_config(CONFIGS / "uniform.cfg")
        target = io.write_meta(tmp_path / "x.csv", cf, wall_time=1.5)
        meta = io.read_meta(tmp_path / "x.csv")
        assert target.suffix == ".meta"
        assert meta["config"]["params"]["order"] == 3
        assert meta["wall_time_s"] == 1.5 and "code_version" in meta

    def test_custom_problem_from_snapshot(self, tmp_path):
        g = sp.Grid.square(16)
        m0 = model.self_reference_initial_data(*g.coords())
        io.write_snapshot(tmp_path / "start.llf", m0, g, 0.0)
        (tmp_path / "run.cfg").write_text(
            "[params]\ndt = 1e-3\nT = 2e-3\n[problem]\nkind = custom\ninitial = start.llf\n")
        cf = io.load_config(tmp_path / "run.cfg")
        res = ex.run_simulation(cf.run)
        ref = ex.run_simulation(ex.RunConfig(problem="self_reference", modes=16, params=cf.run.params))
        assert np.array_equal(res.m, ref.m)
