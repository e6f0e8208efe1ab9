from pathlib import Path

import pytest

from llgsav import io
from llgsav.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestRun:
    def test_zero_horizon_writes_initial_row(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["run", str(CONFIGS / "uniform.cfg"), "--output", str(out)])
        assert code == EXIT_OK
        rows = io.read_timeseries(out / "timeseries.csv")
        assert len(rows) == 1 and rows[0].step == 0 and rows[0].E == 0.0
        assert (out / "timeseries.meta").exists() and (out / "final.llf").exists()
        assert "steps=0" in capsys.readouterr().out

    def test_overrides(self, tmp_path):
        out = tmp_path / "o"
        code = main(["run", str(CONFIGS / "manufactured.cfg"), "--modes", "16", "--T", "0.01",
                     "--dt", "1e-3", "--order", "3", "--cadence", "5", "--output", str(out)])
        assert code == EXIT_OK
        rows = io.read_timeseries(out / "timeseries.csv")
        assert [r.step for r in rows] == [0, 5, 10]
        meta = io.read_meta(out / "timeseries.csv")
        assert meta["config"]["params"]["order"] == 3 and meta["config"]["grid"]["modes"] == [16, 16]

    def test_invalid_override(self, tmp_path, capsys):
        assert main(["run", str(CONFIGS / "uniform.cfg"), "--K0", "-2"]) == EXIT_USAGE
        assert "K0" in capsys.readouterr().err

    def test_malformed_config(self, tmp_path, capsys):
        path = _write(tmp_path, "[params]\ndt = 1e-3\n\n[output]\ncadense = 3\n")
        assert main(["run", path]) == EXIT_USAGE
        err = capsys.readouterr().err
        assert "run.cfg:5" in err and "cadense" in err

    def test_missing_config(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.cfg")]) == EXIT_USAGE

    def test_solver_failure(self, tmp_path, capsys):
        path = _write(tmp_path, "[grid]\nmodes = 16, 16\n[params]\nbeta = 1\norder = 1\ndt = 1e-2\nT = 0.05\n"
                                "mode = semi_implicit\n[problem]\nkind = blowup\n"
                                "[solver]\ntol = 1e-15\nmax_iter = 1\nrestart = 1\n"
                                f"[output]\ndirectory = {tmp_path / 'o'}\n")
        assert main(["run", path]) == EXIT_RUNTIME
        assert "at step 1" in capsys.readouterr().err


class TestConverge:
    def test_prints_slope_and_writes_errors(self, tmp_path, capsys):
        out = tmp_path / "c"
        code = main(["converge", str(CONFIGS / "manufactured.cfg"), "--order", "2", "--modes", "16",
                     "--T", "0.1", "--dts", "2e-3,1e-3,5e-4", "--output", str(out)])
        assert code == EXIT_OK
        recs = io.read_errors(out / "errors.csv")
        assert [r.dt for r in recs] == [2e-3, 1e-3, 5e-4]
        last = capsys.readouterr().out.strip().splitlines()[-1]
        slope = float(last.split("slope(linf_h1)=")[1].split()[0])
        assert abs(slope - 2) < 0.2

    def test_fine_run_reference_from_disk(self, tmp_path, capsys):
        ref = tmp_path / "ref"
        cfg = _write(tmp_path, "[grid]\nmodes = 16, 16\n[params]\nw = 2\norder = 4\ndt = 2.5e-5\nT = 0.02\n"
                               "[problem]\nkind = self_reference\n"
                               f"[output]\ndirectory = {ref}\ncadence = 800\n"
                               "snapshot_times = 0.001, 0.002, 0.003, 0.004, 0.005, 0.006, 0.007, 0.008, 0.009, "
                               "0.01, 0.011, 0.012, 0.013, 0.014, 0.015, 0.016, 0.017, 0.018, 0.019, 0.02\n")
        assert main(["run", cfg]) == EXIT_OK
        (ref / "final.llf").unlink()
        (ref / "final.meta").unlink()
        code = main(["converge", cfg, "--order", "2", "--dts", "1e-3,5e-4,2.5e-4",
                     "--reference", str(ref), "--output", str(tmp_path / "c")])
        assert code == EXIT_OK
        last = capsys.readouterr().out.strip().splitlines()[-1]
        assert abs(float(last.split("slope(linf_h1)=")[1].split()[0]) - 2) < 0.2

    def test_too_few_steps(self, tmp_path):
        assert main(["converge", str(CONFIGS / "manufactured.cfg"), "--dts", "1e-3,5e-4",
                     "--output", str(tmp_path)]) == EXIT_USAGE


class TestBlowupAndCheck:
    def test_blowup_small(self, tmp_path, capsys):
        out = tmp_path / "b"
        code = main(["blowup", str(CONFIGS / "blowup.cfg"), "--modes-list", "16,32", "--dt", "1e-4",
                     "--T", "2e-3", "--output", str(out)])
        assert code == EXIT_OK
        assert (out / "N16" / "timeseries.csv").exists() and (out / "N32" / "final.llf").exists()
        assert any(p.name.startswith("snapshot_t0.000000") for p in (out / "N32").iterdir())
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 3

    def test_check(self, capsys):
        assert main(["check"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.count("[PASS]") == 5 and "[FAIL]" not in out

    def test_no_command(self):
        with pytest.raises(SystemExit):
            main([])
