import json
import subprocess
import sys

import pytest

from slitlab.cli import main

# fixed-seed noisy run: value, absolute tolerance
GOLDEN_NOISY = {
    "max_abs_deviation": (0.009358286301276442, 1e-9),
    "mean_abs_deviation": (0.008997011951804577, 1e-9),
    "empirical_forbidden_fraction": (0.4439281350535553, 1e-9),
    "analytic_forbidden_fraction": (0.43968412725333966, 1e-12),
    "xi_coverage": (21.871525737980257, 1e-9),
    "window_deficit": (0.009209059276221065, 1e-12),
    "baseline_used": (0.0014999676607641945, 1e-12),
    "forbidden_fraction_baseline_sensitivity": (0.0009057948832600915, 1e-9),
}


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def noisy_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("noisy")
    assert run("simulate", "--out", root / "frames.slitfrm", "--quiet") == 0
    assert run("analyze", root / "frames.slitfrm", "--out", root / "out", "--quiet") == 0
    return root


class TestSimulate:
    def test_default_file(self, noisy_run):
        assert (noisy_run / "frames.slitfrm").stat().st_size == 76 + 8 * 1500 * 2048

    def test_summary_line(self, tmp_path, capsys):
        assert run("simulate", "--frames", 2, "--out", tmp_path / "f") == 0
        line = capsys.readouterr().out.strip()
        assert "M=2" in line and "N=2048" in line and "seed=42" in line and "peak=" in line

    def test_json_summary(self, tmp_path, capsys):
        assert run("--json", "simulate", "--frames", 1, "--out", tmp_path / "f") == 0
        assert json.loads(capsys.readouterr().out)["frames"] == 1

    def test_single_frame_from_config(self, tmp_path):
        cfg = tmp_path / "one.cfg"
        cfg.write_text("frames = 1\nframe_format = csv\n")
        assert run("simulate", "--config", cfg, "--out", tmp_path / "f.csv", "--quiet") == 0
        assert len((tmp_path / "f.csv").read_text().splitlines()) == 2

    def test_byte_identical(self, tmp_path):
        for name in ("a", "b"):
            assert run("simulate", "--frames", 5, "--seed", 9, "--out", tmp_path / name,
                       "--quiet") == 0
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()

    def test_seed_flag_changes_output(self, tmp_path):
        run("simulate", "--frames", 2, "--seed", 1, "--out", tmp_path / "a", "--quiet")
        run("simulate", "--frames", 2, "--seed", 2, "--out", tmp_path / "b", "--quiet")
        assert (tmp_path / "a").read_bytes() != (tmp_path / "b").read_bytes()

    def test_bad_config_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("frames = 2\nflux = 3\n")
        assert run("simulate", "--config", cfg, "--out", tmp_path / "f") == 2
        err = capsys.readouterr().err
        assert "'flux'" in err and "line 2" in err

    def test_capacity_exits_1(self, tmp_path):
        cfg = tmp_path / "cap.cfg"
        cfg.write_text("max_values = 1000\n")
        assert run("simulate", "--config", cfg, "--frames", 1, "--out", tmp_path / "f") == 1


class TestAnalyze:
    def test_outputs(self, noisy_run):
        out = noisy_run / "out"
        assert sorted(p.name for p in out.iterdir()) == ["density.csv", "pcurve.csv", "report.json"]

    def test_golden_noisy_report(self, noisy_run):
        report = json.loads((noisy_run / "out" / "report.json").read_text())
        for key, (value, tol) in GOLDEN_NOISY.items():
            assert report[key] == pytest.approx(value, abs=tol), key
        assert report["clamp_count"] == 81
        assert report["deviation_by_band"]["[2,5)"]["count"] == 141

    def test_noiseless_report(self, tmp_path):
        run("simulate", "--frames", 2, "--noiseless", "--out", tmp_path / "f", "--quiet")
        assert run("analyze", tmp_path / "f", "--out", tmp_path / "o", "--quiet") == 0
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert report["clamp_count"] == 100
        assert report["empirical_forbidden_fraction"] == pytest.approx(0.4397, abs=5e-3)

    def test_explicit_baseline(self, tmp_path):
        run("simulate", "--frames", 2, "--noiseless", "--out", tmp_path / "f", "--quiet")
        run("analyze", tmp_path / "f", "--baseline", 1.4e-3, "--out", tmp_path / "o", "--quiet")
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert report["baseline_used"] == 1.4e-3

    def test_configured_baseline_reported(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("baseline_voltage = 0.0014\nframes = 2\n")
        run("simulate", "--config", cfg, "--out", tmp_path / "f", "--quiet")
        run("analyze", tmp_path / "f", "--config", cfg, "--out", tmp_path / "o", "--quiet")
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert report["baseline_configured"] == 1.4e-3

    def test_truncated_file(self, tmp_path, capsys):
        run("simulate", "--frames", 2, "--out", tmp_path / "f", "--quiet")
        data = (tmp_path / "f").read_bytes()
        (tmp_path / "f").write_bytes(data[:1000])
        assert run("analyze", tmp_path / "f", "--out", tmp_path / "o") == 1
        assert "byte offset 1000" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert run("analyze", tmp_path / "nope", "--out", tmp_path / "o") == 1

    def test_bad_guard(self, tmp_path):
        run("simulate", "--frames", 1, "--out", tmp_path / "f", "--quiet")
        assert run("analyze", tmp_path / "f", "--guard-pixels", 3, "--out", tmp_path / "o") == 1


class TestCurve:
    def _rows(self, capsys, *argv):
        assert run("curve", *argv) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("#") and "right-continuous" in lines[0]
        return lines[1], [line.split(",") for line in lines[2:]]

    def test_default_grid(self, capsys):
        header, rows = self._rows(capsys)
        assert header == "xi,p_planewave,p_step"
        assert len(rows) == 501
        assert rows[0] == ["0.0", "0.0", "0.0"]
        at_one = rows[100]
        assert float(at_one[0]) == 1.0 and float(at_one[2]) == 1.0
        assert float(at_one[1]) == pytest.approx(0.7737, abs=1e-4)
        assert float(rows[99][2]) == 0.0
        assert float(rows[-1][0]) == 5.0

    def test_bound_column(self, tmp_path, capsys):
        table = tmp_path / "bound.csv"
        table.write_text("xi,p\n0,0\n2,0.95\n")
        header, rows = self._rows(capsys, "--xi-max", 4, "--samples", 5, "--bound", table)
        assert header.endswith(",p_bound")
        assert [r[3] for r in rows] == ["0.0", "0.475", "0.95", "", ""]

    def test_file_output_deterministic(self, tmp_path):
        run("curve", "--out", tmp_path / "a.csv", "--quiet")
        run("curve", "--out", tmp_path / "b.csv", "--quiet")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    @pytest.mark.parametrize("argv", [("--xi-max", 0), ("--samples", 1)])
    def test_bad_arguments(self, argv):
        assert run("curve", *argv) == 2

    def test_bad_bound_table(self, tmp_path):
        table = tmp_path / "bound.csv"
        table.write_text("xi,p\n0,0\n1,x\n")
        assert run("curve", "--bound", table) == 2


class TestReport:
    def test_headline(self, noisy_run, capsys):
        assert run("report", noisy_run / "out" / "report.json") == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("analytic forbidden fraction: 0.4396841272533")
        assert any("window deficit" in line for line in out)
        assert sum("xi in" in line for line in out) == 4

    def test_two_reports_labeled(self, noisy_run, tmp_path, capsys):
        first = noisy_run / "out" / "report.json"
        second = tmp_path / "copy.json"
        second.write_bytes(first.read_bytes())
        assert run("report", first, second) == 0
        out = capsys.readouterr().out
        assert f"[{first}]" in out and f"[{second}]" in out

    def test_json(self, noisy_run, capsys):
        assert run("report", noisy_run / "out" / "report.json", "--json") == 0
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["reports"]) == 1
        assert payload["reports"][0]["path"].endswith("report.json")
        assert payload["reports"][0]["label"] == "empirical"

    def test_no_arguments(self, capsys):
        with pytest.raises(SystemExit) as info:
            run("report")
        assert info.value.code == 2

    @pytest.mark.parametrize("text", ["{not json", '{"max_abs_deviation": 1}', "[]"])
    def test_malformed(self, tmp_path, text):
        path = tmp_path / "r.json"
        path.write_text(text)
        assert run("report", path) == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "slitlab", "curve", "--samples", "3"],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1] == "xi,p_planewave,p_step"
    proc = subprocess.run([sys.executable, "-m", "slitlab", "frobnicate"], capture_output=True,
                          text=True, cwd=tmp_path)
    assert proc.returncode == 2
