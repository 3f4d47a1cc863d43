import io
import json
import subprocess
import sys

import numpy as np
import pytest

from constraint_inference.cli import main
from constraint_inference.io import load_params, load_segment
from constraint_inference.synthetic import MotionProfile

N_DEFAULT = MotionProfile().n_samples


def run(*argv):
    out = io.StringIO()
    code = main(list(map(str, argv)), out=out)
    return code, out.getvalue()


@pytest.fixture(scope="module")
def drawer(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "drawer.csv"
    code, _ = run("generate", "--model", "prismatic", "--params", "drawer", "--seed", "1", "--out", path)
    assert code == 0
    return path


class TestGenerate:
    def test_stdout_is_loadable_csv(self, tmp_path):
        code, text = run("generate", "--model", "planar", "--params", "whiteboard_eraser", "--noiseless")
        assert code == 0
        path = tmp_path / "seg.csv"
        path.write_text(text)
        assert len(load_segment(path)) == N_DEFAULT

    def test_profile_file_and_json(self, tmp_path):
        prof = tmp_path / "p.json"
        prof.write_text('{"duration": 1.0, "sample_rate": 30}')
        out = tmp_path / "seg.json"
        code, text = run("generate", "--model", "fixed_point", "--params", "ball_joint",
                         "--profile", prof, "--out", out)
        assert code == 0 and "30 samples" in text
        assert json.loads(out.read_text())["format"] == "constraint-segment"

    def test_no_twist(self, tmp_path):
        code, text = run("generate", "--model", "prismatic", "--params", "drawer", "--no-twist")
        assert code == 0
        assert "vx" not in text.splitlines()[0]

    def test_json_to_stdout_is_usage_error(self):
        assert run("generate", "--model", "prismatic", "--params", "drawer", "--format", "json")[0] == 1

    def test_preset_kind_mismatch(self):
        assert run("generate", "--model", "planar", "--params", "drawer")[0] == 2


class TestClassify:
    def test_winner_and_report(self, drawer, tmp_path):
        report = tmp_path / "r.json"
        code, text = run("classify", drawer, "--report", report)
        assert code == 0
        assert text.startswith("winner: prismatic")
        doc = json.loads(report.read_text())
        assert doc["winner"] == "prismatic"
        for suffix in (".traces.csv", ".traces.png", ".votes.png"):
            assert (tmp_path / f"r{suffix}").stat().st_size > 0
        header = (tmp_path / "r.traces.csv").read_text().splitlines()[0]
        assert header.count(",") == 18

    def test_kinematics_only_and_config(self, drawer, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"fit": {"n_starts": 2}}')
        code, text = run("classify", drawer, "--config", cfg, "--kinematics-only")
        assert code == 0
        assert "winner:" in text

    def test_unclassified_exit_code(self, tmp_path):
        rng = np.random.default_rng(0)
        t = np.linspace(0, 2, 60)
        r = np.column_stack([np.sin(t), np.cos(1.3 * t), t**2]) * 0.2
        rows = ["# t,rx,ry,rz,qw,qx,qy,qz,fx,fy,fz,nx,ny,nz"]
        for ti, ri, w in zip(t, r, rng.normal(size=(60, 6)) * 5):
            rows.append(",".join(map(str, [float(ti), *map(float, ri), 1.0, 0, 0, 0, *map(float, w)])))
        path = tmp_path / "free.csv"
        path.write_text("\n".join(rows) + "\n")
        code, text = run("classify", path)
        assert code == 3
        assert text.startswith("winner: unclassified")

    def test_bad_min_fraction(self, drawer):
        assert run("classify", drawer, "--min-fraction", "2")[0] == 1


class TestFitAndErrors:
    def test_fit_writes_params(self, drawer, tmp_path):
        out = tmp_path / "fit.json"
        code, text = run("fit", drawer, "--model", "prismatic", "--starts", "3", "--out", out)
        assert code == 0
        assert "converged:      True" in text
        assert load_params(str(out)).kind.value == "prismatic"

    def test_errors_csv(self, drawer, tmp_path):
        out = tmp_path / "err.csv"
        code, _ = run("errors", drawer, "--model", "prismatic", "--params", "drawer", "--out", out)
        assert code == 0
        data = np.loadtxt(out, delimiter=",", comments="#")
        assert data.shape == (N_DEFAULT, 4)
        assert (tmp_path / "err.png").stat().st_size > 0
        # the true parameters leave only noise-level error
        assert np.median(data[:, 1]) < 2e-3

    def test_errors_to_stdout(self, drawer):
        code, text = run("errors", drawer, "--model", "prismatic", "--params", "drawer")
        assert code == 0
        assert text.splitlines()[0] == "# t,kinematic_error,f_error,n_error"


class TestBench:
    def test_small_study(self, drawer, tmp_path):
        out = tmp_path / "bench.csv"
        code, _ = run("bench-sampling", drawer, "--model", "prismatic", "--seeds", "2",
                      "--counts", "20,80", "--out", out)
        assert code == 0
        data = np.loadtxt(out, delimiter=",", comments="#")
        assert data[:, 0].tolist() == [20, 80]
        assert (tmp_path / "bench.png").exists()

    def test_bad_counts(self, drawer):
        assert run("bench-sampling", drawer, "--counts", "a,b")[0] == 1


class TestExitCodes:
    def test_missing_file(self, tmp_path):
        assert run("classify", tmp_path / "nope.csv")[0] == 2

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2,3\n")
        assert run("fit", path, "--model", "planar")[0] == 2

    @pytest.mark.parametrize("argv", [[], ["classify"], ["fit", "x.csv", "--model", "teleport"],
                                      ["classify", "x.csv", "--bogus"]])
    def test_usage_errors(self, argv):
        with pytest.raises(SystemExit) as info:
            main(argv, out=io.StringIO())
        assert info.value.code == 1

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "constraint_inference", "--version"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout.strip().endswith("0.1.0")
