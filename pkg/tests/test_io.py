import json

import numpy as np
import pytest

from conftest import make_segment
from constraint_inference.classifier import classify
from constraint_inference.errors import InvalidInputError, ParseError, ValidationError
from constraint_inference.fitting import FitConfig
from constraint_inference.io import (
    config_from_dict,
    load_config,
    load_params,
    load_profile,
    load_segment,
    params_from_dict,
    params_to_dict,
    save_params,
    save_report,
    save_segment,
    segment_to_csv,
    write_table,
)
from constraint_inference.models import ConstraintKind
from constraint_inference.synthetic import PRESETS, MotionProfile

K = ConstraintKind
FIELDS = ("t", "r", "q", "v", "omega", "f", "n")

MINIMAL = """# t,rx,ry,rz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,fx,fy,fz,nx,ny,nz
0.0,0,0,0,1,0,0,0,0.1,0,0,0,0,0,0,0,-1,0,0,0
0.1,0.01,0,0,1,0,0,0,0.1,0,0,0,0,0,0,0,-1,0,0,0
0.2,0.02,0,0,1,0,0,0,0.1,0,0,0,0,0,0,0,-1,0,0,0
"""


def assert_same_segment(a, b, rtol=1e-12):
    for name in FIELDS:
        np.testing.assert_allclose(getattr(a, name), getattr(b, name), rtol=rtol, atol=1e-300)


@pytest.fixture
def noisy():
    return make_segment(K.PLANAR, seed=2, noiseless=False)[1]


class TestLoadSegment:
    def test_minimal_csv(self, tmp_path):
        path = tmp_path / "seg.csv"
        path.write_text(MINIMAL)
        seg = load_segment(path)
        assert len(seg) == 3
        np.testing.assert_allclose(seg.v, [[0.1, 0, 0]] * 3)
        np.testing.assert_allclose(seg.f[:, 2], -1.0)
        assert seg.warnings == []

    def test_missing_twist_uses_finite_differences(self, tmp_path):
        lines = MINIMAL.splitlines()
        drop = lambda row: ",".join(c for i, c in enumerate(row.split(",")) if not 8 <= i < 14)  # noqa: E731
        path = tmp_path / "seg.csv"
        path.write_text("\n".join(drop(row) for row in lines) + "\n")
        seg = load_segment(path)
        np.testing.assert_allclose(seg.v, [[0.1, 0, 0]] * 3, atol=1e-12)
        np.testing.assert_allclose(seg.omega, 0.0, atol=1e-12)
        assert any("finite differences" in w for w in seg.warnings)

    def test_headerless_by_width(self, tmp_path):
        path = tmp_path / "seg.csv"
        path.write_text("\n".join(MINIMAL.splitlines()[1:]) + "\n")
        assert len(load_segment(path)) == 3

    def test_column_order_follows_header(self, tmp_path, noisy):
        lines = segment_to_csv(noisy).splitlines()
        header = lines[0].lstrip("# ").split(",")
        order = list(reversed(range(len(header))))
        text = "# " + ",".join(header[i] for i in order) + "\n"
        text += "\n".join(",".join(row.split(",")[i] for i in order) for row in lines[1:]) + "\n"
        path = tmp_path / "rev.csv"
        path.write_text(text)
        assert_same_segment(load_segment(path), noisy)

    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_round_trip(self, tmp_path, noisy, fmt):
        path = save_segment(noisy, tmp_path / f"seg.{fmt}")
        assert_same_segment(load_segment(path), noisy)

    def test_csv_and_json_agree(self, tmp_path, noisy):
        a = load_segment(save_segment(noisy, tmp_path / "a.csv"))
        b = load_segment(save_segment(noisy, tmp_path / "b.json"))
        for name in FIELDS:
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    def test_format_override(self, tmp_path, noisy):
        path = save_segment(noisy, tmp_path / "seg.dat", fmt="json")
        assert len(load_segment(path, "json")) == len(noisy)

    @pytest.mark.parametrize("body,line,message", [
        (MINIMAL.replace("0.1,0.01", "0.1,abc"), 3, "non-numeric"),
        (MINIMAL.replace("0.2,0.02,0,0,1,0,0,0,", "0.2,0.02,0,0,1,0,0,"), 4, "expected 20 fields"),
        (MINIMAL.replace(",nz", ",mz"), 1, "missing columns"),
        (MINIMAL.replace("wx,wy,wz", "wx,wy,fx"), 1, "duplicate"),
    ])
    def test_parse_errors_carry_line_numbers(self, tmp_path, body, line, message):
        path = tmp_path / "bad.csv"
        path.write_text(body)
        with pytest.raises(ParseError, match=message) as info:
            load_segment(path)
        assert info.value.line == line
        assert f"bad.csv:{line}" in str(info.value)

    def test_partial_twist_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# t,rx,ry,rz,qw,qx,qy,qz,vx,fx,fy,fz,nx,ny,nz\n0,0,0,0,1,0,0,0,0,0,0,0,0,0,0\n")
        with pytest.raises(ParseError, match="all present or all absent"):
            load_segment(path)

    def test_time_must_increase(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(MINIMAL.replace("\n0.2,", "\n0.05,"))
        with pytest.raises(ValidationError, match="strictly increasing"):
            load_segment(path)

    def test_quaternion_tolerance(self, tmp_path):
        path = tmp_path / "q.csv"
        path.write_text(MINIMAL.replace("0.1,0.01,0,0,1,", "0.1,0.01,0,0,1.0005,"))
        seg = load_segment(path)
        np.testing.assert_allclose(np.linalg.norm(seg.q, axis=1), 1.0, atol=1e-15)
        assert any("re-normalized" in w for w in seg.warnings)
        path.write_text(MINIMAL.replace("0.1,0.01,0,0,1,", "0.1,0.01,0,0,1.1,"))
        with pytest.raises(ValidationError, match="norm"):
            load_segment(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("# t,rx\n")
        with pytest.raises(ParseError, match="no data rows"):
            load_segment(path)

    def test_json_errors(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"t": [0, 1], "r": [[0, 0, 0]]}')
        with pytest.raises((ParseError, ValidationError)):
            load_segment(path)
        path.write_text("{not json")
        with pytest.raises(ParseError) as info:
            load_segment(path)
        assert info.value.line == 1


class TestParamsAndConfig:
    def test_params_round_trip(self, tmp_path):
        params = PRESETS["collar_on_shaft"]
        save_params(params, tmp_path / "p.json")
        back = load_params(str(tmp_path / "p.json"))
        np.testing.assert_array_equal(back.alpha, params.alpha)
        assert params_from_dict(params_to_dict(params)).kind is params.kind

    def test_alpha_form(self):
        p = params_from_dict({"model": "planar", "alpha": [0, 0, 1, 0.1, 0, 0]})
        assert p["d"] == 0.1

    def test_presets(self):
        assert load_params("door_hinge").kind is K.AXIAL_ROTATION
        with pytest.raises(InvalidInputError, match="preset"):
            load_params("door_hinge", "planar")
        with pytest.raises(InvalidInputError, match="no parameter file"):
            load_params("nope")

    def test_kind_mismatch(self):
        with pytest.raises(InvalidInputError):
            params_from_dict({"model": "planar", "alpha": [0] * 6}, "prismatic")

    def test_config(self, tmp_path):
        doc = {"thresholds": {"planar": {"force": 3.0}}, "fit": {"n_starts": 2},
               "profiles": {"slow": {"duration": 8.0}}, "min_fraction": 0.3}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        cfg = load_config(path)
        assert cfg.thresholds[K.PLANAR].force == 3.0
        assert cfg.fit == FitConfig(n_starts=2)
        assert cfg.profiles["slow"] == MotionProfile(duration=8.0)
        assert cfg.min_fraction == 0.3
        assert config_from_dict(cfg.as_dict()).as_dict() == cfg.as_dict()

    @pytest.mark.parametrize("doc", [{"extra": 1}, {"fit": {"bogus": 1}}, {"min_fraction": 2}])
    def test_bad_config(self, tmp_path, doc):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ParseError):
            load_config(path)

    def test_profile_file(self, tmp_path):
        path = tmp_path / "prof.json"
        path.write_text('{"duration": 1.5, "sigma_pos": 0}')
        assert load_profile(path) == MotionProfile(duration=1.5, sigma_pos=0.0)
        path.write_text('{"duration": -1}')
        with pytest.raises(ParseError):
            load_profile(path)


class TestReports:
    def test_regenerated_report_is_byte_identical(self, tmp_path, noisy):
        cfg = FitConfig()
        save_report(classify(noisy, cfg), tmp_path / "a.json", noisy, "seg.csv", cfg)
        save_report(classify(noisy, cfg), tmp_path / "b.json", noisy, "seg.csv", cfg)
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_report_is_self_describing(self, tmp_path, noisy):
        doc = save_report(classify(noisy), tmp_path / "r.json", noisy, "seg.csv", FitConfig())
        assert doc["winner"] == "planar"
        assert doc["version"]
        assert doc["config"]["thresholds"]["planar"]["position"] == 0.001
        assert len(doc["traces"]["planar"]["f_error"]) == len(noisy)
        assert set(doc["models"]) == {k.value for k in K}
        assert doc["geometry"]["kind"] == "planar"

    def test_write_table(self, tmp_path):
        path = write_table(tmp_path / "t.csv", ["a", "b"], [[1, 0.5], [2, 0.25]])
        assert path.read_text() == "# a,b\n1,0.5\n2,0.25\n"
