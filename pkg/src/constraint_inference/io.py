"""Segment, parameter, config and report files.

Segment CSV: a ``#``-prefixed header naming the columns, then one comma
separated row per sample. Standard column order::

    t, rx, ry, rz, qw, qx, qy, qz, [vx, vy, vz, wx, wy, wz,] fx, fy, fz, nx, ny, nz

Twist columns are optional; without them twists are derived from the poses
by finite differences. All quantities are SI. JSON segments carry the same
fields as arrays.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import DEFAULT_MIN_FRACTION, Thresholds
from .errors import InvalidInputError, ParseError, ValidationError
from .fitting import FitConfig
from .geometry import finite_difference_twist
from .models import ConstraintKind, ConstraintParams, canonicalize
from .segment import Segment
from .synthetic import PRESETS, MotionProfile

POSE_COLUMNS = ["t", "rx", "ry", "rz", "qw", "qx", "qy", "qz"]
TWIST_COLUMNS = ["vx", "vy", "vz", "wx", "wy", "wz"]
WRENCH_COLUMNS = ["fx", "fy", "fz", "nx", "ny", "nz"]
FULL_COLUMNS = POSE_COLUMNS + TWIST_COLUMNS + WRENCH_COLUMNS
SHORT_COLUMNS = POSE_COLUMNS + WRENCH_COLUMNS
SEGMENT_FORMAT = "constraint-segment"


def _format_of(path, fmt):
    if fmt is not None:
        if fmt not in ("csv", "json"):
            raise InvalidInputError(f"unknown segment format {fmt!r} (csv or json)")
        return fmt
    return "json" if Path(path).suffix.lower() == ".json" else "csv"


def _read_text(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not a text file ({exc.reason})", path=path) from None


def _finish(columns, path):
    """Build and validate a Segment; derive twists when absent."""
    has_twist = columns.get("v") is not None
    n = len(columns["t"])
    zeros = np.zeros((n, 3))
    seg = Segment(columns["t"], columns["r"], columns["q"],
                  columns["v"] if has_twist else zeros, columns["omega"] if has_twist else zeros,
                  columns["f"], columns["n"])
    seg = seg.validate()
    if not has_twist:
        if n >= 3:
            seg = finite_difference_twist(seg)
            seg.warnings.append("twists derived from poses by finite differences")
        else:
            seg.warnings.append("no twist columns and fewer than 3 samples: twists set to zero")
    return seg


def _parse_csv(text, path):
    header = None
    rows = []
    for lineno, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or not "".join(row).strip():
            continue
        first = row[0].strip()
        if first.startswith("#"):
            if header is None and not rows:
                names = [first.lstrip("#").strip()] + [c.strip() for c in row[1:]]
                names = [c for c in names if c]
                if names and all(not _is_number(c) for c in names):
                    header = (names, lineno)
            continue
        try:
            rows.append(([float(c) for c in row], lineno))
        except ValueError:
            bad = next(c for c in row if not _is_number(c))
            raise ParseError(f"non-numeric value {bad.strip()!r}", lineno, path) from None
    if not rows:
        raise ParseError("no data rows", path=path)
    if header is None:
        width = len(rows[0][0])
        if width == len(FULL_COLUMNS):
            names = FULL_COLUMNS
        elif width == len(SHORT_COLUMNS):
            names = SHORT_COLUMNS
        else:
            raise ParseError(f"no header and {width} columns (expected {len(FULL_COLUMNS)} or "
                             f"{len(SHORT_COLUMNS)})", rows[0][1], path)
        header_line = None
    else:
        names, header_line = header
    index = {name: i for i, name in enumerate(names)}
    if len(index) != len(names):
        raise ParseError("duplicate column names in header", header_line, path)
    required = POSE_COLUMNS + WRENCH_COLUMNS
    missing = [c for c in required if c not in index]
    if missing:
        raise ParseError(f"missing columns: {', '.join(missing)}", header_line, path)
    present_twist = [c for c in TWIST_COLUMNS if c in index]
    if present_twist and len(present_twist) != len(TWIST_COLUMNS):
        raise ParseError("twist columns must be all present or all absent", header_line, path)
    unknown = [c for c in names if c not in FULL_COLUMNS]
    if unknown:
        raise ParseError(f"unknown columns: {', '.join(unknown)}", header_line, path)
    for values, lineno in rows:
        if len(values) != len(names):
            raise ParseError(f"expected {len(names)} fields, found {len(values)}", lineno, path)
    data = np.array([values for values, _ in rows])

    def cols(*keys):
        return data[:, [index[k] for k in keys]]

    return {
        "t": data[:, index["t"]],
        "r": cols("rx", "ry", "rz"),
        "q": cols("qw", "qx", "qy", "qz"),
        "v": cols("vx", "vy", "vz") if present_twist else None,
        "omega": cols("wx", "wy", "wz") if present_twist else None,
        "f": cols("fx", "fy", "fz"),
        "n": cols("nx", "ny", "nz"),
    }


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def _parse_json_segment(text, path):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, path) from None
    if not isinstance(doc, dict):
        raise ParseError("segment JSON must be an object", path=path)
    out = {}
    for key, width in (("t", None), ("r", 3), ("q", 4), ("f", 3), ("n", 3), ("v", 3), ("omega", 3)):
        if key not in doc:
            if key in ("v", "omega"):
                out[key] = None
                continue
            raise ParseError(f"missing field {key!r}", path=path)
        try:
            arr = np.asarray(doc[key], dtype=float)
        except (TypeError, ValueError):
            raise ParseError(f"field {key!r} is not numeric", path=path) from None
        shape_ok = arr.ndim == 1 if width is None else (arr.ndim == 2 and arr.shape[1] == width)
        if not shape_ok and not (arr.size == 0 and key == "t"):
            raise ParseError(f"field {key!r} has shape {arr.shape}", path=path)
        out[key] = arr
    if (out["v"] is None) != (out["omega"] is None):
        raise ParseError("'v' and 'omega' must be given together", path=path)
    n = out["t"].size
    for key in ("r", "q", "f", "n", "v", "omega"):
        if out[key] is not None and out[key].shape[0] != n:
            raise ParseError(f"field {key!r} has {out[key].shape[0]} rows, 't' has {n}", path=path)
    return out


def load_segment(path, fmt=None) -> Segment:
    """Read and validate a segment file (CSV or JSON, by suffix unless ``fmt``)."""
    fmt = _format_of(path, fmt)
    text = _read_text(path)
    columns = _parse_csv(text, path) if fmt == "csv" else _parse_json_segment(text, path)
    if columns["t"].size == 0:
        raise ValidationError("segment has no samples")
    return _finish(columns, path)


def _fmt(x):
    return repr(float(x))


def segment_to_csv(segment, include_twist=True):
    names = FULL_COLUMNS if include_twist else SHORT_COLUMNS
    blocks = [segment.t[:, None], segment.r, segment.q]
    if include_twist:
        blocks += [segment.v, segment.omega]
    blocks += [segment.f, segment.n]
    lines = ["# " + ",".join(names)]
    lines += [",".join(_fmt(x) for x in row) for row in np.hstack(blocks)]
    return "\n".join(lines) + "\n"


def save_segment(segment, path, fmt=None, include_twist=True):
    """Write a segment; floats use shortest round-trip representation."""
    fmt = _format_of(path, fmt)
    path = Path(path)
    if fmt == "json":
        doc = {"format": SEGMENT_FORMAT, "version": 1, "t": segment.t.tolist(), "r": segment.r.tolist(),
               "q": segment.q.tolist(), "f": segment.f.tolist(), "n": segment.n.tolist()}
        if include_twist:
            doc["v"] = segment.v.tolist()
            doc["omega"] = segment.omega.tolist()
        path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        return path
    path.write_text(segment_to_csv(segment, include_twist), encoding="utf-8")
    return path


# parameters ---------------------------------------------------------------


def params_to_dict(params):
    return {"model": params.kind.value, "params": params.as_dict()}


def params_from_dict(doc, kind=None):
    if not isinstance(doc, dict):
        raise InvalidInputError("parameters must be a JSON object")
    name = doc.get("model", kind.value if isinstance(kind, ConstraintKind) else kind)
    if name is None:
        raise InvalidInputError("parameter file does not name a model")
    file_kind = ConstraintKind.parse(name)
    if kind is not None and ConstraintKind.parse(kind) is not file_kind:
        raise InvalidInputError(f"parameters are for {file_kind.value}, requested {ConstraintKind.parse(kind).value}")
    if "alpha" in doc:
        return ConstraintParams(file_kind, np.asarray(doc["alpha"], dtype=float))
    parts = doc.get("params")
    if not isinstance(parts, dict):
        raise InvalidInputError("parameter file needs 'params' (named parts) or 'alpha'")
    return ConstraintParams.from_parts(file_kind, **parts)


def load_params(source, kind=None):
    """Parameters from a JSON file or a preset name."""
    if source in PRESETS and not Path(source).exists():
        params = PRESETS[source]
        if kind is not None and ConstraintKind.parse(kind) is not params.kind:
            raise InvalidInputError(f"preset {source!r} is a {params.kind.value} model")
        return params
    path = Path(source)
    if not path.exists():
        raise InvalidInputError(f"no parameter file or preset named {source!r} "
                                f"(presets: {', '.join(sorted(PRESETS))})")
    try:
        doc = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, path) from None
    try:
        return params_from_dict(doc, kind)
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc), path=path) from None


def save_params(params, path):
    Path(path).write_text(json.dumps(params_to_dict(params), indent=2) + "\n", encoding="utf-8")


# config and profiles --------------------------------------------------------


@dataclass
class Config:
    thresholds: Thresholds = field(default_factory=Thresholds)
    fit: FitConfig = field(default_factory=FitConfig)
    profiles: dict = field(default_factory=dict)
    min_fraction: float = DEFAULT_MIN_FRACTION

    def as_dict(self):
        return {"thresholds": self.thresholds.as_dict(), "fit": self.fit.as_dict(),
                "profiles": {k: v.as_dict() for k, v in self.profiles.items()},
                "min_fraction": self.min_fraction}


def _load_json(path):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, path) from None
    except FileNotFoundError:
        raise InvalidInputError(f"file not found: {path}") from None


def config_from_dict(doc):
    if not isinstance(doc, dict):
        raise InvalidInputError("config must be a JSON object")
    unknown = set(doc) - {"thresholds", "fit", "profiles", "min_fraction"}
    if unknown:
        raise InvalidInputError(f"unknown config sections: {sorted(unknown)}")
    cfg = Config()
    if "thresholds" in doc:
        cfg.thresholds = Thresholds.from_dict(doc["thresholds"])
    if "fit" in doc:
        cfg.fit = FitConfig.from_dict(doc["fit"])
    if "profiles" in doc:
        cfg.profiles = {name: MotionProfile.from_dict(p) for name, p in doc["profiles"].items()}
    if "min_fraction" in doc:
        value = float(doc["min_fraction"])
        if not 0.0 <= value <= 1.0:
            raise InvalidInputError("min_fraction must lie in [0, 1]")
        cfg.min_fraction = value
    return cfg


def load_config(path) -> Config:
    try:
        return config_from_dict(_load_json(path))
    except (InvalidInputError, TypeError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(str(exc), path=path) from None


def load_profile(path) -> MotionProfile:
    doc = _load_json(path)
    try:
        return MotionProfile.from_dict(doc)
    except (InvalidInputError, TypeError) as exc:
        raise ParseError(str(exc), path=path) from None


# reports --------------------------------------------------------------------


def _floats(values):
    return [float(x) for x in np.asarray(values).ravel()]


def report_to_dict(report, segment=None, source=None):
    """Self-describing report: winner, geometry, per-model votes and traces."""
    models = {}
    traces = {}
    for kind, votes in report.votes.items():
        entry = {
            "eligible": votes.eligible_count,
            "fraction": votes.fraction,
            "position_ok": int(np.count_nonzero(votes.L_k)),
            "force_ok": int(np.count_nonzero(votes.L_f)),
            "moment_ok": int(np.count_nonzero(votes.L_n)),
            "valid": bool(votes.valid),
        }
        fit = report.fits.get(kind)
        if fit is not None:
            entry.update({
                "objective": fit.objective,
                "converged": fit.converged,
                "degenerate": fit.degenerate,
                "iterations": fit.iterations,
                "starts_tried": fit.starts_tried,
                "mean_kinematic_error": fit.mean_kinematic_error,
                "messages": list(fit.messages),
                "params": params_to_dict(fit.params)["params"],
                "geometry": canonicalize(fit.params).as_dict(),
            })
            trace = {"kinematic_error": _floats(fit.per_sample_kinematic_error)}
            werr = report.wrench.get(kind)
            if werr is not None:
                trace["f_error"] = _floats(werr.f_error)
                trace["n_error"] = _floats(werr.n_error)
            traces[kind.value] = trace
        models[kind.value] = entry
    winner_params = report.winner_params
    doc = {
        "tool": "constraint-inference",
        "version": __version__,
        "source": str(source) if source is not None else None,
        "samples": len(segment) if segment is not None else None,
        "warnings": list(segment.warnings) if segment is not None else [],
        "winner": report.label,
        "eligible_fraction": report.eligible_fraction,
        "geometry": canonicalize(winner_params).as_dict() if winner_params is not None else None,
        "models": models,
        "traces": traces,
        "config": {
            "thresholds": (report.thresholds or Thresholds()).as_dict(),
            "use_wrench": report.use_wrench,
            "min_fraction": report.min_fraction,
        },
    }
    return doc


def save_report(report, path, segment=None, source=None, fit_config=None):
    doc = report_to_dict(report, segment, source)
    if fit_config is not None:
        doc["config"]["fit"] = fit_config.as_dict()
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return doc


def write_table(target, header, rows):
    """Plain CSV with a '#'-prefixed header line, to a path or an open stream."""
    if hasattr(target, "write"):
        _write_rows(target, header, rows)
        return target
    with open(target, "w", encoding="utf-8", newline="") as fh:
        _write_rows(fh, header, rows)
    return Path(target)


def _write_rows(fh, header, rows):
    fh.write("# " + ",".join(header) + "\n")
    writer = csv.writer(fh, lineterminator="\n")
    for row in rows:
        writer.writerow([_fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
