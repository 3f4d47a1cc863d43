"""Experiments built on the pipeline: error traces, the sample-count study,
the hinge force-disambiguation study and the kinematics-only comparison."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifier import Thresholds, classify
from .errors import InvalidInputError
from .fitting import MIN_SAMPLES_FACTOR, FitConfig, fit_all_models, fit_model
from .forces import wrench_errors
from .geometry import quat_to_rotmat
from .models import ConstraintKind, kinematic_error_batch
from .synthetic import PRESETS, MotionProfile, generate, random_params


def error_traces(segment, params):
    """Per-sample kinematic, force and moment errors of one model, plus time."""
    kin = kinematic_error_batch(params.kind, params.alpha, segment.r, quat_to_rotmat(segment.q))
    werr = wrench_errors(params, segment.pose, segment.twist, segment.wrench)
    return {"t": segment.t, "kinematic_error": kin, "f_error": werr.f_error, "n_error": werr.n_error}


@dataclass
class SamplingStudy:
    kind: ConstraintKind
    counts: np.ndarray
    contiguous: np.ndarray  # (n_seeds, len(counts)) fit error in metres
    random: np.ndarray

    @property
    def contiguous_median(self):
        return np.median(self.contiguous, axis=0)

    @property
    def random_median(self):
        return np.median(self.random, axis=0)

    def rows(self):
        """(count, contiguous median, random median) per sample count."""
        return list(zip(self.counts.tolist(), self.contiguous_median.tolist(), self.random_median.tolist()))


def default_counts(kind, n_total):
    """Doubling grid from the model's minimum sample count up to ``n_total``."""
    lo = MIN_SAMPLES_FACTOR * kind.n_params
    if n_total < lo:
        raise InvalidInputError(f"segment too short: {n_total} samples, {kind.value} needs at least {lo}")
    grid = [lo]
    while grid[-1] * 2 <= n_total:
        grid.append(grid[-1] * 2)
    return np.array(grid)


def _fit_error(kind, segment, idx, cfg, A):
    fit = fit_model(kind, segment.subset(idx), cfg)
    return float(np.mean(kinematic_error_batch(kind, fit.params.alpha, segment.r, A)))


def sampling_study(segment, kind=ConstraintKind.POINT_ON_PLANE, counts=None, n_seeds=20, seed=0,
                   cfg=FitConfig()):
    """Fit on n contiguous vs n randomly drawn samples and score on the whole segment.

    The score (fit error) is the mean kinematic error over every sample of
    the segment under the parameters fitted to the subset.

    Contiguous windows start at a seeded random offset; random subsets of
    increasing size are nested prefixes of one seeded permutation, so more
    samples never means different earlier samples.
    """
    kind = kind if isinstance(kind, ConstraintKind) else ConstraintKind.parse(kind)
    n_total = len(segment)
    counts = default_counts(kind, n_total) if counts is None else np.asarray(counts, dtype=int)
    if counts.min() < 1 or counts.max() > n_total:
        raise InvalidInputError(f"sample counts must lie in [1, {n_total}]")
    A = quat_to_rotmat(segment.q)
    contiguous = np.empty((n_seeds, counts.size))
    rand = np.empty((n_seeds, counts.size))
    for s in range(n_seeds):
        rng = np.random.default_rng([seed, s])
        order = rng.permutation(n_total)
        offsets = rng.random(counts.size)
        for j, n in enumerate(counts):
            start = int(offsets[j] * (n_total - n + 1))
            contiguous[s, j] = _fit_error(kind, segment, np.arange(start, start + n), cfg, A)
            rand[s, j] = _fit_error(kind, segment, order[:n], cfg, A)
    return SamplingStudy(kind, counts, contiguous, rand)


def hinge_segment(seed, radial_force=5.0, sigma_pos=1e-4, duration=2.4, sample_rate=50):
    """Door-hinge demonstration with a steady pull toward the hinge axis."""
    profile = MotionProfile(duration=duration, sample_rate=sample_rate, seed=seed,
                            radial_force=radial_force, sigma_pos=sigma_pos)
    return generate(ConstraintKind.AXIAL_ROTATION, PRESETS["door_hinge"], profile)


@dataclass
class HingeOutcome:
    seed: int
    full_winner: str
    kinematic_counts: dict
    full_counts: dict


def hinge_study(n_seeds=20, radial_force=5.0, sigma_pos=1e-4, cfg=FitConfig(), thresholds=None):
    out = []
    for seed in range(n_seeds):
        seg = hinge_segment(seed, radial_force, sigma_pos)
        fits = fit_all_models(seg, cfg)
        full = classify(seg, cfg, thresholds, fits=fits)
        kin = classify(seg, cfg, thresholds, use_wrench=False, fits=fits)
        out.append(HingeOutcome(seed, full.label, {k.value: c for k, c in kin.counts.items()},
                                {k.value: c for k, c in full.counts.items()}))
    return out


def mixed_suite(n_per_kind=10, sigma_pos=3e-5, sigma_rot=6e-5, duration=2.4, sample_rate=50, seed=0):
    """Seeded synthetic segments of every kind: yields (kind, segment)."""
    for kind in ConstraintKind:
        for s in range(n_per_kind):
            rng = np.random.default_rng([seed, 100 + list(ConstraintKind).index(kind), s])
            params = random_params(kind, rng)
            profile = MotionProfile(duration=duration, sample_rate=sample_rate, seed=s,
                                    sigma_pos=sigma_pos, sigma_rot=sigma_rot)
            yield kind, generate(kind, params, profile)


def kinematics_only_comparison(suite, cfg=FitConfig(), thresholds: Thresholds | None = None):
    """Accuracy of the full pipeline and of kinematics-only voting on the same fits.

    Returns ``(full_accuracy, kinematic_accuracy, rows)`` with one row per
    segment: (true kind, full label, kinematics-only label).
    """
    rows = []
    for kind, seg in suite:
        fits = fit_all_models(seg, cfg)
        full = classify(seg, cfg, thresholds, fits=fits)
        kin = classify(seg, cfg, thresholds, use_wrench=False, fits=fits)
        rows.append((kind.value, full.label, kin.label))
    if not rows:
        raise InvalidInputError("empty suite")
    full_acc = sum(r[0] == r[1] for r in rows) / len(rows)
    kin_acc = sum(r[0] == r[2] for r in rows) / len(rows)
    return full_acc, kin_acc, rows
