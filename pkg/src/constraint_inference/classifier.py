"""Threshold per-sample errors into eligibility lists and vote for a model."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .fitting import FitConfig, FitResult, fit_all_models
from .forces import WrenchErrors, wrench_errors
from .models import ConstraintKind

DEFAULT_MIN_FRACTION = 0.5
UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class Threshold:
    position: float  # m
    force: float  # N
    moment: float  # N m

    def __post_init__(self):
        for name in ("position", "force", "moment"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidInputError(f"{name} threshold must be positive, got {value!r}")


_DEFAULTS = {
    ConstraintKind.POINT_ON_PLANE: Threshold(0.0005, 0.05, 0.5),
    ConstraintKind.FIXED_POINT: Threshold(0.0001, 1.0, 0.2),
    ConstraintKind.CONCENTRIC_CYLINDER: Threshold(0.002, 0.02, 0.01),
    ConstraintKind.PLANAR: Threshold(0.001, 1.0, 0.02),
    ConstraintKind.PRISMATIC: Threshold(0.001, 0.1, 0.001),
    ConstraintKind.AXIAL_ROTATION: Threshold(0.01, 0.02, 0.2),
}


@dataclass(frozen=True)
class Thresholds:
    """Position, force and moment thresholds for every model."""

    values: dict = field(default_factory=lambda: dict(_DEFAULTS))

    def __post_init__(self):
        missing = set(ConstraintKind) - set(self.values)
        if missing:
            raise InvalidInputError(f"thresholds missing for {sorted(k.value for k in missing)}")

    def __getitem__(self, kind) -> Threshold:
        return self.values[ConstraintKind.parse(kind) if isinstance(kind, str) else kind]

    @classmethod
    def default(cls):
        return cls()

    @classmethod
    def from_dict(cls, data, base=None):
        """Override some or all entries, e.g. ``{"planar": {"force": 2.0}}``."""
        values = dict((base or cls()).values)
        if not isinstance(data, dict):
            raise InvalidInputError("thresholds must be a mapping of model name to values")
        for name, entry in data.items():
            kind = ConstraintKind.parse(name)
            if not isinstance(entry, dict):
                raise InvalidInputError(f"thresholds for {name!r} must be a mapping")
            unknown = set(entry) - {"position", "force", "moment"}
            if unknown:
                raise InvalidInputError(f"unknown threshold fields for {name!r}: {sorted(unknown)}")
            current = values[kind]
            try:
                values[kind] = Threshold(**{**current.__dict__, **{k: float(v) for k, v in entry.items()}})
            except (TypeError, ValueError) as exc:
                raise InvalidInputError(f"bad thresholds for {name!r}: {exc}") from None
        return cls(values)

    def as_dict(self):
        return {kind.value: dict(self.values[kind].__dict__) for kind in ConstraintKind}


def eligibility(fit: FitResult, errors: WrenchErrors | None, th):
    """Boolean lists (L_k, L_f, L_n), each inclusive of its threshold.

    ``th`` is a :class:`Threshold` or a :class:`Thresholds` table. Passing
    ``errors=None`` makes the force and moment lists all true.
    """
    if isinstance(th, Thresholds):
        th = th[fit.kind]
    kin = np.asarray(fit.per_sample_kinematic_error)
    L_k = kin <= th.position
    if errors is None:
        return L_k, np.ones_like(L_k), np.ones_like(L_k)
    if len(errors) != kin.size:
        raise InvalidInputError(f"fit covers {kin.size} samples but wrench errors cover {len(errors)}")
    return L_k, np.asarray(errors.f_error) <= th.force, np.asarray(errors.n_error) <= th.moment


@dataclass
class ModelVotes:
    L_k: np.ndarray
    L_f: np.ndarray
    L_n: np.ndarray
    valid: bool = True

    @property
    def eligible(self):
        return self.L_k & self.L_f & self.L_n

    @property
    def eligible_count(self):
        return int(np.count_nonzero(self.eligible))

    @property
    def fraction(self):
        return self.eligible_count / max(len(self.L_k), 1)


@dataclass
class ClassificationReport:
    votes: dict
    winner: ConstraintKind | None
    eligible_fraction: float
    fits: dict = field(default_factory=dict)
    wrench: dict = field(default_factory=dict)
    thresholds: Thresholds | None = None
    use_wrench: bool = True
    min_fraction: float = DEFAULT_MIN_FRACTION

    @property
    def label(self):
        return self.winner.value if self.winner is not None else UNCLASSIFIED

    @property
    def winner_params(self):
        if self.winner is None or self.winner not in self.fits:
            return None
        return self.fits[self.winner].params

    @property
    def counts(self):
        return {kind: votes.eligible_count for kind, votes in self.votes.items()}

    def ranking(self):
        """Models ordered as the vote ranks them (best first)."""
        return sorted(self.votes, key=lambda k: _rank_key(k, self.votes[k], self.fits))


def _rank_key(kind, votes, fits):
    objective = fits[kind].objective if kind in fits else 0.0
    return (not votes.valid, -votes.eligible_count, kind.dof, objective, list(ConstraintKind).index(kind))


def select(votes, min_fraction=DEFAULT_MIN_FRACTION, fits=None):
    """Winner by eligible count among valid fits.

    Ties go to the model with fewer motion DOFs, then to the lower fit
    objective (when ``fits`` is given). A best fraction under
    ``min_fraction`` or no eligible sample at all gives no winner.
    """
    votes = {ConstraintKind.parse(k) if isinstance(k, str) else k: v for k, v in votes.items()}
    votes = {k: v if isinstance(v, ModelVotes) else ModelVotes(*map(np.asarray, v)) for k, v in votes.items()}
    fits = fits or {}
    candidates = [k for k, v in votes.items() if v.valid]
    winner, fraction = None, 0.0
    if candidates:
        best = min(candidates, key=lambda k: _rank_key(k, votes[k], fits))
        fraction = votes[best].fraction
        if votes[best].eligible_count > 0 and fraction >= min_fraction:
            winner = best
    return ClassificationReport(votes=votes, winner=winner, eligible_fraction=fraction, fits=fits,
                                min_fraction=min_fraction)


def classify(segment, cfg=FitConfig(), thresholds=None, use_wrench=True,
             min_fraction=DEFAULT_MIN_FRACTION, fits=None):
    """Fit every model, threshold the errors and vote.

    ``use_wrench=False`` is the kinematics-only variant (force and moment
    lists all true). Precomputed ``fits`` may be passed to skip fitting.
    """
    thresholds = thresholds or Thresholds.default()
    fits = fits if fits is not None else fit_all_models(segment, cfg)
    votes, wrench = {}, {}
    for kind, fit in fits.items():
        errors = None
        if use_wrench:
            errors = wrench_errors(fit.params, segment.pose, segment.twist, segment.wrench)
            wrench[kind] = errors
        votes[kind] = ModelVotes(*eligibility(fit, errors, thresholds[kind]), valid=fit.valid)
    report = select(votes, min_fraction, fits)
    report.wrench = wrench
    report.thresholds = thresholds
    report.use_wrench = use_wrench
    return report
