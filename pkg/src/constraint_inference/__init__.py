"""Infer the geometric constraint acting on a rigid body from pose, twist and
wrench samples of a demonstration."""

__version__ = "0.1.0"

from .classifier import ClassificationReport, Threshold, Thresholds, classify, eligibility, select
from .errors import InvalidInputError, ParseError, ValidationError
from .fitting import FitConfig, FitResult, bfgs_minimize, fit_all_models, fit_model, objective_and_gradient
from .forces import WrenchErrors, friction_wrench, reaction_wrench, solve_lagrange, wrench_errors
from .geometry import Pose, Twist, Wrench
from .models import ConstraintKind, ConstraintParams, canonicalize
from .segment import Segment
from .synthetic import PRESETS, MotionProfile, add_noise, generate

__all__ = [
    "ClassificationReport", "ConstraintKind", "ConstraintParams", "FitConfig", "FitResult",
    "InvalidInputError", "MotionProfile", "PRESETS", "ParseError", "Pose", "Segment", "Threshold",
    "Thresholds", "Twist", "ValidationError", "Wrench", "WrenchErrors", "add_noise", "bfgs_minimize",
    "canonicalize", "classify", "eligibility", "fit_all_models", "fit_model", "friction_wrench",
    "generate", "objective_and_gradient", "reaction_wrench", "select", "solve_lagrange", "wrench_errors",
]
