from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .geometry import Pose, Twist, Wrench

QUAT_LOAD_TOL = 1e-3


@dataclass
class Segment:
    """Samples of one demonstration segment sharing a single active constraint.

    Arrays are indexed by sample along axis 0. Quaternions are scalar first,
    twists and wrenches are in global axes, moments about the body origin.
    """

    t: np.ndarray
    r: np.ndarray
    q: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    f: np.ndarray
    n: np.ndarray
    warnings: list = field(default_factory=list)
    degenerate: bool = False

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        count = self.t.size
        for name, width in (("r", 3), ("q", 4), ("v", 3), ("omega", 3), ("f", 3), ("n", 3)):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (count, width):
                raise ValidationError(f"field {name!r} has shape {arr.shape}, expected {(count, width)}")
            setattr(self, name, arr)
        self.warnings = list(self.warnings)

    def __len__(self):
        return self.t.size

    @property
    def pose(self):
        return Pose(self.r, self.q)

    @property
    def twist(self):
        return Twist(self.v, self.omega)

    @property
    def wrench(self):
        return Wrench(self.f, self.n)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def subset(self, indices):
        idx = np.sort(np.asarray(indices, dtype=int))
        return Segment(self.t[idx], self.r[idx], self.q[idx], self.v[idx], self.omega[idx],
                       self.f[idx], self.n[idx], warnings=list(self.warnings),
                       degenerate=self.degenerate)

    def validate(self, renormalize=True):
        """Check time ordering and quaternion norms; returns a (possibly) fixed copy."""
        if len(self) == 0:
            raise ValidationError("segment has no samples")
        if np.any(np.diff(self.t) <= 0):
            bad = int(np.argmax(np.diff(self.t) <= 0)) + 1
            raise ValidationError(f"timestamps must be strictly increasing (sample {bad})")
        for name in ("r", "q", "v", "omega", "f", "n"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValidationError(f"non-finite values in {name!r}")
        norms = np.linalg.norm(self.q, axis=1)
        off = np.abs(norms - 1.0)
        if np.any(off > QUAT_LOAD_TOL):
            bad = int(np.argmax(off))
            raise ValidationError(
                f"quaternion at sample {bad} has norm {norms[bad]:.6f} (tolerance {QUAT_LOAD_TOL:g})"
            )
        seg = self
        if renormalize and np.any(off > 0):
            seg = self.replace(q=self.q / norms[:, None])
            if np.any(off > 1e-9):
                seg.warnings.append(f"re-normalized {int(np.sum(off > 1e-9))} quaternions")
        return seg
