import numpy as np
import pytest
from hypothesis import settings

from constraint_inference.geometry import Pose, quat_multiply, rotvec_to_quat
from constraint_inference.models import KINEMATIC_ROWS, ConstraintKind, residual
from constraint_inference.synthetic import MotionProfile, generate, random_params

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

KINDS = list(ConstraintKind)


def kind_ids(kind):
    return kind.value


def make_segment(kind, seed=0, noiseless=True, **profile):
    """Random-parameter segment of ``kind``; returns (params, segment)."""
    rng = np.random.default_rng([seed, KINDS.index(kind)])
    params = random_params(kind, rng)
    base = dict(duration=2.4, sample_rate=50, seed=seed)
    base.update(profile)
    prof = MotionProfile(**base)
    if noiseless:
        prof = prof.noiseless()
    return params, generate(kind, params, prof)


def random_quat(rng, size=None):
    shape = (4,) if size is None else (size, 4)
    q = rng.normal(size=shape)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def kinematic_part(params, r, q):
    return residual(params, Pose(r, q))[: KINEMATIC_ROWS[params.kind]]


def rotate_globally(q, phi):
    """Apply a small global rotation vector ``phi`` to quaternion ``q``."""
    return quat_multiply(rotvec_to_quat(phi), q)


def rel_err(approx, exact, floor=1e-12):
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    return float(np.linalg.norm(approx - exact) / max(np.linalg.norm(exact), floor))


@pytest.fixture(scope="session")
def noiseless_segments():
    return {kind: make_segment(kind, seed=3) for kind in KINDS}
