import numpy as np
import pytest

from conftest import KINDS, kind_ids, make_segment
from constraint_inference.errors import InvalidInputError
from constraint_inference.fitting import FitConfig, fit_model
from constraint_inference.geometry import exp_map, quat_to_rotmat
from constraint_inference.models import (
    KINEMATIC_ROWS,
    ConstraintKind,
    canonicalize,
    residual,
    velocity_residual,
)
from constraint_inference.segment import Segment
from constraint_inference.synthetic import PRESETS, MotionProfile, add_noise, generate, random_params

K = ConstraintKind


class TestGenerate:
    def test_prismatic_moves_on_a_line(self):
        params, seg = make_segment(K.PRISMATIC, seed=0)
        axis = exp_map(params["w"])[:, 2]
        rel = seg.r - seg.r[0]
        assert np.max(np.linalg.norm(np.cross(rel, axis), axis=1)) < 1e-10
        assert np.ptp(rel @ axis) > 0.05
        A = quat_to_rotmat(seg.q)
        assert np.max(np.abs(A - A[0])) < 1e-10
        assert np.max(np.abs(seg.omega)) == 0.0

    def test_axial_rotation_keeps_its_point_fixed(self):
        params, seg = make_segment(K.AXIAL_ROTATION, seed=1)
        point = seg.r + np.einsum("nij,j->ni", quat_to_rotmat(seg.q), params["s"])
        np.testing.assert_allclose(point, np.broadcast_to(exp_map(params["w"]) @ params["d"], point.shape),
                                   atol=1e-10)

    @pytest.mark.parametrize("kind", KINDS, ids=kind_ids)
    def test_consistent_with_the_model(self, kind):
        for seed in range(3):
            params, seg = make_segment(kind, seed=seed)
            assert np.max(np.abs(residual(params, seg.pose))) < 1e-9
            assert np.max(np.abs(velocity_residual(params, seg.pose, seg.twist))) < 1e-9

    @pytest.mark.parametrize("kind", KINDS, ids=kind_ids)
    def test_excites_every_motion_dof(self, kind, noiseless_segments):
        """Rotational rank plus the translational rank of the constrained point equals the DOF count."""
        params, seg = noiseless_segments[kind]
        body = params["s"] if "s" in params.names() and kind is not K.PRISMATIC else np.zeros(3)
        point_velocity = seg.v + np.cross(seg.omega, np.einsum("nij,j->ni", quat_to_rotmat(seg.q), body))

        def rank(m):
            sv = np.linalg.svd(m, compute_uv=False)
            return int(np.sum(sv > 1e-6 * max(sv[0], 1.0)))

        assert rank(seg.omega) + rank(point_velocity) == kind.dof

    @pytest.mark.parametrize("kind", KINDS, ids=kind_ids)
    def test_other_models_do_not_fit(self, kind, noiseless_segments):
        """No model at most as free as the generator explains the motion."""
        _, seg = noiseless_segments[kind]
        others = [k for k in K if k is not kind and k.dof <= kind.dof]
        per_sample = {k.value: fit_model(k, seg, FitConfig(n_starts=4)).objective / len(seg) for k in others}
        assert per_sample
        assert min(per_sample.values()) > 1e-6, per_sample

    def test_deterministic(self):
        a = make_segment(K.PLANAR, seed=5, noiseless=False)[1]
        b = make_segment(K.PLANAR, seed=5, noiseless=False)[1]
        for name in ("t", "r", "q", "v", "omega", "f", "n"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    def test_zero_amplitude_is_flagged(self):
        params = PRESETS["drawer"]
        seg = generate(K.PRISMATIC, params, MotionProfile(amplitudes=(0.0,)).noiseless())
        assert seg.degenerate
        assert seg.warnings

    def test_kind_mismatch(self):
        with pytest.raises(InvalidInputError):
            generate(K.PLANAR, PRESETS["drawer"], MotionProfile())

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_presets(self, name):
        params = PRESETS[name]
        seg = generate(params.kind, params, MotionProfile(duration=1.0, sample_rate=40).noiseless())
        assert len(seg) == 40
        assert np.max(np.abs(residual(params, seg.pose))) < 1e-9

    def test_random_params_are_consistent(self):
        rng = np.random.default_rng(0)
        for kind in K:
            for _ in range(10):
                p = random_params(kind, rng)
                par = residual(p, (np.zeros(3), np.array([1.0, 0, 0, 0])))[KINEMATIC_ROWS[kind]:]
                assert np.max(np.abs(par), initial=0.0) < 1e-12
                canonicalize(p)

    def test_radial_pull_points_at_the_axis(self):
        params = PRESETS["door_hinge"]
        profile = MotionProfile(duration=1.0, sample_rate=50, radial_force=5.0, friction=0.0,
                                reaction_amplitude=0.0).noiseless()
        seg = generate(K.AXIAL_ROTATION, params, profile)
        inward = np.einsum("nij,j->ni", quat_to_rotmat(seg.q), params["s"])
        inward /= np.linalg.norm(inward, axis=1, keepdims=True)
        np.testing.assert_allclose(seg.f, 5.0 * inward, atol=1e-9)


class TestProfile:
    def test_validation(self):
        with pytest.raises(InvalidInputError):
            MotionProfile(duration=0)
        with pytest.raises(InvalidInputError):
            MotionProfile(sigma_pos=-1)

    def test_from_dict(self):
        p = MotionProfile.from_dict({"duration": 2.0, "free_force": [1, 0, 0]})
        assert p.duration == 2.0 and p.free_force == (1.0, 0.0, 0.0)
        assert MotionProfile.from_dict(p.as_dict()) == p
        with pytest.raises(InvalidInputError, match="unknown"):
            MotionProfile.from_dict({"speed": 1})

    def test_sample_count(self):
        assert MotionProfile(duration=2.4, sample_rate=50).n_samples == 120


def _still_segment(n):
    z = np.zeros((n, 3))
    return Segment(np.arange(n, dtype=float), z, np.tile([1.0, 0, 0, 0], (n, 1)), z, z, z, z)


class TestNoise:
    def test_zero_sigma_is_identity(self):
        _, seg = make_segment(K.CONCENTRIC_CYLINDER, seed=0)
        out = add_noise(seg, MotionProfile().noiseless())
        for name in ("r", "q", "v", "omega", "f", "n"):
            np.testing.assert_array_equal(getattr(out, name), getattr(seg, name))

    def test_position_noise_magnitude(self):
        sigma = 0.0005
        out = add_noise(_still_segment(10_000), MotionProfile(sigma_pos=sigma, sigma_rot=0.0))
        # |N(0, sigma^2 I_3)| follows a chi distribution with mean sigma * sqrt(8 / pi)
        mean = np.mean(np.linalg.norm(out.r, axis=1))
        assert mean == pytest.approx(sigma * np.sqrt(8 / np.pi), rel=0.02)
        assert np.std(out.r) == pytest.approx(sigma, rel=0.02)

    def test_rotation_noise_keeps_unit_quaternions(self):
        out = add_noise(_still_segment(500), MotionProfile(sigma_rot=0.01))
        np.testing.assert_allclose(np.linalg.norm(out.q, axis=1), 1.0, atol=1e-12)
        angle = 2 * np.arccos(np.clip(np.abs(out.q[:, 0]), 0, 1))
        assert np.mean(angle) == pytest.approx(0.01 * np.sqrt(8 / np.pi), rel=0.1)

    def test_seeded(self):
        a = add_noise(_still_segment(50), MotionProfile(seed=3))
        b = add_noise(_still_segment(50), MotionProfile(seed=3))
        c = add_noise(_still_segment(50), MotionProfile(seed=4))
        np.testing.assert_array_equal(a.r, b.r)
        assert not np.array_equal(a.r, c.r)
