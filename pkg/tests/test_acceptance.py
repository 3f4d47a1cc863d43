"""Acceptance gate: one PASS/FAIL line per criterion, tolerances pinned below.

Run alone with ``pytest tests/test_acceptance.py -v``; the verdict lines are
printed even when output capture is on.
"""
import time

import numpy as np
import pytest

from conftest import KINDS, kinematic_part, make_segment, random_quat, rel_err, rotate_globally
from constraint_inference.classifier import classify
from constraint_inference.fitting import fit_model, objective_and_gradient
from constraint_inference.forces import reaction_wrench
from constraint_inference.geometry import Pose, phi_pi_from_phi_q, quat_to_rotmat
from constraint_inference.models import KINEMATIC_ROWS, ConstraintKind, canonicalize, jacobians, quaternion_jacobians
from constraint_inference.studies import hinge_study, kinematics_only_comparison, mixed_suite, sampling_study
from constraint_inference.synthetic import PRESETS, MotionProfile, generate, random_params

K = ConstraintKind

# criterion 1
C1_SEEDS = 20
C1_GEOMETRY_TOL = 1e-6
C1_RUNTIME = 60.0
# criterion 2: reference fit errors and the allowed factor either way
C2_SEEDS = 20
C2_REFERENCE = {K.PRISMATIC: 1.04e-4, K.POINT_ON_PLANE: 1.66e-4}
C2_PLANAR_MAX = 2.49e-3
C2_FACTOR = 10.0
C2_MIN_SHARE = 0.9
# criterion 3
C3_SEEDS = 20
C3_RADIAL_FORCE = 5.0
C3_SIGMA_POS = 1e-4
C3_MIN_SHARE = 0.95
# criterion 4
C4_MIN_GAP = 0.20
C4_PER_KIND = 10
# criterion 5
C5_SEEDS = 20
C5_COUNTS = [12, 24, 48, 96, 192]
C5_LARGE_N = 30
C5_RATIO = 1.5
# criterion 6
C6_JACOBIAN_TOL = 1e-5
C6_GRADIENT_TOL = 1e-4
C6_WORK_TOL = 1e-10
C6_SO3_TOL = 1e-12
C6_POSES = 100
C6_RUNTIME = 30.0
# criterion 7
C7_TOL = 1e-5


def verdict(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
    assert ok, detail


def test_criterion_1_round_trip(capsys):
    start = time.perf_counter()
    correct, worst, wrong = 0, 0.0, []
    for kind in KINDS:
        for seed in range(C1_SEEDS):
            params, seg = make_segment(kind, seed=seed)
            assert len(seg) >= 100
            report = classify(seg)
            if report.winner is kind:
                correct += 1
                worst = max(worst, report.fits[kind].geometry.distance(canonicalize(params)))
            else:
                wrong.append((kind.value, seed, report.label))
    elapsed = time.perf_counter() - start
    total = len(KINDS) * C1_SEEDS
    ok = correct == total and worst < C1_GEOMETRY_TOL and elapsed < C1_RUNTIME
    verdict(capsys, 1, ok, f"{correct}/{total} correct, worst geometry error {worst:.2e} "
            f"(< {C1_GEOMETRY_TOL:g}), {elapsed:.1f} s (< {C1_RUNTIME:g} s), misses {wrong[:5]}")


def test_criterion_2_noise_realism(capsys):
    shares, medians = {}, {}
    for kind in (K.PRISMATIC, K.POINT_ON_PLANE, K.PLANAR):
        errs = np.array([fit_model(kind, make_segment(kind, seed=s, noiseless=False, sigma_pos=5e-4)[1])
                         .mean_kinematic_error for s in range(C2_SEEDS)])
        if kind is K.PLANAR:
            inside = errs <= C2_PLANAR_MAX
        else:
            ref = C2_REFERENCE[kind]
            inside = (errs >= ref / C2_FACTOR) & (errs <= ref * C2_FACTOR)
        shares[kind.value] = float(np.mean(inside))
        medians[kind.value] = float(np.median(errs))
    ok = min(shares.values()) >= C2_MIN_SHARE
    detail = ", ".join(f"{k} median {medians[k]:.2e} in band {shares[k]:.0%}" for k in shares)
    verdict(capsys, 2, ok, f"{detail} (need >= {C2_MIN_SHARE:.0%})")


def test_criterion_3_force_disambiguation(capsys):
    outcomes = hinge_study(C3_SEEDS, radial_force=C3_RADIAL_FORCE, sigma_pos=C3_SIGMA_POS)
    full_share = np.mean([o.full_winner == K.AXIAL_ROTATION.value for o in outcomes])
    kin_share = np.mean([o.kinematic_counts["planar"] >= o.kinematic_counts["axial_rotation"] for o in outcomes])
    ok = full_share >= C3_MIN_SHARE and kin_share == 1.0
    verdict(capsys, 3, ok, f"full voting picks axial rotation in {full_share:.0%} (need >= {C3_MIN_SHARE:.0%}), "
            f"kinematics-only planar >= axial counts in {kin_share:.0%} of seeds "
            f"({C3_RADIAL_FORCE:g} N pull, sigma_pos {C3_SIGMA_POS:g} m)")


def test_criterion_4_kinematics_only_degradation(capsys):
    full, kin, rows = kinematics_only_comparison(mixed_suite(C4_PER_KIND))
    assert any(r[0] == "fixed_point" for r in rows)
    ok = full - kin >= C4_MIN_GAP
    verdict(capsys, 4, ok, f"full {full:.0%} vs kinematics-only {kin:.0%}, gap {full - kin:.0%} "
            f"(need >= {C4_MIN_GAP:.0%}) over {len(rows)} segments")


def test_criterion_5_sampling_study(capsys):
    params = PRESETS["stylus_on_table"]
    seg = generate(K.POINT_ON_PLANE, params, MotionProfile(duration=10, sample_rate=30, seed=0))
    study = sampling_study(seg, K.POINT_ON_PLANE, C5_COUNTS, n_seeds=C5_SEEDS, seed=0)
    rand, cont = study.random_median, study.contiguous_median
    counts = np.asarray(study.counts)
    monotone = bool(np.all(np.diff(rand) <= 0))
    large = counts >= C5_LARGE_N
    bounded = bool(np.all(rand[large] <= C5_RATIO * cont[large]))
    lower_small = bool(rand[0] < cont[0])
    ok = monotone and bounded and lower_small
    ratios = ", ".join(f"{n}:{r / c:.2f}" for n, r, c in zip(counts, rand, cont))
    verdict(capsys, 5, ok, f"random medians non-increasing {monotone}, random/contiguous {ratios} "
            f"(<= {C5_RATIO:g} for n >= {C5_LARGE_N}, < 1 at n = {counts[0]})")


def _null_space(M, tol=1e-8):
    _, s, vt = np.linalg.svd(M)
    return vt[int(np.sum(s > tol * max(s.max(), 1.0))):].T


def test_criterion_6_numerical_suite(capsys):
    start = time.perf_counter()
    h = 1e-6
    jac = grad = work = so3 = 0.0
    for i, kind in enumerate(KINDS):
        rng = np.random.default_rng(600 + i)
        for _ in range(C6_POSES):
            params = random_params(kind, rng)
            r, q = rng.normal(size=3), random_quat(rng)
            phi_r, phi_pi = jacobians(params, Pose(r, q))
            fd_r = np.column_stack([(kinematic_part(params, r + h * e, q) - kinematic_part(params, r - h * e, q))
                                    / (2 * h) for e in np.eye(3)])
            fd_pi = np.column_stack([(kinematic_part(params, r, rotate_globally(q, h * e))
                                      - kinematic_part(params, r, rotate_globally(q, -h * e))) / (2 * h)
                                     for e in np.eye(3)])
            jac = max(jac, rel_err(phi_r, fd_r), rel_err(phi_pi, fd_pi))

            # reaction wrenches do no work on admissible twists
            basis = _null_space(np.hstack([phi_r, phi_pi]))
            twist = basis @ rng.normal(size=basis.shape[1])
            fr, nr = reaction_wrench(params, Pose(r, q), rng.normal(size=KINEMATIC_ROWS[kind]))
            scale = np.linalg.norm(twist[:3]) * np.linalg.norm(fr) + np.linalg.norm(twist[3:]) * np.linalg.norm(nr)
            work = max(work, abs(twist[:3] @ fr + twist[3:] @ nr) / scale)

            A = quat_to_rotmat(q)
            so3 = max(so3, np.max(np.abs(A.T @ A - np.eye(3))), abs(np.linalg.det(A) - 1))

        _, seg = make_segment(kind, seed=60 + i, noiseless=False, duration=0.8)
        for _ in range(5):
            alpha = rng.normal(size=kind.n_params)
            _, g = objective_and_gradient(kind, alpha, seg)
            fd = np.empty_like(alpha)
            for j in range(alpha.size):
                e = np.zeros_like(alpha)
                e[j] = h * max(1.0, abs(alpha[j]))
                fd[j] = (objective_and_gradient(kind, alpha + e, seg)[0]
                         - objective_and_gradient(kind, alpha - e, seg)[0]) / (2 * e[j])
            grad = max(grad, rel_err(g, fd))
    elapsed = time.perf_counter() - start
    ok = (jac < C6_JACOBIAN_TOL and grad < C6_GRADIENT_TOL and work < C6_WORK_TOL and so3 < C6_SO3_TOL
          and elapsed < C6_RUNTIME)
    verdict(capsys, 6, ok, f"jacobians {jac:.1e} (< {C6_JACOBIAN_TOL:g}), gradient {grad:.1e} "
            f"(< {C6_GRADIENT_TOL:g}), virtual work {work:.1e} (< {C6_WORK_TOL:g}), SO(3) {so3:.1e} "
            f"(< {C6_SO3_TOL:g}), {elapsed:.1f} s (< {C6_RUNTIME:g} s)")


def test_criterion_7_rotation_jacobian_identity(capsys):
    h = 1e-6
    worst = {}
    for i, kind in enumerate(KINDS):
        rng = np.random.default_rng(700 + i)
        err = 0.0
        for _ in range(C6_POSES):
            params = random_params(kind, rng)
            r, q = rng.normal(size=3), random_quat(rng)
            w = rng.normal(size=3)
            # small rotation expressed in the body frame, pushed to the global frame
            w_global = quat_to_rotmat(q) @ w
            fd = (kinematic_part(params, r, rotate_globally(q, h * w_global))
                  - kinematic_part(params, r, rotate_globally(q, -h * w_global))) / (2 * h)
            _, phi_q = quaternion_jacobians(params, (r, q))
            err = max(err, rel_err(phi_pi_from_phi_q(phi_q, q) @ w_global, fd, floor=1e-8))
        worst[kind.value] = err
    ok = max(worst.values()) < C7_TOL
    verdict(capsys, 7, ok, f"worst relative error {max(worst.values()):.1e} (< {C7_TOL:g}) over "
            f"{C6_POSES} poses for each of {len(worst)} models")


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(pytest.main([__file__, "-v"]))
