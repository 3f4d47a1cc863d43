"""Constraint-consistent synthetic demonstrations.

Poses are built from per-DOF sinusoidal excitation of the motion the model
permits, twists are the exact analytic derivatives, and the applied wrench is

    f = -Phi_r^T lambda(t) + f_friction + f_free
    n = -Phi_pi^T lambda(t) + n_friction + n_free

with a smooth multiplier schedule lambda(t). The friction wrench is
``mu * (v, w) / |(v, w)|``; being proportional to the twist it does no work
against the reaction subspace, so the least-squares multipliers of an exact
wrench recover lambda(t) and the friction lands entirely along v and w.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .geometry import (
    Pose,
    exp_coords_from_direction,
    exp_map,
    quat_multiply,
    quat_normalize,
    rotmat_to_quat,
    rotvec_left_jacobian,
    rotvec_to_quat,
    rotvec_to_rotmat,
)
from .models import KINEMATIC_ROWS, ConstraintKind, ConstraintParams, jacobians, parameter_rows
from .segment import Segment

DEFAULT_FREQUENCIES = (0.31, 0.43, 0.57, 0.71, 0.83)


@dataclass(frozen=True)
class MotionProfile:
    duration: float = 4.0                 # s
    sample_rate: float = 100.0            # Hz
    amplitudes: tuple | None = None       # per motion DOF (m or rad); None -> defaults
    frequencies: tuple | None = None      # per motion DOF (Hz)
    translation_amplitude: float = 0.15   # m, default for translational DOFs
    rotation_amplitude: float = 0.6       # rad, default for rotational DOFs
    reaction_amplitude: float = 2.0       # N (or N m per unit row scale) of lambda(t)
    friction: float = 0.5                 # magnitude of the friction wrench
    radial_force: float = 0.0             # N, pull toward the axis (axis models only)
    free_force: tuple = (0.0, 0.0, 0.0)   # N, unconstrained applied force (negative tests)
    free_moment: tuple = (0.0, 0.0, 0.0)  # N m
    sigma_pos: float = 0.0005             # m
    sigma_rot: float = 0.001              # rad
    sigma_f: float = 0.005                # N
    sigma_n: float = 0.0002               # N m
    sigma_v: float = 0.0                  # m/s
    sigma_w: float = 0.0                  # rad/s
    seed: int = 0

    def __post_init__(self):
        if self.duration <= 0 or self.sample_rate <= 0:
            raise InvalidInputError("duration and sample_rate must be positive")
        for name in ("sigma_pos", "sigma_rot", "sigma_f", "sigma_n", "sigma_v", "sigma_w"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be non-negative")

    @property
    def n_samples(self):
        return int(round(self.duration * self.sample_rate))

    def noiseless(self):
        return self.replace(sigma_pos=0.0, sigma_rot=0.0, sigma_f=0.0, sigma_n=0.0,
                            sigma_v=0.0, sigma_w=0.0)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown motion profile fields: {sorted(unknown)}")
        data = dict(data)
        for key in ("amplitudes", "frequencies", "free_force", "free_moment"):
            if data.get(key) is not None:
                data[key] = tuple(float(x) for x in data[key])
        return cls(**data)

    def as_dict(self):
        return dataclasses.asdict(self)


# translational / rotational flag for each motion coordinate of a model
_MOTION_DOFS = {
    ConstraintKind.FIXED_POINT: ("rot", "rot", "rot"),
    ConstraintKind.POINT_ON_PLANE: ("trans", "trans", "rot", "rot", "rot"),
    ConstraintKind.CONCENTRIC_CYLINDER: ("rot", "trans"),
    ConstraintKind.PLANAR: ("trans", "trans", "rot"),
    ConstraintKind.PRISMATIC: ("trans",),
    ConstraintKind.AXIAL_ROTATION: ("rot",),
}


def _unit(u):
    return u / np.linalg.norm(u)


def _random_unit(rng):
    return _unit(rng.normal(size=3))


def _perpendicular_unit(u, rng):
    x = rng.normal(size=3)
    x -= (x @ u) * u
    return _unit(x)


def _random_w(rng, max_angle=1.3):
    n = _random_unit(rng)
    if n[2] < np.cos(max_angle):
        n[2] = abs(n[2]) + np.cos(max_angle)
        n = _unit(n)
    return exp_coords_from_direction(n)[0]


def random_params(kind, rng):
    """Random, internally consistent parameters of the given kind."""
    kind = ConstraintKind.parse(kind) if not isinstance(kind, ConstraintKind) else kind
    if kind is ConstraintKind.FIXED_POINT:
        return ConstraintParams.from_parts(kind, P=rng.uniform(-0.5, 0.5, 3),
                                           s=_random_unit(rng) * rng.uniform(0.05, 0.3))
    if kind is ConstraintKind.POINT_ON_PLANE:
        return ConstraintParams.from_parts(kind, s=_random_unit(rng) * rng.uniform(0.05, 0.3),
                                           d=rng.uniform(-0.5, 0.5), w=_random_w(rng))
    if kind is ConstraintKind.PLANAR:
        return ConstraintParams.from_parts(kind, t=_random_unit(rng), d=rng.uniform(-0.5, 0.5),
                                           w=_random_w(rng))
    t = _random_unit(rng)
    s = _perpendicular_unit(t, rng)
    if kind is ConstraintKind.PRISMATIC:
        return ConstraintParams.from_parts(kind, t=t, s=s, d=rng.uniform(-0.5, 0.5, 2), w=_random_w(rng))
    s = s * rng.uniform(0.05, 0.3)
    if kind is ConstraintKind.CONCENTRIC_CYLINDER:
        return ConstraintParams.from_parts(kind, t=t, s=s, d=rng.uniform(-0.5, 0.5, 2), w=_random_w(rng))
    return ConstraintParams.from_parts(kind, t=t, s=s, d=rng.uniform(-0.5, 0.5, 3), w=_random_w(rng))


PRESETS = {
    "door_hinge": ConstraintParams.from_parts(
        ConstraintKind.AXIAL_ROTATION, t=(0.0, 0.0, 1.0), s=(0.0, -0.4, 0.0), d=(0.5, 0.2, 0.0),
        w=exp_coords_from_direction((1.0, 0.0, 0.0))[0]),
    "drawer": ConstraintParams.from_parts(
        ConstraintKind.PRISMATIC, t=(0.0, 1.0, 0.0), s=(1.0, 0.0, 0.0), d=(0.1, 0.3),
        w=exp_coords_from_direction((0.0, 1.0, 0.0))[0]),
    "whiteboard_eraser": ConstraintParams.from_parts(
        ConstraintKind.PLANAR, t=(0.0, 0.0, 1.0), d=0.8, w=exp_coords_from_direction((1.0, 0.0, 0.0))[0]),
    "stylus_on_table": ConstraintParams.from_parts(
        ConstraintKind.POINT_ON_PLANE, s=(0.0, 0.0, -0.15), d=0.75, w=(0.0, 0.0)),
    "ball_joint": ConstraintParams.from_parts(
        ConstraintKind.FIXED_POINT, P=(0.3, 0.1, 0.5), s=(0.0, 0.0, -0.2)),
    "collar_on_shaft": ConstraintParams.from_parts(
        ConstraintKind.CONCENTRIC_CYLINDER, t=(0.0, 1.0, 0.0), s=(0.1, 0.0, 0.0), d=(0.2, -0.1),
        w=exp_coords_from_direction((0.0, 0.0, 1.0))[0]),
}


def _check_params(params):
    par, _ = parameter_rows(params.kind, params.alpha)
    if par.size and np.max(np.abs(par)) > 1e-9:
        raise InvalidInputError(
            f"{params.kind.value} parameters violate their parameter equations (max {np.max(np.abs(par)):.3g})"
        )
    if params.is_degenerate():
        raise InvalidInputError("degenerate parameters (zero-length body vector)")
    if params.kind in (ConstraintKind.CONCENTRIC_CYLINDER, ConstraintKind.AXIAL_ROTATION):
        if np.linalg.norm(params["s"]) < 1e-9:
            raise InvalidInputError("axis models need the body origin off the axis (s != 0)")


def _signals(profile, kinds, rng):
    """Per-DOF excitation x(t), x_dot(t) with shape (n, dof)."""
    t = np.arange(profile.n_samples) / profile.sample_rate
    dof = len(kinds)
    if profile.amplitudes is not None:
        if len(profile.amplitudes) != dof:
            raise InvalidInputError(f"expected {dof} amplitudes, got {len(profile.amplitudes)}")
        amp = np.asarray(profile.amplitudes, dtype=float)
    else:
        amp = np.array([profile.translation_amplitude if k == "trans" else profile.rotation_amplitude
                        for k in kinds])
    if profile.frequencies is not None:
        if len(profile.frequencies) != dof:
            raise InvalidInputError(f"expected {dof} frequencies, got {len(profile.frequencies)}")
        freq = np.asarray(profile.frequencies, dtype=float)
    else:
        freq = np.asarray(DEFAULT_FREQUENCIES[:dof])
    phase = rng.uniform(0, 2 * np.pi, dof)
    arg = 2 * np.pi * np.outer(t, freq) + phase
    x = amp * np.sin(arg)
    xd = amp * 2 * np.pi * freq * np.cos(arg)
    return t, x, xd, amp


def _axis_rotation(axis, theta):
    return rotvec_to_rotmat(np.outer(theta, axis))


def _frame_to(body_axes, world_axes):
    """Rotation taking the columns of ``body_axes`` onto ``world_axes``."""
    return world_axes @ body_axes.T


def generate(kind, params, profile, with_noise=True):
    """Synthesize a segment moving under ``params`` with the given profile."""
    kind = ConstraintKind.parse(kind) if not isinstance(kind, ConstraintKind) else kind
    if params.kind is not kind:
        raise InvalidInputError(f"params are for {params.kind.value}, requested {kind.value}")
    _check_params(params)
    rng = np.random.default_rng(profile.seed)
    t, x, xd, amp = _signals(profile, _MOTION_DOFS[kind], rng)
    n = t.size
    R = exp_map(params["w"]) if kind is not ConstraintKind.FIXED_POINT else np.eye(3)
    e1, e2, e3 = R[:, 0], R[:, 1], R[:, 2]
    spin = rng.uniform(0, 2 * np.pi)

    def axis_base():
        s = params["s"]
        sh, th = _unit(s), _unit(params["t"])
        u1 = np.cos(spin) * e1 + np.sin(spin) * e2
        u2 = np.cross(e3, u1)
        return _frame_to(np.column_stack([sh, th, np.cross(sh, th)]), np.column_stack([u1, u2, e3]))

    zeros = np.zeros((n, 3))
    if kind in (ConstraintKind.FIXED_POINT, ConstraintKind.POINT_ON_PLANE):
        A0 = rotvec_to_rotmat(rng.normal(size=3) * 0.8)
        rho, rho_d = x[:, -3:], xd[:, -3:]
        A = rotvec_to_rotmat(rho) @ A0
        omega = np.einsum("nij,nj->ni", rotvec_left_jacobian(rho), rho_d)
        As = A @ params["s"]
        if kind is ConstraintKind.FIXED_POINT:
            r = params["P"] - As
            v = -np.cross(omega, As)
        else:
            c = np.outer(x[:, 0], e1) + np.outer(x[:, 1], e2) + params["d"] * e3
            c_dot = np.outer(xd[:, 0], e1) + np.outer(xd[:, 1], e2)
            r = c - As
            v = c_dot - np.cross(omega, As)
    elif kind in (ConstraintKind.CONCENTRIC_CYLINDER, ConstraintKind.AXIAL_ROTATION):
        A = _axis_rotation(e3, x[:, 0]) @ axis_base()
        omega = np.outer(xd[:, 0], e3)
        As = A @ params["s"]
        if kind is ConstraintKind.CONCENTRIC_CYLINDER:
            dx, dy = params["d"]
            pt = dx * e1 + dy * e2 + np.outer(x[:, 1], e3)
            pt_dot = np.outer(xd[:, 1], e3)
        else:
            pt = np.broadcast_to(R @ params["d"], (n, 3))
            pt_dot = zeros
        r = pt - As
        v = pt_dot - np.cross(omega, As)
    elif kind is ConstraintKind.PLANAR:
        th = _unit(params["t"])
        b1 = _perpendicular_unit(th, rng)
        u1 = np.cos(spin) * e1 + np.sin(spin) * e2
        base = _frame_to(np.column_stack([b1, np.cross(th, b1), th]),
                         np.column_stack([u1, np.cross(e3, u1), e3]))
        A = _axis_rotation(e3, x[:, 2]) @ base
        omega = np.outer(xd[:, 2], e3)
        r = np.outer(x[:, 0], e1) + np.outer(x[:, 1], e2) + params["d"] * e3
        v = np.outer(xd[:, 0], e1) + np.outer(xd[:, 1], e2)
    else:  # prismatic
        sh, th = _unit(params["s"]), _unit(params["t"])
        A0 = _frame_to(np.column_stack([np.cross(th, sh), th, sh]), np.column_stack([e1, e2, e3]))
        A = np.broadcast_to(A0, (n, 3, 3))
        omega = zeros.copy()
        dx, dy = params["d"]
        r = dx * e1 + dy * e2 + np.outer(x[:, 0], e3)
        v = np.outer(xd[:, 0], e3)

    q = rotmat_to_quat(A)
    f, m = _wrench(kind, params, r, q, A, v, omega, t, profile, rng)
    seg = Segment(t, r, q, v, omega, f, m)
    if not np.any(amp != 0):
        seg.degenerate = True
        seg.warnings.append("motion profile excites no degrees of freedom")
    if with_noise:
        seg = add_noise(seg, profile)
    return seg


def _wrench(kind, params, r, q, A, v, omega, t, profile, rng):
    n = t.size
    k = KINEMATIC_ROWS[kind]
    bias = rng.uniform(-1.0, 1.0, k)
    freq = rng.uniform(0.2, 0.9, k)
    phase = rng.uniform(0, 2 * np.pi, k)
    lam = profile.reaction_amplitude * (bias + 0.5 * np.sin(2 * np.pi * np.outer(t, freq) + phase))
    phi_r, phi_pi = jacobians(params, Pose(r, q))
    if profile.radial_force and kind in (ConstraintKind.AXIAL_ROTATION, ConstraintKind.CONCENTRIC_CYLINDER):
        # force at the body origin pointing at the axis; its moment about the origin is zero
        As = A @ params["s"]
        inward = As / np.linalg.norm(As, axis=1, keepdims=True)
        target = np.concatenate([profile.radial_force * inward, np.zeros((n, 3))], axis=1)
        J = np.concatenate([phi_r, phi_pi], axis=2)  # (n, k, 6)
        for i in range(n):
            lam[i] += np.linalg.lstsq(J[i].T, -target[i], rcond=None)[0]
    f = -np.einsum("nkj,nk->nj", phi_r, lam)
    m = -np.einsum("nkj,nk->nj", phi_pi, lam)
    if profile.friction:
        speed = np.sqrt(np.sum(v * v, axis=1) + np.sum(omega * omega, axis=1))
        moving = speed > 1e-12
        scale = np.where(moving, profile.friction / np.where(moving, speed, 1.0), 0.0)
        f = f + scale[:, None] * v
        m = m + scale[:, None] * omega
    f = f + np.asarray(profile.free_force, dtype=float)
    m = m + np.asarray(profile.free_moment, dtype=float)
    return f, m


def add_noise(segment, profile):
    """Gaussian pose / twist / wrench noise, deterministic for ``profile.seed``."""
    sig = (profile.sigma_pos, profile.sigma_rot, profile.sigma_f, profile.sigma_n,
           profile.sigma_v, profile.sigma_w)
    if not any(sig):
        return segment.replace()
    rng = np.random.default_rng([profile.seed, 7919])
    n = len(segment)
    r = segment.r + rng.normal(scale=profile.sigma_pos, size=(n, 3))
    dq = rotvec_to_quat(rng.normal(scale=profile.sigma_rot, size=(n, 3)))
    q = quat_normalize(quat_multiply(dq, segment.q))
    f = segment.f + rng.normal(scale=profile.sigma_f, size=(n, 3))
    m = segment.n + rng.normal(scale=profile.sigma_n, size=(n, 3))
    v = segment.v + rng.normal(scale=profile.sigma_v, size=(n, 3))
    w = segment.omega + rng.normal(scale=profile.sigma_w, size=(n, 3))
    return segment.replace(r=r, q=q, f=f, n=m, v=v, omega=w)

