"""Rigid-body math: quaternions (scalar first), rotation matrices, two-parameter
exponential coordinates and the quaternion to virtual-rotation Jacobian map.

All functions broadcast over leading dimensions, so a batch of poses can be
passed as arrays of shape ``(n, 3)`` / ``(n, 4)``.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError

UNIT_TOL = 1e-6
SMALL_ANGLE = 1e-8


class Pose(NamedTuple):
    r: np.ndarray  # (..., 3) position of the body frame origin [m]
    q: np.ndarray  # (..., 4) unit quaternion (e0, ex, ey, ez)


class Twist(NamedTuple):
    v: np.ndarray  # (..., 3) linear velocity of the body origin, global frame [m/s]
    w: np.ndarray  # (..., 3) angular velocity, global frame [rad/s]


class Wrench(NamedTuple):
    f: np.ndarray  # (..., 3) force [N]
    n: np.ndarray  # (..., 3) moment about the body origin, global axes [N m]


def skew(v):
    """Cross-product matrix: ``skew(v) @ u == np.cross(v, u)``."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm < 1e-12):
        raise InvalidInputError("cannot normalize a zero quaternion")
    return q / norm


def _check_unit(q, tol):
    norm = np.linalg.norm(q, axis=-1)
    if np.any(np.abs(norm - 1.0) > tol):
        raise InvalidInputError(
            f"quaternion norm deviates from 1 by {np.max(np.abs(norm - 1.0)):.3g} (tol {tol:g})"
        )


def quat_to_rotmat(q, tol=UNIT_TOL):
    """Rotation matrix A(q) = (e0^2 - e.e) I + 2 e e^T + 2 e0 skew(e)."""
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != 4:
        raise InvalidInputError(f"quaternion must have 4 components, got shape {q.shape}")
    _check_unit(q, tol)
    q = quat_normalize(q)
    e0 = q[..., 0]
    e = q[..., 1:]
    eye = np.broadcast_to(np.eye(3), q.shape[:-1] + (3, 3))
    return (
        (e0**2 - np.sum(e * e, axis=-1))[..., None, None] * eye
        + 2.0 * e[..., :, None] * e[..., None, :]
        + 2.0 * e0[..., None, None] * skew(e)
    )


def rotmat_to_quat(A):
    """Inverse of :func:`quat_to_rotmat` (Shepperd's method), returns e0 >= 0."""
    A = np.asarray(A, dtype=float)
    batch = A.shape[:-2]
    A = A.reshape(-1, 3, 3)
    out = np.empty((A.shape[0], 4))
    for i, m in enumerate(A):
        tr = np.trace(m)
        diag = np.diag(m)
        k = int(np.argmax(np.r_[tr, diag]))
        if k == 0:
            e0 = 0.5 * np.sqrt(max(1.0 + tr, 0.0))
            out[i] = [e0, (m[2, 1] - m[1, 2]) / (4 * e0), (m[0, 2] - m[2, 0]) / (4 * e0),
                      (m[1, 0] - m[0, 1]) / (4 * e0)]
        else:
            a = k - 1
            b, c = (a + 1) % 3, (a + 2) % 3
            ea = 0.5 * np.sqrt(max(1.0 + 2 * m[a, a] - tr, 0.0))
            vec = np.empty(3)
            vec[a] = ea
            vec[b] = (m[b, a] + m[a, b]) / (4 * ea)
            vec[c] = (m[c, a] + m[a, c]) / (4 * ea)
            e0 = (m[c, b] - m[b, c]) / (4 * ea)
            out[i] = [e0, *vec]
        if out[i, 0] < 0:
            out[i] = -out[i]
    out /= np.linalg.norm(out, axis=-1, keepdims=True)
    return out.reshape(batch + (4,))


def quat_multiply(q1, q2):
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    a0, a = q1[..., :1], q1[..., 1:]
    b0, b = q2[..., :1], q2[..., 1:]
    scal = a0 * b0 - np.sum(a * b, axis=-1, keepdims=True)
    vec = a0 * b + b0 * a + np.cross(a, b)
    return np.concatenate([scal, vec], axis=-1)


def _rodrigues_coeffs(theta):
    """sin(t)/t, (1-cos t)/t^2 and their derivatives divided by t."""
    if theta < 1e-3:
        t2 = theta * theta
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
        da = -1.0 / 3.0 + t2 / 30.0 - t2 * t2 / 840.0
        db = -1.0 / 12.0 + t2 / 180.0 - t2 * t2 / 6720.0
    else:
        s, c = np.sin(theta), np.cos(theta)
        a = s / theta
        b = (1.0 - c) / theta**2
        da = (theta * c - s) / theta**3
        db = (theta * s - 2.0 * (1.0 - c)) / theta**4
    return a, b, da, db


def _as_w3(w):
    w = np.asarray(w, dtype=float).ravel()
    if w.size == 2:
        return np.array([w[0], w[1], 0.0])
    if w.size == 3:
        if w[2] != 0.0:
            raise InvalidInputError("exponential coordinates must have a zero z component")
        return w
    raise InvalidInputError(f"expected 2 exponential coordinates, got {w.size}")


def exp_map(w):
    """Rodrigues' formula for w = (wx, wy, 0).

    Below ``SMALL_ANGLE`` the first-order series ``I + skew(w)`` is returned.
    """
    w3 = _as_w3(w)
    theta = np.linalg.norm(w3)
    K = skew(w3)
    if theta < SMALL_ANGLE:
        return np.eye(3) + K
    a, b, _, _ = _rodrigues_coeffs(theta)
    return np.eye(3) + a * K + b * (K @ K)


def exp_map_and_derivatives(w):
    """Return ``R = exp(skew(w))`` and ``dR`` of shape (2, 3, 3) w.r.t. (wx, wy)."""
    w3 = _as_w3(w)
    theta = np.linalg.norm(w3)
    K = skew(w3)
    K2 = K @ K
    a, b, da, db = _rodrigues_coeffs(theta)
    R = np.eye(3) + a * K + b * K2
    dR = np.empty((2, 3, 3))
    for j in range(2):
        Kj = skew(np.eye(3)[j])
        # d(theta)/dw_j = w_j / theta, folded into da/db (already divided by theta)
        dR[j] = a * Kj + b * (Kj @ K + K @ Kj) + w3[j] * (da * K + db * K2)
    return R, dR


def exp_coords_from_direction(n):
    """Exponential coordinates (wx, wy) whose rotation maps z onto unit ``n``.

    ``n`` is flipped into the upper hemisphere first, so the rotation angle is
    at most pi/2 and the returned flag tells whether the flip happened.
    """
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    flipped = n[2] < 0
    if flipped:
        n = -n
    s = np.hypot(n[0], n[1])
    if s < 1e-15:
        return np.zeros(2), flipped
    theta = np.arctan2(s, n[2])
    return theta * np.array([-n[1], n[0]]) / s, flipped


def rotvec_to_rotmat(phi):
    """General rotation-vector exponential, batched over leading dims."""
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi, axis=-1)
    K = skew(phi)
    small = theta < 1e-4
    t = np.where(small, 1.0, theta)
    t2 = theta**2
    a = np.where(small, 1.0 - t2 / 6.0 + t2**2 / 120.0, np.sin(t) / t)
    b = np.where(small, 0.5 - t2 / 24.0 + t2**2 / 720.0, (1.0 - np.cos(t)) / t**2)
    eye = np.broadcast_to(np.eye(3), phi.shape[:-1] + (3, 3))
    return eye + a[..., None, None] * K + b[..., None, None] * (K @ K)


def rotvec_left_jacobian(phi):
    """J with ``d/dt exp(phi) exp(phi)^T = skew(J @ phi_dot)``."""
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi, axis=-1)
    K = skew(phi)
    small = theta < 1e-4
    t = np.where(small, 1.0, theta)
    t2 = theta**2
    b = np.where(small, 0.5 - t2 / 24.0 + t2**2 / 720.0, (1.0 - np.cos(t)) / t**2)
    c = np.where(small, 1.0 / 6.0 - t2 / 120.0 + t2**2 / 5040.0, (t - np.sin(t)) / t**3)
    eye = np.broadcast_to(np.eye(3), phi.shape[:-1] + (3, 3))
    return eye + b[..., None, None] * K + c[..., None, None] * (K @ K)


def rotvec_to_quat(phi):
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi, axis=-1, keepdims=True)
    half = 0.5 * theta
    small = theta < 1e-8
    scale = np.where(small, 0.5 - theta**2 / 48.0, np.sin(half) / np.where(small, 1.0, theta))
    return np.concatenate([np.cos(half), scale * phi], axis=-1)


def g_matrix(q):
    """G = [-e, -skew(e) + e0 I] (3x4); ``2 G q_dot`` is the body-frame angular velocity."""
    q = np.asarray(q, dtype=float)
    e0 = q[..., 0]
    e = q[..., 1:]
    out = np.empty(q.shape[:-1] + (3, 4))
    out[..., :, 0] = -e
    out[..., :, 1:] = -skew(e) + e0[..., None, None] * np.eye(3)
    return out


def e_matrix(q):
    """E = [-e, skew(e) + e0 I]; ``2 E q_dot`` is the global angular velocity (E = A G)."""
    q = np.asarray(q, dtype=float)
    e0 = q[..., 0]
    e = q[..., 1:]
    out = np.empty(q.shape[:-1] + (3, 4))
    out[..., :, 0] = -e
    out[..., :, 1:] = skew(e) + e0[..., None, None] * np.eye(3)
    return out


def phi_pi_from_phi_q(phi_q, q):
    """Convert a quaternion Jacobian (k x 4) to the virtual-rotation Jacobian (k x 3).

    Uses Phi_pi = Phi_q (1/2) G^T A^T, so that ``Phi_pi @ w`` is the rate of
    change of Phi for a global angular velocity ``w``.
    """
    phi_q = np.asarray(phi_q, dtype=float)
    q = np.asarray(q, dtype=float)
    if phi_q.ndim < 2 or phi_q.shape[-1] != 4:
        raise InvalidInputError(f"phi_q must be (..., k, 4), got shape {phi_q.shape}")
    if q.shape[-1] != 4 or q.shape[:-1] != phi_q.shape[:-2]:
        raise InvalidInputError(
            f"quaternion batch shape {q.shape[:-1]} does not match phi_q batch {phi_q.shape[:-2]}"
        )
    A = quat_to_rotmat(q)
    G = g_matrix(quat_normalize(q))
    T = 0.5 * np.swapaxes(G, -1, -2) @ np.swapaxes(A, -1, -2)  # (..., 4, 3)
    return phi_q @ T


def d_rotate_dq(q, b):
    """Partial derivative of ``A(q) @ b`` with respect to the 4 quaternion entries.

    Differentiates the quadratic form of A(q) literally (no unit-norm
    substitution), shape (..., 3, 4).
    """
    q = np.asarray(q, dtype=float)
    b = np.asarray(b, dtype=float)
    e0 = q[..., 0]
    e = q[..., 1:]
    b = np.broadcast_to(b, e.shape)
    out = np.empty(np.broadcast_shapes(q.shape[:-1], b.shape[:-1]) + (3, 4))
    out[..., :, 0] = 2.0 * e0[..., None] * b + 2.0 * np.cross(e, b)
    eb = np.sum(e * b, axis=-1)
    out[..., :, 1:] = (
        -2.0 * b[..., :, None] * e[..., None, :]
        + 2.0 * eb[..., None, None] * np.eye(3)
        + 2.0 * e[..., :, None] * b[..., None, :]
        - 2.0 * e0[..., None, None] * skew(b)
    )
    return out


def finite_difference_twist(segment):
    """Fill ``v`` and ``omega`` of a segment from its poses.

    Central differences in the interior, one-sided at the ends. Angular
    velocity is ``2 E(q) q_dot`` (global frame); neighbouring quaternions are
    sign-aligned first so the q / -q ambiguity does not produce spikes.
    """
    t = np.asarray(segment.t, dtype=float)
    if t.size < 3:
        raise InvalidInputError("finite-difference twist needs at least 3 samples")
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise InvalidInputError("timestamps must be strictly increasing (duplicate or reversed time)")
    r = np.asarray(segment.r, dtype=float)
    q = quat_normalize(segment.q).copy()
    for i in range(1, len(q)):
        if np.dot(q[i], q[i - 1]) < 0:
            q[i] = -q[i]
    r_dot = np.gradient(r, t, axis=0, edge_order=1)
    q_dot = np.gradient(q, t, axis=0, edge_order=1)
    omega = 2.0 * np.einsum("nij,nj->ni", e_matrix(q), q_dot)
    return segment.replace(v=r_dot, omega=omega)
