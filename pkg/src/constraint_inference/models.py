"""The six geometric constraint models.

Each model is a residual system Phi(p, alpha) on the pose p = (r, q) of the
constrained body. Rows are split into *kinematic* rows, which involve the
pose, and *parameter* rows (unit length / orthogonality of body vectors),
which only involve alpha. Plane and axis orientations use two exponential
coordinates w = (wx, wy); the columns of R = exp(w) are written e1, e2, e3.

Parameter layouts (alpha):

=====================  ==========================================
FIXED_POINT            P(3), s(3)
POINT_ON_PLANE         s(3), d, wx, wy
CONCENTRIC_CYLINDER    t(3), s(3), dx, dy, wx, wy
PLANAR                 t(3), d, wx, wy
PRISMATIC              t(3), s(3), dx, dy, wx, wy
AXIAL_ROTATION         t(3), s(3), dx, dy, dz, wx, wy
=====================  ==========================================

Gauges (parameter changes that leave the geometry untouched): the sign of a
plane normal or axis direction (w re-chosen for -e3, with d / (dx, dy)
re-expressed in the new frame), and the sign of t (and of s for the
prismatic model). All geometry comparisons go through :func:`canonicalize`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .geometry import (
    d_rotate_dq,
    exp_map,
    exp_map_and_derivatives,
    phi_pi_from_phi_q,
    quat_to_rotmat,
)

DEGENERATE_NORM = 1e-6


class ConstraintKind(enum.Enum):
    FIXED_POINT = "fixed_point"
    POINT_ON_PLANE = "point_on_plane"
    CONCENTRIC_CYLINDER = "concentric_cylinder"
    PLANAR = "planar"
    PRISMATIC = "prismatic"
    AXIAL_ROTATION = "axial_rotation"

    @property
    def dof(self):
        """Motion degrees of freedom left to the body."""
        return _DOF[self]

    @property
    def n_params(self):
        return _N_PARAMS[self]

    @property
    def label(self):
        return self.value.replace("_", " ")

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"hinge": "axial_rotation", "revolute": "axial_rotation", "axial": "axial_rotation",
                   "linear": "prismatic", "cylinder": "concentric_cylinder",
                   "plane": "point_on_plane", "fixed": "fixed_point"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise InvalidInputError(f"unknown constraint kind {text!r} (expected one of {names})") from None


_DOF = {
    ConstraintKind.FIXED_POINT: 3,
    ConstraintKind.POINT_ON_PLANE: 5,
    ConstraintKind.CONCENTRIC_CYLINDER: 2,
    ConstraintKind.PLANAR: 3,
    ConstraintKind.PRISMATIC: 1,
    ConstraintKind.AXIAL_ROTATION: 1,
}

LAYOUT = {
    ConstraintKind.FIXED_POINT: {"P": slice(0, 3), "s": slice(3, 6)},
    ConstraintKind.POINT_ON_PLANE: {"s": slice(0, 3), "d": slice(3, 4), "w": slice(4, 6)},
    ConstraintKind.CONCENTRIC_CYLINDER: {"t": slice(0, 3), "s": slice(3, 6), "d": slice(6, 8),
                                         "w": slice(8, 10)},
    ConstraintKind.PLANAR: {"t": slice(0, 3), "d": slice(3, 4), "w": slice(4, 6)},
    ConstraintKind.PRISMATIC: {"t": slice(0, 3), "s": slice(3, 6), "d": slice(6, 8), "w": slice(8, 10)},
    ConstraintKind.AXIAL_ROTATION: {"t": slice(0, 3), "s": slice(3, 6), "d": slice(6, 9),
                                    "w": slice(9, 11)},
}

_N_PARAMS = {kind: max(s.stop for s in lay.values()) for kind, lay in LAYOUT.items()}

# number of kinematic rows / parameter rows per model
KINEMATIC_ROWS = {
    ConstraintKind.FIXED_POINT: 3,
    ConstraintKind.POINT_ON_PLANE: 1,
    ConstraintKind.CONCENTRIC_CYLINDER: 4,
    ConstraintKind.PLANAR: 3,
    ConstraintKind.PRISMATIC: 5,
    ConstraintKind.AXIAL_ROTATION: 5,
}
PARAMETER_ROWS = {
    ConstraintKind.FIXED_POINT: 0,
    ConstraintKind.POINT_ON_PLANE: 0,
    ConstraintKind.CONCENTRIC_CYLINDER: 2,
    ConstraintKind.PLANAR: 1,
    ConstraintKind.PRISMATIC: 3,
    ConstraintKind.AXIAL_ROTATION: 2,
}


@dataclass(frozen=True)
class ConstraintParams:
    kind: ConstraintKind
    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float).reshape(-1)
        if alpha.size != self.kind.n_params:
            raise InvalidInputError(
                f"{self.kind.value} expects {self.kind.n_params} parameters, got {alpha.size}"
            )
        if not np.all(np.isfinite(alpha)):
            raise InvalidInputError("parameters must be finite")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)

    def __getitem__(self, name):
        sl = LAYOUT[self.kind][name]
        out = self.alpha[sl]
        return float(out[0]) if sl.stop - sl.start == 1 else out.copy()

    def names(self):
        return list(LAYOUT[self.kind])

    def as_dict(self):
        return {name: (self[name] if isinstance(self[name], float) else self[name].tolist())
                for name in self.names()}

    @classmethod
    def from_parts(cls, kind, **parts):
        """Build from named parts, e.g. ``from_parts(PLANAR, t=..., d=0.1, w=(0, 0))``."""
        kind = kind if isinstance(kind, ConstraintKind) else ConstraintKind.parse(kind)
        alpha = np.zeros(kind.n_params)
        layout = LAYOUT[kind]
        missing = set(layout) - set(parts)
        extra = set(parts) - set(layout)
        if missing or extra:
            raise InvalidInputError(
                f"{kind.value} parameters need {sorted(layout)}; missing {sorted(missing)}, unexpected {sorted(extra)}"
            )
        for name, value in parts.items():
            alpha[layout[name]] = np.ravel(np.asarray(value, dtype=float))
        return cls(kind, alpha)

    def is_degenerate(self):
        """True when a body direction collapsed to (near) zero length."""
        if "t" in LAYOUT[self.kind] and np.linalg.norm(self["t"]) < DEGENERATE_NORM:
            return True
        if self.kind is ConstraintKind.PRISMATIC and np.linalg.norm(self["s"]) < DEGENERATE_NORM:
            return True
        return False


def _frame(alpha, kind, grad):
    w = alpha[LAYOUT[kind]["w"]]
    if grad:
        return exp_map_and_derivatives(w)
    return exp_map(w), None


def _rotate(A, b):
    return np.einsum("nij,j->ni", A, b)


def _pullback(A, e):
    """A^T e for per-sample A and either a fixed or per-sample vector e."""
    if e.ndim == 1:
        return np.einsum("nji,j->ni", A, e)
    return np.einsum("nji,nj->ni", A, e)


class _Rows:
    """Collects residual rows and, optionally, their gradients w.r.t. alpha."""

    def __init__(self, n, kind, grad):
        self.n = n
        self.p = kind.n_params
        self.layout = LAYOUT[kind]
        self.grad = grad
        self.vals = []
        self.grads = []

    def add(self, val, **parts):
        self.vals.append(np.broadcast_to(val, (self.n,)))
        if self.grad:
            g = np.zeros((self.n, self.p))
            for name, value in parts.items():
                if name.startswith("_"):  # single column of a named block
                    block, col = name[1:].rsplit("_", 1)
                    g[:, self.layout[block].start + int(col)] = value
                else:
                    g[:, self.layout[name]] = value
            self.grads.append(g)

    def result(self):
        vals = np.stack(self.vals, axis=1)
        grads = np.stack(self.grads, axis=1) if self.grad else None
        return vals, grads


def kinematic_rows(kind, alpha, r, A, grad=False):
    """Kinematic rows of Phi for n samples: values (n, k'), gradients (n, k', p)."""
    n = r.shape[0]
    L = LAYOUT[kind]
    rows = _Rows(n, kind, grad)
    if kind is ConstraintKind.FIXED_POINT:
        P, s = alpha[L["P"]], alpha[L["s"]]
        pt = r + _rotate(A, s)
        for k in range(3):
            gP = np.zeros(3)
            gP[k] = -1.0
            rows.add(pt[:, k] - P[k], P=gP, s=A[:, k, :])
        return rows.result()

    R, dR = _frame(alpha, kind, grad)

    def e(k):
        return R[:, k]

    def dek(k):
        # (2, 3): d e_k / d w_j
        return dR[:, :, k] if grad else None

    if kind is ConstraintKind.POINT_ON_PLANE:
        s, d = alpha[L["s"]], alpha[L["d"]][0]
        pt = r + _rotate(A, s)
        rows.add(d - pt @ e(2), s=-_pullback(A, e(2)), d=1.0,
                 w=-(pt @ dek(2).T) if grad else None)
    elif kind is ConstraintKind.PLANAR:
        t, d = alpha[L["t"]], alpha[L["d"]][0]
        At = _rotate(A, t)
        rows.add(d - r @ e(2), d=1.0, w=-(r @ dek(2).T) if grad else None)
        for k in (0, 1):
            rows.add(At @ e(k), t=_pullback(A, e(k)), w=(At @ dek(k).T) if grad else None)
    elif kind in (ConstraintKind.CONCENTRIC_CYLINDER, ConstraintKind.PRISMATIC):
        t, s, dxy = alpha[L["t"]], alpha[L["s"]], alpha[L["d"]]
        As = _rotate(A, s)
        At = _rotate(A, t)
        if kind is ConstraintKind.CONCENTRIC_CYLINDER:
            pt = r + As
            for k in (0, 1):
                rows.add(dxy[k] - pt @ e(k), s=-_pullback(A, e(k)), **{f"_d_{k}": 1.0},
                         w=-(pt @ dek(k).T) if grad else None)
            rows.add(At @ e(2), t=_pullback(A, e(2)), w=(At @ dek(2).T) if grad else None)
            rows.add(As @ e(2), s=_pullback(A, e(2)), w=(As @ dek(2).T) if grad else None)
        else:
            for k in (0, 1):
                rows.add(dxy[k] - r @ e(k), **{f"_d_{k}": 1.0}, w=-(r @ dek(k).T) if grad else None)
            for k in (0, 1):
                rows.add(As @ e(k), s=_pullback(A, e(k)), w=(As @ dek(k).T) if grad else None)
            rows.add(At @ e(0), t=_pullback(A, e(0)), w=(At @ dek(0).T) if grad else None)
    elif kind is ConstraintKind.AXIAL_ROTATION:
        t, s, dvec = alpha[L["t"]], alpha[L["s"]], alpha[L["d"]]
        As = _rotate(A, s)
        At = _rotate(A, t)
        pt = r + As
        c = R @ dvec
        for k in range(3):
            # d(R d)_k / dw_j = (dR_j d)_k
            gw = -np.array([dR[0][k] @ dvec, dR[1][k] @ dvec]) if grad else None
            rows.add(pt[:, k] - c[k], s=A[:, k, :], d=-R[k], w=gw)
        rows.add(At @ e(2), t=_pullback(A, e(2)), w=(At @ dek(2).T) if grad else None)
        rows.add(As @ e(2), s=_pullback(A, e(2)), w=(As @ dek(2).T) if grad else None)
    else:  # pragma: no cover
        raise InvalidInputError(f"unsupported kind {kind}")
    return rows.result()


def rate_rows(kind, alpha, A, v, omega, grad=False):
    """Velocity residual dPhi = Phi_r v + Phi_pi w in closed form.

    Uses d/dt (A b) = w x (A b) for a body vector b and global angular
    velocity w; values (n, k'), gradients (n, k', p).
    """
    n = A.shape[0]
    L = LAYOUT[kind]
    rows = _Rows(n, kind, grad)

    def body_rate(b):
        Ab = _rotate(A, b)
        return np.cross(omega, Ab)

    def rate_pull(ek):
        # gradient of (w x A b) . e  w.r.t. b  is  A^T (e x w)
        return _pullback(A, np.cross(np.broadcast_to(ek, omega.shape), omega))

    if kind is ConstraintKind.FIXED_POINT:
        s = alpha[L["s"]]
        vp = v + body_rate(s)
        for k in range(3):
            ek = np.eye(3)[k]
            rows.add(vp[:, k], s=rate_pull(ek))
        return rows.result()

    R, dR = _frame(alpha, kind, grad)

    def e(k):
        return R[:, k]

    def wg(x, k):
        return np.stack([x @ dR[0][:, k], x @ dR[1][:, k]], axis=-1) if grad else None

    if kind is ConstraintKind.POINT_ON_PLANE:
        s = alpha[L["s"]]
        vp = v + body_rate(s)
        g = wg(vp, 2)
        rows.add(-(vp @ e(2)), s=-rate_pull(e(2)), w=-g if grad else None)
    elif kind is ConstraintKind.PLANAR:
        t = alpha[L["t"]]
        tr = body_rate(t)
        g = wg(v, 2)
        rows.add(-(v @ e(2)), w=-g if grad else None)
        for k in (0, 1):
            rows.add(tr @ e(k), t=rate_pull(e(k)), w=wg(tr, k))
    elif kind is ConstraintKind.CONCENTRIC_CYLINDER:
        t, s = alpha[L["t"]], alpha[L["s"]]
        sr, tr = body_rate(s), body_rate(t)
        vp = v + sr
        for k in (0, 1):
            g = wg(vp, k)
            rows.add(-(vp @ e(k)), s=-rate_pull(e(k)), w=-g if grad else None)
        rows.add(tr @ e(2), t=rate_pull(e(2)), w=wg(tr, 2))
        rows.add(sr @ e(2), s=rate_pull(e(2)), w=wg(sr, 2))
    elif kind is ConstraintKind.PRISMATIC:
        t, s = alpha[L["t"]], alpha[L["s"]]
        sr, tr = body_rate(s), body_rate(t)
        for k in (0, 1):
            g = wg(v, k)
            rows.add(-(v @ e(k)), w=-g if grad else None)
        for k in (0, 1):
            rows.add(sr @ e(k), s=rate_pull(e(k)), w=wg(sr, k))
        rows.add(tr @ e(0), t=rate_pull(e(0)), w=wg(tr, 0))
    elif kind is ConstraintKind.AXIAL_ROTATION:
        t, s = alpha[L["t"]], alpha[L["s"]]
        sr, tr = body_rate(s), body_rate(t)
        vp = v + sr
        for k in range(3):
            rows.add(vp[:, k], s=rate_pull(np.eye(3)[k]))
        rows.add(tr @ e(2), t=rate_pull(e(2)), w=wg(tr, 2))
        rows.add(sr @ e(2), s=rate_pull(e(2)), w=wg(sr, 2))
    return rows.result()


def parameter_rows(kind, alpha, grad=False):
    """Parameter equations: s.t = 0, t.t - 1 = 0, s.s - 1 = 0 where they apply."""
    L = LAYOUT[kind]
    p = kind.n_params
    vals, grads = [], []
    if kind in (ConstraintKind.CONCENTRIC_CYLINDER, ConstraintKind.PRISMATIC, ConstraintKind.AXIAL_ROTATION):
        s, t = alpha[L["s"]], alpha[L["t"]]
        vals.append(s @ t)
        g = np.zeros(p)
        g[L["s"]] = t
        g[L["t"]] = s
        grads.append(g)
    if "t" in L:
        t = alpha[L["t"]]
        vals.append(t @ t - 1.0)
        g = np.zeros(p)
        g[L["t"]] = 2.0 * t
        grads.append(g)
    if kind is ConstraintKind.PRISMATIC:
        s = alpha[L["s"]]
        vals.append(s @ s - 1.0)
        g = np.zeros(p)
        g[L["s"]] = 2.0 * s
        grads.append(g)
    vals = np.array(vals, dtype=float)
    grads = np.array(grads, dtype=float).reshape(len(vals), p)
    return (vals, grads) if grad else (vals, None)


def _batch_pose(pose):
    r, q = pose  # a Pose or any (r, q) pair
    r = np.asarray(r, dtype=float)
    q = np.asarray(q, dtype=float)
    single = r.ndim == 1
    return np.atleast_2d(r), np.atleast_2d(q), single


def residual(params, pose):
    """Phi(p, alpha): kinematic rows followed by parameter rows.

    Returns shape (k,) for a single pose or (n, k) for a batch.
    """
    r, q, single = _batch_pose(pose)
    A = quat_to_rotmat(q)
    kin, _ = kinematic_rows(params.kind, params.alpha, r, A)
    par, _ = parameter_rows(params.kind, params.alpha)
    out = np.concatenate([kin, np.broadcast_to(par, (kin.shape[0], par.size))], axis=1)
    return out[0] if single else out


def jacobians(params, pose):
    """Analytic (Phi_r, Phi_pi) of the kinematic rows, each (k', 3) or (n, k', 3).

    Phi_pi is obtained from the quaternion Jacobian Phi_q through
    :func:`phi_pi_from_phi_q`.
    """
    r, q, single = _batch_pose(pose)
    phi_r, phi_q = _jacobians_rq(params, q)
    phi_pi = phi_pi_from_phi_q(phi_q, q)
    if single:
        return phi_r[0], phi_pi[0]
    return phi_r, phi_pi


def quaternion_jacobians(params, pose):
    """(Phi_r, Phi_q) of the kinematic rows."""
    r, q, single = _batch_pose(pose)
    phi_r, phi_q = _jacobians_rq(params, q)
    return (phi_r[0], phi_q[0]) if single else (phi_r, phi_q)


def _jacobians_rq(params, q):
    kind, alpha = params.kind, params.alpha
    L = LAYOUT[kind]
    n = q.shape[0]
    k = KINEMATIC_ROWS[kind]
    phi_r = np.zeros((n, k, 3))
    phi_q = np.zeros((n, k, 4))
    if kind is ConstraintKind.FIXED_POINT:
        phi_r[:] = np.eye(3)
        phi_q[:] = d_rotate_dq(q, alpha[L["s"]])
        return phi_r, phi_q
    R = exp_map(alpha[L["w"]])
    e = [R[:, 0], R[:, 1], R[:, 2]]
    if "s" in L:
        dAs = d_rotate_dq(q, alpha[L["s"]])
    if "t" in L:
        dAt = d_rotate_dq(q, alpha[L["t"]])

    def dotq(ek, dAb):
        return np.einsum("i,nij->nj", ek, dAb)

    if kind is ConstraintKind.POINT_ON_PLANE:
        phi_r[:, 0] = -e[2]
        phi_q[:, 0] = -dotq(e[2], dAs)
    elif kind is ConstraintKind.PLANAR:
        phi_r[:, 0] = -e[2]
        phi_q[:, 1] = dotq(e[0], dAt)
        phi_q[:, 2] = dotq(e[1], dAt)
    elif kind is ConstraintKind.CONCENTRIC_CYLINDER:
        for j in (0, 1):
            phi_r[:, j] = -e[j]
            phi_q[:, j] = -dotq(e[j], dAs)
        phi_q[:, 2] = dotq(e[2], dAt)
        phi_q[:, 3] = dotq(e[2], dAs)
    elif kind is ConstraintKind.PRISMATIC:
        for j in (0, 1):
            phi_r[:, j] = -e[j]
            phi_q[:, 2 + j] = dotq(e[j], dAs)
        phi_q[:, 4] = dotq(e[0], dAt)
    elif kind is ConstraintKind.AXIAL_ROTATION:
        phi_r[:, :3] = np.eye(3)
        phi_q[:, :3] = dAs
        phi_q[:, 3] = dotq(e[2], dAt)
        phi_q[:, 4] = dotq(e[2], dAs)
    return phi_r, phi_q


def velocity_residual(params, pose, twist):
    """dPhi = Phi_r v + Phi_pi w over the kinematic rows."""
    phi_r, phi_pi = jacobians(params, pose)
    v, w = (np.asarray(x, dtype=float) for x in twist)
    return np.einsum("...ij,...j->...i", phi_r, v) + np.einsum("...ij,...j->...i", phi_pi, w)


def _dist_to_line(p, c, u):
    rel = p - c
    return np.linalg.norm(rel - np.outer(rel @ u, u), axis=1)


def kinematic_error_batch(kind, alpha, r, A):
    L = LAYOUT[kind]
    if kind is ConstraintKind.FIXED_POINT:
        pt = r + _rotate(A, alpha[L["s"]])
        return np.linalg.norm(pt - alpha[L["P"]], axis=1)
    R = exp_map(alpha[L["w"]])
    e3 = R[:, 2]
    if kind is ConstraintKind.POINT_ON_PLANE:
        pt = r + _rotate(A, alpha[L["s"]])
        return np.abs(pt @ e3 - alpha[L["d"]][0])
    if kind is ConstraintKind.PLANAR:
        return np.abs(r @ e3 - alpha[L["d"]][0])
    if kind is ConstraintKind.PRISMATIC:
        c = R @ np.r_[alpha[L["d"]], 0.0]
        return _dist_to_line(r, c, e3)
    if kind is ConstraintKind.CONCENTRIC_CYLINDER:
        c = R @ np.r_[alpha[L["d"]], 0.0]
        return _dist_to_line(r + _rotate(A, alpha[L["s"]]), c, e3)
    c = R @ alpha[L["d"]]
    return _dist_to_line(r + _rotate(A, alpha[L["s"]]), c, e3)


def kinematic_error(params, pose):
    """Distance criterion of the model: metres, one value per pose."""
    r, q, single = _batch_pose(pose)
    out = kinematic_error_batch(params.kind, params.alpha, r, quat_to_rotmat(q))
    return float(out[0]) if single else out


def sign_normalize(u):
    """Flip ``u`` so its largest-magnitude component is positive; returns (u, sign)."""
    u = np.asarray(u, dtype=float)
    sign = 1.0 if u[int(np.argmax(np.abs(u)))] >= 0 else -1.0
    return sign * u, sign


def _unit(u):
    norm = np.linalg.norm(u)
    return u / norm if norm > 0 else np.asarray(u, dtype=float)


def _angle(a, b):
    return float(np.arctan2(np.linalg.norm(np.cross(a, b)), abs(float(a @ b))))


@dataclass
class CanonicalGeometry:
    """Gauge-free geometry of a fitted constraint.

    ``points`` hold metres (global points, body-frame points, plane offsets),
    ``directions`` hold sign-normalized unit vectors (compared by angle).
    """

    kind: ConstraintKind
    points: dict = field(default_factory=dict)
    directions: dict = field(default_factory=dict)

    def distance(self, other):
        """Largest deviation: metres for points, radians for directions."""
        if other.kind is not self.kind:
            raise InvalidInputError("cannot compare geometry of different constraint kinds")
        worst = 0.0
        for key, val in self.points.items():
            worst = max(worst, float(np.linalg.norm(np.subtract(val, other.points[key]))))
        for key, val in self.directions.items():
            worst = max(worst, _angle(np.asarray(val), np.asarray(other.directions[key])))
        return worst

    def as_dict(self):
        out = {"kind": self.kind.value}
        for key, val in {**self.points, **self.directions}.items():
            out[key] = val.tolist() if isinstance(val, np.ndarray) else val
        return out


def canonicalize(params):
    kind, a = params.kind, params.alpha
    L = LAYOUT[kind]
    geo = CanonicalGeometry(kind)
    if kind is ConstraintKind.FIXED_POINT:
        geo.points["point"] = a[L["P"]].copy()
        geo.points["body_point"] = a[L["s"]].copy()
        return geo
    R = exp_map(a[L["w"]])
    e3 = R[:, 2]
    if kind in (ConstraintKind.POINT_ON_PLANE, ConstraintKind.PLANAR):
        normal, sign = sign_normalize(e3)
        geo.directions["normal"] = normal
        geo.points["offset"] = np.array([sign * a[L["d"]][0]])
        if kind is ConstraintKind.POINT_ON_PLANE:
            geo.points["body_point"] = a[L["s"]].copy()
        else:
            geo.directions["body_normal"] = sign_normalize(_unit(a[L["t"]]))[0]
        return geo
    if kind is ConstraintKind.AXIAL_ROTATION:
        c = R @ a[L["d"]]
    else:
        c = R @ np.r_[a[L["d"]], 0.0]
    geo.directions["axis"] = sign_normalize(e3)[0]
    geo.points["axis_point"] = c - (c @ e3) * e3
    if kind is ConstraintKind.PRISMATIC:
        geo.directions["body_axis"] = sign_normalize(_unit(a[L["s"]]))[0]
    else:
        geo.points["body_point"] = a[L["s"]].copy()
    geo.directions["body_dir"] = sign_normalize(_unit(a[L["t"]]))[0]
    return geo


def tidy_params(params):
    """Re-normalize unit body vectors and Gram-Schmidt t against s."""
    kind = params.kind
    L = LAYOUT[kind]
    if "t" not in L:
        return params
    a = params.alpha.copy()
    t = a[L["t"]]
    if "s" in L and kind is not ConstraintKind.POINT_ON_PLANE:
        s = a[L["s"]]
        if kind is ConstraintKind.PRISMATIC and np.linalg.norm(s) > 0:
            s = s / np.linalg.norm(s)
            a[L["s"]] = s
        ns = np.linalg.norm(s)
        if ns > DEGENERATE_NORM:
            sh = s / ns
            t = t - (t @ sh) * sh
    nt = np.linalg.norm(t)
    if nt > 0:
        a[L["t"]] = t / nt
    return ConstraintParams(kind, a)
