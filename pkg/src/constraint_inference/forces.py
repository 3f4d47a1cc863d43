"""Reaction wrenches from Lagrange multipliers, friction removal and the
per-sample force/moment error criteria.

Sign convention: ``lambda`` minimizes ``|Phi_r^T lambda + f|^2 + |Phi_pi^T lambda + n|^2``
and the reaction wrench is ``(Phi_r^T lambda, Phi_pi^T lambda)``. A wrench the
constraint can fully balance therefore satisfies ``f + f_react = 0``, and the
residual left for friction and for the error criteria is ``f + f_react``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Pose, Twist, Wrench
from .models import jacobians

SPEED_FLOOR = 1e-4  # m/s
ANGULAR_SPEED_FLOOR = 1e-3  # rad/s
_RCOND = 1e-10


def _batch(*arrays):
    out = [np.asarray(a, dtype=float) for a in arrays]
    single = out[0].ndim == 1
    return [np.atleast_2d(a) for a in out], single


def _stacked_jacobian(params, pose):
    phi_r, phi_pi = jacobians(params, Pose(*(np.atleast_2d(x) for x in pose)))
    return np.concatenate([np.swapaxes(phi_r, 1, 2), np.swapaxes(phi_pi, 1, 2)], axis=1)  # (n, 6, k')


def _min_norm_solve(M, b):
    """Per-sample minimum-norm least squares; also returns a rank-deficiency flag."""
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    cutoff = _RCOND * np.max(s, axis=1, keepdims=True)
    keep = s > cutoff
    inv = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    coeff = np.einsum("nij,ni->nj", U, b) * inv
    lam = np.einsum("nji,nj->ni", Vt, coeff)
    return lam, ~np.all(keep, axis=1)


def solve_lagrange(params, pose, wrench, return_rank=False):
    """Multipliers minimizing the unexplained wrench, one row per sample.

    Rank-deficient stacks get the minimum-norm solution; with
    ``return_rank=True`` a per-sample deficiency flag is returned as well.
    """
    (f, n), single = _batch(*wrench)
    M = _stacked_jacobian(params, pose)
    lam, deficient = _min_norm_solve(M, -np.concatenate([f, n], axis=1))
    if single:
        lam, deficient = lam[0], bool(deficient[0])
    return (lam, deficient) if return_rank else lam


def reaction_wrench(params, pose, lam):
    """(Phi_r^T lambda, Phi_pi^T lambda)."""
    phi_r, phi_pi = jacobians(params, pose)
    lam = np.asarray(lam, dtype=float)
    return (np.einsum("...ki,...k->...i", phi_r, lam),
            np.einsum("...ki,...k->...i", phi_pi, lam))


def friction_wrench(f_residual, n_residual, twist, speed_floor=SPEED_FLOOR,
                    angular_speed_floor=ANGULAR_SPEED_FLOOR):
    """Components of the residual wrench along the direction of motion.

    The force part is the projection of ``f_residual`` onto the unit linear
    velocity, the moment part the projection of ``n_residual`` onto the unit
    angular velocity; each is zero below its speed floor.
    """
    (fr, nr, v, w), single = _batch(f_residual, n_residual, *twist)

    def project(x, u, floor):
        speed = np.linalg.norm(u, axis=1, keepdims=True)
        moving = speed >= floor
        unit = np.where(moving, u / np.where(moving, speed, 1.0), 0.0)
        return np.sum(x * unit, axis=1, keepdims=True) * unit

    f_mu = project(fr, v, speed_floor)
    n_mu = project(nr, w, angular_speed_floor)
    return (f_mu[0], n_mu[0]) if single else (f_mu, n_mu)


@dataclass
class WrenchErrors:
    """Per-sample force analysis; arrays are indexed by sample."""

    f_error: np.ndarray
    n_error: np.ndarray
    lam: np.ndarray
    f_react: np.ndarray
    n_react: np.ndarray
    f_mu: np.ndarray
    n_mu: np.ndarray
    rank_deficient: np.ndarray

    def __len__(self):
        return len(self.f_error)


def wrench_errors(params, pose, twist, wrench, speed_floor=SPEED_FLOOR,
                  angular_speed_floor=ANGULAR_SPEED_FLOOR):
    """Remove the reaction wrench, then friction, and measure what is left.

    The order matters: friction is estimated from the residual after the
    reaction wrench has been taken out.
    """
    pose = Pose(*(np.atleast_2d(x) for x in pose))
    twist = Twist(*(np.atleast_2d(x) for x in twist))
    f, n = (np.atleast_2d(np.asarray(x, dtype=float)) for x in wrench)
    lam, deficient = solve_lagrange(params, pose, Wrench(f, n), return_rank=True)
    f_react, n_react = reaction_wrench(params, pose, lam)
    f_res = f + f_react
    n_res = n + n_react
    f_mu, n_mu = friction_wrench(f_res, n_res, twist, speed_floor, angular_speed_floor)
    return WrenchErrors(
        f_error=np.linalg.norm(f_res - f_mu, axis=1),
        n_error=np.linalg.norm(n_res - n_mu, axis=1),
        lam=lam, f_react=f_react, n_react=n_react, f_mu=f_mu, n_mu=n_mu,
        rank_deficient=deficient,
    )
