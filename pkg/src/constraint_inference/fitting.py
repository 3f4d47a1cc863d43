"""Kinematic least-squares fit of every constraint model to a segment.

The objective is

    J(alpha) = sum_i |Phi_i(p_i, alpha)|^2 + rho * |dPhi_i(p_i, v_i, w_i, alpha)|^2

where Phi_i stacks kinematic and parameter rows (the parameter rows therefore
count once per sample) and rho is ``FitConfig.velocity_weight``. It is
minimized with BFGS from several starting points.
"""
from __future__ import annotations

import logging
from concurrent.futures import Executor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from . import _kernels
from .geometry import exp_coords_from_direction, exp_map, quat_to_rotmat, skew
from .models import (
    LAYOUT,
    ConstraintKind,
    ConstraintParams,
    CanonicalGeometry,
    canonicalize,
    kinematic_error_batch,
    kinematic_rows,
    parameter_rows,
    rate_rows,
    tidy_params,
)

log = logging.getLogger(__name__)

MIN_SAMPLES_FACTOR = 2


@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 500
    gradient_tolerance: float = 1e-8
    n_starts: int = 8
    seed: int = 0
    velocity_weight: float = 1.0
    # stop trying further starts once a start reaches this objective ...
    exact_objective: float = 1e-20
    # ... or once this many converged starts agree on the best value
    agreeing_starts: int = 2
    agreement_tolerance: float = 1e-6

    def __post_init__(self):
        if self.max_iterations <= 0 or self.n_starts <= 0:
            raise InvalidInputError("max_iterations and n_starts must be positive")
        if self.gradient_tolerance <= 0 or self.velocity_weight < 0:
            raise InvalidInputError("gradient_tolerance must be positive, velocity_weight non-negative")

    @classmethod
    def from_dict(cls, data):
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown fit config fields: {sorted(unknown)}")
        return cls(**data)

    def as_dict(self):
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass
class FitResult:
    params: ConstraintParams
    objective: float
    per_sample_kinematic_error: np.ndarray
    converged: bool
    iterations: int
    starts_tried: int
    degenerate: bool = False
    messages: list = field(default_factory=list)

    @property
    def kind(self):
        return self.params.kind

    @property
    def valid(self):
        return self.converged and not self.degenerate

    @property
    def geometry(self) -> CanonicalGeometry:
        return canonicalize(self.params)

    @property
    def mean_kinematic_error(self):
        return float(np.mean(self.per_sample_kinematic_error))


class _Objective:
    """Fit objective with analytic gradient, bound to one segment.

    ``compiled=False`` evaluates through the row functions of ``models``
    instead of the fused kernel; both give the same numbers.
    """

    def __init__(self, kind, segment, velocity_weight=1.0, compiled=True):
        if len(segment) == 0:
            raise InvalidInputError("cannot fit an empty segment")
        self.kind = kind
        self.r = np.ascontiguousarray(segment.r)
        self.A = np.ascontiguousarray(quat_to_rotmat(segment.q))
        self.v = np.ascontiguousarray(segment.v)
        self.omega = segment.omega
        self.n = len(segment)
        self.rho = float(velocity_weight)
        self.compiled = compiled
        self.code = list(ConstraintKind).index(kind)
        if compiled:
            self.B = np.ascontiguousarray(np.einsum("nij,njk->nik", skew(self.omega), self.A))
        self.evaluations = 0

    def value(self, alpha):
        if self.compiled:
            return self(alpha)[0]
        kin, _ = kinematic_rows(self.kind, alpha, self.r, self.A)
        par, _ = parameter_rows(self.kind, alpha)
        total = np.sum(kin * kin) + self.n * np.sum(par * par)
        if self.rho:
            rate, _ = rate_rows(self.kind, alpha, self.A, self.v, self.omega)
            total += self.rho * np.sum(rate * rate)
        return float(total)

    def __call__(self, alpha):
        self.evaluations += 1
        if self.compiled:
            alpha = np.array(alpha, dtype=float)  # writable C copy: one compiled signature
            value, grad = _kernels.objective(self.code, alpha, self.r, self.A, self.B, self.v, self.rho)
            par, pg = parameter_rows(self.kind, alpha, grad=True)
            if par.size:
                value += self.n * (par @ par)
                grad += 2.0 * self.n * (par @ pg)
            return float(value), grad
        kin, kg = kinematic_rows(self.kind, alpha, self.r, self.A, grad=True)
        par, pg = parameter_rows(self.kind, alpha, grad=True)
        value = np.sum(kin * kin) + self.n * np.sum(par * par)
        grad = 2.0 * np.einsum("nk,nkp->p", kin, kg) + 2.0 * self.n * (par @ pg)
        if self.rho:
            rate, rg = rate_rows(self.kind, alpha, self.A, self.v, self.omega, grad=True)
            value += self.rho * np.sum(rate * rate)
            grad += 2.0 * self.rho * np.einsum("nk,nkp->p", rate, rg)
        return float(value), grad


def objective_and_gradient(kind, alpha, segment, velocity_weight=1.0, compiled=True):
    """Least-squares fit objective and its gradient with respect to alpha."""
    kind = kind if isinstance(kind, ConstraintKind) else ConstraintKind.parse(kind)
    alpha = np.asarray(alpha, dtype=float)
    if alpha.size != kind.n_params:
        raise InvalidInputError(f"{kind.value} expects {kind.n_params} parameters, got {alpha.size}")
    return _Objective(kind, segment, velocity_weight, compiled)(alpha)


@dataclass
class BFGSResult:
    x: np.ndarray
    value: float
    converged: bool
    iterations: int
    message: str


def bfgs_minimize(f, x0, cfg=FitConfig(), c1=1e-4, backtrack=0.5, max_backtracks=60,
                  stall_tolerance=1e-13, stall_iterations=3):
    """BFGS with a backtracking Armijo line search.

    ``f(x)`` returns ``(value, gradient)``. The inverse Hessian starts at the
    identity and is rescaled by s'y / y'y before the first update. Curvature
    pairs with s'y <= 0 are skipped. Accepted objective values never increase.

    Besides the gradient test, a run also counts as converged once the
    relative decrease stays below ``stall_tolerance`` for ``stall_iterations``
    consecutive steps: at that point the gradient is dominated by rounding.
    """
    x = np.array(x0, dtype=float)
    value, g = f(x)
    if not np.isfinite(value) or not np.all(np.isfinite(g)):
        return BFGSResult(x, float(value), False, 0, "non-finite objective at the start point")
    dim = x.size
    eye = np.eye(dim)
    H = eye.copy()
    first = True
    stalled = 0
    for it in range(cfg.max_iterations):
        if np.max(np.abs(g)) <= cfg.gradient_tolerance:
            return BFGSResult(x, value, True, it, "gradient tolerance reached")
        p = -H @ g
        slope = g @ p
        if slope >= 0:
            H = eye.copy()
            p = -g
            slope = g @ p
        step = 1.0
        if first:
            step = min(1.0, 1.0 / max(np.max(np.abs(g)), 1e-300))
        accepted = False
        for _ in range(max_backtracks):
            x_new = x + step * p
            new_value, g_new = f(x_new)
            if not np.isfinite(new_value) or not np.all(np.isfinite(g_new)):
                return BFGSResult(x, value, False, it, "non-finite objective during line search")
            if new_value <= value + c1 * step * slope:
                accepted = True
                break
            step *= backtrack
        if not accepted:
            if not np.array_equal(H, eye):
                H = eye.copy()
                first = True
                continue
            if stalled:
                return BFGSResult(x, value, True, it, "objective stationary to rounding")
            return BFGSResult(x, value, False, it, "line search failed to decrease the objective")
        s = x_new - x
        y = g_new - g
        sy = s @ y
        if sy > 1e-300 and sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if first:
                H = eye * (sy / (y @ y))
            rho = 1.0 / sy
            Hy = H @ y
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * (y @ Hy) + rho) * np.outer(s, s)
            first = False
        stalled = stalled + 1 if value - new_value <= stall_tolerance * abs(value) else 0
        x, value, g = x_new, new_value, g_new
        if stalled >= stall_iterations:
            return BFGSResult(x, value, True, it + 1, "objective stationary to rounding")
    converged = bool(np.max(np.abs(g)) <= cfg.gradient_tolerance)
    return BFGSResult(x, value, converged, cfg.max_iterations,
                      "gradient tolerance reached" if converged else "iteration limit reached")


# ---------------------------------------------------------------------------
# initialization


def _fibonacci_hemisphere(count):
    i = np.arange(count) + 0.5
    z = 1.0 - i / count  # (0, 1]
    phi = np.pi * (1.0 + 5**0.5) * i
    rad = np.sqrt(1.0 - z * z)
    return np.column_stack([rad * np.cos(phi), rad * np.sin(phi), z])


def _principal(vectors, smallest=False, center=False):
    X = np.asarray(vectors, dtype=float)
    if center:
        X = X - X.mean(axis=0)
    if X.shape[0] == 0 or not np.any(X):
        return None
    _, sv, vt = np.linalg.svd(X, full_matrices=False)
    if smallest:
        if X.shape[0] < 3:
            return None
        return vt[-1]
    return vt[0]


def _unit_or(u, fallback):
    norm = np.linalg.norm(u)
    return u / norm if norm > 1e-12 else fallback


def _any_perpendicular(u):
    helper = np.eye(3)[int(np.argmin(np.abs(u)))]
    return _unit_or(np.cross(u, helper), np.array([1.0, 0.0, 0.0]))


def _frame_for(direction):
    w, _ = exp_coords_from_direction(direction)
    return w, exp_map(w)


class _Data:
    def __init__(self, segment, velocity_weight):
        self.r = segment.r
        self.A = quat_to_rotmat(segment.q)
        self.v = segment.v
        self.omega = segment.omega
        self.n = len(segment)
        self.rho = velocity_weight


def _lstsq(M, b):
    return np.linalg.lstsq(M, b, rcond=None)[0]


def _complete_point_on_plane(data, m):
    w, R = _frame_for(m)
    e3 = R[:, 2]
    rows = [np.column_stack([np.einsum("nji,j->ni", data.A, e3), -np.ones(data.n)])]
    rhs = [-(data.r @ e3)]
    if data.rho:
        sq = np.sqrt(data.rho)
        cr = np.cross(np.broadcast_to(e3, data.omega.shape), data.omega)
        rows.append(sq * np.column_stack([np.einsum("nji,nj->ni", data.A, cr), np.zeros(data.n)]))
        rhs.append(-sq * (data.v @ e3))
    sol = _lstsq(np.vstack(rows), np.concatenate(rhs))
    return ConstraintParams.from_parts(ConstraintKind.POINT_ON_PLANE, s=sol[:3], d=sol[3], w=w).alpha


def _complete_planar(data, m):
    w, R = _frame_for(m)
    e3 = R[:, 2]
    t = _unit_or(np.einsum("nji,j->ni", data.A, e3).mean(axis=0), np.array([0.0, 0.0, 1.0]))
    return ConstraintParams.from_parts(ConstraintKind.PLANAR, t=t, d=float(np.mean(data.r @ e3)), w=w).alpha


def _complete_prismatic(data, m):
    w, R = _frame_for(m)
    e1, e2, e3 = R.T
    s = _unit_or(np.einsum("nji,j->ni", data.A, e3).mean(axis=0), np.array([0.0, 0.0, 1.0]))
    t = np.einsum("nji,j->ni", data.A, e2).mean(axis=0)
    t = _unit_or(t - (t @ s) * s, _any_perpendicular(s))
    return ConstraintParams.from_parts(ConstraintKind.PRISMATIC, t=t, s=s,
                                       d=(float(np.mean(data.r @ e1)), float(np.mean(data.r @ e2))), w=w).alpha


def _complete_cylinder(data, m):
    w, R = _frame_for(m)
    e1, e2, e3 = R.T
    n = data.n
    M = np.zeros((2 * n, 5))
    b = np.zeros(2 * n)
    for k, e in enumerate((e1, e2)):
        M[k::2, :3] = np.einsum("nji,j->ni", data.A, e)
        M[k::2, 3 + k] = -1.0
        b[k::2] = -(data.r @ e)
    sol = _lstsq(M, b)
    axis_body = _unit_or(np.einsum("nji,j->ni", data.A, e3).mean(axis=0), np.array([0.0, 0.0, 1.0]))
    s = sol[:3] - (sol[:3] @ axis_body) * axis_body
    t = _unit_or(np.cross(s, axis_body), _any_perpendicular(axis_body))
    return ConstraintParams.from_parts(ConstraintKind.CONCENTRIC_CYLINDER, t=t, s=s, d=sol[3:5], w=w).alpha


def _fixed_point_lstsq(data):
    n = data.n
    M = np.zeros((3 * n, 6))
    M[:, :3] = data.A.reshape(3 * n, 3)
    M[:, 3:] = -np.tile(np.eye(3), (n, 1))
    sol = _lstsq(M, -data.r.reshape(-1))
    return sol[:3], sol[3:]


def _complete_axial(data, m, s_fp=None):
    w, R = _frame_for(m)
    e3 = R[:, 2]
    if s_fp is None:
        s_fp, _ = _fixed_point_lstsq(data)
    axis_body = _unit_or(np.einsum("nji,j->ni", data.A, e3).mean(axis=0), np.array([0.0, 0.0, 1.0]))
    s = s_fp - (s_fp @ axis_body) * axis_body
    P = np.mean(data.r + np.einsum("nij,j->ni", data.A, s), axis=0)
    t = _unit_or(np.cross(s, axis_body), _any_perpendicular(axis_body))
    return ConstraintParams.from_parts(ConstraintKind.AXIAL_ROTATION, t=t, s=s, d=R.T @ P, w=w).alpha


def _candidate_directions(kind, data, count=48):
    dirs = []
    if kind in (ConstraintKind.PLANAR, ConstraintKind.POINT_ON_PLANE):
        dirs.append(_principal(data.r, smallest=True, center=True))
    if kind in (ConstraintKind.PRISMATIC, ConstraintKind.CONCENTRIC_CYLINDER):
        dirs.append(_principal(data.r, center=True))
        dirs.append(_principal(data.v))
    if kind in (ConstraintKind.PLANAR, ConstraintKind.CONCENTRIC_CYLINDER, ConstraintKind.AXIAL_ROTATION):
        dirs.append(_principal(data.omega))
    dirs = [d for d in dirs if d is not None and np.all(np.isfinite(d))]
    dirs.extend(_fibonacci_hemisphere(count))
    return dirs


_COMPLETERS = {
    ConstraintKind.POINT_ON_PLANE: _complete_point_on_plane,
    ConstraintKind.PLANAR: _complete_planar,
    ConstraintKind.PRISMATIC: _complete_prismatic,
    ConstraintKind.CONCENTRIC_CYLINDER: _complete_cylinder,
    ConstraintKind.AXIAL_ROTATION: _complete_axial,
}


def _random_alpha(kind, rng, scale=0.5):
    from .synthetic import random_params

    return random_params(kind, rng).alpha * np.where(rng.random(kind.n_params) < 0.5, 1.0, scale)


def _candidates(kind, segment, velocity_weight):
    """Data-driven starting points ranked by objective (best first)."""
    data = _Data(segment, velocity_weight)
    obj = _Objective(kind, segment, velocity_weight)
    if kind is ConstraintKind.FIXED_POINT:
        s, P = _fixed_point_lstsq(data)
        return [ConstraintParams.from_parts(kind, P=P, s=s).alpha]
    complete = _COMPLETERS[kind]
    extra = {}
    if kind is ConstraintKind.AXIAL_ROTATION:
        extra["s_fp"] = _fixed_point_lstsq(data)[0]
    scored = []
    for m in _candidate_directions(kind, data):
        try:
            alpha = complete(data, m, **extra)
        except (np.linalg.LinAlgError, InvalidInputError):
            continue
        if np.all(np.isfinite(alpha)):
            scored.append((obj.value(alpha), alpha))
    scored.sort(key=lambda item: item[0])
    return [alpha for _, alpha in scored]


def _perturb(kind, alpha, rng):
    out = np.array(alpha, dtype=float)
    layout = LAYOUT[kind]
    for name, sl in layout.items():
        width = sl.stop - sl.start
        if name == "w":
            out[sl] += rng.normal(scale=0.3, size=width)
        elif name in ("t",):
            out[sl] += rng.normal(scale=0.3, size=width)
        else:
            out[sl] += rng.normal(scale=0.05, size=width)
    return out


def initialize(kind, segment, start_index=0, seed=0, velocity_weight=1.0, _cache=None):
    """Starting parameter vector for one BFGS start.

    Start 0 is the best data-driven guess (closed-form fixed point; plane /
    line / axis directions from principal components and a hemisphere scan,
    with the remaining parameters solved linearly). Later starts alternate
    between lower-ranked data-driven guesses and random perturbations of the
    best one, seeded by ``(seed, kind, start_index)``.
    """
    kind = kind if isinstance(kind, ConstraintKind) else ConstraintKind.parse(kind)
    rng = np.random.default_rng([seed, list(ConstraintKind).index(kind), start_index])
    candidates = _cache if _cache is not None else _safe_candidates(kind, segment, velocity_weight)
    if not candidates:
        return _random_alpha(kind, rng)
    if start_index == 0:
        return np.array(candidates[0], dtype=float)
    if start_index % 2 == 1 and (start_index + 1) // 2 < len(candidates):
        base = candidates[(start_index + 1) // 2]
        return _perturb(kind, base, rng) if kind is ConstraintKind.FIXED_POINT else np.array(base)
    return _perturb(kind, candidates[0], rng)


def _safe_candidates(kind, segment, velocity_weight):
    if len(segment) < 2:
        return []
    try:
        return _candidates(kind, segment, velocity_weight)
    except (np.linalg.LinAlgError, ValueError):
        log.debug("data-driven initialization failed for %s", kind.value, exc_info=True)
        return []


def _distinct(candidates, kind, limit=8):
    """Keep candidates whose plane/axis directions differ noticeably."""
    if kind is ConstraintKind.FIXED_POINT:
        return candidates
    wsl = LAYOUT[kind]["w"]
    kept, dirs = [], []
    for alpha in candidates:
        e3 = exp_map(alpha[wsl])[:, 2]
        if all(abs(e3 @ d) < np.cos(np.radians(15)) for d in dirs):
            kept.append(alpha)
            dirs.append(e3)
        if len(kept) >= limit:
            break
    return kept


def fit_model(kind, segment, cfg=FitConfig()):
    """Fit one constraint model; returns the best of ``cfg.n_starts`` BFGS runs."""
    kind = kind if isinstance(kind, ConstraintKind) else ConstraintKind.parse(kind)
    if len(segment) == 0:
        raise InvalidInputError("cannot fit an empty segment")
    obj = _Objective(kind, segment, cfg.velocity_weight)
    messages = []
    degenerate = False
    if len(segment) < MIN_SAMPLES_FACTOR * kind.n_params:
        degenerate = True
        messages.append(
            f"{len(segment)} samples < {MIN_SAMPLES_FACTOR * kind.n_params} required for {kind.value}"
        )
    cache = _distinct(_safe_candidates(kind, segment, cfg.velocity_weight), kind)
    best = None
    iterations = 0
    tried = 0
    finals = []
    for start in range(cfg.n_starts):
        x0 = initialize(kind, segment, start, cfg.seed, cfg.velocity_weight, _cache=cache)
        res = bfgs_minimize(obj, x0, cfg)
        tried += 1
        iterations += res.iterations
        if res.converged:
            finals.append(res.value)
        if best is None or res.value < best.value or (not best.converged and res.converged
                                                     and res.value <= best.value * (1 + 1e-9)):
            best = res
        if best.converged and best.value <= cfg.exact_objective:
            break
        limit = best.value * (1 + cfg.agreement_tolerance) + cfg.exact_objective
        if best.converged and sum(v <= limit for v in finals) >= cfg.agreeing_starts:
            break
    params = tidy_params(ConstraintParams(kind, best.x))
    if params.is_degenerate():
        degenerate = True
        messages.append("fitted body vector collapsed to zero length")
    if not best.converged:
        messages.append(best.message)
    err = kinematic_error_batch(kind, params.alpha, segment.r, quat_to_rotmat(segment.q))
    return FitResult(params=params, objective=obj.value(params.alpha), per_sample_kinematic_error=err,
                     converged=bool(best.converged and not (len(segment) < 2)), iterations=iterations,
                     starts_tried=tried, degenerate=degenerate, messages=messages)


def fit_all_models(segment, cfg=FitConfig(), executor: Executor | None = None):
    """Fit all six models; never aborts on a single model's failure."""
    kinds = list(ConstraintKind)
    if executor is not None:
        futures = {kind: executor.submit(fit_model, kind, segment, cfg) for kind in kinds}
        return {kind: futures[kind].result() for kind in kinds}
    return {kind: fit_model(kind, segment, cfg) for kind in kinds}
