"""Compiled fit objective.

Same objective as the row functions in ``models`` (which remain the
reference), evaluated in a single pass over the samples. Per sample the
rate rows use ``B = skew(omega) A`` so that ``d/dt (A b) = B b``.
"""
import numba
import numpy as np

# kind codes, in ConstraintKind declaration order
FIXED_POINT, POINT_ON_PLANE, CYLINDER, PLANAR, PRISMATIC, AXIAL = range(6)


@numba.njit(cache=True)
def _exp_and_derivatives(wx, wy, R, dR):
    theta = np.sqrt(wx * wx + wy * wy)
    t2 = theta * theta
    if theta < 1e-3:
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
        da = -1.0 / 3.0 + t2 / 30.0 - t2 * t2 / 840.0
        db = -1.0 / 12.0 + t2 / 180.0 - t2 * t2 / 6720.0
    else:
        s, c = np.sin(theta), np.cos(theta)
        a = s / theta
        b = (1.0 - c) / t2
        da = (theta * c - s) / (t2 * theta)
        db = (theta * s - 2.0 * (1.0 - c)) / (t2 * t2)
    K = np.zeros((3, 3))
    K[0, 2] = wy
    K[1, 2] = -wx
    K[2, 0] = -wy
    K[2, 1] = wx
    K2 = K @ K
    for i in range(3):
        for j in range(3):
            R[i, j] = a * K[i, j] + b * K2[i, j]
        R[i, i] += 1.0
    w = (wx, wy)
    for j in range(2):
        Kj = np.zeros((3, 3))
        if j == 0:
            Kj[1, 2] = -1.0
            Kj[2, 1] = 1.0
        else:
            Kj[0, 2] = 1.0
            Kj[2, 0] = -1.0
        KjK = Kj @ K + K @ Kj
        for p in range(3):
            for q in range(3):
                dR[j, p, q] = a * Kj[p, q] + b * KjK[p, q] + w[j] * (da * K[p, q] + db * K2[p, q])


@numba.njit(cache=True)
def _mv(M, b):
    out = np.empty(3)
    for i in range(3):
        out[i] = M[i, 0] * b[0] + M[i, 1] * b[1] + M[i, 2] * b[2]
    return out


@numba.njit(cache=True)
def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


@numba.njit(cache=True)
def _accumulate(val, rg, weight, total, grad):
    total += weight * val * val
    c = 2.0 * weight * val
    for k in range(grad.size):
        grad[k] += c * rg[k]
        rg[k] = 0.0
    return total


@numba.njit(cache=True)
def _pull(M, e, rg, start):
    # rg[start:start+3] = M^T e
    for j in range(3):
        rg[start + j] = M[0, j] * e[0] + M[1, j] * e[1] + M[2, j] * e[2]


@numba.njit(cache=True)
def _scaled_pull(M, e, rg, start, scale):
    for j in range(3):
        rg[start + j] = scale * (M[0, j] * e[0] + M[1, j] * e[1] + M[2, j] * e[2])


@numba.njit(cache=True)
def objective(code, alpha, r, A, B, v, rho):
    """Kinematic plus weighted rate rows; returns (value, gradient).

    Parameter rows are not included here.
    """
    n = r.shape[0]
    p = alpha.size
    grad = np.zeros(p)
    rg = np.zeros(p)
    total = 0.0
    R = np.eye(3)
    dR = np.zeros((2, 3, 3))
    if code != FIXED_POINT:
        _exp_and_derivatives(alpha[p - 2], alpha[p - 1], R, dR)
    wi = p - 2
    e0 = R[:, 0].copy()
    e1 = R[:, 1].copy()
    e2 = R[:, 2].copy()
    cols = (e0, e1, e2)
    de = np.empty((2, 3, 3))  # de[j, k] = d e_k / d w_j
    for j in range(2):
        for k in range(3):
            for m in range(3):
                de[j, k, m] = dR[j, m, k]

    for i in range(n):
        Ai = A[i]
        Bi = B[i]
        ri = r[i]
        vi = v[i]
        if code == FIXED_POINT:
            s = alpha[3:6]
            As = _mv(Ai, s)
            Bs = _mv(Bi, s)
            for k in range(3):
                val = ri[k] + As[k] - alpha[k]
                rg[k] = -1.0
                for j in range(3):
                    rg[3 + j] = Ai[k, j]
                total = _accumulate(val, rg, 1.0, total, grad)
            if rho != 0.0:
                for k in range(3):
                    val = vi[k] + Bs[k]
                    for j in range(3):
                        rg[3 + j] = Bi[k, j]
                    total = _accumulate(val, rg, rho, total, grad)

        elif code == POINT_ON_PLANE:
            s = alpha[0:3]
            d = alpha[3]
            As = _mv(Ai, s)
            pt = ri + As
            val = d - _dot(pt, e2)
            _scaled_pull(Ai, e2, rg, 0, -1.0)
            rg[3] = 1.0
            for j in range(2):
                rg[wi + j] = -_dot(pt, de[j, 2])
            total = _accumulate(val, rg, 1.0, total, grad)
            if rho != 0.0:
                vp = vi + _mv(Bi, s)
                val = -_dot(vp, e2)
                _scaled_pull(Bi, e2, rg, 0, -1.0)
                for j in range(2):
                    rg[wi + j] = -_dot(vp, de[j, 2])
                total = _accumulate(val, rg, rho, total, grad)

        elif code == PLANAR:
            t = alpha[0:3]
            d = alpha[3]
            At = _mv(Ai, t)
            val = d - _dot(ri, e2)
            rg[3] = 1.0
            for j in range(2):
                rg[wi + j] = -_dot(ri, de[j, 2])
            total = _accumulate(val, rg, 1.0, total, grad)
            for k in range(2):
                ek = cols[k]
                val = _dot(At, ek)
                _pull(Ai, ek, rg, 0)
                for j in range(2):
                    rg[wi + j] = _dot(At, de[j, k])
                total = _accumulate(val, rg, 1.0, total, grad)
            if rho != 0.0:
                Bt = _mv(Bi, t)
                val = -_dot(vi, e2)
                for j in range(2):
                    rg[wi + j] = -_dot(vi, de[j, 2])
                total = _accumulate(val, rg, rho, total, grad)
                for k in range(2):
                    ek = cols[k]
                    val = _dot(Bt, ek)
                    _pull(Bi, ek, rg, 0)
                    for j in range(2):
                        rg[wi + j] = _dot(Bt, de[j, k])
                    total = _accumulate(val, rg, rho, total, grad)

        elif code == CYLINDER:
            t = alpha[0:3]
            s = alpha[3:6]
            At = _mv(Ai, t)
            As = _mv(Ai, s)
            pt = ri + As
            for k in range(2):
                ek = cols[k]
                val = alpha[6 + k] - _dot(pt, ek)
                _scaled_pull(Ai, ek, rg, 3, -1.0)
                rg[6 + k] = 1.0
                for j in range(2):
                    rg[wi + j] = -_dot(pt, de[j, k])
                total = _accumulate(val, rg, 1.0, total, grad)
            val = _dot(At, e2)
            _pull(Ai, e2, rg, 0)
            for j in range(2):
                rg[wi + j] = _dot(At, de[j, 2])
            total = _accumulate(val, rg, 1.0, total, grad)
            val = _dot(As, e2)
            _pull(Ai, e2, rg, 3)
            for j in range(2):
                rg[wi + j] = _dot(As, de[j, 2])
            total = _accumulate(val, rg, 1.0, total, grad)
            if rho != 0.0:
                Bt = _mv(Bi, t)
                Bs = _mv(Bi, s)
                vp = vi + Bs
                for k in range(2):
                    ek = cols[k]
                    val = -_dot(vp, ek)
                    _scaled_pull(Bi, ek, rg, 3, -1.0)
                    for j in range(2):
                        rg[wi + j] = -_dot(vp, de[j, k])
                    total = _accumulate(val, rg, rho, total, grad)
                val = _dot(Bt, e2)
                _pull(Bi, e2, rg, 0)
                for j in range(2):
                    rg[wi + j] = _dot(Bt, de[j, 2])
                total = _accumulate(val, rg, rho, total, grad)
                val = _dot(Bs, e2)
                _pull(Bi, e2, rg, 3)
                for j in range(2):
                    rg[wi + j] = _dot(Bs, de[j, 2])
                total = _accumulate(val, rg, rho, total, grad)

        elif code == PRISMATIC:
            t = alpha[0:3]
            s = alpha[3:6]
            At = _mv(Ai, t)
            As = _mv(Ai, s)
            for k in range(2):
                ek = cols[k]
                val = alpha[6 + k] - _dot(ri, ek)
                rg[6 + k] = 1.0
                for j in range(2):
                    rg[wi + j] = -_dot(ri, de[j, k])
                total = _accumulate(val, rg, 1.0, total, grad)
            for k in range(2):
                ek = cols[k]
                val = _dot(As, ek)
                _pull(Ai, ek, rg, 3)
                for j in range(2):
                    rg[wi + j] = _dot(As, de[j, k])
                total = _accumulate(val, rg, 1.0, total, grad)
            val = _dot(At, e0)
            _pull(Ai, e0, rg, 0)
            for j in range(2):
                rg[wi + j] = _dot(At, de[j, 0])
            total = _accumulate(val, rg, 1.0, total, grad)
            if rho != 0.0:
                Bt = _mv(Bi, t)
                Bs = _mv(Bi, s)
                for k in range(2):
                    ek = cols[k]
                    val = -_dot(vi, ek)
                    for j in range(2):
                        rg[wi + j] = -_dot(vi, de[j, k])
                    total = _accumulate(val, rg, rho, total, grad)
                for k in range(2):
                    ek = cols[k]
                    val = _dot(Bs, ek)
                    _pull(Bi, ek, rg, 3)
                    for j in range(2):
                        rg[wi + j] = _dot(Bs, de[j, k])
                    total = _accumulate(val, rg, rho, total, grad)
                val = _dot(Bt, e0)
                _pull(Bi, e0, rg, 0)
                for j in range(2):
                    rg[wi + j] = _dot(Bt, de[j, 0])
                total = _accumulate(val, rg, rho, total, grad)

        else:  # AXIAL
            t = alpha[0:3]
            s = alpha[3:6]
            dv = alpha[6:9]
            At = _mv(Ai, t)
            As = _mv(Ai, s)
            c = _mv(R, dv)
            dc0 = _mv(dR[0], dv)
            dc1 = _mv(dR[1], dv)
            for k in range(3):
                val = ri[k] + As[k] - c[k]
                for j in range(3):
                    rg[3 + j] = Ai[k, j]
                    rg[6 + j] = -R[k, j]
                rg[wi] = -dc0[k]
                rg[wi + 1] = -dc1[k]
                total = _accumulate(val, rg, 1.0, total, grad)
            val = _dot(At, e2)
            _pull(Ai, e2, rg, 0)
            for j in range(2):
                rg[wi + j] = _dot(At, de[j, 2])
            total = _accumulate(val, rg, 1.0, total, grad)
            val = _dot(As, e2)
            _pull(Ai, e2, rg, 3)
            for j in range(2):
                rg[wi + j] = _dot(As, de[j, 2])
            total = _accumulate(val, rg, 1.0, total, grad)
            if rho != 0.0:
                Bt = _mv(Bi, t)
                Bs = _mv(Bi, s)
                for k in range(3):
                    val = vi[k] + Bs[k]
                    for j in range(3):
                        rg[3 + j] = Bi[k, j]
                    total = _accumulate(val, rg, rho, total, grad)
                val = _dot(Bt, e2)
                _pull(Bi, e2, rg, 0)
                for j in range(2):
                    rg[wi + j] = _dot(Bt, de[j, 2])
                total = _accumulate(val, rg, rho, total, grad)
                val = _dot(Bs, e2)
                _pull(Bi, e2, rg, 3)
                for j in range(2):
                    rg[wi + j] = _dot(Bs, de[j, 2])
                total = _accumulate(val, rg, rho, total, grad)
    return total, grad
