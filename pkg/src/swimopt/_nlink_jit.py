"""Compiled right-hand side for the N-link swimmer.

Mirrors :func:`swimopt.nlink.assemble` entry for entry; the test suite checks
the two paths against each other.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _cross(w):
    m = np.zeros((3, 3))
    m[0, 1] = -w[2]
    m[0, 2] = w[1]
    m[1, 0] = w[2]
    m[1, 2] = -w[0]
    m[2, 0] = -w[1]
    m[2, 1] = w[0]
    return m


@njit(cache=True)
def _rx(a):
    c, s = np.cos(a), np.sin(a)
    m = np.eye(3)
    m[1, 1] = c
    m[1, 2] = -s
    m[2, 1] = s
    m[2, 2] = c
    return m


@njit(cache=True)
def _ry(a):
    c, s = np.cos(a), np.sin(a)
    m = np.eye(3)
    m[0, 0] = c
    m[0, 2] = s
    m[2, 0] = -s
    m[2, 2] = c
    return m


@njit(cache=True)
def _rz(a):
    c, s = np.cos(a), np.sin(a)
    m = np.eye(3)
    m[0, 0] = c
    m[0, 1] = -s
    m[1, 0] = s
    m[1, 1] = c
    return m


@njit(cache=True)
def _mm(a, b):
    out = np.empty((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


@njit(cache=True)
def _crossv(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _put(A, r0, c0, blk, scale):
    for i in range(blk.shape[0]):
        for j in range(blk.shape[1]):
            A[r0 + i, c0 + j] = scale * blk[i, j]


@njit(cache=True)
def _cross_mul(v, m, scale, out):
    """``out = scale * [v]x @ m`` without temporaries."""
    for c in range(3):
        out[0, c] = scale * (v[1] * m[2, c] - v[2] * m[1, c])
        out[1, c] = scale * (v[2] * m[0, c] - v[0] * m[2, c])
        out[2, c] = scale * (v[0] * m[1, c] - v[1] * m[0, c])


@njit(cache=True)
def _put_proj(A, r0, c0, pr, blk):
    for a in range(2):
        for c in range(3):
            A[r0 + a, c0 + c] = pr[a, 0] * blk[0, c] + pr[a, 1] * blk[1, c] + pr[a, 2] * blk[2, c]


@njit(cache=True)
def system(p, n, r, l, k_head, k_rot, k_par, k_perp, k_el, moment, k0):
    """Return ``(M, F0, F)`` with ``M = A Q B``."""
    x = p[0:3]
    rh = _mm(_mm(_rx(p[3]), _ry(p[4])), _rz(p[5]))

    e1 = np.zeros((n, 3))
    ri_e1 = np.zeros((n, 3))
    drag = np.zeros((n, 3, 3))
    proj = np.zeros((n, 2, 3))
    ce = np.zeros((n, 3, 3))
    rh_cre = np.zeros((n, 3, 3))
    dtil_rot = np.zeros((n, 3, 3))
    dce = np.zeros((n, 3, 3))
    for i in range(n):
        ri = _mm(_ry(p[6 + 2 * i]), _rz(p[7 + 2 * i]))
        fr = _mm(rh, ri)
        for a in range(3):
            e1[i, a] = fr[a, 0]
            ri_e1[i, a] = ri[a, 0]
            proj[i, 0, a] = fr[a, 1]
            proj[i, 1, a] = fr[a, 2]
        # R D R^T with D = diag(k_par, k_perp, k_perp)
        for a in range(3):
            for b in range(3):
                drag[i, a, b] = (k_par * fr[a, 0] * fr[b, 0] + k_perp * fr[a, 1] * fr[b, 1]
                                 + k_perp * fr[a, 2] * fr[b, 2])
        ce[i] = _cross(e1[i])
        rh_cre[i] = _mm(rh, _cross(ri_e1[i]))
        dtil_rot[i] = _mm(drag[i], rh_cre[i])
        dce[i] = _mm(drag[i], ce[i])

    xi = np.zeros((n, 3))
    xi[0] = x - r * rh[:, 0]
    for i in range(1, n):
        xi[i] = xi[i - 1] - l * e1[i - 1]

    nv = 6 * n + 6
    nd = 2 * n + 6
    A = np.zeros((nd, nv))
    c_xl = 3
    c_oh = 3 + 3 * n
    c_ol = 6 + 3 * n
    for a in range(3):
        A[a, a] = -r * k_head
    oh_f = np.zeros((3, 3))
    oh_t = -k_rot * r ** 3 * np.eye(3)
    for j in range(n):
        _put(A, 0, c_xl + 3 * j, drag[j], -l)
        _put(A, 0, c_ol + 3 * j, dtil_rot[j], -0.5 * l * l)
        oh_f += dce[j]
    _put(A, 0, c_oh, oh_f, -0.5 * l * l)
    # rows 3:6 are the sub-chain sum about the head centre, unprojected;
    # rows 6 + 2i are the sub-chain sums about X^i projected on e2^i, e3^i
    b1 = np.empty((3, 3))
    b2 = np.empty((3, 3))
    b3 = np.empty((3, 3))
    oh = np.empty((3, 3))
    v = np.empty(3)
    v3 = np.empty(3)
    for i in range(-1, n):
        j0 = 0 if i < 0 else i
        oh[:, :] = 0.0
        for j in range(j0, n):
            for a in range(3):
                arm = xi[j, a] - (x[a] if i < 0 else xi[i, a])
                v[a] = 0.5 * l * e1[j, a] - arm
                v3[a] = l / 3.0 * e1[j, a] - 0.5 * arm
            _cross_mul(v, drag[j], l, b1)
            _cross_mul(v3, dtil_rot[j], l * l, b2)
            _cross_mul(v3, dce[j], l * l, b3)
            oh += b3
            if i < 0:
                _put(A, 3, c_xl + 3 * j, b1, 1.0)
                _put(A, 3, c_ol + 3 * j, b2, 1.0)
            else:
                _put_proj(A, 6 + 2 * i, c_xl + 3 * j, proj[i], b1)
                _put_proj(A, 6 + 2 * i, c_ol + 3 * j, proj[i], b2)
        if i < 0:
            _put(A, 3, c_oh, oh_t + oh, 1.0)
        else:
            _put_proj(A, 6 + 2 * i, c_oh, proj[i], oh)

    Q = np.zeros((nv, 3 * n + 6))
    for a in range(3):
        Q[a, a] = 1.0
        Q[c_oh + a, 3 + a] = 1.0
    for a in range(3 * n):
        Q[c_ol + a, 6 + a] = 1.0
    qh = r * _cross(rh[:, 0])
    for i in range(n):
        row = 3 + 3 * i
        for a in range(3):
            Q[row + a, a] = 1.0
        _put(Q, row, 3, qh, 1.0)
        for j in range(i):
            _put(Q, row, 6 + 3 * j, rh_cre[j], l)
        qh = qh + l * ce[i]

    B = np.zeros((3 * n + 6, nd))
    for a in range(3):
        B[a, a] = 1.0
    cx, sx = np.cos(p[3]), np.sin(p[3])
    cy, sy = np.cos(p[4]), np.sin(p[4])
    B[3, 3] = 1.0
    B[3, 5] = sy
    B[4, 4] = cx
    B[4, 5] = -cy * sx
    B[5, 4] = sx
    B[5, 5] = cx * cy
    for i in range(n):
        py = p[6 + 2 * i]
        B[7 + 3 * i, 6 + 2 * i] = 1.0
        B[6 + 3 * i, 7 + 2 * i] = np.sin(py)
        B[8 + 3 * i, 7 + 2 * i] = np.cos(py)

    M = A @ (Q @ B)

    F0 = np.zeros(nd)
    prev = rh[:, 0].copy()
    for i in range(n):
        tq = _crossv(e1[i], prev)
        k = k_el * k0 if i == 0 else k_el
        for a in range(2):
            F0[6 + 2 * i + a] = k * (proj[i, a, 0] * tq[0] + proj[i, a, 1] * tq[1]
                                     + proj[i, a, 2] * tq[2])
        prev = e1[i]
    F = np.zeros((3, nd))
    for k in range(3):
        ek = np.zeros(3)
        ek[k] = 1.0
        F[k, 3:6] = moment * _crossv(rh[:, 0], ek)
    return M, F0, F


@njit(cache=True)
def state_rate(p, u, n, r, l, k_head, k_rot, k_par, k_perp, k_el, moment, k0):
    M, F0, F = system(p, n, r, l, k_head, k_rot, k_par, k_perp, k_el, moment, k0)
    b = -(F0 + u[0] * F[0] + u[1] * F[1] + u[2] * F[2])
    return np.linalg.solve(M, b), M


@njit(cache=True)
def rate_jacobian(p, u, n, r, l, k_head, k_rot, k_par, k_perp, k_el, moment, k0):
    """Forward-difference Jacobian of the state rate with respect to the state."""
    f0, _ = state_rate(p, u, n, r, l, k_head, k_rot, k_par, k_perp, k_el, moment, k0)
    m = p.size
    J = np.empty((m, m))
    q = p.copy()
    for j in range(m):
        h = 1e-7 * max(1.0, abs(p[j]))
        q[j] = p[j] + h
        f1, _ = state_rate(q, u, n, r, l, k_head, k_rot, k_par, k_perp, k_el, moment, k0)
        J[:, j] = (f1 - f0) / h
        q[j] = p[j]
    return J


# --- control channels -------------------------------------------------------
# kind 0: constant ``sine[0]``; kind 1: B-spline; kind 2:
# ``sine[0] + sine[1] * sin(2 pi sine[2] t + sine[3])``.

@njit(cache=True)
def _spline_eval(t, degree, knots, nk, cps, nc):
    lo = knots[0]
    hi = knots[nk - 1]
    if t < lo:
        t = lo
    if t > hi:
        t = hi
    if t >= knots[nc]:
        k = nc - 1
    else:
        k = np.searchsorted(knots[:nk], t, side="right") - 1
    vals = np.zeros(degree + 1)
    vals[0] = 1.0
    new = np.zeros(degree + 1)
    for p in range(1, degree + 1):
        for j in range(p + 1):
            i = k - p + j
            acc = 0.0
            if j > 0:
                den = knots[i + p] - knots[i]
                if den != 0.0:
                    acc += (t - knots[i]) / den * vals[j - 1]
            if j < p:
                den = knots[i + p + 1] - knots[i + 1]
                if den != 0.0:
                    acc += (knots[i + p + 1] - t) / den * vals[j]
            new[j] = acc
        for j in range(p + 1):
            vals[j] = new[j]
    out = 0.0
    for j in range(degree + 1):
        out += vals[j] * cps[k - degree + j]
    return out


@njit(cache=True)
def control_value(t, kind, deg, knots, nk, cps, nc, sine):
    u = np.zeros(3)
    for c in range(3):
        if kind[c] == 0:
            u[c] = sine[c, 0]
        elif kind[c] == 1:
            u[c] = _spline_eval(t, deg[c], knots[c], nk[c], cps[c], nc[c])
        else:
            u[c] = sine[c, 0] + sine[c, 1] * np.sin(2.0 * np.pi * sine[c, 2] * t + sine[c, 3])
    return u


# --- variable-order BDF (quasi-constant step, NDF corrections) --------------

_MAX_ORDER = 5
_NEWTON_MAXITER = 4


@njit(cache=True)
def _rms(x):
    return np.sqrt(np.mean(x * x))


@njit(cache=True)
def _compute_R(order, factor):
    M = np.zeros((order + 1, order + 1))
    for j in range(order + 1):
        M[0, j] = 1.0
    for i in range(1, order + 1):
        for j in range(1, order + 1):
            M[i, j] = (i - 1 - factor * j) / i
    for i in range(1, order + 1):
        for j in range(order + 1):
            M[i, j] *= M[i - 1, j]
    return M


@njit(cache=True)
def _change_D(D, order, factor):
    RU = _compute_R(order, factor) @ _compute_R(order, 1.0)
    D[:order + 1] = RU.T @ D[:order + 1].copy()


@njit(cache=True)
def _cond1(M):
    inv = np.linalg.inv(M)
    return np.max(np.sum(np.abs(M), axis=0)) * np.max(np.sum(np.abs(inv), axis=0))


@njit(cache=True)
def _rate(t, y, kind, deg, knots, nk, cps, nc, sine, n, r, l, k_head, k_rot, k_par, k_perp,
          k_el, moment, k0):
    u = control_value(t, kind, deg, knots, nk, cps, nc, sine)
    return state_rate(y, u, n, r, l, k_head, k_rot, k_par, k_perp, k_el, moment, k0)


@njit(cache=True)
def _jac(t, y, f0, kind, deg, knots, nk, cps, nc, sine, n, r, l, k_head, k_rot, k_par, k_perp,
         k_el, moment, k0):
    m = y.size
    J = np.empty((m, m))
    q = y.copy()
    for j in range(m):
        h = 1e-7 * max(1.0, abs(y[j]))
        q[j] = y[j] + h
        f1, _ = _rate(t, q, kind, deg, knots, nk, cps, nc, sine, n, r, l, k_head, k_rot, k_par,
                      k_perp, k_el, moment, k0)
        J[:, j] = (f1 - f0) / h
        q[j] = y[j]
    return J


@njit(cache=True)
def integrate_bdf(y0, T, t_eval, rtol, atol, max_step, cond_limit, kind, deg, knots, nk, cps,
                  nc, sine, n, r, l, k_head, k_rot, k_par, k_perp, k_el, moment, k0):
    """Integrate on ``[0, T]`` and sample at the sorted times ``t_eval``.

    Returns ``(status, Y, t_fail, y_fail, n_steps)``; status 0 is success,
    1 an ill-conditioned system, 2 a step-size collapse.
    """
    nd = y0.size
    out = np.empty((t_eval.size, nd))
    kappa = np.array([0.0, -0.1850, -1.0 / 9.0, -0.0823, -0.0415, 0.0])
    gamma = np.zeros(_MAX_ORDER + 1)
    for k in range(1, _MAX_ORDER + 1):
        gamma[k] = gamma[k - 1] + 1.0 / k
    alpha = (1.0 - kappa) * gamma
    error_const = np.empty(_MAX_ORDER + 1)
    for k in range(_MAX_ORDER + 1):
        error_const[k] = kappa[k] * gamma[k] + 1.0 / (k + 1)
    eps = np.finfo(np.float64).eps
    newton_tol = max(10.0 * eps / rtol, min(0.03, np.sqrt(rtol)))
    eye = np.eye(nd)

    t = 0.0
    y = y0.copy()
    f, M = _rate(t, y, kind, deg, knots, nk, cps, nc, sine, n, r, l, k_head, k_rot, k_par,
                 k_perp, k_el, moment, k0)
    if not np.all(np.isfinite(f)) or _cond1(M) > cond_limit:
        return 1, out, t, y, 0
    ie = 0
    while ie < t_eval.size and t_eval[ie] <= 0.0:
        out[ie] = y
        ie += 1

    # initial step (Hairer-Norsett-Wanner heuristic)
    scale = atol + np.abs(y) * rtol
    d0 = _rms(y / scale)
    d1 = _rms(f / scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, T)
    f1, _ = _rate(h0, y + h0 * f, kind, deg, knots, nk, cps, nc, sine, n, r, l, k_head, k_rot,
                  k_par, k_perp, k_el, moment, k0)
    d2 = _rms((f1 - f) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.5
    h_abs = min(100.0 * h0, h1, T, max_step)

    D = np.zeros((_MAX_ORDER + 3, nd))
    D[0] = y
    D[1] = f * h_abs
    order = 1
    n_equal = 0
    J = _jac(t, y, f, kind, deg, knots, nk, cps, nc, sine, n, r, l, k_head, k_rot, k_par,
             k_perp, k_el, moment, k0)
    have_lu = False
    W = np.empty((nd, nd))
    n_steps = 0

    while t < T:
        min_step = 10.0 * abs(np.nextafter(t, np.inf) - t)
        if h_abs > max_step:
            _change_D(D, order, max_step / h_abs)
            h_abs = max_step
            n_equal = 0
        elif h_abs < min_step:
            _change_D(D, order, min_step / h_abs)
            h_abs = min_step
            n_equal = 0
        current_jac = False
        accepted = False
        y_new = y
        d = np.zeros(nd)
        n_iter = 0
        t_new = t
        err_norm = 0.0
        while not accepted:
            if h_abs < min_step:
                return 2, out, t, y, n_steps
            t_new = t + h_abs
            if t_new > T:
                t_new = T
                _change_D(D, order, (t_new - t) / h_abs)
                n_equal = 0
                have_lu = False
            h = t_new - t
            h_abs = h
            y_pred = np.zeros(nd)
            for k in range(order + 1):
                y_pred += D[k]
            scale = atol + rtol * np.abs(y_pred)
            psi = np.zeros(nd)
            for k in range(1, order + 1):
                psi += D[k] * gamma[k]
            psi /= alpha[order]
            c = h / alpha[order]
            converged = False
            while not converged:
                if not have_lu:
                    W = np.ascontiguousarray(np.linalg.inv(eye - c * J))
                    have_lu = True
                # simplified Newton on the implicit BDF relation
                yk = y_pred.copy()
                d = np.zeros(nd)
                dy_old = -1.0
                converged = False
                for k in range(_NEWTON_MAXITER):
                    n_iter = k + 1
                    fk, _ = _rate(t_new, yk, kind, deg, knots, nk, cps, nc, sine, n, r, l,
                                  k_head, k_rot, k_par, k_perp, k_el, moment, k0)
                    if not np.all(np.isfinite(fk)):
                        break
                    dy = W @ np.ascontiguousarray(c * fk - psi - d)
                    dy_norm = _rms(dy / scale)
                    if dy_old >= 0.0:
                        rate = dy_norm / dy_old
                        if rate >= 1.0 or rate ** (_NEWTON_MAXITER - k) / (1.0 - rate) * dy_norm > newton_tol:
                            break
                    else:
                        rate = -1.0
                    yk += dy
                    d += dy
                    if dy_norm == 0.0 or (rate >= 0.0 and rate / (1.0 - rate) * dy_norm < newton_tol):
                        converged = True
                        break
                    dy_old = dy_norm
                if not converged:
                    if current_jac:
                        break
                    fp, _ = _rate(t_new, y_pred, kind, deg, knots, nk, cps, nc, sine, n, r, l,
                                  k_head, k_rot, k_par, k_perp, k_el, moment, k0)
                    J = _jac(t_new, y_pred, fp, kind, deg, knots, nk, cps, nc, sine, n, r, l,
                             k_head, k_rot, k_par, k_perp, k_el, moment, k0)
                    have_lu = False
                    current_jac = True
            if not converged:
                h_abs *= 0.5
                _change_D(D, order, 0.5)
                n_equal = 0
                have_lu = False
                continue
            y_new = yk
            safety = 0.9 * (2 * _NEWTON_MAXITER + 1) / (2 * _NEWTON_MAXITER + n_iter)
            scale = atol + rtol * np.abs(y_new)
            err_norm = _rms(error_const[order] * d / scale)
            if err_norm > 1.0:
                factor = max(0.2, safety * err_norm ** (-1.0 / (order + 1)))
                h_abs *= factor
                _change_D(D, order, factor)
                n_equal = 0
            else:
                accepted = True

        _, Mn = _rate(t_new, y_new, kind, deg, knots, nk, cps, nc, sine, n, r, l, k_head, k_rot,
                      k_par, k_perp, k_el, moment, k0)
        if _cond1(Mn) > cond_limit:
            return 1, out, t_new, y_new, n_steps
        n_steps += 1
        n_equal += 1
        t = t_new
        y = y_new
        D[order + 2] = d - D[order + 1]
        D[order + 1] = d
        for k in range(order, -1, -1):
            D[k] += D[k + 1]

        if n_equal >= order + 1:
            em = error_const[order - 1] * D[order] if order > 1 else d
            em_norm = _rms(em / scale) if order > 1 else np.inf
            ep_norm = _rms(error_const[order + 1] * D[order + 2] / scale) if order < _MAX_ORDER else np.inf
            norms = np.array([em_norm, err_norm, ep_norm])
            best = 0
            best_f = -1.0
            for k in range(3):
                fk = np.inf if norms[k] == 0.0 else norms[k] ** (-1.0 / (order + k))
                if fk > best_f:
                    best_f = fk
                    best = k
            order += best - 1
            factor = min(10.0, safety * best_f)
            h_abs *= factor
            _change_D(D, order, factor)
            n_equal = 0
            have_lu = False

        # dense output from the current backward-difference polynomial
        while ie < t_eval.size and t_eval[ie] <= t:
            te = t_eval[ie]
            yv = D[0].copy()
            prod = 1.0
            for k in range(order):
                prod *= (te - (t - h_abs * k)) / (h_abs * (k + 1))
                yv += prod * D[k + 1]
            out[ie] = yv
            ie += 1
    while ie < t_eval.size:
        out[ie] = y
        ie += 1
    return 0, out, t, y, n_steps
