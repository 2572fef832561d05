"""Compiled mobility and rigid-velocity solve for the three-sphere swimmer.

Same formulas as :mod:`swimopt.threesphere`; the tests compare both paths.
"""

import numpy as np
from numba import njit

_PI = np.pi


@njit(cache=True)
def _stokeslet(r, out):
    d = np.sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
    for i in range(3):
        for j in range(3):
            out[i, j] = r[i] * r[j] / d ** 3
        out[i, i] += 1.0 / d


@njit(cache=True)
def _rpy(r, a, out):
    d = np.sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
    c1 = (1.0 + 2.0 * a * a / (3.0 * d * d)) / d
    c2 = (1.0 - 2.0 * a * a / (d * d)) / d
    for i in range(3):
        for j in range(3):
            out[i, j] = c2 * r[i] * r[j] / (d * d)
        out[i, i] += c1


@njit(cache=True)
def _blake_image(x, y0, out):
    h = y0[2]
    R = np.empty(3)
    R[0] = x[0] - y0[0]
    R[1] = x[1] - y0[1]
    R[2] = x[2] + h
    Rn = np.sqrt(R[0] * R[0] + R[1] * R[1] + R[2] * R[2])
    S = np.empty((3, 3))
    _stokeslet(R, S)
    for i in range(3):
        for k in range(3):
            dik = 1.0 if i == k else 0.0
            di3 = 1.0 if i == 2 else 0.0
            d3k = 1.0 if k == 2 else 0.0
            dP = (h * (dik / Rn ** 3 - 3.0 * R[i] * R[k] / Rn ** 5)
                  + di3 * R[k] / Rn ** 3
                  - (dik * R[2] + R[i] * d3k) / Rn ** 3
                  + 3.0 * R[2] * R[i] * R[k] / Rn ** 5)
            mirror = -1.0 if k == 2 else 1.0
            out[i, k] = -S[i, k] + 2.0 * h * dP * mirror


@njit(cache=True)
def mobility(c, a, mu, wall, rpy):
    n = c.shape[0]
    M = np.zeros((2 * n, 2 * n))
    p3 = np.zeros((n, 3))
    for i in range(n):
        p3[i, 0] = c[i, 0]
        p3[i, 2] = c[i, 1]
    self_m = 1.0 / (6.0 * _PI * mu * a)
    pref = 1.0 / (8.0 * _PI * mu)
    g = np.empty((3, 3))
    im = np.empty((3, 3))
    r = np.empty(3)
    for i in range(n):
        if wall:
            s = a / p3[i, 2]
            par = 1.0 - 9.0 / 16.0 * s + 1.0 / 8.0 * s ** 3 - 1.0 / 16.0 * s ** 5
            perp = 1.0 - 9.0 / 8.0 * s + 1.0 / 2.0 * s ** 3 - 1.0 / 8.0 * s ** 5
            M[2 * i, 2 * i] = self_m * par
            M[2 * i + 1, 2 * i + 1] = self_m * perp
        else:
            M[2 * i, 2 * i] = self_m
            M[2 * i + 1, 2 * i + 1] = self_m
        for j in range(n):
            if i == j:
                continue
            for k in range(3):
                r[k] = p3[i, k] - p3[j, k]
            if rpy:
                _rpy(r, a, g)
            else:
                _stokeslet(r, g)
            if wall:
                _blake_image(p3[i], p3[j], im)
                for u in range(3):
                    for v in range(3):
                        g[u, v] += im[u, v]
            M[2 * i, 2 * j] = pref * g[0, 0]
            M[2 * i, 2 * j + 1] = pref * g[0, 2]
            M[2 * i + 1, 2 * j] = pref * g[2, 0]
            M[2 * i + 1, 2 * j + 1] = pref * g[2, 2]
    return M


@njit(cache=True)
def velocity(x3, y3, theta, u1, u2, du1, du2, a, mu, wall, rpy):
    """Return ``(vx, vy, omega, forces)``; ``forces`` has shape (3, 2)."""
    ex, ey = np.cos(theta), np.sin(theta)
    tx, ty = -ey, ex
    c = np.empty((3, 2))
    c[0, 0] = x3 - u1 * ex
    c[0, 1] = y3 - u1 * ey
    c[1, 0] = x3 + u2 * ex
    c[1, 1] = y3 + u2 * ey
    c[2, 0] = x3
    c[2, 1] = y3
    M = mobility(c, a, mu, wall, rpy)
    S = np.zeros((9, 9))
    S[:6, :6] = M
    for i in range(3):
        S[2 * i, 6] = -1.0
        S[2 * i + 1, 7] = -1.0
        S[6, 2 * i] = 1.0
        S[7, 2 * i + 1] = 1.0
    S[0, 8] = u1 * tx
    S[1, 8] = u1 * ty
    S[2, 8] = -u2 * tx
    S[3, 8] = -u2 * ty
    S[8, 0] = -u1 * tx
    S[8, 1] = -u1 * ty
    S[8, 2] = u2 * tx
    S[8, 3] = u2 * ty
    b = np.zeros(9)
    b[0] = -du1 * ex
    b[1] = -du1 * ey
    b[2] = du2 * ex
    b[3] = du2 * ey
    sol = np.linalg.solve(S, b)
    return sol[6], sol[7], sol[8], sol[:6].reshape(3, 2).copy()
