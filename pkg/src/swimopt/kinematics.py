"""Rotation algebra shared by the swimmer models.

Angles are kept unwrapped everywhere; use :func:`wrap_angle` only when
formatting output.
"""

import numpy as np


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def tait_bryan(theta_x, theta_y, theta_z):
    """Head orientation ``R_x(theta_x) @ R_y(theta_y) @ R_z(theta_z)`` (ZYX convention)."""
    return rot_x(theta_x) @ rot_y(theta_y) @ rot_z(theta_z)


def link_rotation(phi_y, phi_z):
    """Rotation of a flagellum link relative to the head frame."""
    return rot_y(phi_y) @ rot_z(phi_z)


def cross_matrix(w):
    """Matrix ``[w]x`` such that ``cross_matrix(w) @ v == np.cross(w, v)``."""
    w = np.asarray(w, dtype=float)
    return np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])


def uncross(m):
    """Inverse of :func:`cross_matrix` (antisymmetric part of ``m``)."""
    return 0.5 * np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])


def head_rate_map(theta_x, theta_y):
    """3x3 map from Tait-Bryan angle rates to the head angular velocity (lab frame)."""
    cx, sx = np.cos(theta_x), np.sin(theta_x)
    cy, sy = np.cos(theta_y), np.sin(theta_y)
    return np.array([
        [1.0, 0.0, sy],
        [0.0, cx, -cy * sx],
        [0.0, sx, cx * cy],
    ])


def link_rate_map(phi_y):
    """3x2 map from ``(phi_y_dot, phi_z_dot)`` to the link angular velocity (head frame)."""
    return np.array([
        [0.0, np.sin(phi_y)],
        [1.0, 0.0],
        [0.0, np.cos(phi_y)],
    ])


def angular_maps(theta, phi_y):
    """Return ``(L_head, L_links)`` for head angles ``theta`` and link angles ``phi_y``.

    ``L_links`` has shape ``(n, 3, 2)``; a scalar ``phi_y`` gives shape ``(3, 2)``.
    """
    lh = head_rate_map(theta[0], theta[1])
    phi_y = np.asarray(phi_y, dtype=float)
    if phi_y.ndim == 0:
        return lh, link_rate_map(phi_y)
    return lh, np.stack([link_rate_map(p) for p in phi_y])


def gimbal_margin(theta_y):
    """``|cos(theta_y)|``; the head rate map is singular when this reaches zero."""
    return abs(np.cos(theta_y))


def rot2(theta):
    """Planar rotation by ``theta`` (counter-clockwise)."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def wrap_angle(a):
    """Map angles to ``[0, 2*pi)`` for reporting."""
    return np.mod(a, 2.0 * np.pi)
