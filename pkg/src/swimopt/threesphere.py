"""Planar three-sphere swimmer with a far-field mobility model.

Three spheres of radius ``R`` sit on a line of orientation ``theta``; the
left and right arms have lengths ``u1`` and ``u2`` measured from the central
sphere ``X3``. Each sphere is a regularized point force: the hydrodynamics
is a pairwise mobility (Oseen or Rotne-Prager in free space), optionally
corrected for a no-slip wall ``y = 0`` by the Blake image system and
finite-size self-mobility terms. Inertia is neglected, so at every instant
the forces on the spheres are fixed by

* zero total force and zero total torque about ``X3``;
* the rigid motion ``(V3, omega)`` plus the prescribed arm rates.

The resulting velocities are linear in ``(u1_dot, u2_dot)``.
"""

from dataclasses import dataclass
import csv
import math

import numpy as np
from scipy.integrate import solve_ivp

from .bspline import BSplineCurve, knots_for, greville

HYDRO_ORDERS = ("oseen", "rpy")
REGIME_ARMS = {"near": 2.5, "middle": 5.0, "far": 10.0}   # in units of R


class GeometryError(ValueError):
    """Sphere overlap or wall penetration."""


class ConstraintViolation(RuntimeError):
    """Arm lengths left the admissible band during a stroke."""


@dataclass(frozen=True)
class ThreeSphereParams:
    radius: float = 0.1
    viscosity: float = 1.0
    wall: bool = False
    hydro: str = "oseen"
    rate_max: float = 0.4

    def __post_init__(self):
        if not (self.radius > 0 and self.viscosity > 0):
            raise ValueError("radius and viscosity must be positive")
        if self.hydro not in HYDRO_ORDERS:
            raise ValueError(f"hydro must be one of {HYDRO_ORDERS}")

    @property
    def arm_min(self):
        return 2.0 * self.radius + self.radius / 4.0

    @property
    def arm_max(self):
        return 10.0 * self.radius

    def regime_arm(self, regime):
        try:
            return REGIME_ARMS[regime] * self.radius
        except KeyError:
            raise ValueError(f"unknown regime {regime!r}; expected one of {sorted(REGIME_ARMS)}")

    def with_wall(self, wall=True):
        return ThreeSphereParams(self.radius, self.viscosity, wall, self.hydro, self.rate_max)

    def to_dict(self):
        return dict(self.__dict__)


def axis(theta):
    return np.array([math.cos(theta), math.sin(theta)])


def sphere_centers(x3, theta, u1, u2):
    """Centres ``X1, X2, X3`` (rows) for the given pose and arm lengths."""
    x3 = np.asarray(x3, dtype=float)
    e = axis(theta)
    return np.array([x3 - u1 * e, x3 + u2 * e, x3])


# --- pair and self mobilities (3D kernels, wall normal along the last axis) ---

def _stokeslet(r):
    d = np.linalg.norm(r)
    return np.eye(3) / d + np.outer(r, r) / d ** 3


def _rpy_pair(r, a):
    d = np.linalg.norm(r)
    rr = np.outer(r, r) / d ** 2
    return ((1.0 + 2.0 * a * a / (3.0 * d * d)) * np.eye(3)
            + (1.0 - 2.0 * a * a / (d * d)) * rr) / d


def blake_image(x, y0):
    """Wall-image part of the Blake tensor (times ``8 pi mu``).

    Velocity at ``x`` due to a unit point force at ``y0`` above the plane
    ``x[2] = 0`` is ``(S(x - y0) + blake_image(x, y0)) / (8 pi mu)``, where
    ``S`` is the free-space Stokeslet. Row index is the velocity component,
    column index the force component.
    """
    h = y0[2]
    R = np.asarray(x, dtype=float) - np.array([y0[0], y0[1], -h])
    Rn = np.linalg.norm(R)
    eye = np.eye(3)
    out = -_stokeslet(R)
    # dP[i, k] = d/dR_k (h R_i / |R|^3 - S_i3(R))
    dP = (h * (eye / Rn ** 3 - 3.0 * np.outer(R, R) / Rn ** 5)
          + np.outer(eye[2], R) / Rn ** 3
          - (eye * R[2] + np.outer(R, eye[2])) / Rn ** 3
          + 3.0 * R[2] * np.outer(R, R) / Rn ** 5)
    mirror = np.diag([1.0, 1.0, -1.0])
    out += 2.0 * h * dP @ mirror
    return out


def wall_self_factors(a, h):
    """Parallel and normal self-mobility factors for a sphere at height ``h``."""
    s = a / h
    par = 1.0 - 9.0 / 16.0 * s + 1.0 / 8.0 * s ** 3 - 1.0 / 16.0 * s ** 5
    perp = 1.0 - 9.0 / 8.0 * s + 1.0 / 2.0 * s ** 3 - 1.0 / 8.0 * s ** 5
    return par, perp


def mobility(centers, params):
    """6x6 in-plane mobility: velocities of the three spheres per unit force.

    ``centers`` are 2D positions ``(x, y)`` with ``y`` the height above the
    wall when the wall is enabled.
    """
    c = np.asarray(centers, dtype=float)
    a, mu = params.radius, params.viscosity
    n = len(c)
    for i in range(n):
        for j in range(i + 1, n):
            if np.linalg.norm(c[i] - c[j]) - 2.0 * a <= 0.0:
                raise GeometryError(f"spheres {i + 1} and {j + 1} overlap")
    if params.wall and np.any(c[:, 1] <= a):
        raise GeometryError("sphere penetrates the wall (height <= R)")
    # embed: (x, y) -> (x, 0, y) so the wall normal is the last axis
    p3 = np.column_stack([c[:, 0], np.zeros(n), c[:, 1]])
    idx = [0, 2]
    M = np.zeros((2 * n, 2 * n))
    self_m = 1.0 / (6.0 * math.pi * mu * a)
    pref = 1.0 / (8.0 * math.pi * mu)
    for i in range(n):
        if params.wall:
            par, perp = wall_self_factors(a, p3[i, 2])
            M[2 * i, 2 * i] = self_m * par
            M[2 * i + 1, 2 * i + 1] = self_m * perp
        else:
            M[2 * i:2 * i + 2, 2 * i:2 * i + 2] = self_m * np.eye(2)
        for j in range(n):
            if i == j:
                continue
            r = p3[i] - p3[j]
            g = _stokeslet(r) if params.hydro == "oseen" else _rpy_pair(r, a)
            if params.wall:
                g = g + blake_image(p3[i], p3[j])
            M[2 * i:2 * i + 2, 2 * j:2 * j + 2] = pref * g[np.ix_(idx, idx)]
    return M


def _check_pose(x3, theta, u1, u2, params):
    a = params.radius
    # collinear spheres: the closest pairs are across each arm
    if min(u1, u2) - 2.0 * a < a / 100.0:
        raise GeometryError(f"sphere gap below R/100 (u1={u1:.6g}, u2={u2:.6g})")
    if params.wall:
        s = math.sin(theta)
        lowest = min(x3[1], x3[1] - u1 * s, x3[1] + u2 * s)
        if lowest <= a:
            raise GeometryError(f"sphere penetrates the wall (lowest centre {lowest:.6g})")


def velocity(x3, theta, u1, u2, du1, du2, params, fast=True):
    """Rigid velocity ``(X3_dot, theta_dot)`` and the sphere forces.

    Solves the saddle system ``M F - K w = a``, ``K^T F = 0`` for the forces
    ``F`` and ``w = (V3, omega)``, where ``K`` maps rigid motions to sphere
    velocities and ``a`` are the prescribed arm velocities. ``fast=False``
    uses the NumPy reference assembly.
    """
    if fast:
        _check_pose(x3, theta, u1, u2, params)
        from . import _threesphere_jit
        try:
            vx, vy, w, forces = _threesphere_jit.velocity(
                float(x3[0]), float(x3[1]), float(theta), float(u1), float(u2), float(du1),
                float(du2), params.radius, params.viscosity, params.wall, params.hydro == "rpy")
        except Exception as exc:  # numba raises a plain LinAlgError
            raise np.linalg.LinAlgError(
                f"singular three-sphere system at x3={tuple(x3)}, theta={theta}, "
                f"u=({u1}, {u2})") from exc
        return np.array([vx, vy]), w, forces
    e = axis(theta)
    et = np.array([-e[1], e[0]])
    centers = sphere_centers(x3, theta, u1, u2)
    M = mobility(centers, params)
    K = np.zeros((6, 3))
    for i in range(3):
        K[2 * i:2 * i + 2, 0:2] = np.eye(2)
    K[0:2, 2] = -u1 * et
    K[2:4, 2] = u2 * et
    rhs_v = np.concatenate([-du1 * e, du2 * e, np.zeros(2)])
    S = np.zeros((9, 9))
    S[:6, :6] = M
    S[:6, 6:] = -K
    S[6:, :6] = K.T
    b = np.concatenate([rhs_v, np.zeros(3)])
    try:
        sol = np.linalg.solve(S, b)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"singular three-sphere system at x3={tuple(x3)}, theta={theta}, u=({u1}, {u2})") from exc
    forces = sol[:6].reshape(3, 2)
    return sol[6:8], sol[8], forces


def rhs(state, params, du1, du2):
    """``(X3_dot, theta_dot)`` for ``state = (x3, y3, theta, u1, u2)``."""
    x, y, th, u1, u2 = state
    v, w, _ = velocity((x, y), th, u1, u2, du1, du2, params)
    return v, w


# --- controls ---

@dataclass(frozen=True)
class ArmControl:
    """Arm lengths ``u1(t), u2(t)`` as B-spline curves on ``[0, T]``."""

    u1: BSplineCurve
    u2: BSplineCurve

    def __post_init__(self):
        object.__setattr__(self, "_d1", self.u1.derivative())
        object.__setattr__(self, "_d2", self.u2.derivative())

    @property
    def T(self):
        return self.u1.tn

    def __call__(self, t):
        t = min(max(t, 0.0), self.T)
        return self.u1.eval(t), self.u2.eval(t)

    def rates(self, t):
        t = min(max(t, 0.0), self.T)
        return self._d1.eval(t), self._d2.eval(t)

    def rate_bound(self):
        """Sound upper bound of ``max_t |u_dot|`` from the derivative control points."""
        return max(np.max(np.abs(self._d1.control_points)), np.max(np.abs(self._d2.control_points)))

    def is_admissible(self, params, tol=1e-12):
        lo, hi = params.arm_min, params.arm_max
        cps = np.concatenate([self.u1.control_points, self.u2.control_points])
        return bool(cps.min() >= lo - tol and cps.max() <= hi + tol
                    and self.rate_bound() <= params.rate_max + tol)

    def to_dict(self):
        return {"u1": self.u1.to_dict(), "u2": self.u2.to_dict()}

    @classmethod
    def from_dict(cls, data):
        return cls(BSplineCurve.from_dict(data["u1"]), BSplineCurve.from_dict(data["u2"]))


def _square_cycle(t, T, base, amp):
    """Piecewise-linear four-phase gait for ``(u1, u2)``."""
    q = T / 4.0
    s1 = np.clip(t / q, 0.0, 1.0) - np.clip((t - 2 * q) / q, 0.0, 1.0)
    s2 = np.clip((t - q) / q, 0.0, 1.0) - np.clip((t - 3 * q) / q, 0.0, 1.0)
    return base + amp * s1, base + amp * s2


def classical_stroke(params, amplitude, T=4.0, base=None, regime="far", n_ctrl_per_phase=8,
                     degree=2):
    """Four-phase non-reciprocal gait rendered as degree-2 B-splines.

    Arm 1 changes by ``amplitude``, then arm 2, then arm 1 returns, then
    arm 2 returns. The arms extend from ``base`` when there is room below
    the upper bound and contract otherwise; both variants trace the
    (u1, u2) square in the same rotational sense.

    Control points sample the piecewise-linear gait at the Greville
    abscissae, so the spline slopes never exceed the gait slope
    ``4 * amplitude / T``.
    """
    base = params.regime_arm(regime) if base is None else float(base)
    amplitude = float(amplitude)
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    sign = 1.0 if base + amplitude <= params.arm_max + 1e-12 else -1.0
    lo, hi = sorted((base, base + sign * amplitude))
    if lo < params.arm_min - 1e-12 or hi > params.arm_max + 1e-12:
        raise ValueError(f"stroke [{lo:.4g}, {hi:.4g}] leaves the admissible band "
                         f"[{params.arm_min:.4g}, {params.arm_max:.4g}]")
    if 4.0 * amplitude / T > params.rate_max + 1e-12:
        raise ValueError(f"stroke rate {4 * amplitude / T:.4g} exceeds the cap {params.rate_max}")
    n_ctrl = 4 * n_ctrl_per_phase + degree - 2 + 3
    knots = knots_for(n_ctrl, degree, 0.0, T)
    g = greville(knots, degree)
    p1, p2 = _square_cycle(g, T, base, sign * amplitude)
    return ArmControl(BSplineCurve(degree, knots, p1), BSplineCurve(degree, knots, p2))


def constant_arms(params, u1, u2, T=4.0, degree=2, n_ctrl=10):
    knots = knots_for(n_ctrl, degree, 0.0, T)
    return ArmControl(BSplineCurve(degree, knots, np.full(n_ctrl, float(u1))),
                      BSplineCurve(degree, knots, np.full(n_ctrl, float(u2))))


# --- integration ---

@dataclass
class StrokeTrajectory:
    t: np.ndarray
    states: np.ndarray        # columns x3, y3, theta, u1, u2

    @property
    def displacement(self):
        return self.states[-1, 0] - self.states[0, 0]

    @property
    def delta_theta(self):
        return self.states[-1, 2] - self.states[0, 2]

    @property
    def delta_y(self):
        return self.states[-1, 1] - self.states[0, 1]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x3", "y3", "theta", "u1", "u2"])
            for t, s in zip(self.t, self.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in s])


def integrate_stroke(control, params, p0=(0.0, 0.0, 0.0), T=None, t_eval=None, rtol=1e-10,
                     atol=1e-12, check_bounds=True):
    """Integrate ``(x3, y3, theta)`` under the arm control over ``[0, T]``."""
    T = control.T if T is None else float(T)
    if t_eval is None:
        t_eval = np.linspace(0.0, T, 201)
    if check_bounds:
        cps = np.concatenate([control.u1.control_points, control.u2.control_points])
        if cps.min() < params.arm_min - 1e-9 or cps.max() > params.arm_max + 1e-9:
            raise ConstraintViolation("arm lengths leave the admissible band")

    def f(t, y):
        u1, u2 = control(t)
        d1, d2 = control.rates(t)
        v, w, _ = velocity(y[:2], y[2], u1, u2, d1, d2, params)
        return [v[0], v[1], w]

    # knots are the only points where the rates lose smoothness
    breaks = np.unique(np.concatenate([control.u1.knots, control.u2.knots]))
    breaks = breaks[(breaks > 0) & (breaks < T)]
    max_step = np.min(np.diff(np.concatenate([[0.0], breaks, [T]]))) if breaks.size else np.inf
    sol = solve_ivp(f, (0.0, T), np.asarray(p0, dtype=float), method="RK45", t_eval=t_eval,
                    rtol=rtol, atol=atol, max_step=max_step)
    if sol.status < 0:
        raise RuntimeError(f"three-sphere integration failed: {sol.message}")
    arms = np.array([control(t) for t in sol.t])
    return StrokeTrajectory(np.asarray(sol.t), np.column_stack([sol.y.T, arms]))


def integrate_fixed_step(control, params, p0=(0.0, 0.0, 0.0), n_steps=64, T=None):
    """Classical RK4 with ``n_steps`` uniform steps; returns the final ``(x3, y3, theta)``.

    Independent of :func:`integrate_stroke`; used for step-halving checks.
    """
    T = control.T if T is None else float(T)
    h = T / n_steps
    y = np.asarray(p0, dtype=float)

    def f(t, y):
        u1, u2 = control(t)
        d1, d2 = control.rates(t)
        v, w, _ = velocity(y[:2], y[2], u1, u2, d1, d2, params)
        return np.array([v[0], v[1], w])

    t = 0.0
    for _ in range(n_steps):
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y


def wall_phase_scan(params, regime, heights, amplitude=None, T=4.0):
    """Orientation change after one classical stroke at each height above the wall.

    Returns a list of ``(h, delta_theta)`` pairs.
    """
    p = params.with_wall(True)
    amp = default_amplitude(p, T) if amplitude is None else amplitude
    ctrl = classical_stroke(p, amp, T=T, regime=regime)
    out = []
    for h in heights:
        traj = integrate_stroke(ctrl, p, p0=(0.0, float(h), 0.0), t_eval=[0.0, T],
                                rtol=1e-10, atol=1e-13)
        out.append((float(h), float(traj.delta_theta)))
    return out


def default_amplitude(params, T=4.0):
    """Largest four-phase amplitude allowed by the rate cap, capped at ``R``."""
    return min(params.rate_max * T / 4.0, params.radius)
