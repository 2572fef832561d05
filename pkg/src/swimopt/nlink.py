"""Magnetic N-link flagellated swimmer under resistive force theory.

State layout (``2N + 6`` scalars)::

    [x, y, z, theta_x, theta_y, theta_z, phi_y_1, phi_z_1, ..., phi_y_N, phi_z_N]

The velocity vector used inside the assembly has ``6N + 6`` entries::

    [X_dot, X1_dot, ..., XN_dot, Omega_head, Omega_1, ..., Omega_N]

``X^i`` is the proximal end of link ``i``; ``Omega_head`` is expressed in the
lab frame and ``Omega_i`` in the head frame.

Balance equations are ``hydro + applied = 0`` for the whole swimmer (force,
torque about the head centre) and for every sub-chain ``i..N`` (torque about
``X^i`` projected onto the plane normal to link ``i``). With ``F_0`` and
``F_k`` the elastic and magnetic torque vectors this reads
``A Q B p_dot = -(F_0 + sum_k u_k F_k)``.
"""

from dataclasses import dataclass, field
import csv
import math

import numpy as np
from scipy.integrate import solve_ivp

from .bspline import BSplineCurve
from .kinematics import (cross_matrix, head_rate_map, link_rate_map, rot_y, rot_z,
                         tait_bryan)


class SingularDynamicsError(RuntimeError):
    """Raised when the reduced linear system is (nearly) singular."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message if t is None else f"{message} at t={t:.6g}")
        self.t = t
        self.state = state


@dataclass(frozen=True)
class NLinkParams:
    """Geometry, drag, elastic and magnetic constants of the swimmer.

    The torsion-spring constant between consecutive links follows discrete
    beam theory, ``k_el = bending_stiffness / l``, so refining ``n_links``
    approximates the same continuous flagellum.
    """

    n_links: int = 5
    head_radius: float = 0.05
    length: float = 1.0
    k_head: float = 6.0 * math.pi
    k_rot: float = 8.0 * math.pi
    k_par: float = 1.0
    k_perp: float = 2.0
    bending_stiffness: float = 12.5
    magnetic_moment: float = 500.0
    head_joint_factor: float = 2.0

    def __post_init__(self):
        for name in ("head_radius", "length", "k_head", "k_rot", "k_par", "k_perp",
                     "bending_stiffness", "magnetic_moment"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.n_links < 1:
            raise ValueError("n_links must be >= 1")

    @property
    def link_length(self):
        return self.length / self.n_links

    @property
    def k_el(self):
        return self.bending_stiffness / self.link_length

    @property
    def dim(self):
        return 2 * self.n_links + 6

    def with_links(self, n):
        return NLinkParams(**{**self.__dict__, "n_links": int(n)})

    def to_dict(self):
        return dict(self.__dict__)


def split_state(p, n):
    p = np.asarray(p, dtype=float)
    if p.shape != (2 * n + 6,):
        raise ValueError(f"state must have {2 * n + 6} entries, got shape {p.shape}")
    return p[:3], p[3:6], p[6:].reshape(n, 2)


def zero_state(n):
    return np.zeros(2 * n + 6)


@dataclass
class Geometry:
    rh: np.ndarray          # head rotation (3, 3)
    ri: np.ndarray          # link rotations relative to head (N, 3, 3)
    e1: np.ndarray          # link directions in the lab frame (N, 3)
    ri_e1: np.ndarray       # link directions in the head frame (N, 3)
    joints: np.ndarray      # proximal link ends X^1..X^N, plus the free end (N + 1, 3)
    drag: np.ndarray        # lab-frame link drag tensors R^h D~ R^hT (N, 3, 3)
    proj: np.ndarray        # torque projections onto e2^i, e3^i (N, 2, 3)


def geometry(params, p):
    n = params.n_links
    l = params.link_length
    x, theta, phi = split_state(p, n)
    rh = tait_bryan(*theta)
    ri = np.stack([rot_y(a) @ rot_z(b) for a, b in phi])
    frames = rh @ ri
    e1 = frames[:, :, 0]
    ri_e1 = ri[:, :, 0]
    joints = np.empty((n + 1, 3))
    joints[0] = x - params.head_radius * rh[:, 0]
    joints[1:] = joints[0] - l * np.cumsum(e1, axis=0)
    d = np.diag([params.k_par, params.k_perp, params.k_perp])
    drag = frames @ d @ np.transpose(frames, (0, 2, 1))
    proj = np.transpose(frames, (0, 2, 1))[:, 1:3, :]
    return Geometry(rh, ri, e1, ri_e1, joints, drag, proj)


@dataclass
class AssembledSystem:
    A: np.ndarray
    Q: np.ndarray
    B: np.ndarray
    F0: np.ndarray
    F: np.ndarray            # (3, 2N + 6): magnetic torque vector per field component
    geom: Geometry = field(repr=False)

    @property
    def matrix(self):
        return self.A @ self.Q @ self.B


def assemble(params, p):
    """Build ``A``, ``Q``, ``B``, ``F_0`` and ``F_1..F_3`` at state ``p``."""
    n = params.n_links
    l = params.link_length
    r = params.head_radius
    g = geometry(params, p)
    theta = np.asarray(p)[3:6]
    phi = np.asarray(p)[6:].reshape(n, 2)
    ce = np.stack([cross_matrix(v) for v in g.e1])          # [R^h R^i e1]x
    cre = np.stack([cross_matrix(v) for v in g.ri_e1])      # [R^i e1]x
    rh_cre = g.rh @ cre                                     # R^h [R^i e1]x
    dtil_rot = g.drag @ rh_cre                              # R^h D~ [R^i e1]x
    xi = g.joints[:n]
    x = np.asarray(p)[:3]

    nv = 6 * n + 6
    A = np.zeros((2 * n + 6, nv))
    c_xl, c_oh, c_ol = 3, 3 + 3 * n, 6 + 3 * n
    # force balance
    A[0:3, 0:3] = -r * params.k_head * np.eye(3)
    for j in range(n):
        A[0:3, c_xl + 3 * j:c_xl + 3 * j + 3] = -l * g.drag[j]
        A[0:3, c_ol + 3 * j:c_ol + 3 * j + 3] = -0.5 * l * l * dtil_rot[j]
    A[0:3, c_oh:c_oh + 3] = -0.5 * l * l * np.einsum("jab,jbc->ac", g.drag, ce)
    # torque balance about the head centre
    lever = [0.5 * l * ce[j] - cross_matrix(xi[j] - x) for j in range(n)]
    lever3 = [l / 3.0 * ce[j] - 0.5 * cross_matrix(xi[j] - x) for j in range(n)]
    acc = -params.k_rot * r ** 3 * np.eye(3)
    for j in range(n):
        A[3:6, c_xl + 3 * j:c_xl + 3 * j + 3] = l * lever[j] @ g.drag[j]
        A[3:6, c_ol + 3 * j:c_ol + 3 * j + 3] = l * l * lever3[j] @ dtil_rot[j]
        acc = acc + l * l * lever3[j] @ g.drag[j] @ ce[j]
    A[3:6, c_oh:c_oh + 3] = acc
    # sub-chain torques about X^i, projected normal to link i
    for i in range(n):
        rows = slice(6 + 2 * i, 8 + 2 * i)
        oh = np.zeros((3, 3))
        for j in range(i, n):
            arm = cross_matrix(xi[j] - xi[i])
            lv = 0.5 * l * ce[j] - arm
            lv3 = l / 3.0 * ce[j] - 0.5 * arm
            A[rows, c_xl + 3 * j:c_xl + 3 * j + 3] = l * g.proj[i] @ lv @ g.drag[j]
            A[rows, c_ol + 3 * j:c_ol + 3 * j + 3] = l * l * g.proj[i] @ lv3 @ dtil_rot[j]
            oh += l * l * lv3 @ g.drag[j] @ ce[j]
        A[rows, c_oh:c_oh + 3] = g.proj[i] @ oh

    # kinematic maps
    Q = np.zeros((nv, 3 * n + 6))
    Q[0:3, 0:3] = np.eye(3)
    qh = r * cross_matrix(g.rh[:, 0])
    for i in range(n):
        rows = slice(3 + 3 * i, 6 + 3 * i)
        Q[rows, 0:3] = np.eye(3)
        Q[rows, 3:6] = qh
        for j in range(i):
            Q[rows, 6 + 3 * j:9 + 3 * j] = l * rh_cre[j]
        qh = qh + l * ce[i]
    Q[c_oh:c_oh + 3, 3:6] = np.eye(3)
    Q[c_ol:, 6:] = np.eye(3 * n)

    Bm = np.zeros((3 * n + 6, 2 * n + 6))
    Bm[0:3, 0:3] = np.eye(3)
    Bm[3:6, 3:6] = head_rate_map(theta[0], theta[1])
    for i in range(n):
        Bm[6 + 3 * i:9 + 3 * i, 6 + 2 * i:8 + 2 * i] = link_rate_map(phi[i, 0])

    F0 = np.zeros(2 * n + 6)
    prev = g.rh[:, 0]
    for i in range(n):
        k = params.k_el * (params.head_joint_factor if i == 0 else 1.0)
        F0[6 + 2 * i:8 + 2 * i] = k * g.proj[i] @ np.cross(g.e1[i], prev)
        prev = g.e1[i]
    F = np.zeros((3, 2 * n + 6))
    for k in range(3):
        F[k, 3:6] = params.magnetic_moment * np.cross(g.rh[:, 0], np.eye(3)[k])
    return AssembledSystem(A, Q, Bm, F0, F, g)


COND_LIMIT = 1e12


def _jit_args(params):
    return (params.n_links, params.head_radius, params.link_length, params.k_head,
            params.k_rot, params.k_par, params.k_perp, params.k_el, params.magnetic_moment,
            params.head_joint_factor)


def _check_conditioning(m, t, p):
    c = np.linalg.cond(m)
    if not np.isfinite(c) or c > COND_LIMIT:
        raise SingularDynamicsError(f"N-link system ill-conditioned (cond={c:.3g})", t, p)


def rhs(params, p, u, t=None, check=True, fast=True):
    """State derivative for the field ``u = (u1, u2, u3)``.

    ``fast=False`` solves through the explicit ``A``, ``Q``, ``B`` factors;
    the default uses the compiled assembly of the same product.
    """
    u = np.asarray(u, dtype=float)
    p = np.asarray(p, dtype=float)
    if fast:
        from . import _nlink_jit
        pdot, m = _nlink_jit.state_rate(p, u, *_jit_args(params))
    else:
        sys_ = assemble(params, p)
        m = sys_.matrix
        pdot = np.linalg.solve(m, -(sys_.F0 + u @ sys_.F))
    if check:
        _check_conditioning(m, t, p)
    return pdot


class MagneticControl:
    """Three field components ``(u1, u2, u3)`` as functions of time.

    Each channel is a number (constant), a :class:`BSplineCurve` or any
    callable of ``t``.
    """

    def __init__(self, u1=0.0, u2=0.0, u3=0.0):
        self.channels = (u1, u2, u3)
        self._fns = tuple(_as_fn(c) for c in self.channels)

    def __call__(self, t):
        return np.array([f(t) for f in self._fns])

    def sample(self, ts):
        return np.array([self(t) for t in np.atleast_1d(ts)])

    def within_bound(self, bound, tol=1e-12):
        """Control-point (or sampled) check of ``|u_k| <= bound``."""
        for c in self.channels:
            if isinstance(c, BSplineCurve):
                if np.max(np.abs(c.control_points)) > bound + tol:
                    return False
            elif np.isscalar(c):
                if abs(c) > bound + tol:
                    return False
        return True


@dataclass(frozen=True)
class Sinusoid:
    """``offset + amplitude * sin(2 pi frequency t + phase)``."""

    offset: float = 0.0
    amplitude: float = 1.0
    frequency: float = 1.0
    phase: float = 0.0

    def __call__(self, t):
        return self.offset + self.amplitude * math.sin(2.0 * math.pi * self.frequency * t + self.phase)


def _encode_control(control):
    """Pack the channels for the compiled integrator, or ``None`` if a channel is opaque."""
    kind = np.zeros(3, dtype=np.int64)
    deg = np.zeros(3, dtype=np.int64)
    sine = np.zeros((3, 4))
    curves = [c for c in control.channels if isinstance(c, BSplineCurve)]
    mk = max([c.knots.size for c in curves], default=1)
    mc = max([c.control_points.size for c in curves], default=1)
    knots = np.zeros((3, mk))
    cps = np.zeros((3, mc))
    nk = np.ones(3, dtype=np.int64)
    nc = np.ones(3, dtype=np.int64)
    for i, c in enumerate(control.channels):
        if isinstance(c, BSplineCurve):
            kind[i] = 1
            deg[i] = c.degree
            knots[i, :c.knots.size] = c.knots
            cps[i, :c.control_points.size] = c.control_points
            nk[i] = c.knots.size
            nc[i] = c.control_points.size
        elif isinstance(c, Sinusoid):
            kind[i] = 2
            sine[i] = (c.offset, c.amplitude, c.frequency, c.phase)
        elif np.isscalar(c):
            sine[i, 0] = float(c)
        else:
            return None
    return kind, deg, knots, nk, cps, nc, sine


def _as_fn(c):
    if np.isscalar(c):
        v = float(c)
        return lambda t: v
    if isinstance(c, BSplineCurve):
        # clamp to the knot span so the integrator can probe t slightly past T
        lo, hi = c.t0, c.tn
        return lambda t: c.eval(min(max(t, lo), hi))
    if callable(c):
        return c
    raise TypeError(f"unsupported control channel {c!r}")


def sinusoidal_control(amplitude=0.01, frequency=0.5):
    """Planar oscillating field ``B (1, sin(2 pi f t), 0)``."""
    return MagneticControl(amplitude, Sinusoid(0.0, amplitude, frequency), 0.0)


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray
    n_links: int
    sol: object = field(default=None, repr=False)

    @property
    def position(self):
        return self.states[:, :3]

    @property
    def final(self):
        return self.states[-1]

    def phase_portrait(self):
        """``(theta_tail, theta_head)`` with ``theta_head = theta_z`` and
        ``theta_tail = theta_head + phi_z^N``; meaningful for planar motion."""
        head = self.states[:, 5]
        return head + self.states[:, -1], head

    def header(self):
        cols = ["t", "x", "y", "z", "theta_x", "theta_y", "theta_z"]
        for i in range(1, self.n_links + 1):
            cols += [f"phi_y_{i}", f"phi_z_{i}"]
        return cols

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for t, s in zip(self.t, self.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in s])


def integrate(params, control, p0=None, T=1.0, t_eval=None, rtol=1e-8, atol=1e-10,
              max_step=np.inf, method="auto"):
    """Integrate the swimmer under ``control`` over ``[0, T]``.

    ``t_eval`` selects the returned sample times (default: 401 uniform).
    The elastic modes of the short links are stiff, so the default
    ``method="auto"`` runs a compiled variable-order BDF whenever every
    channel is a constant, a :class:`Sinusoid` or a B-spline, and scipy's
    LSODA otherwise. Any ``solve_ivp`` method name (e.g. ``"RK45"``) can be
    forced; the explicit pair agrees but is far slower on this problem.
    """
    n = params.n_links
    p0 = zero_state(n) if p0 is None else np.asarray(p0, dtype=float)
    split_state(p0, n)
    if t_eval is None:
        t_eval = np.linspace(0.0, T, 401)
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.size and (np.any(np.diff(t_eval) < 0) or t_eval[0] < 0 or t_eval[-1] > T):
        raise ValueError("t_eval must be sorted inside [0, T]")
    args = _jit_args(params)
    from . import _nlink_jit

    packed = _encode_control(control) if method == "auto" else None
    if packed is not None:
        status, ys, t_fail, y_fail, _ = _nlink_jit.integrate_bdf(
            p0, float(T), t_eval, float(rtol), float(atol), float(max_step), COND_LIMIT,
            *packed, *args)
        if status == 1:
            raise SingularDynamicsError("N-link system ill-conditioned", t_fail, y_fail)
        if status != 0:
            raise SingularDynamicsError("step size collapsed", t_fail, y_fail)
        return Trajectory(t_eval.copy(), ys, n, None)

    if method == "auto":
        method = "LSODA"

    def f(t, p):
        pdot, m = _nlink_jit.state_rate(p, control(t), *args)
        _check_conditioning(m, t, p)
        return pdot

    kw = {}
    if method in ("LSODA", "BDF", "Radau"):
        kw["jac"] = lambda t, p: _nlink_jit.rate_jacobian(p, control(t), *args)
    sol = solve_ivp(f, (0.0, T), p0, method=method, t_eval=t_eval, rtol=rtol, atol=atol,
                    dense_output=True, max_step=max_step, **kw)
    if sol.status < 0:
        raise SingularDynamicsError(f"integration failed: {sol.message}", sol.t[-1] if sol.t.size else 0.0)
    return Trajectory(np.asarray(sol.t), sol.y.T.copy(), n, sol)


def displacement_per_period(params, frequency, amplitude=0.01, periods=4, transient=1,
                            rtol=1e-8, atol=1e-10, method="auto"):
    """Mean x-advance per period under the sinusoidal field.

    The first ``transient`` periods are discarded; the mean is taken over the
    following ``periods`` periods.
    """
    if not frequency > 0:
        raise ValueError("frequency must be positive")
    period = 1.0 / frequency
    T = (periods + transient) * period
    t_eval = np.array([transient * period, T])
    traj = integrate(params, sinusoidal_control(amplitude, frequency), T=T, t_eval=t_eval,
                     rtol=rtol, atol=atol, max_step=period / 20.0, method=method)
    return (traj.states[1, 0] - traj.states[0, 0]) / periods


def tangent_aligned_baseline(ref, frequency, amplitude=0.01):
    """Field along the reference tangent plus a perpendicular oscillation.

    ``u(t) = B (tau(t) + sin(2 pi f t) n(t))`` with ``tau`` the unit tangent
    of ``ref`` and ``n`` its in-plane (x-y) unit normal.
    """
    w = 2.0 * math.pi * frequency

    def frame(t):
        v = np.asarray(ref.velocity(t), dtype=float)[:3]
        s = np.linalg.norm(v)
        if s < 1e-12:
            raise ValueError(f"reference tangent vanishes at t={t}")
        tau = v / s
        nrm = np.array([-tau[1], tau[0], 0.0])
        nn = np.linalg.norm(nrm)
        if nn < 1e-12:
            nrm = np.array([0.0, 0.0, 1.0])
        else:
            nrm /= nn
        return tau, nrm

    frame(0.0)
    comps = []
    for k in range(3):
        def ch(t, k=k):
            tau, nrm = frame(t)
            return amplitude * (tau[k] + math.sin(w * t) * nrm[k])
        comps.append(ch)
    return MagneticControl(*comps)
