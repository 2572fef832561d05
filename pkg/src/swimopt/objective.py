"""Reference paths and cost functionals for the optimization experiments."""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, simpson

N_COST_SAMPLES = 401     # 400 Simpson intervals on [0, T]
PLANAR_Q = 1e9
PLANAR_S = 1e4


def _ellipse_speed(s, a, b):
    return math.sqrt(a * a * math.sin(s) ** 2 + b * b * math.cos(s) ** 2)


def _ellipsoid_speed(s, a, b, c):
    cs, sn = math.cos(s), math.sin(s)
    return math.sqrt(4 * a * a * cs * cs * sn * sn + b * b * (cs * cs - sn * sn) ** 2 + c * c * cs * cs)


def arc_length(speed, s_end):
    # split at multiples of pi/2 so quad never straddles a kink of the integrand's envelope
    edges = np.append(np.arange(0.0, s_end, 0.5 * math.pi), s_end)
    return sum(quad(speed, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
               for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo)


def solve_s_end(speed, L, s_max=2 * math.pi, tol=1e-12):
    """Bisection for ``s`` with ``arc_length(speed, s) = L`` on ``[0, s_max]``."""
    total = arc_length(speed, s_max)
    if not 0 < L <= total * (1 + 1e-12):
        raise ValueError(f"arc length {L:.6g} is not reachable (curve length {total:.6g})")
    lo, hi = 0.0, s_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if arc_length(speed, mid) < L:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Time-parametrized target path starting at the origin.

    ``kind`` is ``"ellipse"``, ``"ellipsoid"`` or ``"point"``. For the point
    kind ``target`` is held for all ``t``.
    """

    kind: str
    axes: tuple
    L: float
    s_end: float
    T: float
    target: tuple = None

    def __call__(self, t):
        """Position ``(x, y, z)`` at time ``t``."""
        if self.kind == "point":
            return np.array(self.target[:3], dtype=float)
        s = self.s_end * t / self.T
        if self.kind == "ellipse":
            a, b = self.axes
            return np.array([a - a * math.cos(s), b * math.sin(s), 0.0])
        a, b, c = self.axes
        return np.array([a - a * math.cos(s) ** 2, b * math.cos(s) * math.sin(s), c * math.sin(s)])

    def velocity(self, t):
        if self.kind == "point":
            return np.zeros(3)
        w = self.s_end / self.T
        s = w * t
        if self.kind == "ellipse":
            a, b = self.axes
            return w * np.array([a * math.sin(s), b * math.cos(s), 0.0])
        a, b, c = self.axes
        return w * np.array([2 * a * math.cos(s) * math.sin(s),
                             b * (math.cos(s) ** 2 - math.sin(s) ** 2), c * math.cos(s)])

    def positions(self, ts):
        return np.array([self(t) for t in np.atleast_1d(ts)])

    def states(self, ts, dim):
        """Reference state rows padded with zeros to ``dim`` columns."""
        ts = np.atleast_1d(ts)
        out = np.zeros((ts.size, dim))
        if self.kind == "point":
            tgt = np.asarray(self.target, dtype=float)[:dim]
            out[:, :tgt.size] = tgt
            return out
        k = min(3, dim)
        out[:, :k] = self.positions(ts)[:, :k]
        return out

    def arc_residual(self):
        if self.kind == "ellipse":
            sp = lambda s: _ellipse_speed(s, *self.axes)
        elif self.kind == "ellipsoid":
            sp = lambda s: _ellipsoid_speed(s, *self.axes)
        else:
            return 0.0
        return abs(arc_length(sp, self.s_end) - self.L)

    def to_csv(self, path, n=N_COST_SAMPLES):
        ts = np.linspace(0.0, self.T, n)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x_ref", "y_ref", "z_ref"])
            for t, p in zip(ts, self.positions(ts)):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in p])

    def to_dict(self):
        d = {"kind": self.kind, "axes": list(self.axes), "L": self.L, "s_end": self.s_end, "T": self.T}
        if self.target is not None:
            d["target"] = list(self.target)
        return d


def ellipse_ref(a, b, L, T, closed=False):
    """Planar ellipse arc of length ``L`` traversed clockwise from the origin.

    ``closed=True`` ignores ``L`` and runs the full perimeter.
    """
    if min(a, b, T) <= 0:
        raise ValueError("semi-axes and horizon must be positive")
    sp = lambda s: _ellipse_speed(s, a, b)
    if closed:
        return ReferenceTrajectory("ellipse", (a, b), arc_length(sp, 2 * math.pi), 2 * math.pi, T)
    if not L > 0:
        raise ValueError("arc length must be positive")
    return ReferenceTrajectory("ellipse", (a, b), float(L), solve_s_end(sp, L), T)


def ellipsoid_ref(a, b, c, L, T):
    if min(a, b, c, T) <= 0 or not L > 0:
        raise ValueError("semi-axes, arc length and horizon must be positive")
    sp = lambda s: _ellipsoid_speed(s, a, b, c)
    return ReferenceTrajectory("ellipsoid", (a, b, c), float(L), solve_s_end(sp, L), T)


def point_ref(target, T):
    return ReferenceTrajectory("point", (), 0.0, 0.0, T, tuple(float(v) for v in target))


def _diag(w, dim):
    w = np.asarray(w, dtype=float)
    if w.ndim == 2:
        w = np.diag(w)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    out = np.zeros(dim)
    out[:min(dim, w.size)] = w[:dim]
    return out


def tracking_cost(traj, ref, Q, S, p_final=None):
    """Running plus terminal quadratic cost.

    ``traj`` has ``t`` (uniform grid) and ``states``. ``ref`` is a
    :class:`ReferenceTrajectory` or an array of reference states on the same
    grid. ``Q`` and ``S`` are diagonals (or diagonal matrices), zero-padded
    to the state size. The terminal target defaults to the reference at
    ``T``.
    """
    t = np.asarray(traj.t, dtype=float)
    X = np.asarray(traj.states, dtype=float)
    dim = X.shape[1]
    if isinstance(ref, ReferenceTrajectory):
        R = ref.states(t, dim)
    else:
        R = np.asarray(ref, dtype=float)
        if R.shape != X.shape:
            raise ValueError(f"reference grid {R.shape} does not match trajectory {X.shape}")
    q = _diag(Q, dim)
    s = _diag(S, dim)
    E = X - R
    running = simpson(E * E @ q, x=t) if t.size > 1 else 0.0
    target = R[-1] if p_final is None else _pad(p_final, dim)
    e_T = X[-1] - target
    return float(running + e_T * e_T @ s)


def _pad(v, dim):
    out = np.zeros(dim)
    v = np.asarray(v, dtype=float)[:dim]
    out[:v.size] = v
    return out


def max_displacement_cost(traj, scale):
    """Negated x-advance over the horizon in units of ``scale``."""
    X = np.asarray(traj.states)
    return float(-(X[-1, 0] - X[0, 0]) / scale)


def wall_weights(alpha, running=True):
    """``(Q, S)`` diagonals over ``(x, y, theta)`` for the wall study.

    ``S`` repeats the pattern of ``Q`` at unit scale; ``running=False``
    drops the running term.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    pattern = np.array([1.0, alpha, alpha])
    return (pattern if running else np.zeros(3)), pattern.copy()


def wall_compensation_cost(traj, h, alpha, x_far, running=True):
    """Tracking of the fixed target ``(x_far, h, 0)`` with y and theta weighted by ``alpha``.

    ``traj.states`` columns start with ``x, y, theta``.
    """
    Q, S = wall_weights(alpha, running)
    target = np.array([x_far, h, 0.0])
    R = np.zeros_like(np.asarray(traj.states, dtype=float))
    R[:, :3] = target
    return tracking_cost(traj, R, Q, S, p_final=target)
