"""Clamped one-dimensional B-spline curves.

Basis functions follow the Cox-de Boor recursion with the convention that a
fraction with a zero denominator is zero. Supports are half-open
``[t_i, t_{i+d+1})`` except at the last knot, where the curve is closed so
that ``S(t_n) = P_N``.
"""

from dataclasses import dataclass

import numpy as np


def clamped_knots(t0, tn, degree, interior=()):
    """Clamped knot vector with ``degree + 1`` copies of each end knot."""
    if not tn > t0:
        raise ValueError(f"knot span must satisfy tn > t0, got [{t0}, {tn}]")
    if degree < 0:
        raise ValueError("degree must be >= 0")
    interior = np.asarray(interior, dtype=float)
    if interior.size and (np.any(np.diff(interior) < 0) or interior[0] <= t0 or interior[-1] >= tn):
        raise ValueError("interior knots must be nondecreasing and strictly inside (t0, tn)")
    return np.concatenate([np.full(degree + 1, float(t0)), interior, np.full(degree + 1, float(tn))])


def clamped_uniform_knots(t0, tn, n_interior, degree):
    """Clamped knots whose span ``[t0, tn]`` is cut into ``n_interior`` equal cells.

    ``n_interior - 1`` interior knots are placed between the repeated ends.

    >>> clamped_uniform_knots(0, 4, 4, 2).tolist()
    [0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 4.0, 4.0]
    """
    if n_interior < 1:
        raise ValueError("n_interior must be >= 1")
    if not tn > t0:
        raise ValueError(f"knot span must satisfy tn > t0, got [{t0}, {tn}]")
    interior = np.linspace(t0, tn, n_interior + 1)[1:-1]
    return clamped_knots(t0, tn, degree, interior)


def knots_for(n_ctrl, degree, t0, tn):
    """Uniform clamped knots for a curve with ``n_ctrl`` control points."""
    if n_ctrl < degree + 1:
        raise ValueError(f"need at least degree + 1 = {degree + 1} control points, got {n_ctrl}")
    return clamped_uniform_knots(t0, tn, n_ctrl - degree, degree)


def _ratio(num, den):
    return num / den if den != 0.0 else 0.0


def basis(i, degree, t, knots):
    """Value of the ``i``-th basis function of the given degree at ``t``.

    This is the literal recursion; it closes the last non-degenerate span at
    the final knot so that the basis still sums to one at ``t = t_n``.
    """
    knots = np.asarray(knots, dtype=float)
    if degree == 0:
        lo, hi = knots[i], knots[i + 1]
        if lo <= t < hi:
            return 1.0
        # close the last non-empty span at the final knot
        if t == knots[-1] and hi == knots[-1] and lo < hi:
            return 1.0
        return 0.0
    left = _ratio(t - knots[i], knots[i + degree] - knots[i])
    right = _ratio(knots[i + degree + 1] - t, knots[i + degree + 1] - knots[i + 1])
    return left * basis(i, degree - 1, t, knots) + right * basis(i + 1, degree - 1, t, knots)


def find_span(t, degree, knots):
    """Index ``k`` with ``knots[k] <= t < knots[k+1]`` (last span for ``t == t_n``)."""
    n_basis = len(knots) - degree - 1
    if t >= knots[n_basis]:
        return n_basis - 1
    return int(np.searchsorted(knots, t, side="right")) - 1


def nonzero_basis(t, degree, knots):
    """The ``degree + 1`` basis values that can be nonzero at ``t``, and the span index.

    Computed by running the recursion only over the triangle of functions
    supported on the current span; entry ``j`` is ``S_{k-degree+j, degree}(t)``.
    """
    k = find_span(t, degree, knots)
    vals = [1.0]
    for p in range(1, degree + 1):
        new = [0.0] * (p + 1)
        for j in range(p + 1):
            i = k - p + j
            acc = 0.0
            if j > 0:
                acc += _ratio(t - knots[i], knots[i + p] - knots[i]) * vals[j - 1]
            if j < p:
                acc += _ratio(knots[i + p + 1] - t, knots[i + p + 1] - knots[i + 1]) * vals[j]
            new[j] = acc
        vals = new
    return k, vals


def basis_matrix(ts, degree, knots):
    """Dense collocation matrix ``B[m, i] = S_{i,degree}(ts[m])``."""
    knots = np.asarray(knots, dtype=float)
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    n_basis = len(knots) - degree - 1
    out = np.zeros((ts.size, n_basis))
    for m, t in enumerate(ts):
        k, vals = nonzero_basis(t, degree, knots)
        out[m, k - degree:k + 1] = vals
    return out


@dataclass(frozen=True)
class BSplineCurve:
    """Scalar B-spline ``S(t) = sum_i S_{i,d}(t) P_i`` on a clamped knot vector."""

    degree: int
    knots: np.ndarray
    control_points: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        cps = np.asarray(self.control_points, dtype=float)
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knot vector must be nondecreasing")
        if knots.size != cps.size + self.degree + 1:
            raise ValueError(
                f"{cps.size} control points of degree {self.degree} need "
                f"{cps.size + self.degree + 1} knots, got {knots.size}")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "control_points", cps)
        # plain-float copies for the scalar hot path
        object.__setattr__(self, "_kl", knots.tolist())
        object.__setattr__(self, "_pl", cps.tolist())

    @classmethod
    def uniform(cls, control_points, degree, t0, tn):
        cps = np.asarray(control_points, dtype=float)
        return cls(degree, knots_for(cps.size, degree, t0, tn), cps)

    @property
    def t0(self):
        return float(self.knots[0])

    @property
    def tn(self):
        return float(self.knots[-1])

    def __call__(self, t):
        if np.ndim(t) == 0:
            return self.eval(float(t))
        return self.eval_many(t)

    def eval(self, t):
        if t < self._kl[0] or t > self._kl[-1]:
            raise ValueError(f"t={t} outside the knot span [{self.t0}, {self.tn}]")
        k, vals = nonzero_basis(t, self.degree, self._kl)
        pl = self._pl
        d = self.degree
        return sum(v * pl[k - d + j] for j, v in enumerate(vals))

    def eval_many(self, ts):
        ts = np.asarray(ts, dtype=float)
        if ts.size and (ts.min() < self.t0 or ts.max() > self.tn):
            raise ValueError(f"evaluation points outside the knot span [{self.t0}, {self.tn}]")
        return basis_matrix(ts.ravel(), self.degree, self.knots) @ self.control_points

    def derivative(self):
        """The derivative curve, one degree lower on the trimmed knot vector."""
        d = self.degree
        if d == 0:
            raise ValueError("cannot differentiate a degree-0 spline")
        t = self.knots
        p = self.control_points
        den = t[d + 1:d + p.size] - t[1:p.size]
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(den > 0, d * np.diff(p) / np.where(den > 0, den, 1.0), 0.0)
        return BSplineCurve(d - 1, t[1:-1], coef)

    def to_dict(self):
        return {"degree": int(self.degree), "knots": self.knots.tolist(),
                "control_points": self.control_points.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(int(data["degree"]), np.asarray(data["knots"], float),
                   np.asarray(data["control_points"], float))


def greville(knots, degree):
    """Greville abscissae: knot averages attached to each control point."""
    knots = np.asarray(knots, dtype=float)
    n = len(knots) - degree - 1
    if degree == 0:
        return 0.5 * (knots[:n] + knots[1:n + 1])
    return np.array([knots[i + 1:i + degree + 1].mean() for i in range(n)])
