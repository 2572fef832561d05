"""Decision vectors in the unit box <-> admissible spline controls.

Every free control point is an affine image of one coordinate of ``x`` in
``[0, 1]^dim``. Because a B-spline stays within the range of its control
points, boxing the points boxes the control.
"""

from dataclasses import dataclass, field

import numpy as np

from .bspline import BSplineCurve, knots_for

MAGNETIC_BOUND = 0.01


@dataclass(frozen=True)
class ChannelSpec:
    """One control channel.

    ``fixed`` makes the channel a constant (no decision coordinates).
    ``periodic`` pins the last control point to the first. ``endpoint``
    additionally fixes both end points to a given value, so only the
    interior points are free.
    """

    name: str
    n_ctrl: int = 40
    degree: int = 3
    lo: float = -MAGNETIC_BOUND
    hi: float = MAGNETIC_BOUND
    fixed: float = None
    periodic: bool = False
    endpoint: float = None

    def __post_init__(self):
        if self.fixed is None:
            if self.n_ctrl < self.degree + 1:
                raise ValueError(f"channel {self.name}: need at least degree + 1 control points")
            if not self.hi > self.lo:
                raise ValueError(f"channel {self.name}: empty bounds [{self.lo}, {self.hi}]")
            if self.endpoint is not None and not self.lo <= self.endpoint <= self.hi:
                raise ValueError(f"channel {self.name}: endpoint outside bounds")

    @property
    def n_free(self):
        if self.fixed is not None:
            return 0
        if self.endpoint is not None:
            return self.n_ctrl - 2
        return self.n_ctrl - (1 if self.periodic else 0)

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass(frozen=True)
class ControlSpec:
    channels: tuple
    T: float
    names: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "names", tuple(c.name for c in self.channels))
        if not self.T > 0:
            raise ValueError("horizon T must be positive")

    @property
    def dim(self):
        return sum(c.n_free for c in self.channels)

    def lower(self):
        return np.concatenate([np.full(c.n_free, c.lo) for c in self.channels]) if self.dim else np.zeros(0)

    def upper(self):
        return np.concatenate([np.full(c.n_free, c.hi) for c in self.channels]) if self.dim else np.zeros(0)

    def to_dict(self):
        return {"T": self.T, "channels": [c.to_dict() for c in self.channels]}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(ChannelSpec(**c) for c in data["channels"]), float(data["T"]))


def decode(x, spec, T=None):
    """Map ``x`` in the unit box to per-channel controls on ``[0, T]``.

    Returns a tuple with one entry per channel: a :class:`BSplineCurve` for
    free channels and a float for constant channels. ``T`` defaults to the
    spec's horizon.
    """
    T = spec.T if T is None else float(T)
    x = np.asarray(x, dtype=float).ravel()
    if x.size != spec.dim:
        raise ValueError(f"decision vector has {x.size} entries, spec expects {spec.dim}")
    out = []
    k = 0
    for c in spec.channels:
        if c.fixed is not None:
            out.append(float(c.fixed))
            continue
        free = c.lo + (c.hi - c.lo) * x[k:k + c.n_free]
        k += c.n_free
        if c.endpoint is not None:
            cps = np.concatenate([[c.endpoint], free, [c.endpoint]])
        elif c.periodic:
            cps = np.concatenate([free, free[:1]])
        else:
            cps = free
        out.append(BSplineCurve(c.degree, knots_for(c.n_ctrl, c.degree, 0.0, T), cps))
    return tuple(out)


def encode(controls, spec):
    """Inverse of :func:`decode` on the free control points."""
    parts = []
    for c, ctrl in zip(spec.channels, controls):
        if c.fixed is not None:
            continue
        cps = np.asarray(ctrl.control_points if isinstance(ctrl, BSplineCurve) else ctrl, float)
        if cps.size != c.n_ctrl:
            raise ValueError(f"channel {c.name}: expected {c.n_ctrl} control points")
        if c.endpoint is not None:
            free = cps[1:-1]
        elif c.periodic:
            free = cps[:-1]
        else:
            free = cps
        parts.append((free - c.lo) / (c.hi - c.lo))
    return np.concatenate(parts) if parts else np.zeros(0)


def is_admissible(controls, spec, tol=1e-12):
    """Control-point membership test for the boxed spline sets."""
    for c, ctrl in zip(spec.channels, controls):
        if c.fixed is not None:
            if not np.isscalar(ctrl) or abs(float(ctrl) - c.fixed) > tol:
                return False
            continue
        cps = ctrl.control_points
        if cps.min() < c.lo - tol or cps.max() > c.hi + tol:
            return False
        if c.periodic and abs(cps[0] - cps[-1]) > tol:
            return False
    return True


def rate_bound(curve):
    """Upper bound of ``max_t |S'(t)|`` from the derivative's control points."""
    if np.isscalar(curve) or curve.degree == 0:
        return 0.0
    return float(np.max(np.abs(curve.derivative().control_points)))


def rate_violation(controls, u_max):
    """``max(0, max_t ||u_dot(t)||_inf - u_max)`` using the sound control-point bound."""
    if isinstance(controls, BSplineCurve) or np.isscalar(controls):
        controls = (controls,)
    elif hasattr(controls, "u1") and hasattr(controls, "u2"):
        controls = (controls.u1, controls.u2)
    worst = max(rate_bound(c) for c in controls)
    return max(0.0, worst - u_max)


# --- admissible-set presets ---

def magnetic_spec(kind, T, n_ctrl=40, degree=3, bound=MAGNETIC_BOUND):
    """Spline version of the magnetic sets ``y``, ``xy`` and ``xyz``.

    ``y``: ``u1 = bound``, ``u2`` free, ``u3 = 0``; ``xy``: ``u1, u2`` free,
    ``u3 = 0``; ``xyz``: all three free. Free channels are boxed in
    ``[-bound, bound]``.
    """
    free = lambda name: ChannelSpec(name, n_ctrl, degree, -bound, bound)
    if kind == "y":
        chans = (ChannelSpec("u1", fixed=bound), free("u2"), ChannelSpec("u3", fixed=0.0))
    elif kind == "xy":
        chans = (free("u1"), free("u2"), ChannelSpec("u3", fixed=0.0))
    elif kind == "xyz":
        chans = (free("u1"), free("u2"), free("u3"))
    else:
        raise ValueError(f"unknown magnetic set {kind!r}; expected 'y', 'xy' or 'xyz'")
    return ControlSpec(chans, T)


def arm_spec(params, T=4.0, n_ctrl=10, degree=2, base=None):
    """Three-sphere arm set: points in ``[m, M]``, periodic.

    With ``base`` given, both arms start and end at that length (the stroke
    begins and ends in the chosen hydrodynamic regime).
    """
    ch = lambda name: ChannelSpec(name, n_ctrl, degree, params.arm_min, params.arm_max,
                                  periodic=True, endpoint=base)
    return ControlSpec((ch("u1"), ch("u2")), T)
