"""Reference values computed by oracles that share no code path with the
library routines they check.

* Ellipse arc parameters come from the incomplete elliptic integral of the
  second kind and Brent root finding.
* The ellipsoid arc parameter comes from composite Gauss-Legendre
  quadrature and Brent root finding.
* The classical-stroke displacement comes from fixed-step RK4 aligned with
  the spline knots, extrapolated with Richardson's rule.
"""

import json
import math
import os

import numpy as np
from scipy.optimize import brentq
from scipy.special import ellipeinc

GOLDEN_PATH = os.path.join(os.path.dirname(__file__), "data", "golden.json")

ELLIPSE_CASES = {"ellipse_b0.5": (1.0, 0.5), "ellipse_b1": (1.0, 1.0), "ellipse_b1.5": (1.0, 1.5)}
ELLIPSOID_CASES = {"ellipsoid_0.5": (0.5, 0.5, 0.5)}


def ellipse_arc_oracle(a, b, s):
    """``int_0^s sqrt(a^2 sin^2 + b^2 cos^2)`` as ``b E(s | 1 - a^2/b^2)``."""
    return b * ellipeinc(s, 1.0 - (a / b) ** 2)


def ellipse_s_end_oracle(a, b, L):
    return brentq(lambda s: ellipse_arc_oracle(a, b, s) - L, 0.0, 2 * math.pi, xtol=1e-14, rtol=1e-15)


def _gauss_arc(speed, s, panels=400, order=20):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, s, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    return float(np.sum(half * w * speed(mid + half * x)))


def ellipsoid_s_end_oracle(a, b, c, L):
    def speed(s):
        cs, sn = np.cos(s), np.sin(s)
        return np.sqrt(4 * a * a * cs ** 2 * sn ** 2 + b * b * (cs ** 2 - sn ** 2) ** 2 + c * c * cs ** 2)
    return brentq(lambda s: _gauss_arc(speed, s) - L, 1e-9, 2 * math.pi, xtol=1e-14, rtol=1e-15)


def classical_stroke_oracle(k=(6, 7)):
    """Far-regime free-space stroke displacement (amplitude ``R``, ``T = 4``)."""
    from .threesphere import ThreeSphereParams, classical_stroke, integrate_fixed_step
    p = ThreeSphereParams()
    ctrl = classical_stroke(p, p.radius, T=4.0, regime="far")
    n_int = ctrl.u1.knots.size - 2 * (ctrl.u1.degree + 1) + 1
    coarse, fine = (integrate_fixed_step(ctrl, p, n_steps=n_int * 2 ** j)[0] for j in k)
    return float((16.0 * fine - coarse) / 15.0), float(fine - coarse)


def compute():
    out = {"s_end": {}, "threesphere": {}}
    for name, (a, b) in ELLIPSE_CASES.items():
        out["s_end"][name] = ellipse_s_end_oracle(a, b, 1.0)
    for name, (a, b, c) in ELLIPSOID_CASES.items():
        out["s_end"][name] = ellipsoid_s_end_oracle(a, b, c, 1.0)
    dx, step_diff = classical_stroke_oracle()
    out["threesphere"]["classical_far_dx"] = dx
    out["threesphere"]["classical_far_step_diff"] = step_diff
    return out


def regenerate(path=GOLDEN_PATH):
    data = compute()
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return data


def load(path=GOLDEN_PATH):
    with open(path) as fh:
        return json.load(fh)
