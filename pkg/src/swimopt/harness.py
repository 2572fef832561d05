"""Config-driven experiments, studies and baselines.

A config is a JSON object checked against :data:`CONFIG_SCHEMA`. Lengths
in objective blocks are in units of the swimmer length ``L`` (N-link) or
the sphere radius ``R`` (three-sphere).
"""

import csv
import functools
import json
import math
import os
import shutil
import tempfile

import jsonschema
import numpy as np
from scipy.integrate import simpson
from scipy.optimize import minimize_scalar

from . import controls, nlink, objective, scbo, threesphere

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "configs")

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["name", "model", "T", "controls", "objective"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "model": {"enum": ["nlink", "threesphere"]},
        "params": {"type": "object"},
        "T": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "controls": {
            "type": "object",
            "required": ["set"],
            "additionalProperties": False,
            "properties": {
                "set": {"enum": ["y", "xy", "xyz", "arms"]},
                "n_ctrl": {"type": "integer", "minimum": 2},
                "degree": {"type": "integer", "minimum": 1, "maximum": 5},
                "bound": {"type": "number", "exclusiveMinimum": 0},
                "regime": {"enum": ["near", "middle", "far"]},
            },
        },
        "objective": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["max_displacement", "ellipse", "ellipse_closed", "ellipsoid",
                                  "wall_compensation"]},
                "a": {"type": "number", "exclusiveMinimum": 0},
                "b": {"type": "number", "exclusiveMinimum": 0},
                "c": {"type": "number", "exclusiveMinimum": 0},
                "Q": {"type": "number", "minimum": 0},
                "S": {"type": "number", "minimum": 0},
                "h": {"type": "number", "exclusiveMinimum": 0},
                "alpha": {"type": "number", "minimum": 0},
                "x_far": {"type": "number"},
                "running": {"type": "boolean"},
            },
        },
        "scbo": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "batch_size": {"type": "integer", "minimum": 1},
                "budget": {"type": "integer", "minimum": 2},
                "n_candidates": {"type": "integer", "minimum": 1},
                "n_init": {"type": "integer", "minimum": 1},
                "max_train": {"type": "integer", "minimum": 2},
                "gp_restarts": {"type": "integer", "minimum": 0},
                "gp_maxiter": {"type": "integer", "minimum": 1},
            },
        },
        "baseline": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["sinusoid", "classical_stroke", "none"]},
                "frequency": {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "peak"}]},
            },
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rtol": {"type": "number", "exclusiveMinimum": 0},
                "atol": {"type": "number", "exclusiveMinimum": 0},
                "n_samples": {"type": "integer", "minimum": 3},
            },
        },
    },
}


class ConfigError(ValueError):
    pass


def validate_config(config):
    """Raise :class:`ConfigError` listing every schema violation with its field path."""
    v = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errors = sorted(v.iter_errors(config), key=lambda e: list(e.absolute_path))
    msgs = [f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}" for e in errors]
    if not msgs:
        msgs = _semantic_errors(config)
    if msgs:
        raise ConfigError("; ".join(msgs))
    return config


def _semantic_errors(cfg):
    msgs = []
    model, cset, kind = cfg["model"], cfg["controls"]["set"], cfg["objective"]["kind"]
    if (model == "threesphere") != (cset == "arms"):
        msgs.append(f"controls/set: '{cset}' does not fit model '{model}'")
    if model == "threesphere" and kind not in ("max_displacement", "wall_compensation"):
        msgs.append(f"objective/kind: '{kind}' is not defined for the three-sphere swimmer")
    if model == "nlink" and kind == "wall_compensation":
        msgs.append("objective/kind: wall compensation needs the three-sphere swimmer")
    need = {"ellipse": "ab", "ellipse_closed": "ab", "ellipsoid": "abc", "wall_compensation": ["h", "alpha"]}
    for key in need.get(kind, ()):
        if key not in cfg["objective"]:
            msgs.append(f"objective/{key}: required for kind '{kind}'")
    try:
        build_params(cfg)
    except (TypeError, ValueError) as exc:
        msgs.append(f"params: {exc}")
    return msgs


def load_config(path):
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})")
    return validate_config(cfg)


def bundled_configs():
    return sorted(os.path.join(CONFIG_DIR, f) for f in os.listdir(CONFIG_DIR) if f.endswith(".json"))


def bundled_config(name):
    path = os.path.join(CONFIG_DIR, name if name.endswith(".json") else name + ".json")
    return load_config(path)


# --- assembly ---

def build_params(cfg):
    extra = dict(cfg.get("params", {}))
    if cfg["model"] == "nlink":
        return nlink.NLinkParams(**extra)
    p = threesphere.ThreeSphereParams(**extra)
    if cfg["objective"]["kind"] == "wall_compensation":
        p = p.with_wall(True)
    return p


def build_spec(cfg, params):
    c = cfg["controls"]
    T = float(cfg["T"])
    if c["set"] == "arms":
        base = params.regime_arm(c.get("regime", "far"))
        return controls.arm_spec(params, T, c.get("n_ctrl", 10), c.get("degree", 2), base)
    return controls.magnetic_spec(c["set"], T, c.get("n_ctrl", 40), c.get("degree", 3),
                                  c.get("bound", controls.MAGNETIC_BOUND))


def build_reference(cfg, params):
    o = cfg["objective"]
    T = float(cfg["T"])
    if cfg["model"] == "threesphere":
        R = params.radius
        if o["kind"] == "wall_compensation":
            return objective.point_ref((o.get("x_far", 8.0) * R, o["h"] * R, 0.0), T)
        return None
    L = params.length
    if o["kind"] == "ellipse":
        return objective.ellipse_ref(o["a"] * L, o["b"] * L, L, T)
    if o["kind"] == "ellipse_closed":
        return objective.ellipse_ref(o["a"] * L, o["b"] * L, None, T, closed=True)
    if o["kind"] == "ellipsoid":
        return objective.ellipsoid_ref(o["a"] * L, o["b"] * L, o["c"] * L, L, T)
    return None


def _sim_opts(cfg):
    s = cfg.get("sim", {})
    default_rtol = 1e-6 if cfg["model"] == "nlink" else 1e-8
    rtol = s.get("rtol", default_rtol)
    return rtol, s.get("atol", rtol * 1e-3), s.get("n_samples", objective.N_COST_SAMPLES)


class Experiment:
    """Everything needed to evaluate one decision vector of a config."""

    def __init__(self, cfg):
        self.cfg = validate_config(cfg)
        self.params = build_params(cfg)
        self.spec = build_spec(cfg, self.params)
        self.reference = build_reference(cfg, self.params)
        self.T = float(cfg["T"])
        self.rtol, self.atol, n = _sim_opts(cfg)
        self.t = np.linspace(0.0, self.T, n)
        self.h = cfg["objective"].get("h", 0.0) * getattr(self.params, "radius", 0.0)

    @property
    def is_nlink(self):
        return self.cfg["model"] == "nlink"

    @property
    def n_constraints(self):
        return 0 if self.is_nlink else 1

    def control(self, x):
        ch = controls.decode(x, self.spec)
        return nlink.MagneticControl(*ch) if self.is_nlink else threesphere.ArmControl(*ch)

    def simulate(self, ctrl):
        if self.is_nlink:
            return nlink.integrate(self.params, ctrl, T=self.T, t_eval=self.t, rtol=self.rtol, atol=self.atol)
        return threesphere.integrate_stroke(ctrl, self.params, p0=(0.0, self.h, 0.0), t_eval=self.t,
                                            rtol=self.rtol, atol=self.atol)

    def cost(self, traj):
        o = self.cfg["objective"]
        kind = o["kind"]
        if kind == "max_displacement":
            scale = self.params.length if self.is_nlink else self.params.radius
            return objective.max_displacement_cost(traj, scale)
        if kind == "wall_compensation":
            R = self.params.radius
            return objective.wall_compensation_cost(traj, self.h, o["alpha"], o.get("x_far", 8.0) * R,
                                                    o.get("running", True))
        k = 3 if kind == "ellipsoid" else 2
        Q = np.r_[np.full(k, o.get("Q", objective.PLANAR_Q))]
        S = np.r_[np.full(k, o.get("S", objective.PLANAR_S))]
        return objective.tracking_cost(traj, self.reference, Q, S)

    def constraints(self, ctrl):
        if self.is_nlink:
            return []
        return [controls.rate_violation((ctrl.u1, ctrl.u2), self.params.rate_max)]

    def __call__(self, x):
        ctrl = self.control(x)
        cons = self.constraints(ctrl)
        return self.cost(self.simulate(ctrl)), cons

    def problem(self):
        return scbo.Problem(self.spec.dim, self, self.n_constraints)

    def scbo_config(self, budget=None):
        opts = dict(self.cfg.get("scbo", {}))
        if budget is not None:
            opts["budget"] = int(budget)
        return scbo.SCBOConfig(self.spec.dim, **opts)

    def summarize(self, traj):
        X = traj.states
        out = {"cost": float(self.cost(traj)), "displacement": float(X[-1, 0] - X[0, 0])}
        if not self.is_nlink:
            out["delta_theta"] = float(X[-1, 2] - X[0, 2])
            out["delta_y"] = float(X[-1, 1] - X[0, 1])
        return out

    def baseline(self):
        """``(control, info)`` for the config's comparison control, or ``None``."""
        b = self.cfg.get("baseline", {"kind": "none"})
        kind = b.get("kind", "none")
        if kind == "none":
            return None
        if kind == "classical_stroke":
            if self.is_nlink:
                raise ConfigError("baseline/kind: classical stroke needs the three-sphere swimmer")
            regime = self.cfg["controls"].get("regime", "far")
            amp = threesphere.default_amplitude(self.params, self.T)
            return threesphere.classical_stroke(self.params, amp, T=self.T, regime=regime), \
                {"kind": kind, "amplitude": amp, "regime": regime}
        if not self.is_nlink:
            raise ConfigError("baseline/kind: the sinusoidal field needs the N-link swimmer")
        f = b.get("frequency", "peak")
        f = peak_frequency(self.params) if f == "peak" else float(f)
        bound = self.cfg["controls"].get("bound", controls.MAGNETIC_BOUND)
        if self.reference is None:
            ctrl = nlink.sinusoidal_control(bound, f)
        else:
            ctrl = nlink.tangent_aligned_baseline(self.reference, f, bound)
        return ctrl, {"kind": kind, "frequency": f}


# --- frequency response of the N-link swimmer ---

def frequency_sweep(params, freqs, amplitude=controls.MAGNETIC_BOUND):
    return [(float(f), nlink.displacement_per_period(params, f, amplitude)) for f in freqs]


@functools.lru_cache(maxsize=16)
def _peak(params, amplitude, lo, hi):
    grid = np.linspace(lo, hi, 12)
    vals = [nlink.displacement_per_period(params, f, amplitude) for f in grid]
    k = int(np.argmax(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    res = minimize_scalar(lambda f: -nlink.displacement_per_period(params, f, amplitude),
                          bounds=(a, b), method="bounded", options={"xatol": 1e-3})
    return float(res.x)


def peak_frequency(params, amplitude=controls.MAGNETIC_BOUND, lo=0.1, hi=3.0):
    """Frequency of the largest displacement per period under the sinusoidal field."""
    return _peak(params, float(amplitude), float(lo), float(hi))


def link_convergence(params, Ns=range(2, 8), amplitude=controls.MAGNETIC_BOUND, frequency=0.5,
                     n_samples=801):
    """``E(N) = || X^(N+1) - X^(N) ||_{L2(0, T)}`` with ``T = 4 / f`` under the sinusoidal field."""
    T = 4.0 / frequency
    ts = np.linspace(0.0, T, n_samples)
    ctrl = nlink.sinusoidal_control(amplitude, frequency)
    cache = {}

    def pos(n):
        if n not in cache:
            cache[n] = nlink.integrate(params.with_links(n), ctrl, T=T, t_eval=ts).position
        return cache[n]

    rows = []
    for n in Ns:
        d2 = np.sum((pos(n + 1) - pos(n)) ** 2, axis=1)
        rows.append((int(n), float(math.sqrt(simpson(d2, x=ts)))))
    return rows


# --- running configs ---

def _atomic_dir(out_dir):
    parent = os.path.dirname(os.path.abspath(out_dir))
    os.makedirs(parent, exist_ok=True)
    return tempfile.mkdtemp(prefix=".partial-", dir=parent)


def _json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _control_dict(ctrl):
    if isinstance(ctrl, threesphere.ArmControl):
        return ctrl.to_dict()
    out = {}
    for name, c in zip(("u1", "u2", "u3"), ctrl.channels):
        out[name] = c.to_dict() if hasattr(c, "to_dict") else (float(c) if np.isscalar(c) else repr(c))
    return out


def run_experiment(config, out_dir, seed=None, budget=None, log=None):
    """Optimize one config and write its artifacts to ``out_dir``.

    Artifacts are written to a scratch directory first and moved into place
    at the end, so a failed run leaves nothing behind. Returns the summary.
    """
    cfg = load_config(config) if isinstance(config, str) else validate_config(dict(config))
    seed = int(cfg.get("seed", 0) if seed is None else seed)
    exp = Experiment(cfg)
    scfg = exp.scbo_config(budget)
    tmp = _atomic_dir(out_dir)
    try:
        cb = None
        if log:
            cb = lambda r: log(f"eval {r.index}: objective {r.objective:.6g}") if r.index % 100 == 0 else None
        res = scbo.run(exp.problem(), scfg, seed, callback=cb)
        best_ctrl = exp.control(res.best.x)
        traj = exp.simulate(best_ctrl)
        summary = {"name": cfg["name"], "seed": seed, "dim": exp.spec.dim, "budget": scfg.budget,
                   "optimized": exp.summarize(traj), "best_feasible": res.best.feasible,
                   "n_restarts": res.n_restarts}
        base = exp.baseline()
        if base is not None:
            bctrl, info = base
            btraj = exp.simulate(bctrl)
            summary["baseline"] = {**info, **exp.summarize(btraj)}
            # an infeasible optimum never counts as a win
            summary["beats_baseline"] = bool(res.best.feasible
                                             and summary["optimized"]["cost"] < summary["baseline"]["cost"])
            btraj.to_csv(os.path.join(tmp, "baseline_trajectory.csv"))
        scbo.write_artifacts(tmp, res, {"name": cfg["name"]})
        _json(os.path.join(tmp, "best_control.json"), _control_dict(best_ctrl))
        traj.to_csv(os.path.join(tmp, "best_trajectory.csv"))
        if exp.reference is not None:
            exp.reference.to_csv(os.path.join(tmp, "reference.csv"), n=exp.t.size)
        _json(os.path.join(tmp, "config.json"), cfg)
        _json(os.path.join(tmp, "summary.json"), summary)
        if os.path.exists(out_dir):
            shutil.rmtree(out_dir)
        os.replace(tmp, out_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return summary


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])


# --- studies ---

def control_point_study(out_dir, counts=(10, 20, 40, 80), seeds=(0, 1, 2), budget=2000, log=None):
    """Best tracking cost versus control points on the ``a = L, b = L/2`` ellipse."""
    base = bundled_config("nlink_ellipse_b0.5")
    rows = []
    for n in counts:
        costs = []
        for s in seeds:
            cfg = json.loads(json.dumps(base))
            cfg["name"] = f"control_points_{n}"
            cfg["controls"]["n_ctrl"] = int(n)
            cfg["baseline"] = {"kind": "none"}
            summ = run_experiment(cfg, os.path.join(out_dir, f"n{n}_seed{s}"), seed=s, budget=budget)
            costs.append(summ["optimized"]["cost"])
            if log:
                log(f"{n} control points, seed {s}: cost {costs[-1]:.6g}")
        rows.append((int(n), float(np.mean(costs)), *[float(c) for c in costs]))
    _write_rows(os.path.join(out_dir, "control_points.csv"),
                ["n_ctrl", "mean_cost"] + [f"seed{s}" for s in seeds], rows)
    return rows


WALL_HEIGHTS = tuple(float(h) for h in (1.5, 1.75, 2, 2.5, 3, 4, 5, 6, 8, 10, 15, 20, 30, 50))


def wall_phase_table(params=None, heights=WALL_HEIGHTS, regimes=("near", "middle", "far")):
    """``(regime, h / R, delta_theta)`` rows from one classical stroke per height."""
    p = threesphere.ThreeSphereParams() if params is None else params
    rows = []
    for reg in regimes:
        for h, dth in threesphere.wall_phase_scan(p, reg, [h * p.radius for h in heights]):
            rows.append((reg, round(h / p.radius, 9), dth))
    return rows


def write_phase_csv(path, rows, radius=threesphere.ThreeSphereParams().radius):
    """Phase-scan rows as ``h,delta_theta,regime`` with ``h`` in length units."""
    _write_rows(path, ["h", "delta_theta", "regime"],
                [(float(h * radius), float(d), reg) for reg, h, d in rows])


def altitude_phases(rows, regime, min_height=2.0):
    """Heights (in ``R``) of the strongest repulsion and the strongest attraction.

    Heights below ``min_height`` are skipped: a rotating swimmer started
    closer than that can touch the wall within one stroke.
    """
    sel = [(h, d) for r, h, d in rows if r == regime and h >= min_height - 1e-9]
    low = max(sel, key=lambda hd: hd[1])
    mid = min(sel, key=lambda hd: hd[1])
    return {"low": low[0], "middle": mid[0]}


def wall_study(out_dir, alphas=(1, 100, 1000), regimes=("near", "middle"), budget=2000, seed=0, log=None):
    """Phase scan plus compensation runs at both altitude phases for each regime."""
    os.makedirs(out_dir, exist_ok=True)
    table = wall_phase_table()
    write_phase_csv(os.path.join(out_dir, "wall_phase.csv"), table)
    rows = []
    for reg in regimes:
        for phase, h in altitude_phases(table, reg).items():
            for alpha in alphas:
                cfg = json.loads(json.dumps(bundled_config("threesphere_wall_near_low")))
                cfg["name"] = f"wall_{reg}_{phase}_alpha{alpha}"
                cfg["controls"]["regime"] = reg
                cfg["objective"].update({"h": h, "alpha": float(alpha)})
                summ = run_experiment(cfg, os.path.join(out_dir, cfg["name"]), seed=seed, budget=budget)
                o, b = summ["optimized"], summ["baseline"]
                rows.append((reg, phase, h, float(alpha), o["displacement"], o["delta_theta"], o["delta_y"],
                             b["displacement"], b["delta_theta"], b["delta_y"]))
                if log:
                    log(f"{cfg['name']}: dtheta {o['delta_theta']:.3g} (classical {b['delta_theta']:.3g})")
    _write_rows(os.path.join(out_dir, "wall_compensation.csv"),
                ["regime", "phase", "h_over_R", "alpha", "dx", "dtheta", "dy",
                 "classical_dx", "classical_dtheta", "classical_dy"], rows)
    return table, rows


STUDIES = ("frequency", "nlink_links", "control_points", "wall_phase", "wall")


def run_study(study, out_dir, seed=0, budget=None, log=None):
    os.makedirs(out_dir, exist_ok=True)
    if study == "frequency":
        freqs = [0.01] + [round(f, 2) for f in np.arange(0.1, 3.0001, 0.1)]
        rows = frequency_sweep(nlink.NLinkParams(), freqs)
        _write_rows(os.path.join(out_dir, "frequency_sweep.csv"), ["frequency", "dx_per_period"], rows)
        return rows
    if study == "nlink_links":
        rows = link_convergence(nlink.NLinkParams())
        _write_rows(os.path.join(out_dir, "nlink_links.csv"), ["n_links", "l2_error"], rows)
        return rows
    if study == "control_points":
        return control_point_study(out_dir, budget=budget or 2000, log=log)
    if study == "wall_phase":
        rows = wall_phase_table()
        write_phase_csv(os.path.join(out_dir, "wall_phase.csv"), rows)
        return rows
    if study == "wall":
        return wall_study(out_dir, budget=budget or 2000, seed=seed, log=log)
    raise ValueError(f"unknown study {study!r}; expected one of {STUDIES}")
