"""Scalable constrained Bayesian optimization on the unit box.

One trust region is kept around the incumbent. Each round fits a GP to
the objective and one to each constraint, draws posterior realizations on
a cloud of perturbed candidates, and picks one point per realization by
feasibility dominance. Constraints are feasible when ``c(x) <= 0``.
"""

import csv
import json
import math
import os
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import qmc

from . import gp

FAILURE_VALUE = 1e10


@dataclass(frozen=True)
class SCBOConfig:
    """Run settings. ``None`` fields take their default formula in ``dim``."""

    dim: int
    batch_size: int = 4
    budget: int = 2000
    n_candidates: int = None
    n_init: int = None
    success_tol: int = None
    failure_tol: int = None
    L_init: float = 1.6
    L_min: float = 0.5 ** 7
    L_max: float = 1.6
    max_train: int = 300
    gp_restarts: int = 2
    gp_maxiter: int = 50
    exact_sampling_limit: int = 1000
    improvement_tol: float = 1e-3

    def __post_init__(self):
        if self.dim < 1 or self.batch_size < 1:
            raise ValueError("dim and batch_size must be positive")
        N, q = self.dim, self.batch_size
        defaults = {
            "n_candidates": min(5000, max(2000, 200 * N)),
            "n_init": 4 * N,
            "success_tol": max(3, math.ceil(N / 10)),
            "failure_tol": math.ceil(N / q),
        }
        for k, v in defaults.items():
            if getattr(self, k) is None:
                object.__setattr__(self, k, v)
        if not 0 < self.L_min <= self.L_init <= self.L_max:
            raise ValueError("need 0 < L_min <= L_init <= L_max")

    def to_dict(self):
        return asdict(self)


@dataclass
class EvaluationRecord:
    index: int
    x: np.ndarray
    objective: float
    constraints: np.ndarray
    wall_clock: float = 0.0
    failed: bool = False
    restart: int = 0

    @property
    def feasible(self):
        return bool(np.all(self.constraints <= 0))

    @property
    def violation(self):
        return float(np.max(self.constraints, initial=0.0))


@dataclass
class TrustRegionState:
    center: np.ndarray
    length: float
    success_count: int = 0
    failure_count: int = 0
    restart_pending: bool = False
    best: EvaluationRecord = None

    def bounds(self, weights=None):
        """Lower and upper corners, shaped by ``weights`` and clipped to the box."""
        w = np.ones_like(self.center) if weights is None else weights
        half = 0.5 * self.length * w
        return np.clip(self.center - half, 0.0, 1.0), np.clip(self.center + half, 0.0, 1.0)


@dataclass
class OptimizationResult:
    records: list
    best: EvaluationRecord
    config: SCBOConfig
    seed: int
    n_restarts: int
    trace: np.ndarray = field(repr=False, default=None)


class Problem:
    """Black box ``x -> (objective, constraints)`` on ``[0, 1]^dim``."""

    def __init__(self, dim, fn, n_constraints=0):
        self.dim = int(dim)
        self.fn = fn
        self.n_constraints = int(n_constraints)

    @classmethod
    def from_callables(cls, dim, objective, constraints=()):
        cons = tuple(constraints)
        return cls(dim, lambda x: (objective(x), [c(x) for c in cons]), len(cons))

    def __call__(self, x):
        f, c = self.fn(x)
        return float(f), np.asarray(c, dtype=float).reshape(self.n_constraints)


# --- pieces ---

def init_design(dim, n_init, seed):
    """Scrambled Sobol points in the unit box."""
    if dim < 1:
        raise ValueError("dim must be positive")
    return _sobol(dim, n_init, np.random.default_rng(seed))


def _sobol(dim, n, rng):
    with warnings.catch_warnings():
        # point counts follow the budget formulas, not powers of two
        warnings.simplefilter("ignore", UserWarning)
        return qmc.Sobol(dim, scramble=True, seed=rng).random(n)


def _key(f, viol):
    # feasibility dominance: any feasible beats any infeasible
    return (0, f, 0.0) if viol <= 0 else (1, viol, f)


def better(a, b, rel_tol=0.0):
    """Whether record ``a`` beats ``b`` under feasibility dominance."""
    if b is None:
        return True
    if a.feasible and b.feasible:
        return a.objective < b.objective - rel_tol * abs(b.objective)
    if a.feasible != b.feasible:
        return a.feasible
    return a.violation < b.violation - rel_tol * abs(b.violation)


def incumbent(records):
    """Lowest feasible objective, else the smallest maximum violation."""
    if not records:
        raise ValueError("no records")
    return min(records, key=lambda r: _key(r.objective, r.violation))


def select_from_samples(f, C):
    """Index chosen by feasibility dominance on one realization.

    ``f`` has one value per candidate; ``C`` is ``(n_constraints, n)``.
    """
    if C is None or len(C) == 0:
        return int(np.argmin(f))
    viol = np.max(C, axis=0)
    feas = viol <= 0
    if np.any(feas):
        idx = np.flatnonzero(feas)
        return int(idx[np.argmin(f[idx])])
    return int(np.argmin(viol))


def candidate_set(tr, n, rng, weights=None):
    """Sparse perturbations of the region centre inside the region."""
    dim = tr.center.size
    lb, ub = tr.bounds(weights)
    sob = _sobol(dim, n, rng)
    pert = lb + (ub - lb) * sob
    prob = min(1.0, 20.0 / dim)
    mask = rng.random((n, dim)) <= prob
    empty = ~mask.any(1)
    mask[empty, rng.integers(0, dim, int(empty.sum()))] = True
    X = np.where(mask, pert, tr.center)
    if np.ptp(X, axis=0).max() == 0.0:
        raise RuntimeError("degenerate trust region: all candidates coincide")
    return X


def region_weights(lengthscales):
    """Per-dimension widths from GP lengthscales with unit geometric mean."""
    w = np.asarray(lengthscales, dtype=float)
    w = w / w.mean()
    return w / np.prod(w ** (1.0 / w.size))


def _sample(model, X, n_draws, seed, cfg):
    if X.shape[0] <= cfg.exact_sampling_limit:
        return gp.sample_joint(model, X, n_draws, seed)
    return gp.sample_paths(model, X, n_draws, seed)


def propose_batch(models, tr, cfg, seed):
    """``q`` distinct candidates, one per joint posterior realization.

    ``models[0]`` is the objective GP; the rest model the constraints.
    """
    rng = np.random.default_rng(seed)
    weights = region_weights(models[0].lengthscales)
    X = candidate_set(tr, cfg.n_candidates, rng, weights)
    q = cfg.batch_size
    seeds = rng.integers(0, 2 ** 63, len(models))
    draws = [_sample(m, X, q, int(s), cfg) for m, s in zip(models, seeds)]
    chosen = []
    for k in range(q):
        f = draws[0][k].copy()
        C = np.array([d[k] for d in draws[1:]]) if len(draws) > 1 else None
        if chosen:
            f[chosen] = np.inf
            if C is not None:
                C[:, chosen] = np.inf
        chosen.append(select_from_samples(f, C))
    return X[chosen]


def update_region(tr, batch, cfg):
    """Success/failure bookkeeping after one evaluated batch."""
    best_new = incumbent(batch)
    if better(best_new, tr.best, cfg.improvement_tol):
        tr.success_count += 1
        tr.failure_count = 0
    else:
        tr.failure_count += 1
        tr.success_count = 0
    if tr.success_count >= cfg.success_tol:
        tr.length = min(2.0 * tr.length, cfg.L_max)
        tr.success_count = 0
    elif tr.failure_count >= cfg.failure_tol:
        tr.length /= 2.0
        tr.failure_count = 0
    if better(best_new, tr.best):
        tr.best = best_new
        tr.center = best_new.x.copy()
    tr.restart_pending = tr.length < cfg.L_min
    return tr


# --- loop ---

def _evaluate(problem, x, index, restart):
    t0 = time.perf_counter()
    try:
        f, c = problem(x)
        failed = not (np.isfinite(f) and np.all(np.isfinite(c)))
    except Exception:
        failed = True
    if failed:
        f, c = FAILURE_VALUE, np.full(problem.n_constraints, FAILURE_VALUE)
    return EvaluationRecord(index, np.asarray(x, float).copy(), f, c, time.perf_counter() - t0, failed, restart)


def _training_set(records, center, max_train):
    X = np.array([r.x for r in records])
    keep = gp.unique_rows(X)
    if keep.size > max_train:
        d = np.linalg.norm(X[keep] - center, axis=1)
        keep = keep[np.sort(np.argsort(d, kind="stable")[:max_train])]
    sub = [records[i] for i in keep]
    Y = np.array([[r.objective] + list(r.constraints) for r in sub])
    ok = np.array([not r.failed for r in sub])
    # failed runs enter the surrogate at the worst value seen, not the sentinel
    if ok.any() and not ok.all():
        Y[~ok] = Y[ok].max(0)
    return X[keep], Y


def _fit_models(X, Y, cfg, seed, previous):
    models = []
    for j in range(Y.shape[1]):
        warm = previous[j] if previous else None
        models.append(gp.fit(X, Y[:, j], n_restarts=0 if warm else cfg.gp_restarts,
                             seed=seed + j, warm_start=warm, maxiter=cfg.gp_maxiter))
    return models


def run(problem, cfg, seed, callback=None):
    """Spend exactly ``cfg.budget`` evaluations and return the history and best record."""
    if problem.dim != cfg.dim:
        raise ValueError("problem and config dimensions differ")
    records = []
    local = []
    n_restarts = 0
    tr = None
    models = None
    rnd = 0

    def add(x):
        r = _evaluate(problem, x, len(records), n_restarts)
        records.append(r)
        local.append(r)
        if callback:
            callback(r)
        return r

    while len(records) < cfg.budget:
        if tr is None or tr.restart_pending:
            if tr is not None:
                n_restarts += 1
            local = []
            models = None
            n0 = min(cfg.n_init, cfg.budget - len(records))
            for x in init_design(cfg.dim, n0, [seed, n_restarts]):
                add(x)
            best = incumbent(local)
            tr = TrustRegionState(best.x.copy(), cfg.L_init, best=best)
            continue
        X, Y = _training_set(local, tr.center, cfg.max_train)
        if X.shape[0] < 2:
            x = np.random.default_rng([seed, n_restarts, rnd, 7]).random(cfg.dim)
            update_region(tr, [add(x)], cfg)
            rnd += 1
            continue
        models = _fit_models(X, Y, cfg, int(seed) * 1000 + rnd, models)
        batch_x = propose_batch(models, tr, cfg, [seed, n_restarts, rnd])
        batch_x = batch_x[:cfg.budget - len(records)]
        batch = [add(x) for x in batch_x]
        update_region(tr, batch, cfg)
        rnd += 1

    return OptimizationResult(records, incumbent(records), cfg, seed, n_restarts, best_trace(records))


def best_trace(records):
    """Best feasible objective after each evaluation (``inf`` before the first feasible one)."""
    out = np.empty(len(records))
    cur = math.inf
    for i, r in enumerate(records):
        if r.feasible and r.objective < cur:
            cur = r.objective
        out[i] = cur
    return out


# --- artifacts ---

def write_history(path, result):
    recs = result.records
    dim = recs[0].x.size
    nc = recs[0].constraints.size
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eval"] + [f"x{i}" for i in range(dim)] + ["objective"]
                   + [f"c{j}" for j in range(nc)] + ["feasible", "best_so_far"])
        for r, b in zip(recs, result.trace):
            w.writerow([r.index] + [repr(float(v)) for v in r.x] + [repr(float(r.objective))]
                       + [repr(float(v)) for v in r.constraints] + [int(r.feasible), repr(float(b))])


def write_result(path, result, extra=None):
    b = result.best
    data = {
        "seed": result.seed,
        "n_evaluations": len(result.records),
        "n_restarts": result.n_restarts,
        "best": {"index": b.index, "x": b.x.tolist(), "objective": b.objective,
                 "constraints": b.constraints.tolist(), "feasible": b.feasible},
        "config": result.config.to_dict(),
    }
    if extra:
        data.update(extra)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)


def write_artifacts(out_dir, result, extra=None):
    os.makedirs(out_dir, exist_ok=True)
    write_history(os.path.join(out_dir, "history.csv"), result)
    write_result(os.path.join(out_dir, "result.json"), result, extra)
    with open(os.path.join(out_dir, "timings.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eval", "seconds", "failed"])
        for r in result.records:
            w.writerow([r.index, f"{r.wall_clock:.6f}", int(r.failed)])
