import math

import numpy as np
import pytest

from swimopt import gp, scbo


def rec(i, f, c=(), x=None):
    x = np.full(2, 0.5) if x is None else np.asarray(x, float)
    return scbo.EvaluationRecord(i, x, float(f), np.asarray(c, float))


@pytest.mark.parametrize("N", [10, 40, 80, 200])
@pytest.mark.parametrize("q", [1, 4, 7])
def test_table_formulas(N, q):
    cfg = scbo.SCBOConfig(dim=N, batch_size=q)
    assert cfg.n_candidates == min(5000, max(2000, 200 * N))
    assert cfg.n_init == 4 * N
    assert cfg.success_tol == max(3, math.ceil(N / 10))
    assert cfg.failure_tol == math.ceil(N / q)
    assert (cfg.L_init, cfg.L_min, cfg.L_max) == (1.6, 0.5 ** 7, 1.6)


def test_table_values():
    assert scbo.SCBOConfig(dim=10).n_candidates == 2000
    assert scbo.SCBOConfig(dim=40).n_candidates == 5000
    assert scbo.SCBOConfig(dim=200, batch_size=4).failure_tol == 50
    with pytest.raises(ValueError):
        scbo.SCBOConfig(dim=0)


def test_init_design():
    X = scbo.init_design(10, 40, seed=0)
    assert X.shape == (40, 10)
    assert X.min() >= 0 and X.max() <= 1
    assert np.array_equal(X, scbo.init_design(10, 40, seed=0))
    assert not np.array_equal(X, scbo.init_design(10, 40, seed=1))


def test_incumbent_rules():
    feas = [rec(0, 3.0, [-1]), rec(1, 1.0, [-0.1]), rec(2, 2.0, [0.0])]
    assert scbo.incumbent(feas).index == 1
    infeas = [rec(0, 0.0, [0.5]), rec(1, 9.0, [0.2]), rec(2, -5.0, [0.9])]
    assert scbo.incumbent(infeas).index == 1
    mixed = [rec(0, -100.0, [0.01]), rec(1, 50.0, [-1.0])]
    assert scbo.incumbent(mixed).index == 1
    with pytest.raises(ValueError):
        scbo.incumbent([])


def test_select_from_samples():
    f = np.array([3.0, 1.0, 2.0, 0.0])
    assert scbo.select_from_samples(f, None) == 3
    C = np.array([[0.5, -1.0, -1.0, 0.2]])
    assert scbo.select_from_samples(f, C) == 1
    C = np.array([[0.5, 0.3, 0.9, 0.4], [0.1, 0.1, 0.1, 0.1]])
    assert scbo.select_from_samples(f, C) == 1


def scripted(cfg, L, outcomes):
    tr = scbo.TrustRegionState(np.full(2, 0.5), L, best=rec(-1, 1.0))
    lengths = []
    f = 1.0
    for i, ok in enumerate(outcomes):
        f = f - 0.5 if ok else f + 1.0
        scbo.update_region(tr, [rec(i, f)], cfg)
        assert tr.success_count == 0 or tr.failure_count == 0
        lengths.append(tr.length)
        f = tr.best.objective
    return tr, lengths


def test_success_doubling_clipped():
    cfg = scbo.SCBOConfig(dim=10, batch_size=4)
    tr, lengths = scripted(cfg, 0.8, [True] * 3)
    assert lengths == [0.8, 0.8, 1.6]
    tr, lengths = scripted(cfg, 1.2, [True] * 3)
    assert lengths[-1] == 1.6


def test_failure_halving():
    cfg = scbo.SCBOConfig(dim=10, batch_size=4)
    assert cfg.failure_tol == 3
    tr, lengths = scripted(cfg, 0.1, [False] * 3)
    assert lengths == [0.1, 0.1, 0.05]
    # a success resets the failure counter
    tr, lengths = scripted(cfg, 0.1, [False, False, True, False, False])
    assert lengths[-1] == 0.1


def test_restart_below_minimum():
    cfg = scbo.SCBOConfig(dim=10, batch_size=4)
    tr = scbo.TrustRegionState(np.full(2, 0.5), 1.6, best=rec(-1, 0.0))
    n = 0
    while not tr.restart_pending:
        scbo.update_region(tr, [rec(n, 1.0)], cfg)
        n += 1
        assert tr.restart_pending or cfg.L_min <= tr.length <= cfg.L_max
    assert tr.length < cfg.L_min
    assert n == 8 * cfg.failure_tol


def test_tiny_improvement_is_not_a_success():
    cfg = scbo.SCBOConfig(dim=10)
    tr = scbo.TrustRegionState(np.full(2, 0.5), 0.8, best=rec(-1, 1.0))
    scbo.update_region(tr, [rec(0, 1.0 - 1e-6)], cfg)
    assert tr.failure_count == 1
    assert tr.best.objective == 1.0 - 1e-6


def test_candidates_inside_region():
    rng = np.random.default_rng(0)
    tr = scbo.TrustRegionState(np.array([0.9, 0.1, 0.5, 0.5]), 0.4)
    w = scbo.region_weights([0.1, 0.2, 0.4, 0.8])
    assert np.prod(w) == pytest.approx(1.0)
    X = scbo.candidate_set(tr, 500, rng, w)
    lb, ub = tr.bounds(w)
    assert np.all(X >= lb - 1e-15) and np.all(X <= ub + 1e-15)
    assert np.all((X >= 0) & (X <= 1))


def test_propose_batch_distinct_and_contained():
    rng = np.random.default_rng(1)
    X = rng.random((30, 3))
    y = np.sum((X - 0.3) ** 2, 1)
    c = np.sum(X, 1) - 1.5
    models = [gp.fit(X, y), gp.fit(X, c)]
    cfg = scbo.SCBOConfig(dim=3, batch_size=4, n_candidates=300)
    tr = scbo.TrustRegionState(X[np.argmin(y)], 0.5)
    B = scbo.propose_batch(models, tr, cfg, seed=0)
    assert B.shape == (4, 3)
    assert len({tuple(b) for b in B}) == 4
    lb, ub = tr.bounds(scbo.region_weights(models[0].lengthscales))
    assert np.all(B >= lb - 1e-15) and np.all(B <= ub + 1e-15)
    assert np.array_equal(B, scbo.propose_batch(models, tr, cfg, seed=0))


def quad1d():
    return scbo.Problem.from_callables(1, lambda x: float((x[0] - 0.37) ** 2))


def test_one_dimensional_quadratic():
    cfg = scbo.SCBOConfig(dim=1, budget=60)
    res = scbo.run(quad1d(), cfg, seed=0)
    assert len(res.records) == 60
    assert abs(res.best.x[0] - 0.37) < 1e-2


def test_determinism_and_trace(tmp_path):
    def fn(x):
        return float(np.sum((x - 0.6) ** 2)), [float(np.sum(x) - 1.0)]
    prob = scbo.Problem(3, fn, 1)
    cfg = scbo.SCBOConfig(dim=3, budget=40, n_candidates=200)
    a = scbo.run(prob, cfg, seed=5)
    b = scbo.run(prob, cfg, seed=5)
    scbo.write_artifacts(tmp_path / "a", a)
    scbo.write_artifacts(tmp_path / "b", b)
    assert (tmp_path / "a/history.csv").read_bytes() == (tmp_path / "b/history.csv").read_bytes()
    t = a.trace
    assert np.all(np.diff(t[np.isfinite(t)]) <= 0)
    # the incumbent is re-derivable from the history
    assert a.best is scbo.incumbent(a.records)
    header = (tmp_path / "a/history.csv").read_text().splitlines()[0]
    assert header == "eval,x0,x1,x2,objective,c0,feasible,best_so_far"


def test_failures_are_penalized_not_retried():
    calls = []

    def fn(x):
        calls.append(1)
        if x[0] > 0.8:
            raise RuntimeError("singular")
        return float(x[0]), []
    res = scbo.run(scbo.Problem(1, fn), scbo.SCBOConfig(dim=1, budget=20), seed=0)
    assert len(calls) == 20
    failed = [r for r in res.records if r.failed]
    assert all(r.objective == scbo.FAILURE_VALUE for r in failed)
    assert not res.best.failed


def test_restart_happens_on_flat_problem():
    cfg = scbo.SCBOConfig(dim=2, budget=200, n_candidates=100)
    res = scbo.run(scbo.Problem(2, lambda x: (float(np.floor(4 * x[0])), [])), cfg, seed=0)
    assert res.n_restarts >= 1
    assert res.best.objective == 0.0


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        scbo.run(quad1d(), scbo.SCBOConfig(dim=2, budget=5), seed=0)
