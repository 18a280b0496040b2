import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_instance
from pacbayes_da.bounds import BoundConfig, bound_theorem3, catoni_constants, draw_finite_pair
from pacbayes_da.core import Posterior, VoterMatrix
from pacbayes_da.errors import BoundaryError, ConfigError
from pacbayes_da.estimators import LabeledSample, SamplePair, TablePool, UnlabeledSample, evaluate_voters
from pacbayes_da.learner import (
    LearnerConfig,
    Objective,
    eg_step,
    gradient,
    grid_minimum,
    minimize,
    objective,
    simplex_grid,
    train,
)


def empirical_instance(seed, n=None, npts=6, m=50):
    """Sample pair drawn from a random finite instance, voters evaluated as tables."""
    rng = np.random.default_rng(seed)
    while True:
        s, t, v, _ = random_instance(rng, npts, 5)
        if n is None or v.n == n:
            break
    pair = draw_finite_pair(s, t, m, rng)
    pool = TablePool(v)
    return pair, (evaluate_voters(pair.source.x, pool), evaluate_voters(pair.target.x, pool))


def tiny_pair(m=4):
    # TinyCase realized empirically: x1 labeled +1, x2 labeled -1, each half the rows
    x = np.array([[0.0], [1.0]] * (m // 2))
    y = np.array([1, -1] * (m // 2))
    return SamplePair(LabeledSample(x, y), UnlabeledSample(x.copy()))


def tiny_pool():
    return TablePool(VoterMatrix([[1, 1], [-1, -1]]))


# --------------------------------------------------------------------------
# config


@pytest.mark.parametrize("kw", [{"step_size": 0}, {"max_iters": 0}, {"max_iters": 1.5},
                                {"tolerance": 0}, {"c": -1}, {"m": 0}])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        LearnerConfig(**kw)


def test_default_config():
    cfg = LearnerConfig()
    assert (cfg.step_size, cfg.max_iters, cfg.tolerance) == (0.1, 1000, 1e-8)


# --------------------------------------------------------------------------
# objective


def test_objective_tiny_case():
    pi = Posterior.uniform(2)
    cfg = BoundConfig(c=1, alpha=1, m=4)
    cp, _ = catoni_constants(1, 1)
    assert objective(tiny_pair(), tiny_pool(), pi, pi, cfg) == pytest.approx(cp * 0.5, abs=1e-12)


def test_objective_at_prior_has_no_kl():
    pair, vs = empirical_instance(4)
    pi = Posterior.uniform(vs[0].n)
    cfg = BoundConfig(c=2, alpha=0.5, m=50)
    obj = Objective.from_samples(pair, vs, pi, cfg)
    q = pi.weights @ obj.diff @ pi.weights
    assert obj.value(pi.weights) == pytest.approx(obj.cp * obj.risks.mean() + obj.ap * 0.5 * abs(q), abs=1e-14)


def test_objective_large_m_drops_kl():
    pair, vs = empirical_instance(8)
    n = vs[0].n
    rho = Posterior(np.random.default_rng(1).dirichlet(np.ones(n)))
    pi = Posterior.uniform(n)
    huge = Objective.from_samples(pair, vs, pi, BoundConfig(m=10**12))
    q = rho.weights @ huge.diff @ rho.weights
    risk_only = huge.cp * rho.weights @ huge.risks + huge.ap * 0.5 * abs(q)
    assert huge.value(rho.weights) == pytest.approx(risk_only, abs=1e-10)


def test_objective_matches_report_terms():
    pair, vs = empirical_instance(11, m=50)
    n = vs[0].n
    rho, pi = Posterior(np.random.default_rng(2).dirichlet(np.ones(n))), Posterior.uniform(n)
    cfg = BoundConfig(c=1.5, alpha=0.8, delta=0.1, m=50)
    rep = bound_theorem3(pair, vs, rho, pi, cfg)
    cp, ap = catoni_constants(1.5, 0.8)
    k = cp / 1.5 + ap / 0.8
    rest = rep.terms["lambda_term"] + rep.terms["constant_term"] + k * math.log(3 / 0.1) / 50
    assert objective(pair, vs, rho, pi, cfg) == pytest.approx(rep.rhs - rest, abs=1e-12)


# --------------------------------------------------------------------------
# gradient


def _fd_tangent(obj, w, h=1e-6):
    fd = np.empty_like(w)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = h
        fd[i] = (obj.value(w + e) - obj.value(w - e)) / (2 * h)
    proj = np.eye(w.size) - 1.0 / w.size
    return proj @ fd


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gradient_matches_finite_differences(seed):
    pair, vs = empirical_instance(seed, m=40)
    n = vs[0].n
    rng = np.random.default_rng([seed, 1])
    w = rng.dirichlet(np.ones(n))
    w = 0.9 * w + 0.1 / n  # keep away from the boundary
    pi = Posterior(rng.dirichlet(np.ones(n)) * 0.9 + 0.1 / n)
    obj = Objective.from_samples(pair, vs, pi, BoundConfig(c=1.3, alpha=0.7, m=40))
    q = w @ obj.diff @ w
    if 0 < abs(q) < 1e-5:
        return  # finite differences straddle the kink
    g = obj.gradient(w)
    proj = np.eye(n) - 1.0 / n
    assert np.max(np.abs(proj @ g - _fd_tangent(obj, w))) < 1e-4


def test_gradient_single_voter_tangent_is_zero():
    pair = tiny_pair()
    obj = Objective.from_samples(pair, TablePool(VoterMatrix([[1, -1]])), Posterior([1.0]), BoundConfig())
    g = obj.gradient(np.array([1.0]))
    assert np.allclose(g - g.mean(), 0.0)


def test_gradient_zero_q_has_no_disagreement_term():
    pi = Posterior.uniform(2)
    cfg = BoundConfig(c=1, alpha=1, m=4)
    obj = Objective.from_samples(tiny_pair(), tiny_pool(), pi, cfg)
    assert obj.diff.tolist() == [[0.0, 0.0], [0.0, 0.0]]
    g = gradient(tiny_pair(), tiny_pool(), pi, pi, cfg)
    expected = obj.cp * obj.risks + obj.kl_weight * (np.log(1.0) + 1.0)
    assert np.array_equal(g, expected)


def test_gradient_boundary_error():
    pi = Posterior.uniform(2)
    with pytest.raises(BoundaryError):
        gradient(tiny_pair(), tiny_pool(), Posterior([1.0, 0.0]), pi, BoundConfig())


# --------------------------------------------------------------------------
# exponentiated gradient


def test_eg_step_keeps_support_under_underflow():
    w = eg_step(np.array([0.5, 0.5]), np.array([0.0, 1e6]), 1.0)
    assert w[1] > 0 and abs(w.sum() - 1) < 1e-15


def test_eg_step_zero_gradient_is_identity():
    w = np.array([0.2, 0.3, 0.5])
    assert np.allclose(eg_step(w, np.zeros(3), 0.7), w, atol=1e-15)


# --------------------------------------------------------------------------
# training


def test_single_voter_trains_in_one_iteration():
    res = train(tiny_pair(), TablePool(VoterMatrix([[1, -1]])), Posterior([1.0]), LearnerConfig(m=4))
    assert res.iterations == 1
    assert res.posterior.weights.tolist() == [1.0]
    assert res.stop_reason == "tolerance"


def test_kl_dominant_stays_at_prior():
    pair, vs = empirical_instance(21, n=3, m=1)
    pi = Posterior([0.5, 0.3, 0.2])
    cfg = LearnerConfig(c=1e-3, alpha=1e-3, m=1)
    res = train(pair, vs, pi, cfg)
    assert 0.5 * np.abs(res.posterior.weights - pi.weights).sum() < 1e-3
    # the grid oracle agrees that the optimum sits at pi (up to its resolution)
    _, best = grid_minimum(Objective.from_samples(pair, vs, pi, cfg.bound_config()), 0.01)
    assert 0.5 * np.abs(best - pi.weights).sum() <= 0.01


def _perfect_voter_pair(m=100):
    rng = np.random.default_rng(3)
    pts = rng.integers(0, 4, m)
    y = np.where(pts < 2, 1, -1)
    x = pts.astype(np.float64)[:, None]
    # voter 0 is source-perfect; voters 1 and 2 are wrong half the time
    table = VoterMatrix([[1, 1, -1, -1], [1, -1, 1, -1], [-1, 1, -1, 1]])
    # target reuses the source marginal so the disagreement term is 0 for every rho
    return SamplePair(LabeledSample(x, y), UnlabeledSample(x.copy())), TablePool(table)


def test_source_perfect_voter_wins_with_large_c():
    pair, pool = _perfect_voter_pair()
    pi = Posterior.uniform(3)
    cfg = LearnerConfig(c=10, alpha=1, m=100)
    res = train(pair, pool, pi, cfg)
    assert res.posterior.weights[0] > 0.9
    _, best = grid_minimum(Objective.from_samples(pair, pool, pi, cfg.bound_config()), 0.01)
    assert best[0] > 0.9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_trace_non_increasing_and_iterates_valid(seed):
    pair, vs = empirical_instance(seed, m=30)
    n = vs[0].n
    pi = Posterior(np.random.default_rng([seed, 5]).dirichlet(np.ones(n)) * 0.95 + 0.05 / n)
    cfg = LearnerConfig(c=2, alpha=1, m=30, max_iters=200)
    obj = Objective.from_samples(pair, vs, pi, cfg.bound_config())
    seen = []
    w, trace, iters, reason = minimize(obj, pi.weights, cfg, callback=lambda w: seen.append(w.copy()))
    assert len(seen) == len(trace) - 1
    for it in seen:
        assert np.all(it > 0)
        assert abs(it.sum() - 1) < 1e-9
    assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))
    assert reason in ("tolerance", "max_iters", "no_descent")
    assert trace[-1] == pytest.approx(obj.value(w), abs=1e-15)


def test_training_rejects_boundary_prior():
    with pytest.raises(BoundaryError):
        train(tiny_pair(), tiny_pool(), Posterior([1.0, 0.0]), LearnerConfig(m=4))


def test_train_report_is_sample_bound_at_learned_posterior():
    pair, vs = empirical_instance(17, n=3, m=50)
    pi = Posterior.uniform(3)
    cfg = LearnerConfig(c=1, alpha=1, m=50, lambda_value=0.02)
    res = train(pair, vs, pi, cfg)
    again = bound_theorem3(pair, vs, res.posterior, pi, cfg.bound_config())
    assert res.report.terms == again.terms
    assert res.report.config["step_size"] == 0.1
    payload = json.loads(res.to_json())
    assert payload["objective_trace"] == res.trace
    assert payload["iterations"] == res.iterations


def test_train_is_deterministic():
    pair, vs = empirical_instance(23, m=40)
    pi = Posterior.uniform(vs[0].n)
    cfg = LearnerConfig(m=40)
    assert train(pair, vs, pi, cfg).to_json() == train(pair, vs, pi, cfg).to_json()


# --------------------------------------------------------------------------
# grid oracle


def test_simplex_grid_shapes():
    assert simplex_grid(1).shape == (1, 1)
    assert simplex_grid(2, 0.1).shape == (11, 2)
    g = simplex_grid(3, 0.01)
    assert g.shape == (5151, 3)
    assert np.allclose(g.sum(axis=1), 1.0)
    with pytest.raises(ValueError):
        simplex_grid(4)


@pytest.mark.parametrize("i", [0, 4, 17, 44])
def test_learner_matches_grid_oracle(i):
    # 4, 17 and 44 trap a run started at pi on the q = 0 ridge
    pair, vs = empirical_instance([99, i], n=3, m=50)
    pi = Posterior.uniform(3)
    cfg = LearnerConfig(m=50)
    res = train(pair, vs, pi, cfg)
    best, _ = grid_minimum(Objective.from_samples(pair, vs, pi, cfg.bound_config()), 0.01)
    assert res.trace[-1] <= best + 1e-2


def test_prior_start_alone_can_stall_on_the_ridge():
    pair, vs = empirical_instance([99, 4], n=3, m=50)
    pi = Posterior.uniform(3)
    single = train(pair, vs, pi, LearnerConfig(m=50, multistart=False))
    multi = train(pair, vs, pi, LearnerConfig(m=50))
    assert [s["start"] for s in single.extras["starts"]] == ["prior"]
    assert len(multi.extras["starts"]) == 4
    assert multi.trace[-1] < single.trace[-1] - 1e-2


def test_multistart_skipped_for_large_pools():
    pair, vs = empirical_instance(5, m=20)
    big = (VoterMatrix(np.tile(vs[0].table, (9, 1))), VoterMatrix(np.tile(vs[1].table, (9, 1))))
    res = train(pair, big, Posterior.uniform(big[0].n), LearnerConfig(m=20, max_iters=5))
    assert [s["start"] for s in res.extras["starts"]] == ["prior"]
