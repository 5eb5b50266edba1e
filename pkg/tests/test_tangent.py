import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from ntksep.errors import ParameterError
from ntksep.gd import predictor_loss
from ntksep.models import model_bsp, model_lp, relu_mlp
from ntksep.problems import FiniteMeasure, all_points, enumerate_bsp, enumerate_lp
from ntksep.tangent import (BallSolver, TangentFeatureMap, best_in_ball, linear_parity_edge_closed_form,
                            ntk_eval, thm1_witness, thm2_audit, zero_label_iterates)


def random_measure(n, rng):
    w = rng.dirichlet(np.ones(2 ** n))
    return FiniteMeasure(np.arange(2 ** n), w, rng.uniform(0, 1, 2 ** n), n)


def atoms_list(mu):
    return list(zip(mu.weights, mu.p_plus))


problem = st.tuples(st.integers(0, 10_000), st.integers(2, 4), st.integers(1, 6),
                    st.floats(0.01, 20.0))


@given(problem)
def test_ball_solver_matches_oracle(args):
    seed, n, d, B = args
    rng = np.random.default_rng(seed)
    mu = random_measure(n, rng)
    Phi = rng.standard_normal((2 ** n, d))
    pred = best_in_ball(Phi, mu, B)
    R = np.sqrt(np.max(np.sum(Phi ** 2, axis=1)))
    w_ref = oracles.ball_least_squares(Phi, mu.weights, mu.label_mean, B / R)
    ref = oracles.edge_of(Phi, w_ref, atoms_list(mu))
    assert pred.edge == pytest.approx(ref, abs=1e-9)
    assert pred.norm * R <= B * (1 + 1e-9)


@given(problem, st.integers(0, 100))
def test_ball_solver_optimal_against_feasible_points(args, probe_seed):
    seed, n, d, B = args
    rng = np.random.default_rng(seed)
    mu = random_measure(n, rng)
    Phi = rng.standard_normal((2 ** n, d))
    pred = best_in_ball(Phi, mu, B)
    R = pred.radius
    prng = np.random.default_rng(probe_seed)
    for _ in range(20):
        v = prng.standard_normal(d)
        v *= prng.uniform(0, 1) * (B / R) / np.linalg.norm(v)
        assert oracles.edge_of(Phi, v, atoms_list(mu)) <= pred.edge + 1e-10


@given(st.integers(0, 10_000))
def test_edge_monotone_in_bound(seed):
    rng = np.random.default_rng(seed)
    mu = random_measure(3, rng)
    Phi = rng.standard_normal((8, 4))
    solver = BallSolver(Phi, mu.weights)
    edges = [best_in_ball(Phi, mu, B, solver=solver).edge for B in (0.0, 0.1, 0.5, 2.0, 10.0, math.inf)]
    assert edges[0] == pytest.approx(0.0, abs=1e-15)
    assert all(a <= b + 1e-12 for a, b in zip(edges, edges[1:]))


@given(st.integers(0, 10_000), st.floats(0.05, 10.0))
def test_edge_invariant_under_rotation(seed, B):
    rng = np.random.default_rng(seed)
    mu = random_measure(3, rng)
    Phi = rng.standard_normal((8, 5))
    U, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    assert best_in_ball(Phi @ U, mu, B).edge == pytest.approx(best_in_ball(Phi, mu, B).edge, abs=1e-9)


def test_bound_validation():
    mu = enumerate_bsp(3, 2, (0, 1), 0.2)
    with pytest.raises(ParameterError):
        best_in_ball(np.ones((8, 1)), mu, -1.0)
    with pytest.raises(ParameterError):
        best_in_ball(np.ones((8, 1)), mu, math.nan)
    with pytest.raises(ParameterError):
        best_in_ball(np.ones((3, 1)), mu, 1.0)


@pytest.mark.parametrize("n,k,alpha", [(4, 2, 0.5), (6, 3, 0.1), (10, 5, 0.9), (7, 7, 0.3)])
def test_linear_parity_edge_closed_form(n, k, alpha):
    closed = linear_parity_edge_closed_form(n, k, alpha)
    assert closed == pytest.approx(oracles.linear_parity_edge(k, alpha), rel=1e-12)
    mu = enumerate_bsp(n, k, tuple(range(k)), alpha)
    Z = mu.points[:, :k].sum(axis=1)
    assert best_in_ball(Z, mu, math.inf).edge == pytest.approx(closed, rel=1e-9)


def test_linear_parity_edge_known_value():
    assert linear_parity_edge_closed_form(4, 2, 0.5) == pytest.approx(1 / 18, rel=1e-14)


def test_ntk_at_zero_for_bsp():
    n = 5
    X = all_points(n).astype(float)
    K = TangentFeatureMap(model_bsp(n), np.zeros(n)).kernel(X, X)
    assert np.allclose(K, 4 * X @ X.T)
    assert ntk_eval(model_bsp(n), np.zeros(n), X[3], X[7], unbiased=True) == pytest.approx(4 * X[3] @ X[7])


def test_ntk_edge_of_bsp_at_zero_is_linear_parity_edge():
    n, k, alpha = 6, 3, 0.4
    mu = enumerate_bsp(n, k, (1, 3, 4), alpha)
    pred = best_in_ball(TangentFeatureMap(model_bsp(n), np.zeros(n), unbiased=True), mu, math.inf)
    assert pred.edge == pytest.approx(oracles.linear_parity_edge(k, alpha), rel=1e-9)


@pytest.mark.parametrize("alpha", [0.05, 0.2])
def test_ntk_edge_zero_on_leaky_parity(alpha):
    n = 5
    mu = enumerate_lp(n, (0, 2, 3), alpha)
    for B in (0.1, 1.0, math.inf):
        assert abs(best_in_ball(TangentFeatureMap(model_lp(n, alpha), np.zeros(n)), mu, B).edge) <= 1e-12


@pytest.mark.parametrize("model_kind", ["lp", "relu"])
def test_thm1_witness_meets_target(model_kind):
    n, alpha = 4, 0.2
    mu = enumerate_lp(n, (0, 1), alpha)
    if model_kind == "lp":
        model, theta = model_lp(n, alpha), np.zeros(n)
    else:
        model = relu_mlp(n, 6, 1)
        theta = model.theta0
    probe = thm1_witness(model, theta, mu)
    tau = 0.5 * probe.info["grad_norm"]
    w = thm1_witness(model, theta, mu, tau=tau)
    assert w.info["premise"] and w.info["in_ball"]
    assert w.loss <= w.info["target"] + 1e-12
    assert w.loss < w.info["loss_init"]
    assert w.bound == pytest.approx(w.info["scale_bound"] + tau / w.info["scale_bound"])


def test_thm1_witness_returns_init_below_eps():
    mu = enumerate_lp(3, (0, 1), 0.2)
    w = thm1_witness(model_lp(3, 0.2), np.zeros(3), mu, tau=0.1, eps=10.0)
    assert np.array_equal(w.coefficients[1:], np.zeros(3))
    assert w.loss == pytest.approx(w.info["loss_init"])


def test_thm1_witness_rejects_small_scale_bound():
    mu = enumerate_lp(3, (0, 1), 0.2)
    with pytest.raises(ParameterError):
        thm1_witness(model_lp(3, 0.2), np.zeros(3), mu, tau=0.1, scale_bound=0.5)


@pytest.mark.parametrize("n", [3, 6, 9])
def test_zero_label_first_iterate_on_leaky_parity(n):
    alpha = 0.1
    I = (0, 1)
    mu = enumerate_lp(n, I, alpha)
    it = zero_label_iterates(model_lp(n, alpha), np.zeros(n), 3 / (4 * alpha * n), 1, mu)
    expected = np.where(np.isin(np.arange(n), I), 4 / n, 1 / n)
    assert np.allclose(it[1], expected, atol=1e-14)


def test_zero_label_iterates_ignore_labels():
    mu = enumerate_bsp(4, 2, (0, 1), 0.3)
    m = relu_mlp(4, 5, 0)
    a = zero_label_iterates(m, m.theta0, 0.1, 3, mu)
    b = zero_label_iterates(m, m.theta0, 0.1, 3, mu.marginal())
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    with pytest.raises(ParameterError):
        zero_label_iterates(m, m.theta0, 0.0, 1, mu)


def test_thm2_audit_passes_on_leaky_parity():
    n, alpha = 4, 0.1
    mu = enumerate_lp(n, (0, 1, 2), alpha)
    rep = thm2_audit(model_lp(n, alpha), np.zeros(n), 3 / (4 * alpha * n), 1, 4 * alpha / 3, mu, 0.5 - alpha)
    assert rep.precondition and rep.verdict == "pass"
    assert rep.gamma_prime == pytest.approx(min((0.5 - alpha) / 2, (4 * alpha / 3) ** 2 / (2 * rep.scale_bound ** 2)))
    assert len(rep.edges) == 2


def test_thm2_audit_inconclusive_without_precondition():
    n, alpha = 4, 0.1
    mu = enumerate_lp(n, (0, 1, 2), alpha)
    rep = thm2_audit(model_lp(n, alpha), np.zeros(n), 3 / (4 * alpha * n), 1, 4 * alpha / 3, mu, 0.45)
    assert not rep.precondition and rep.verdict == "inconclusive"


def test_thm2_edges_use_label_correlation():
    n, alpha = 4, 0.1
    mu = enumerate_lp(n, (0, 1, 2), alpha)
    rep = thm2_audit(model_lp(n, alpha), np.zeros(n), 3 / (4 * alpha * n), 1, 4 * alpha / 3, mu, 0.5 - alpha)
    # the initial predictor is constant -1 and gradients are uncorrelated with labels there
    assert np.allclose(rep.label_correlations[0], 0, atol=1e-15)
    assert predictor_loss(np.zeros(len(mu)), mu) == pytest.approx(0.5)
