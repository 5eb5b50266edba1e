"""Tangent features, best predictors in kernel norm balls, and the
constructive witnesses for tangent-kernel edges.

A kernel is handled through an explicit feature map phi; the ball of radius
B is {x -> <w, phi(x)> : ||w|| * R <= B} with R = max ||phi(x)|| over the
support of the measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DivergenceError, ParameterError
from .gd import (STRATEGIES, GDConfig, LossFunction, population_gradient, predictor_loss,
                 run_gd, square_loss)
from .models import DifferentiableModel
from .problems import FiniteMeasure, fsum_columns

RIDGE_TOL = 1e-10
BISECT_MAX_ITER = 400


@dataclass
class TangentFeatureMap:
    """phi(x) = [f_theta(x), grad f_theta(x)]; the value coordinate is dropped
    when ``unbiased`` is set."""

    model: DifferentiableModel
    theta: np.ndarray
    unbiased: bool = False

    @property
    def dim(self) -> int:
        return self.model.p + (0 if self.unbiased else 1)

    def __call__(self, X) -> np.ndarray:
        f, G = self.model.value_and_grad(self.theta, X)
        return G if self.unbiased else np.column_stack([f, G])

    def radius(self, mu: FiniteMeasure) -> float:
        return feature_radius(self(mu.points), mu)

    def kernel(self, X1, X2) -> np.ndarray:
        return self(X1) @ self(X2).T


def feature_radius(Phi: np.ndarray, mu: FiniteMeasure) -> float:
    support = mu.weights > 0
    if not np.any(support):
        return 0.0
    return float(np.sqrt(np.max(np.sum(Phi[support] ** 2, axis=1))))


def ntk_eval(model: DifferentiableModel, theta, x, x2, unbiased: bool = False) -> float:
    phi = TangentFeatureMap(model, np.asarray(theta, dtype=float), unbiased)
    a = phi(np.atleast_2d(x))[0]
    b = phi(np.atleast_2d(x2))[0]
    return float(a @ b)


@dataclass
class NormBallPredictor:
    coefficients: np.ndarray
    bound: float
    radius: float
    loss: float
    edge: float
    ridge: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))


class BallSolver:
    """Square-loss minimizer over {w : ||w|| <= rho} for a fixed feature
    matrix and input marginal; factorizes the second-moment matrix once so
    many label vectors can share it."""

    def __init__(self, Phi: np.ndarray, weights: np.ndarray):
        self.Phi = np.asarray(Phi, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        M = self.Phi.T @ (self.weights[:, None] * self.Phi)
        M = 0.5 * (M + M.T)
        evals, self.Q = np.linalg.eigh(M)
        top = max(float(evals[-1]), 0.0) if len(evals) else 0.0
        self.evals = np.where(evals > top * len(evals) * 1e-13, evals, 0.0)

    def correlation(self, label_mean: np.ndarray) -> np.ndarray:
        """E[y phi(x)]."""
        return fsum_columns((self.weights * label_mean)[:, None] * self.Phi)

    def solve(self, b: np.ndarray, rho: float) -> tuple[np.ndarray, float]:
        """Return (w, ridge) minimizing w'Mw/2 - w'b subject to ||w|| <= rho."""
        d = len(b)
        if d == 0 or rho <= 0:
            return np.zeros(d), math.inf
        c = self.Q.T @ b
        pos = self.evals > 0
        c = np.where(pos, c, 0.0)  # b lies in range(M); drop rounding noise
        coef = np.zeros(d)
        coef[pos] = c[pos] / self.evals[pos]
        if np.linalg.norm(coef) <= rho:
            return self.Q @ coef, 0.0

        def norm_at(lam):
            return float(np.linalg.norm(c / (self.evals + lam)))

        lo, hi = 0.0, float(np.linalg.norm(c)) / rho
        while norm_at(hi) > rho:
            hi *= 2.0
        for _ in range(BISECT_MAX_ITER):
            mid = 0.5 * (lo + hi)
            if norm_at(mid) > rho:
                lo = mid
            else:
                hi = mid
            if rho - norm_at(hi) <= RIDGE_TOL * max(rho, 1.0) or hi - lo <= 1e-300:
                break
        return self.Q @ (c / (self.evals + hi)), hi


def _feature_matrix(features, mu: FiniteMeasure) -> np.ndarray:
    if isinstance(features, np.ndarray):
        Phi = features
    else:
        Phi = np.asarray(features(mu.points), dtype=float)
    if Phi.ndim == 1:
        Phi = Phi[:, None]
    if Phi.shape[0] != len(mu):
        raise ParameterError("feature matrix must have one row per atom")
    if not np.all(np.isfinite(Phi)):
        raise ParameterError("features must be finite on the support")
    return Phi


def best_in_ball(features, mu: FiniteMeasure, B: float, radius: float | None = None,
                 solver: BallSolver | None = None) -> NormBallPredictor:
    """Best square-loss predictor x -> <w, phi(x)> with ||w|| * R <= B.

    ``features`` is a callable on the point matrix (e.g. a TangentFeatureMap)
    or a precomputed (atoms x d) array. B may be ``math.inf``.
    """
    if B < 0 or math.isnan(B):
        raise ParameterError(f"norm bound must be >= 0, got {B}")
    Phi = _feature_matrix(features, mu)
    R = feature_radius(Phi, mu) if radius is None else radius
    solver = solver or BallSolver(Phi, mu.weights)
    b = solver.correlation(mu.label_mean)
    if R == 0.0:
        w, lam = np.zeros(Phi.shape[1]), 0.0
    else:
        w, lam = solver.solve(b, B / R if math.isfinite(B) else math.inf)
    loss = predictor_loss(Phi @ w, mu)
    return NormBallPredictor(w, B, R, loss, 0.5 - loss, lam)


def linear_parity_edge_closed_form(n: int, k: int, alpha: float) -> float:
    """Edge of the best multiple of Z = sum_{i in I} x_i on a biased sparse parity."""
    if not 2 <= k <= n:
        raise ParameterError(f"need 2 <= k <= n, got n={n}, k={k}")
    ez2 = k + alpha * (k * k - k) / 4.0
    ezy = alpha * k / 2 ** (k - 1)
    return ezy * ezy / (2.0 * ez2)


def thm1_witness(model: DifferentiableModel, theta0, mu: FiniteMeasure,
                 loss: LossFunction = square_loss, tau: float = 0.0, eps: float = 0.0,
                 scale_bound: float | None = None) -> NormBallPredictor:
    """Tangent-kernel predictor improving on f_{theta0}.

    Returns f_{theta0} itself when its loss is already <= eps; otherwise
    h(x) = f_{theta0}(x) + <w, grad f_{theta0}(x)> with w a step of length
    tau / (|l''| C^2) against the population gradient. The guarantee
    L(h) <= max(eps, L(f_{theta0}) - tau^2 / (2 |l''| C^2)) is recorded in
    ``info["target"]``; it is implied whenever ``info["premise"]`` holds
    (||grad L|| >= tau, or L(f_{theta0}) <= eps).
    """
    theta0 = np.asarray(theta0, dtype=float)
    phi = TangentFeatureMap(model, theta0)
    Phi = phi(mu.points)
    R = feature_radius(Phi, mu)
    C = scale_bound if scale_bound is not None else (model.scale_bound or R)
    if C < R * (1 - 1e-12) or C <= 0:
        raise ParameterError(f"scale bound {C} is below the feature radius {R}")
    curv = loss.curvature
    L0 = predictor_loss(Phi[:, 0], mu, loss)
    grad = population_gradient(model, theta0, mu, loss)
    gnorm = float(np.linalg.norm(grad))
    coef = np.zeros(model.p + 1)
    coef[0] = 1.0
    if L0 > eps and tau > 0 and gnorm > 0:
        step = tau / (curv * C * C)
        coef[1:] = -step * grad / gnorm
    L = predictor_loss(Phi @ coef, mu, loss)
    null = predictor_loss(np.zeros(len(mu)), mu, loss)
    B = C + tau / (curv * C)
    info = {
        "target": max(eps, L0 - tau * tau / (2 * curv * C * C)),
        "premise": bool(L0 <= eps or gnorm >= tau),
        "loss_init": L0,
        "grad_norm": gnorm,
        "scale_bound": C,
        "in_ball": bool(np.linalg.norm(coef) * R <= B * (1 + 1e-12)),
    }
    return NormBallPredictor(coef, B, R, L, null - L, info=info)


def zero_label_iterates(model: DifferentiableModel, theta0, eta: float, T: int,
                        mu: FiniteMeasure) -> list[np.ndarray]:
    """GD on the square loss with every label replaced by 0; depends only on
    the input marginal of mu."""
    if not eta > 0:
        raise ParameterError(f"step size must be > 0, got {eta}")
    theta = np.array(theta0, dtype=float)
    out = [theta.copy()]
    for t in range(T):
        f, G = model.value_and_grad(theta, mu.points)
        theta = theta - eta * fsum_columns((mu.weights * f)[:, None] * G)
        if not np.all(np.isfinite(theta)) or np.max(np.abs(theta)) > 1e6:
            raise DivergenceError(f"zero-label iterates diverged at step {t + 1}")
        out.append(theta.copy())
    return out


@dataclass
class TheoremTwoReport:
    iterates: list[np.ndarray]
    label_correlations: list[np.ndarray]
    edges: list[float]
    gamma: float
    gamma_prime: float
    B: float
    scale_bound: float
    precondition: bool
    gd_losses: dict = field(default_factory=dict)

    @property
    def average_edge(self) -> float:
        return float(np.mean(self.edges))

    @property
    def verdict(self) -> str:
        if not self.precondition:
            return "inconclusive"
        return "pass" if self.average_edge > self.gamma_prime else "fail"


def thm2_audit(model: DifferentiableModel, theta0, eta: float, T: int, tau: float,
               mu: FiniteMeasure, gamma: float, B: float | None = None,
               strategies: Sequence[str] = STRATEGIES,
               scale_bound: float | None = None) -> TheoremTwoReport:
    """Average tangent-kernel edge over the zero-label iterates, against
    gamma' = min(gamma / (T+1), tau^2 / (2 C^2)).

    The premise (tau-approximate GD reaches loss <= 1/2 - gamma on mu) is
    checked by running GD under every strategy in ``strategies``.
    """
    gd_losses = {}
    for strat in strategies:
        traj = run_gd(model, theta0, GDConfig(eta, T, tau, strat), mu)
        gd_losses[strat] = traj.losses[-1]
    precondition = all(L <= 0.5 - gamma + 1e-12 for L in gd_losses.values())
    iterates = zero_label_iterates(model, theta0, eta, T, mu)
    maps = [TangentFeatureMap(model, th) for th in iterates]
    radii = [m.radius(mu) for m in maps]
    C = scale_bound if scale_bound is not None else (model.scale_bound or max(radii))
    if C < max(radii) * (1 - 1e-12):
        raise ParameterError(f"scale bound {C} is below a feature radius {max(radii)}")
    gamma_prime = min(gamma / (T + 1), tau * tau / (2 * C * C))
    if B is None:
        B = math.sqrt(2 * gamma_prime) * C
    edges, corr = [], []
    for m, R in zip(maps, radii):
        G = m(mu.points)[:, 1:]
        corr.append(fsum_columns((mu.weights * mu.label_mean)[:, None] * G))
        edges.append(best_in_ball(m, mu, B, radius=R).edge)
    return TheoremTwoReport(iterates, corr, edges, gamma, gamma_prime, B, C, precondition, gd_losses)
