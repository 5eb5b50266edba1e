"""Differentiable models with closed-form gradients.

All models evaluate on a batch: ``theta`` has shape (p,), ``X`` has shape
(m, n) with entries in {-1, +1} (any reals are accepted), and ``gradient``
returns an (m, p) array of d f_theta(x_i) / d theta.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ParameterError


def sigma(z):
    """Piecewise-quadratic sigmoid: 0, 2z^2, 4z - 2z^2 - 1, 1 on (-inf,0), [0,1/2], [1/2,1], (1,inf)."""
    z = np.asarray(z, dtype=float)
    zc = np.clip(z, 0.0, 1.0)
    return np.where(zc <= 0.5, 2.0 * zc * zc, 4.0 * zc - 2.0 * zc * zc - 1.0)


def sigma_prime(z):
    z = np.asarray(z, dtype=float)
    zc = np.clip(z, 0.0, 1.0)
    return np.where(zc <= 0.5, 4.0 * zc, 4.0 - 4.0 * zc)


def _check_window(a, b):
    if not a < b:
        raise ParameterError(f"window needs a < b, got a={a}, b={b}")


def sigma_window(a, b, c, d, z):
    """c + sigma((z - a) / (b - a)) * (d - c): equals c below a and d above b."""
    _check_window(a, b)
    return c + sigma((np.asarray(z, dtype=float) - a) / (b - a)) * (d - c)


def sigma_window_prime(a, b, c, d, z):
    _check_window(a, b)
    return sigma_prime((np.asarray(z, dtype=float) - a) / (b - a)) * (d - c) / (b - a)


def xi(z, n: int):
    """Soft sign: 0 on |z_i| <= 2/n, +-1 on |z_i| >= 3/n."""
    nz = n * np.asarray(z, dtype=float)
    return sigma(nz - 2.0) - sigma(-nz - 2.0)


def xi_prime(z, n: int):
    nz = n * np.asarray(z, dtype=float)
    return n * (sigma_prime(nz - 2.0) + sigma_prime(-nz - 2.0))


def gate_S(s):
    """1 - prod(1 - s_i^2); the indicator of s != 0 on {-1,0,1}^n."""
    s = np.asarray(s, dtype=float)
    return 1.0 - np.prod(1.0 - s * s, axis=-1)


def product_H(s):
    """prod(1 + s_i - s_i^2); the product of the nonzero entries on {-1,0,1}^n."""
    s = np.asarray(s, dtype=float)
    return np.prod(1.0 + s - s * s, axis=-1)


def _leave_one_out_prod(a: np.ndarray) -> np.ndarray:
    """out[..., j] = prod_{i != j} a[..., i], without division."""
    ones = np.ones(a.shape[:-1] + (1,))
    left = np.cumprod(np.concatenate([ones, a[..., :-1]], axis=-1), axis=-1)
    right = np.cumprod(np.concatenate([ones, a[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return left * right


class DifferentiableModel:
    """Base class: subclasses implement ``value_and_grad``."""

    p: int
    n: int
    scale_bound: float | None = None
    theta0: np.ndarray

    def value_and_grad(self, theta, X) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def value(self, theta, X) -> np.ndarray:
        return self.value_and_grad(theta, X)[0]

    def gradient(self, theta, X) -> np.ndarray:
        return self.value_and_grad(theta, X)[1]

    def weighted_gradient(self, theta, X, coef) -> np.ndarray:
        """sum_i coef_i * grad f_theta(x_i)."""
        return np.asarray(coef, dtype=float) @ self.gradient(theta, X)

    def _prep(self, theta, X):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.p,):
            raise ParameterError(f"theta has shape {theta.shape}, expected ({self.p},)")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n:
            raise ParameterError(f"inputs have {X.shape[1]} coords, expected {self.n}")
        return theta, X


class SelectedParityModel(DifferentiableModel):
    """sigma_{-1,1}^{-1,1}(L + G) with L = <theta, x + offset*1> and
    G = S(xi(theta o x)) * (H(xi(theta o x)) - L), optionally plus the bias
    term sigma_{0,2/n}^{-1,0}(<theta, 1>).

    In the parity regime (every theta_i in the small window or in [3/n, 5/n],
    at least one in the latter) the value is the parity of the coordinates
    with theta_i >= 3/n.
    """

    def __init__(self, n: int, offset: float = 0.0, bias_term: bool = False):
        if n < 2:
            raise ParameterError(f"need n >= 2, got {n}")
        self.n = self.p = n
        self.offset = float(offset)
        self.bias_term = bias_term
        self.theta0 = np.zeros(n)

    def value_and_grad(self, theta, X):
        theta, X = self._prep(theta, X)
        n = self.n
        z = X * theta
        s = xi(z, n)
        ds = xi_prime(z, n)
        q = 1.0 - s * s
        r = 1.0 + s - s * s
        S = 1.0 - np.prod(q, axis=1)
        H = np.prod(r, axis=1)
        dS = 2.0 * s * _leave_one_out_prod(q)
        dH = (1.0 - 2.0 * s) * _leave_one_out_prod(r)
        shifted = X + self.offset
        L = shifted @ theta
        u = L + S * (H - L)
        t = 0.5 * (u + 1.0)
        f = -1.0 + 2.0 * sigma(t)
        du = shifted * (1.0 - S)[:, None] + X * ds * ((H - L)[:, None] * dS + S[:, None] * dH)
        grad = sigma_prime(t)[:, None] * du
        if self.bias_term:
            v = theta.sum()
            f = f + sigma_window(0.0, 2.0 / n, -1.0, 0.0, v)
            grad = grad + sigma_window_prime(0.0, 2.0 / n, -1.0, 0.0, v)
        return f, grad

    def in_regime(self, theta) -> bool:
        """Whether theta lies in the documented regime covered by ``scale_bound``."""
        theta = np.asarray(theta, dtype=float)
        n = self.n
        lo = 0.0 if self.bias_term else -2.0 / n
        ok = np.all(((theta >= lo) & (theta <= 2.0 / n)) | ((theta >= 3.0 / n) & (theta <= 5.0 / n)))
        if self.bias_term:
            ok = ok and (np.all(theta == 0) or theta.sum() >= 2.0 / n)
        return bool(ok)


def model_bsp(n: int) -> SelectedParityModel:
    """Model for biased sparse parities: f_0 = 0 and grad f_0(x) = 2x.

    scale_bound = sqrt(1 + 4n) <= sqrt(5) * n, valid on the regime
    theta in ([-2/n, 2/n] u [3/n, 5/n])^n.
    """
    m = SelectedParityModel(n)
    m.scale_bound = math.sqrt(1.0 + 4.0 * n)
    return m


def model_lp(n: int, alpha: float) -> SelectedParityModel:
    """Model for leaky parities: f_0 = -1 and grad f_0(x) = 2(x + 5/3 alpha 1).

    scale_bound = sqrt(1 + 4n(1 + 5 alpha/3)^2) <= 5.7 n, valid on
    theta in ([0, 2/n] u [3/n, 5/n])^n with theta = 0 or <theta, 1> >= 2/n.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    m = SelectedParityModel(n, offset=5.0 * alpha / 3.0, bias_term=True)
    m.alpha = alpha
    m.scale_bound = math.sqrt(1.0 + 4.0 * n * (1.0 + 5.0 * alpha / 3.0) ** 2)
    return m


class ReluMLP(DifferentiableModel):
    """f(x) = sum_j a_j relu(<w_j, x> + b_j) + c.

    Parameters are packed as [W.ravel(), b, a, c]. The derivative of relu
    at 0 is taken to be 0. There is no finite scale bound.
    """

    def __init__(self, n: int, width: int, seed: int = 0):
        if width < 1:
            raise ParameterError(f"width must be >= 1, got {width}")
        self.n, self.width = n, width
        self.p = width * n + 2 * width + 1
        self.theta0 = self.init_params(seed)

    def init_params(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        W = rng.normal(0.0, 1.0 / math.sqrt(self.n), size=(self.width, self.n))
        a = rng.normal(0.0, 1.0 / math.sqrt(self.width), size=self.width)
        return self.pack(W, np.zeros(self.width), a, 0.0)

    def pack(self, W, b, a, c) -> np.ndarray:
        return np.concatenate([np.ravel(W), b, a, [c]]).astype(float)

    def unpack(self, theta):
        w, n = self.width, self.n
        W = theta[: w * n].reshape(w, n)
        b = theta[w * n: w * n + w]
        a = theta[w * n + w: w * n + 2 * w]
        return W, b, a, theta[-1]

    def value(self, theta, X):
        theta, X = self._prep(theta, X)
        W, b, a, c = self.unpack(theta)
        return np.maximum(X @ W.T + b, 0.0) @ a + c

    def value_and_grad(self, theta, X):
        theta, X = self._prep(theta, X)
        W, b, a, c = self.unpack(theta)
        h = X @ W.T + b
        act = np.maximum(h, 0.0)
        gate = (h > 0).astype(float) * a
        m = X.shape[0]
        grad = np.concatenate([
            (gate[:, :, None] * X[:, None, :]).reshape(m, -1),
            gate,
            act,
            np.ones((m, 1)),
        ], axis=1)
        return act @ a + c, grad

    def weighted_gradient(self, theta, X, coef):
        theta, X = self._prep(theta, X)
        coef = np.asarray(coef, dtype=float)
        W, b, a, c = self.unpack(theta)
        h = X @ W.T + b
        act = np.maximum(h, 0.0)
        gate = (h > 0).astype(float) * a * coef[:, None]
        return self.pack(gate.T @ X, gate.sum(axis=0), coef @ act, coef.sum())

    def pre_activations(self, theta, X) -> np.ndarray:
        theta, X = self._prep(theta, X)
        W, b, _, _ = self.unpack(theta)
        return X @ W.T + b


def relu_mlp(n: int, width: int, seed: int = 0) -> ReluMLP:
    return ReluMLP(n, width, seed)
