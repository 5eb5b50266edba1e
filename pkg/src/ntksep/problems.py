"""Exact finite measures over {-1,+1}^n x {-1,+1}.

A point x is stored as an n-bit integer code; bit i set means x_i = +1.
Coordinates are 0-based throughout. Every measure keeps one atom per
distinct point together with P(y = +1 | x), so population expectations are
single passes over the atoms.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import CapacityError, DimensionMismatchError, ParameterError

MAX_ENUMERATION_DIM = 24
WEIGHT_TOL = 1e-12

# P(x_i = +1) under the biased product component, so that E[x_i] = 1/2
BIASED_P_PLUS = 0.75


def fsum_columns(values: np.ndarray) -> np.ndarray:
    """Exactly-rounded column sums of a 1-D or 2-D array (order independent)."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        return np.float64(math.fsum(values))
    flat = values.reshape(values.shape[0], -1)
    out = np.array([math.fsum(flat[:, j]) for j in range(flat.shape[1])])
    return out.reshape(values.shape[1:])


def encode(x: Sequence[int]) -> int:
    code = 0
    for i, xi in enumerate(x):
        if xi not in (-1, 1):
            raise ParameterError(f"coordinate {i} is {xi}, expected +-1")
        if xi == 1:
            code |= 1 << i
    return code


def decode(code: int, n: int) -> np.ndarray:
    return np.array([1 if (code >> i) & 1 else -1 for i in range(n)], dtype=np.int8)


def decode_many(codes: np.ndarray, n: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(n)) & 1
    return (2 * bits - 1).astype(np.int8)


def all_points(n: int, cap: int = MAX_ENUMERATION_DIM) -> np.ndarray:
    check_capacity(n, cap)
    return decode_many(np.arange(1 << n), n)


def check_capacity(n: int, cap: int = MAX_ENUMERATION_DIM) -> None:
    if n < 1:
        raise ParameterError(f"dimension must be >= 1, got {n}")
    if n > cap:
        raise CapacityError(f"n={n} exceeds enumeration cap {cap}")


@dataclass(frozen=True)
class HypercubePoint:
    bits: int
    n: int

    @classmethod
    def from_array(cls, x: Sequence[int]) -> "HypercubePoint":
        return cls(encode(x), len(x))

    def to_array(self) -> np.ndarray:
        return decode(self.bits, self.n)


@dataclass(frozen=True)
class SupportSet:
    indices: tuple[int, ...]
    n: int

    def __post_init__(self):
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        if len(idx) != len(self.indices):
            raise ParameterError(f"duplicate indices in {self.indices}")
        for i in idx:
            if not 0 <= i < self.n:
                raise DimensionMismatchError(f"index {i} outside [0, {self.n})")
        object.__setattr__(self, "indices", idx)

    @property
    def k(self) -> int:
        return len(self.indices)

    def mask(self) -> np.ndarray:
        m = np.zeros(self.n, dtype=bool)
        m[list(self.indices)] = True
        return m

    def leak_atom(self) -> np.ndarray:
        """The point x^I with x_i = +1 on the support and -1 elsewhere."""
        return np.where(self.mask(), 1, -1).astype(np.int8)

    def __str__(self) -> str:
        return "{" + ",".join(str(i) for i in self.indices) + "}"


def parity_label(x, support: SupportSet):
    """chi_I(x) for a single point (1-D) or a batch of points (2-D rows)."""
    x = np.asarray(x)
    if x.shape[-1] != support.n:
        raise DimensionMismatchError(f"point has {x.shape[-1]} coords, support expects {support.n}")
    if support.k == 0:
        return np.ones(x.shape[:-1], dtype=np.int8) if x.ndim > 1 else 1
    sub = x[..., list(support.indices)].astype(np.int64)
    out = np.prod(sub, axis=-1)
    return int(out) if x.ndim == 1 else out.astype(np.int8)


@dataclass(frozen=True, eq=False)
class FiniteMeasure:
    """Distribution over (x, y) with atoms (code, weight, P(y=+1 | x))."""

    codes: np.ndarray
    weights: np.ndarray
    p_plus: np.ndarray
    n: int
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int64)
        weights = np.asarray(self.weights, dtype=float)
        p_plus = np.asarray(self.p_plus, dtype=float)
        if not (codes.shape == weights.shape == p_plus.shape) or codes.ndim != 1:
            raise DimensionMismatchError("codes, weights and p_plus must be equal-length vectors")
        if len(np.unique(codes)) != len(codes):
            raise ParameterError("duplicate atoms; merge before constructing")
        if np.any(codes < 0) or np.any(codes >= (1 << self.n)):
            raise DimensionMismatchError("atom code outside the n-cube")
        if np.any(weights < 0):
            raise ParameterError("negative atom weight")
        total = math.fsum(weights)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ParameterError(f"weights sum to {total!r}, not 1")
        if np.any(p_plus < 0) or np.any(p_plus > 1):
            raise ParameterError("p_plus outside [0, 1]")
        for arr in (codes, weights, p_plus):
            arr.setflags(write=False)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "p_plus", p_plus)

    def __len__(self) -> int:
        return len(self.codes)

    @cached_property
    def points(self) -> np.ndarray:
        pts = decode_many(self.codes, self.n)
        pts.setflags(write=False)
        return pts

    @property
    def label_mean(self) -> np.ndarray:
        """E[y | x] per atom."""
        return 2.0 * self.p_plus - 1.0

    def atoms(self) -> Iterable[tuple[HypercubePoint, float, float]]:
        for c, w, p in zip(self.codes, self.weights, self.p_plus):
            yield HypercubePoint(int(c), self.n), float(w), float(p)

    def expect(self, g: Callable[[np.ndarray, int], np.ndarray]) -> float:
        return population_expectation(self, g)

    def expect_x(self, values: np.ndarray) -> np.ndarray:
        """E_x[values] for per-atom values (1-D or 2-D, atoms along axis 0)."""
        values = np.asarray(values, dtype=float)
        w = self.weights.reshape((-1,) + (1,) * (values.ndim - 1))
        return fsum_columns(w * values)

    def marginal(self) -> "FiniteMeasure":
        """Same input marginal with fair-coin labels (p_plus = 1/2, so E[y | x] = 0)."""
        return FiniteMeasure(self.codes, self.weights, np.full(len(self), 0.5), self.n,
                             name=f"{self.name}|x", meta=dict(self.meta))

    def mean_x(self) -> np.ndarray:
        return self.expect_x(self.points)

    def correlation_yx(self) -> np.ndarray:
        return self.expect_x(self.label_mean[:, None] * self.points)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["bits", "weight", "p_plus"])
            for c, w, p in zip(self.codes, self.weights, self.p_plus):
                # coordinate 0 first
                wr.writerow([format(int(c), f"0{self.n}b")[::-1], repr(float(w)), repr(float(p))])

    @classmethod
    def from_csv(cls, path, name: str = "") -> "FiniteMeasure":
        codes, weights, p_plus = [], [], []
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        n = len(rows[0]["bits"])
        for row in rows:
            codes.append(int(row["bits"][::-1], 2))
            weights.append(float(row["weight"]))
            p_plus.append(float(row["p_plus"]))
        return cls(np.array(codes), np.array(weights), np.array(p_plus), n, name=name)


def population_expectation(mu: FiniteMeasure, g: Callable[[np.ndarray, int], np.ndarray]) -> float:
    """E_{(x,y)~mu}[g(x, y)] with g vectorized over rows of the point matrix.

    Terms are formed per atom as weight * (p * g(x,+1) + (1-p) * g(x,-1)) and
    summed with exactly-rounded summation in atom order.
    """
    X = mu.points
    gp = np.broadcast_to(np.asarray(g(X, 1), dtype=float), (len(mu),))
    gm = np.broadcast_to(np.asarray(g(X, -1), dtype=float), (len(mu),))
    terms = mu.weights * (mu.p_plus * gp + (1.0 - mu.p_plus) * gm)
    return float(math.fsum(terms))


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha < 1.0:
        raise ParameterError(f"alpha must lie in [0, 1), got {alpha}")


def enumerate_bsp(n: int, k: int, support: SupportSet | Sequence[int], alpha: float,
                  cap: int = MAX_ENUMERATION_DIM) -> FiniteMeasure:
    """Biased sparse parity: x ~ (1-alpha) U + alpha * Bernoulli(3/4)^n, y = chi_I(x)."""
    check_capacity(n, cap)
    if not isinstance(support, SupportSet):
        support = SupportSet(tuple(support), n)
    if support.n != n:
        raise DimensionMismatchError("support dimension differs from n")
    if not 2 <= k <= n or support.k != k:
        raise ParameterError(f"need 2 <= k <= n and |I| = k, got n={n}, k={k}, |I|={support.k}")
    _check_alpha(alpha)
    codes = np.arange(1 << n, dtype=np.int64)
    X = decode_many(codes, n)
    plus = (X > 0).sum(axis=1)
    biased = BIASED_P_PLUS ** plus * (1.0 - BIASED_P_PLUS) ** (n - plus)
    weights = (1.0 - alpha) * 2.0 ** (-n) + alpha * biased
    labels = parity_label(X, support)
    p_plus = (labels > 0).astype(float)
    return FiniteMeasure(codes, weights, p_plus, n, name=f"bsp[n={n},k={k},a={alpha}]I={support}",
                         meta={"family": "bsp", "support": support, "alpha": alpha, "k": k})


def enumerate_lp(n: int, support: SupportSet | Sequence[int], alpha: float,
                 cap: int = MAX_ENUMERATION_DIM) -> FiniteMeasure:
    """Leaky parity: uniform x with y = chi_I(x), mixed with an alpha-weight atom at x^I
    whose label is a fair coin."""
    check_capacity(n, cap)
    if not isinstance(support, SupportSet):
        support = SupportSet(tuple(support), n)
    if support.n != n:
        raise DimensionMismatchError("support dimension differs from n")
    if support.k < 2:
        raise ParameterError("leaky parity needs |I| >= 2")
    _check_alpha(alpha)
    codes = np.arange(1 << n, dtype=np.int64)
    X = decode_many(codes, n)
    base = (1.0 - alpha) * 2.0 ** (-n)
    weights = np.full(1 << n, base)
    plus_mass = np.where(parity_label(X, support) > 0, base, 0.0)
    leak = encode(support.leak_atom())
    weights[leak] = base + alpha
    plus_mass[leak] += 0.5 * alpha
    p_plus = plus_mass / weights
    return FiniteMeasure(codes, weights, p_plus, n, name=f"lp[n={n},a={alpha}]I={support}",
                         meta={"family": "lp", "support": support, "alpha": alpha})


def bsp_supports(n: int, k: int) -> list[SupportSet]:
    return [SupportSet(c, n) for c in combinations(range(n), k)]


def lp_supports(n: int) -> list[SupportSet]:
    return [SupportSet(c, n) for r in range(2, n + 1) for c in combinations(range(n), r)]


def uniform_parity(n: int, support: SupportSet | Sequence[int],
                   cap: int = MAX_ENUMERATION_DIM) -> FiniteMeasure:
    """Uniform marginal with deterministic parity labels (the orthonormal component)."""
    check_capacity(n, cap)
    if not isinstance(support, SupportSet):
        support = SupportSet(tuple(support), n)
    codes = np.arange(1 << n, dtype=np.int64)
    labels = parity_label(decode_many(codes, n), support)
    return FiniteMeasure(codes, np.full(1 << n, 2.0 ** (-n)), (labels > 0).astype(float), n,
                         name=f"uniform-parity[n={n}]I={support}",
                         meta={"family": "uniform", "support": support, "alpha": 0.0})


def sample(mu: FiniteMeasure, seed: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """m i.i.d. draws: atom by inverse CDF, then the label coin. Returns (X, y)."""
    if m < 1:
        raise ParameterError(f"sample size must be >= 1, got {m}")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(mu.weights)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, rng.random(m), side="right")
    idx = np.minimum(idx, len(mu) - 1)
    y = np.where(rng.random(m) < mu.p_plus[idx], 1, -1).astype(np.int8)
    return mu.points[idx].copy(), y


def sample_bsp(n: int, support: SupportSet | Sequence[int], alpha: float, seed,
               m: int) -> tuple[np.ndarray, np.ndarray]:
    """Direct sampler for the biased sparse parity distribution; no enumeration,
    so any n works. ``seed`` may be an int or a numpy Generator."""
    if m < 1:
        raise ParameterError(f"sample size must be >= 1, got {m}")
    if not isinstance(support, SupportSet):
        support = SupportSet(tuple(support), n)
    _check_alpha(alpha)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    biased = rng.random(m) < alpha
    p = np.where(biased, BIASED_P_PLUS, 0.5)[:, None]
    X = np.where(rng.random((m, n)) < p, 1, -1).astype(np.int8)
    return X, parity_label(X, support)
