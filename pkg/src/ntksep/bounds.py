"""Kernel lower-bound calculators and exact edge audits over problem families.

For a family of orthonormal labelings under one fixed marginal, any
p-dimensional kernel has average edge at most p / (2 |P|). The norm-based
counterpart c * B^(2/3) / |P|^(1/3) is only known up to a constant; the
constant used here is a calibration (see ``calibrate_norm_constant``), not a
proven value.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .errors import ParameterError
from .gd import claim31_experiment, claim51_experiment
from .models import model_bsp, model_lp
from .problems import (FiniteMeasure, SupportSet, check_capacity, enumerate_bsp, enumerate_lp,
                       uniform_parity)
from .tangent import BallSolver, TangentFeatureMap, best_in_ball, feature_radius

# Largest audited (average edge) / (B^(2/3) / |P|^(1/3)) over random 64-dim
# Gaussian maps at n=8, k=2, rounded up; regenerate with
# scripts/calibrate_norm_constant.py. Non-authoritative.
NORM_BOUND_CONSTANT = 0.16

BSP_AUDIT_CAP = 12
LP_AUDIT_CAP = 10


def dimension_edge_bound(p: int, family_size: int) -> float:
    if p < 0 or family_size < 1:
        raise ParameterError(f"need p >= 0 and family size >= 1, got p={p}, |P|={family_size}")
    return p / (2.0 * family_size)


def norm_edge_bound(B: float, family_size: int, c: float = NORM_BOUND_CONSTANT) -> float:
    if B < 0 or c <= 0 or family_size < 1:
        raise ParameterError(f"need B >= 0, c > 0, |P| >= 1; got B={B}, c={c}, |P|={family_size}")
    return c * B ** (2.0 / 3.0) / family_size ** (1.0 / 3.0)


def bsp_family_size(n: int, k: int) -> int:
    return math.comb(n, k)


def lp_family_size(n: int) -> int:
    return 2 ** n - n - 1


@dataclass
class FeatureMapSpec:
    dim: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    weight: float = 1.0
    name: str = ""

    def __call__(self, X) -> np.ndarray:
        Phi = np.asarray(self.evaluator(np.atleast_2d(X)), dtype=float)
        if Phi.ndim == 1:
            Phi = Phi[:, None]
        if Phi.shape[1] != self.dim:
            raise ParameterError(f"map {self.name!r} returned {Phi.shape[1]} features, declared {self.dim}")
        return Phi


def _codes(X: np.ndarray) -> np.ndarray:
    n = X.shape[1]
    return ((X > 0).astype(np.int64) << np.arange(n, dtype=np.int64)).sum(axis=1)


def gaussian_table_map(n: int, p: int, seed: int = 0) -> FeatureMapSpec:
    """An independent N(0, 1) feature vector for every point of the cube."""
    check_capacity(n)
    table = np.random.default_rng(seed).standard_normal((1 << n, p))
    return FeatureMapSpec(p, lambda X: table[_codes(X)], name=f"gaussian[p={p},seed={seed}]")


def quadratic_map(n: int, p: int, seed: int = 0) -> FeatureMapSpec:
    """p random combinations of the degree-2 monomials x_i x_j."""
    pairs = np.array(list(combinations(range(n), 2)))
    G = np.random.default_rng(seed).standard_normal((len(pairs), p))
    return FeatureMapSpec(p, lambda X: (X[:, pairs[:, 0]] * X[:, pairs[:, 1]]) @ G,
                          name=f"quadratic[p={p},seed={seed}]")


def indicator_map(n: int, codes: Sequence[int]) -> FeatureMapSpec:
    codes = np.asarray(codes, dtype=np.int64)
    return FeatureMapSpec(len(codes), lambda X: (_codes(X)[:, None] == codes[None, :]).astype(float),
                          name=f"indicator[p={len(codes)}]")


def parity_map(n: int, supports: Sequence[SupportSet]) -> FeatureMapSpec:
    idx = [list(s.indices) for s in supports]
    return FeatureMapSpec(len(idx), lambda X: np.column_stack([np.prod(X[:, i], axis=1) for i in idx]),
                          name=f"parity[p={len(idx)}]")


def rotated(spec: FeatureMapSpec, U: np.ndarray) -> FeatureMapSpec:
    return FeatureMapSpec(spec.dim, lambda X: spec(X) @ U, spec.weight, spec.name + "@U")


@dataclass
class FamilyAuditReport:
    instances: list[str]
    edges: np.ndarray
    p: int
    B: float
    dimension_bound: float
    norm_bound: float
    uniform_edges: np.ndarray | None = None

    @property
    def family_size(self) -> int:
        return len(self.instances)

    @property
    def average(self) -> float:
        return float(np.mean(self.edges))

    @property
    def minimum(self) -> float:
        return float(np.min(self.edges))

    @property
    def uniform_average(self) -> float:
        return float(np.mean(self.uniform_edges)) if self.uniform_edges is not None else math.nan

    @property
    def within_dimension_bound(self) -> bool:
        """Average edge on the orthonormal uniform component is <= p / (2|P|) (+1e-8)."""
        return self.uniform_edges is not None and self.uniform_average <= self.dimension_bound + 1e-8

    def summary(self) -> dict:
        return {
            "family_size": self.family_size, "p": self.p,
            "B": None if math.isinf(self.B) else self.B,
            "average_edge": self.average, "min_edge": self.minimum,
            "uniform_average_edge": None if self.uniform_edges is None else self.uniform_average,
            "dimension_bound": self.dimension_bound, "norm_bound": self.norm_bound,
            "within_dimension_bound": self.within_dimension_bound,
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["I", "edge", "uniform_edge"])
            for i, name in enumerate(self.instances):
                u = "" if self.uniform_edges is None else repr(float(self.uniform_edges[i]))
                wr.writerow([name, repr(float(self.edges[i])), u])

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)


def _map_weights(maps: Sequence[FeatureMapSpec]) -> np.ndarray:
    w = np.array([m.weight for m in maps], dtype=float)
    if np.any(w < 0) or w.sum() <= 0:
        raise ParameterError("map weights must be non-negative with positive sum")
    return w / w.sum()


def _instance_edges(maps, family: Sequence[FiniteMeasure], B: float) -> np.ndarray:
    """edges[j, i] = best edge of map j on instance i; solvers are shared
    across instances with identical marginals."""
    out = np.zeros((len(maps), len(family)))
    for j, spec in enumerate(maps):
        cache: dict[bytes, tuple[np.ndarray, BallSolver]] = {}
        for i, mu in enumerate(family):
            key = mu.codes.tobytes() + mu.weights.tobytes()
            if key not in cache:
                Phi = spec(mu.points)
                cache[key] = (Phi, BallSolver(Phi, mu.weights))
            Phi, solver = cache[key]
            out[j, i] = best_in_ball(Phi, mu, B, radius=feature_radius(Phi, mu), solver=solver).edge
    return out


def family_edge_audit(maps: FeatureMapSpec | Sequence[FeatureMapSpec], family: Sequence[FiniteMeasure],
                      B: float = math.inf, uniform_check: bool = True,
                      norm_constant: float = NORM_BOUND_CONSTANT) -> FamilyAuditReport:
    """Exact expected best edge of a (randomized) kernel on every instance.

    ``maps`` is one feature map or a weighted list representing a kernel
    distribution; edges are weight-averaged per instance. With
    ``uniform_check`` the same maps are also audited on the uniform-marginal
    parity for each instance's support, the sub-family on which the
    dimension bound is a theorem.
    """
    if isinstance(maps, FeatureMapSpec):
        maps = [maps]
    if not maps or not family:
        raise ParameterError("need at least one map and one instance")
    n = family[0].n
    cap = LP_AUDIT_CAP if family[0].meta.get("family") == "lp" else BSP_AUDIT_CAP
    check_capacity(n, cap)
    w = _map_weights(maps)
    p = max(m.dim for m in maps)
    edges = w @ _instance_edges(maps, family, B)
    uniform = None
    if uniform_check:
        sub = [uniform_parity(n, mu.meta["support"]) for mu in family]
        uniform = w @ _instance_edges(maps, sub, B)
    names = [str(mu.meta.get("support", mu.name)) for mu in family]
    norm_b = norm_edge_bound(B, len(family), norm_constant) if math.isfinite(B) else math.inf
    return FamilyAuditReport(names, edges, p, B, dimension_edge_bound(p, len(family)), norm_b, uniform)


def bsp_family(n: int, k: int, alpha: float) -> list[FiniteMeasure]:
    check_capacity(n, BSP_AUDIT_CAP)
    return [enumerate_bsp(n, k, c, alpha) for c in combinations(range(n), k)]


def lp_family(n: int, alpha: float) -> list[FiniteMeasure]:
    check_capacity(n, LP_AUDIT_CAP)
    return [enumerate_lp(n, c, alpha) for r in range(2, n + 1) for c in combinations(range(n), r)]


def indicator_edge(n: int, p: int, alpha: float) -> float:
    """Edge of indicator features on p points avoiding x^I, on a leaky parity."""
    return (1.0 - alpha) * p / 2 ** (n + 1)


def calibrate_norm_constant(n: int = 8, k: int = 2, p: int = 64, trials: int = 10,
                            B_grid: Sequence[float] = tuple(2.0 ** e for e in range(-4, 7)),
                            seed: int = 0) -> tuple[float, list[dict]]:
    """Smallest c with audited average edge <= c B^(2/3) / |P|^(1/3) for every
    random Gaussian p-dim map and every B in the grid, on the uniform
    parities of order k."""
    family = [uniform_parity(n, c) for c in combinations(range(n), k)]
    P = len(family)
    rows, c = [], 0.0
    for t in range(trials):
        spec = gaussian_table_map(n, p, seed + t)
        for B in B_grid:
            avg = float(np.mean(_instance_edges([spec], family, B)))
            ratio = avg / (B ** (2.0 / 3.0) / P ** (1.0 / 3.0))
            c = max(c, ratio)
            rows.append({"trial": t, "B": B, "average_edge": avg, "ratio": ratio})
    return c, rows


@dataclass
class SeparationReport:
    kind: str
    params: dict
    rows: list[tuple[str, float, str, bool | None]] = field(default_factory=list)

    def add(self, quantity: str, value: float, claim: str, ok: bool | None = None) -> None:
        self.rows.append((quantity, float(value), claim, ok))

    @property
    def passed(self) -> bool:
        return all(ok is not False for *_, ok in self.rows)

    def to_markdown(self) -> str:
        params = ", ".join(f"{k}={v}" for k, v in self.params.items())
        lines = [f"### {self.kind} ({params})", "", "| quantity | value | claim | check |",
                 "|---|---|---|---|"]
        for q, v, c, ok in self.rows:
            mark = "-" if ok is None else ("pass" if ok else "FAIL")
            lines.append(f"| {q} | {v:.6g} | {c} | {mark} |")
        return "\n".join(lines) + "\n"


def _ntk_losses(model, mu, Bs, unbiased=False):
    phi = TangentFeatureMap(model, model.theta0, unbiased)
    Phi = phi(mu.points)
    R = feature_radius(Phi, mu)
    solver = BallSolver(Phi, mu.weights)
    return {B: best_in_ball(Phi, mu, B, radius=R, solver=solver).loss for B in Bs}


def _gd_opts(params: dict) -> dict:
    opts = {k: params[k] for k in ("tau", "eta", "seed") if params.get(k) is not None}
    if params.get("strategies"):
        opts["strategies"] = tuple(params["strategies"])
    return opts


def _B_grid(params: dict, n: int) -> tuple:
    if params.get("bound") is not None:
        return (float(params["bound"]),)
    return (0.1, 1.0, float(n), 10.0 * n, math.inf)


def separation_report(kind: str, params: dict | None = None) -> SeparationReport:
    """GD half, tangent-kernel half and kernel-bound half side by side.

    Optional params shared by all kinds: tau, eta, strategies, seed (for the
    GD half) and bound (a single tangent-kernel norm bound instead of the
    default sweep).
    """
    params = dict(params or {})
    if kind == "sep1":
        gamma = params.setdefault("gamma", 0.05)
        if not 0 < gamma < 0.5:
            raise ParameterError("sep1 needs gamma in (0, 1/2)")
        n, k, alpha = 2, 2, 2 * gamma
        rep = SeparationReport(kind, params)
        mu = enumerate_bsp(n, k, (0, 1), alpha)
        gd = claim31_experiment(n, k, alpha, (0, 1), mu=mu, **_gd_opts(params))
        rep.add("GD loss (worst strategy)", max(r.loss for r in gd), "= 0", all(r.verdict for r in gd))
        for B, L in _ntk_losses(model_bsp(n), mu, _B_grid(params, n)).items():
            rep.add(f"NTK loss, B={B}", L, f">= 1/2 - gamma = {0.5 - gamma:.6g}", L >= 0.5 - gamma - 1e-10)
        return rep
    if kind == "sep2":
        n = params.setdefault("n", 16)
        k = params.setdefault("k", max(2, math.ceil(math.log2(n))))
        alpha = params.setdefault("gamma", 1.0 / n)
        if k != max(2, math.ceil(math.log2(n))) or not 0 < alpha < 0.5:
            raise ParameterError("sep2 needs k = ceil(log2 n) and gamma in (0, 1/2)")
        rep = SeparationReport(kind, params)
        support = tuple(range(k))
        mu = enumerate_bsp(n, k, support, alpha)
        gd = claim31_experiment(n, k, alpha, support, mu=mu, **_gd_opts(params))
        rep.add("GD loss (worst strategy)", max(r.loss for r in gd), "= 0", all(r.verdict for r in gd))
        for B, L in _ntk_losses(model_bsp(n), mu, (float(n), math.inf), unbiased=True).items():
            rep.add(f"NTK loss, B={B}", L, f">= 1/2 - alpha/2 = {0.5 - alpha / 2:.6g}", L >= 0.5 - alpha / 2 - 1e-10)
        P = bsp_family_size(n, k)
        for p in params.get("probe_p", (n, n * n)):
            rep.add(f"kernel edge ceiling, p={p}", alpha / 2 + dimension_edge_bound(p, P),
                    f"alpha/2 + p/(2 C(n,k)), C(n,k)={P}")
        return rep
    if kind == "sep3":
        eps = params.setdefault("eps", 0.05)
        if not 0 < eps < 0.5:
            raise ParameterError("sep3 needs eps in (0, 1/2)")
        n, alpha = 2, eps
        rep = SeparationReport(kind, params)
        mu = enumerate_lp(n, (0, 1), alpha)
        gd = claim51_experiment(n, alpha, (0, 1), mu=mu, **_gd_opts(params))
        rep.add("GD loss (worst strategy)", max(r.loss for r in gd), f"= eps = {eps}", all(r.verdict for r in gd))
        for B, L in _ntk_losses(model_lp(n, alpha), mu, _B_grid(params, n)).items():
            rep.add(f"NTK edge, B={B}", 0.5 - L, "= 0", abs(0.5 - L) <= 1e-10)
        return rep
    if kind == "sep4":
        n = params.setdefault("n", 10)
        eps = params.setdefault("eps", 0.05)
        if not 2 <= n <= LP_AUDIT_CAP or not 0 < eps < 0.5:
            raise ParameterError(f"sep4 needs 2 <= n <= {LP_AUDIT_CAP} and eps in (0, 1/2)")
        rep = SeparationReport(kind, params)
        support = tuple(range(n))
        mu = enumerate_lp(n, support, eps)
        gd = claim51_experiment(n, eps, support, mu=mu, **_gd_opts(params))
        rep.add("GD loss (worst strategy)", max(r.loss for r in gd), f"= eps = {eps}", all(r.verdict for r in gd))
        L = _ntk_losses(model_lp(n, eps), mu, (math.inf,))[math.inf]
        rep.add("NTK edge at init", 0.5 - L, "= 0", abs(0.5 - L) <= 1e-10)
        P = lp_family_size(n)
        family = lp_family(n, eps)
        seed = params.get("seed", 0)
        for p in params.get("probe_p", (n, 2 * n)):
            audit = family_edge_audit(gaussian_table_map(n, p, seed), family, uniform_check=False)
            bound = dimension_edge_bound(p, P)
            rep.add(f"min edge of random {p}-dim kernel", audit.minimum,
                    f"<= p/(2(2^n-n-1)) = {bound:.6g}", audit.minimum <= bound + 1e-8)
        # composition with the unbiased-initialization guarantee: an unbiased
        # model succeeding at accuracy tau/C = eps/n would give a tangent
        # kernel edge of (eps/n)^2/2, which the p=n ceiling rules out once
        # the ceiling drops below it
        target = 0.5 * (eps / n) ** 2
        rep.add("unbiased-init edge (eps/n)^2/2", target, "implied tangent edge")
        m = 2
        while dimension_edge_bound(m, lp_family_size(m)) >= 0.5 * (eps / m) ** 2:
            m += 1
        rep.add("first n with n/(2(2^n-n-1)) < (eps/n)^2/2", m, "unbiased GD impossible from here")
        return rep
    raise ParameterError(f"unknown separation {kind!r}")
