"""Registry of end-to-end verification checks.

Each check returns a CheckResult; ``run_checks`` drives them in order. The
same functions back the ``verify`` subcommand and the acceptance tests.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bounds import (bsp_family, dimension_edge_bound, family_edge_audit, gaussian_table_map,
                     indicator_edge, indicator_map)
from .errors import ParameterError
from .gd import (STRATEGIES, adam_train, claim31_experiment, claim51_experiment, logistic_loss,
                 square_loss)
from .models import model_bsp, model_lp, relu_mlp
from .problems import (FiniteMeasure, SupportSet, bsp_supports, encode, enumerate_bsp, enumerate_lp,
                       lp_supports, sample_bsp)
from .sigma_net import compile_product_net, depth_bound, eval_sigma_net
from .tangent import (TangentFeatureMap, best_in_ball, feature_radius, linear_parity_edge_closed_form,
                      thm1_witness, thm2_audit)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    def line(self) -> str:
        return (f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: value={self.value:.6g} "
                f"threshold={self.threshold:.6g} ({self.detail}) {self.seconds:.1f}s")


def check_claim31(n: int = 8, k: int = 3, alphas=(0.1, 0.5), tau_scale: float = 1.0,
                  strategies=STRATEGIES) -> CheckResult:
    """One approximate-GD step solves every biased sparse parity instance."""
    worst, bad = 0.0, []
    for alpha in alphas:
        tau = tau_scale * alpha / 2 ** k
        for support in bsp_supports(n, k):
            for r in claim31_experiment(n, k, alpha, support, strategies, tau=tau):
                worst = max(worst, r.loss)
                if not r.verdict:
                    bad.append(f"a={alpha} I={support} {r.label}")
    detail = f"{len(bad)} failing runs" + (f", first: {bad[0]}" if bad else "")
    return CheckResult("claim31", not bad, worst, 1e-12, detail)


def check_claim32(ns=range(2, 11), ks=(2, 3), alphas=(0.1, 0.3, 0.5)) -> CheckResult:
    """Closed-form linear edge; tangent-kernel loss floor and edge lower bound."""
    worst_rel, ok, failures = 0.0, True, []
    for k in ks:
        for n in ns:
            if n < k:
                continue
            support = SupportSet(tuple(range(k)), n)
            model = model_bsp(n)
            phi = TangentFeatureMap(model, model.theta0)
            for alpha in alphas:
                mu = enumerate_bsp(n, k, support, alpha)
                Z = mu.points[:, list(support.indices)].sum(axis=1)
                brute = best_in_ball(Z, mu, math.inf).edge
                closed = linear_parity_edge_closed_form(n, k, alpha)
                rel = abs(brute - closed) / abs(closed)
                worst_rel = max(worst_rel, rel)
                if rel > 1e-9:
                    ok = False
                    failures.append(f"closed form n={n} k={k} a={alpha}")
                Phi = phi(mu.points)
                R = feature_radius(Phi, mu)
                for B in (0.1, 1.0, float(n), 10.0 * n):
                    pred = best_in_ball(Phi, mu, B, radius=R)
                    if pred.loss < 0.5 - alpha / 2 - 1e-10:
                        ok = False
                        failures.append(f"loss floor n={n} k={k} a={alpha} B={B}")
                    if B == n and pred.edge < (8 / 3) * alpha ** 2 / 2 ** (2 * k):
                        ok = False
                        failures.append(f"edge lower bound n={n} k={k} a={alpha}")
    return CheckResult("claim32", ok, worst_rel, 1e-9,
                       "max relative closed-form error" + (f"; {failures[0]}" if failures else ""))


def _probe_supports(n: int, rng: np.random.Generator, extra: int = 3) -> list[SupportSet]:
    out = {tuple(range(n)), (0, 1)}
    for _ in range(extra):
        r = int(rng.integers(2, n + 1))
        out.add(tuple(sorted(rng.choice(n, size=r, replace=False).tolist())))
    return [SupportSet(s, n) for s in sorted(out)]


def check_claim51(ns=range(2, 11), alphas=(0.05, 0.1, 0.2), seed: int = 0) -> CheckResult:
    """One GD step on a leaky parity reaches loss alpha; tangent kernel at 0 has no edge."""
    rng = np.random.default_rng(seed)
    worst_loss, worst_edge, failures = 0.0, 0.0, []
    for n in ns:
        for support in _probe_supports(n, rng):
            for alpha in alphas:
                mu = enumerate_lp(n, support, alpha)
                for r in claim51_experiment(n, alpha, support, mu=mu):
                    worst_loss = max(worst_loss, abs(r.loss - alpha))
                    if not r.verdict:
                        failures.append(f"gd n={n} I={support} a={alpha} {r.label}")
                model = model_lp(n, alpha)
                Phi = TangentFeatureMap(model, model.theta0)(mu.points)
                R = feature_radius(Phi, mu)
                for B in (0.1, 1.0, float(n), 10.0 * n, math.inf):
                    e = abs(best_in_ball(Phi, mu, B, radius=R).edge)
                    worst_edge = max(worst_edge, e)
                    if e > 1e-10:
                        failures.append(f"ntk edge n={n} I={support} a={alpha} B={B}")
    return CheckResult("claim51", not failures, worst_loss, 1e-12,
                       f"max |loss - alpha|; max |NTK edge| = {worst_edge:.3g}"
                       + (f"; {failures[0]}" if failures else ""))


def random_measure(n: int, rng: np.random.Generator) -> FiniteMeasure:
    """Arbitrary measure on the n-cube: sparse Dirichlet weights, random label biases."""
    w = rng.dirichlet(np.full(1 << n, 0.5))
    w[rng.random(1 << n) < 0.3] = 0.0
    if w.sum() == 0:
        w[0] = 1.0
    w = w / math.fsum(w)
    w[-1] = max(0.0, 1.0 - math.fsum(w[:-1]))
    p_plus = rng.choice([0.0, 1.0, 0.5, rng.random()], size=1 << n)
    p_plus = np.where(rng.random(1 << n) < 0.5, rng.random(1 << n), p_plus)
    return FiniteMeasure(np.arange(1 << n), w, p_plus, n, name="random")


def thm1_case(rng: np.random.Generator) -> dict:
    """Draw one Theorem-1 scenario and evaluate the witness against its guarantee."""
    n = int(rng.integers(2, 6))
    kind = rng.choice(["bsp", "lp", "relu", "relu0"])
    if kind == "bsp":
        model = model_bsp(n)
        theta = np.zeros(n) if rng.random() < 0.4 else rng.uniform(-5 / n, 5 / n, n)
    elif kind == "lp":
        model = model_lp(n, float(rng.uniform(0.05, 0.5)))
        theta = rng.uniform(-1 / n, 5 / n, n)
    else:
        model = relu_mlp(n, int(rng.integers(2, 6)), int(rng.integers(1 << 30)))
        theta = model.theta0.copy()
        if kind == "relu0":
            # output layer zeroed: an unbiased initialization
            W, b, a, c = model.unpack(theta)
            theta = model.pack(W, b, np.zeros_like(a), 0.0)
    family = rng.choice(["random", "bsp", "lp"])
    if family == "bsp":
        k = int(rng.integers(2, n + 1))
        mu = enumerate_bsp(n, k, tuple(sorted(rng.choice(n, k, replace=False))), float(rng.uniform(0, 0.9)))
    elif family == "lp":
        k = int(rng.integers(2, n + 1))
        mu = enumerate_lp(n, tuple(sorted(rng.choice(n, k, replace=False))), float(rng.uniform(0.01, 0.9)))
    else:
        mu = random_measure(n, rng)
    loss = square_loss if rng.random() < 0.7 else logistic_loss
    R = feature_radius(TangentFeatureMap(model, theta)(mu.points), mu)
    in_regime = getattr(model, "in_regime", lambda t: False)(theta)
    C = model.scale_bound if in_regime and model.scale_bound >= R else R * float(rng.uniform(1.0, 2.0))
    probe = thm1_witness(model, theta, mu, loss, tau=0.0, scale_bound=C)
    gnorm, L0 = probe.info["grad_norm"], probe.info["loss_init"]
    # the hypothesis: either ||grad L|| >= tau, or GD cannot move and then
    # its success means eps >= L(f_theta0)
    tau = gnorm * float(rng.uniform(0.0, 1.0))
    eps = float(rng.uniform(0.0, 1.2 * L0)) if gnorm > 0 else float(rng.uniform(L0, 1.2 * L0 + 1e-3))
    w = thm1_witness(model, theta, mu, loss, tau=tau, eps=eps, scale_bound=C)
    f0 = TangentFeatureMap(model, theta)(mu.points)[:, 0]
    unbiased = bool(np.all(f0[mu.weights > 0] == 0))
    case = {"kind": kind, "family": family, "unbiased": unbiased, "premise": w.info["premise"],
            "loss": w.loss, "target": w.info["target"], "in_ball": w.info["in_ball"],
            "ok": w.info["premise"] and w.info["in_ball"] and w.loss <= w.info["target"] + 1e-10}
    if unbiased and eps < L0 and tau > 0:
        # no bias term needed: h = <w, grad f> with ||w|| R_grad <= tau / (|l''| C)
        null = L0
        coef = w.coefficients[1:]
        R_g = feature_radius(TangentFeatureMap(model, theta, unbiased=True)(mu.points), mu)
        small_ball = np.linalg.norm(coef) * R_g <= tau / (loss.curvature * C) * (1 + 1e-12)
        case["ok"] = case["ok"] and small_ball and w.loss <= null - tau ** 2 / (2 * loss.curvature * C * C) + 1e-10
    return case


def check_thm1(cases: int = 1000, seed: int = 0) -> CheckResult:
    """Randomized witnesses of the tangent-kernel improvement guarantee."""
    rng = np.random.default_rng(seed)
    worst, failures, unbiased = -math.inf, [], 0
    for i in range(cases):
        c = thm1_case(rng)
        worst = max(worst, c["loss"] - c["target"])
        unbiased += c["unbiased"]
        if not c["ok"]:
            failures.append(f"case {i} ({c['kind']}/{c['family']})")
    return CheckResult("thm1", not failures, worst, 1e-10,
                       f"max loss - target over {cases} cases, {unbiased} unbiased"
                       + (f"; {failures[0]}" if failures else ""), extra={"unbiased": unbiased})


def check_thm2(max_n: int = 8, alphas=(0.1, 0.2)) -> CheckResult:
    """Average tangent edge along the zero-label path beats gamma' on every leaky parity."""
    margin, failures, count = math.inf, [], 0
    for alpha in alphas:
        for n in range(2, max_n + 1):
            model = model_lp(n, alpha)
            for support in lp_supports(n):
                mu = enumerate_lp(n, support, alpha)
                rep = thm2_audit(model, model.theta0, 3 / (4 * alpha * n), 1, 4 * alpha / 3, mu, 0.5 - alpha)
                count += 1
                margin = min(margin, rep.average_edge - rep.gamma_prime)
                if rep.verdict != "pass":
                    failures.append(f"n={n} I={support} a={alpha}: {rep.verdict}")
    return CheckResult("thm2", not failures, margin, 0.0,
                       f"min (average edge - gamma') over {count} instances"
                       + (f"; {failures[0]}" if failures else ""))


def check_kernel_audit(trials: int = 20, n: int = 8, k: int = 2, p: int = 16, seed: int = 0) -> CheckResult:
    """Random p-dim kernels stay under p/(2|P|); indicator features hit (1-a)p/2^(n+1)."""
    family = bsp_family(n, k, 0.1)
    bound = dimension_edge_bound(p, len(family))
    worst, failures = -math.inf, []
    for t in range(trials):
        rep = family_edge_audit(gaussian_table_map(n, p, seed + t), family)
        worst = max(worst, rep.uniform_average - bound)
        if not rep.within_dimension_bound:
            failures.append(f"trial {t}")
    rng = np.random.default_rng(seed)
    ind_err = 0.0
    for alpha in (0.1, 0.2):
        for support in _probe_supports(n, rng):
            mu = enumerate_lp(n, support, alpha)
            leak = encode(support.leak_atom())
            for q in (1, 8, 32):
                codes = [c for c in rng.permutation(1 << n).tolist() if c != leak][:q]
                e = best_in_ball(indicator_map(n, codes), mu, math.inf).edge
                ind_err = max(ind_err, abs(e - indicator_edge(n, q, alpha)))
    if ind_err > 1e-10:
        failures.append(f"indicator edge error {ind_err:.3g}")
    return CheckResult("kernel_audit", not failures, worst, 1e-8,
                       f"max (uniform average - p/(2|P|)); indicator error {ind_err:.3g}"
                       + (f"; {failures[0]}" if failures else ""))


def check_sigma_net(n: int = 16, random_inputs: int = 10_000, seed: int = 0) -> CheckResult:
    net = compile_product_net(n)
    codes = np.arange(1 << n, dtype=np.int64)
    signs = np.where((codes[:, None] >> np.arange(n)) & 1, 1.0, -1.0)
    err = float(np.max(np.abs(eval_sigma_net(net, signs) - np.prod(signs, axis=1))))
    U = np.random.default_rng(seed).uniform(-1, 1, (random_inputs, n))
    err = max(err, float(np.max(np.abs(eval_sigma_net(net, U) - np.prod(U, axis=1)))))
    ok = err <= 1e-9 and net.depth <= depth_bound(n)
    return CheckResult("sigma_net", ok, err, 1e-9, f"depth {net.depth} (ceil log2 n = {depth_bound(n)}), "
                       f"{net.edge_count} edges")


def _fd_grad(model, theta, x, h):
    """Five-point central differences of f(theta, x) in every coordinate."""
    p = len(theta)
    E = np.eye(p) * h
    thetas = np.concatenate([theta + 2 * E, theta + E, theta - E, theta - 2 * E])
    vals = np.array([model.value(t, x)[0] for t in thetas]).reshape(4, p)
    return (-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12 * h)


def gradient_probe(model, theta, x, h: float = 1e-5) -> tuple[float, bool]:
    """(relative error, smooth). ``smooth`` is False when the stencil straddles
    a kink, detected by disagreement between steps h and h/2."""
    g = model.gradient(theta, x)[0]
    fd = _fd_grad(model, theta, x, h)
    fd2 = _fd_grad(model, theta, x, h / 2)
    scale = max(np.linalg.norm(fd), 1.0)
    smooth = np.linalg.norm(fd - fd2) / scale <= 1e-7
    return float(np.linalg.norm(g - fd) / scale), bool(smooth)


def check_gradients(probes: int = 1000, seed: int = 0, max_reject: float = 0.05) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst, rejected, failures = 0.0, 0, []
    makers = {
        "model_bsp": lambda n: (model_bsp(n), rng.uniform(-6 / n, 6 / n, n)),
        "model_lp": lambda n: (model_lp(n, float(rng.uniform(0.05, 0.5))), rng.uniform(-6 / n, 6 / n, n)),
        "relu_mlp": lambda n: ((m := relu_mlp(n, int(rng.integers(2, 9)), int(rng.integers(1 << 30)))),
                               m.theta0 + 0.1 * rng.standard_normal(m.p)),
    }
    for name, make in makers.items():
        done = attempts = 0
        while done < probes:
            attempts += 1
            n = int(rng.integers(2, 9))
            model, theta = make(n)
            x = rng.choice([-1.0, 1.0], size=(1, n))
            err, smooth = gradient_probe(model, theta, x)
            if not smooth:
                rejected += 1
                if attempts > probes * (1 + max_reject):
                    failures.append(f"{name}: kink rejection rate above {max_reject}")
                    break
                continue
            done += 1
            worst = max(worst, err)
            if err > 1e-5:
                failures.append(f"{name} n={n}: rel err {err:.3g}")
    return CheckResult("grad_oracle", not failures, worst, 1e-5,
                       f"{probes} probes per model, {rejected} kink probes resampled"
                       + (f"; {failures[0]}" if failures else ""))


@dataclass
class ReluDemoConfig:
    n: int = 64
    k: int = 5
    width: int = 128
    alphas: tuple = (0.2, 0.0)
    seeds: int = 5
    steps: int = 20_000
    lr: float = 0.01
    batch: int = 32
    test_size: int = 10_000
    eval_every: int = 250
    stop_at: float | None = None
    base_seed: int = 0


def relu_demo(cfg: ReluDemoConfig) -> dict:
    """Curves keyed by (alpha, run index); run i uses seed base_seed + i."""
    support = SupportSet(tuple(range(cfg.k)), cfg.n)
    curves = {}
    for alpha in cfg.alphas:
        test = sample_bsp(cfg.n, support, alpha, 10_000 + cfg.seeds + cfg.base_seed, cfg.test_size)
        for i in range(cfg.seeds):
            seed = cfg.base_seed + i
            model = relu_mlp(cfg.n, cfg.width, seed)
            sampler = lambda rng, m, a=alpha: sample_bsp(cfg.n, support, a, rng, m)
            stop = cfg.stop_at if alpha > 0 else None
            curves[(alpha, i)] = adam_train(model, sampler, test, lr=cfg.lr, steps=cfg.steps,
                                            batch=cfg.batch, seed=seed, eval_every=cfg.eval_every,
                                            stop_at=stop)
    return curves


def check_relu_demo(cfg: ReluDemoConfig | None = None) -> CheckResult:
    """Positive bias makes the parity learnable by a ReLU net; the unbiased case stays at chance."""
    cfg = cfg or ReluDemoConfig(stop_at=0.95)
    curves = relu_demo(cfg)
    best = {a: max(curves[(a, s)].best_accuracy for s in range(cfg.seeds)) for a in cfg.alphas}
    learned = sum(curves[(0.2, s)].best_accuracy >= 0.95 for s in range(cfg.seeds)) if 0.2 in best else 0
    ok = learned >= 1 and best.get(0.0, 0.0) <= 0.6
    return CheckResult("relu_demo", ok, best.get(0.0, math.nan), 0.6,
                       f"alpha=0.2: {learned}/{cfg.seeds} seeds >= 0.95; alpha=0 best accuracy shown")


REGISTRY: dict[str, Callable[..., CheckResult]] = {
    "claim31": check_claim31,
    "claim32": check_claim32,
    "claim51": check_claim51,
    "thm1": check_thm1,
    "thm2": check_thm2,
    "kernel_audit": check_kernel_audit,
    "sigma_net": check_sigma_net,
    "grad_oracle": check_gradients,
    "relu_demo": check_relu_demo,
}

FAULTS = {"claim31": {"tau_scale": 2.0}}


def run_checks(names=None, inject_fault: str | None = None, on_result=None) -> list[CheckResult]:
    names = list(REGISTRY) if names is None else list(names)
    unknown = [n for n in names if n not in REGISTRY]
    if unknown:
        raise ParameterError(f"unknown checks: {unknown}")
    if inject_fault is not None and inject_fault not in FAULTS:
        raise ParameterError(f"no fault injection available for {inject_fault!r}")
    results = []
    for name in names:
        kwargs = FAULTS[name] if name == inject_fault else {}
        t = time.perf_counter()
        res = REGISTRY[name](**kwargs)
        res.seconds = time.perf_counter() - t
        results.append(res)
        if on_result:
            on_result(res)
    return results
