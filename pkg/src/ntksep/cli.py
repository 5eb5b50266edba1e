"""Command-line runner: verification suite, separation reports, ReLU demo and
product-net compile check.

Exit codes: 0 success, 1 a check failed, 2 usage error. Parameter precedence
is command-line flags over a JSON ``--config`` file over built-in defaults;
the effective configuration is written to ``<out>/config.json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .bounds import bsp_family_size, dimension_edge_bound, lp_family_size, separation_report
from .checks import FAULTS, REGISTRY, ReluDemoConfig, relu_demo, run_checks
from .errors import ParameterError
from .gd import STRATEGIES
from .plots import line_plot
from .sigma_net import compile_product_net, depth_bound, eval_sigma_net

SUBCOMMANDS = ("verify", "sep1", "sep2", "sep3", "sep4", "relu-demo", "compile-check")

DEFAULTS = {
    "verify": {},
    "sep1": {"alpha": 0.1},
    "sep2": {"n": 16},
    "sep3": {"alpha": 0.05},
    "sep4": {"n": 10, "alpha": 0.05},
    "relu-demo": {"n": 64, "k": 5, "alpha": 0.2, "steps": 20_000, "seed": 0},
    "compile-check": {"n": 16, "seed": 0},
}


@dataclass
class RunConfig:
    subcommand: str
    n: int | None = None
    k: int | None = None
    alpha: float | None = None
    tau: float | None = None
    eta: float | None = None
    steps: int | None = None
    bound: float | None = None
    seed: int | None = None
    strategies: list | None = None
    out: str | None = None
    full: bool = False
    inject_fault: str | None = None
    checks: list | None = None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ntksep", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--n", type=int)
    ap.add_argument("--k", type=int)
    ap.add_argument("--alpha", type=float, help="distribution parameter (sep1: alpha = 2 gamma; sep3/sep4: alpha = eps)")
    ap.add_argument("--tau", type=float, help="gradient accuracy for the GD half")
    ap.add_argument("--eta", type=float, help="step size for the GD half")
    ap.add_argument("--steps", type=int, help="training steps (relu-demo)")
    ap.add_argument("--bound", type=float, help="tangent-kernel norm bound B")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--strategies", type=lambda s: [t for t in s.split(",") if t],
                    help=f"comma-separated subset of {','.join(STRATEGIES)}")
    ap.add_argument("--out", help="output directory (default runs/<subcommand>)")
    ap.add_argument("--config", help="JSON file with any of the flag values")
    ap.add_argument("--full", action="store_true", default=None,
                    help="relu-demo at full scale: n=128, k=7, 20 runs")
    ap.add_argument("--inject-fault", dest="inject_fault", help="verify: perturb the named check's harness")
    ap.add_argument("--checks", type=lambda s: [t for t in s.split(",") if t],
                    help="verify: comma-separated subset of checks")
    return ap


def resolve_config(args: argparse.Namespace) -> RunConfig:
    merged = dict(DEFAULTS[args.subcommand])
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParameterError(f"cannot read config {args.config}: {exc}") from exc
        known = {f.name for f in fields(RunConfig)} - {"subcommand"}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        merged.update(data)
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if f.name != "subcommand" and v is not None:
            merged[f.name] = v
    cfg = RunConfig(args.subcommand, **merged)
    if cfg.out is None:
        cfg.out = str(Path("runs") / cfg.subcommand)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Reject parameters outside each subcommand's regime before any computation."""
    sc = cfg.subcommand
    if cfg.strategies is not None:
        bad = [s for s in cfg.strategies if s not in STRATEGIES]
        if bad or not cfg.strategies:
            raise ParameterError(f"unknown strategies {bad}; choose from {list(STRATEGIES)}")
    for name in ("tau", "eta", "bound"):
        v = getattr(cfg, name)
        if v is not None and not (v >= 0 and math.isfinite(v)):
            raise ParameterError(f"--{name} must be a finite non-negative number")
    if cfg.eta is not None and cfg.eta == 0:
        raise ParameterError("--eta must be positive")
    if sc == "verify":
        if cfg.inject_fault is not None and cfg.inject_fault not in FAULTS:
            raise ParameterError(f"--inject-fault supports {sorted(FAULTS)}")
        if cfg.checks is not None and any(c not in REGISTRY for c in cfg.checks):
            raise ParameterError(f"--checks must be a subset of {list(REGISTRY)}")
    elif sc in ("sep1", "sep3"):
        if not 0 < cfg.alpha < 1:
            raise ParameterError(f"{sc} needs alpha in (0, 1)")
    elif sc == "sep2":
        if not 4 <= cfg.n <= 20:
            raise ParameterError("sep2 needs 4 <= n <= 20")
        if cfg.alpha is not None and not 0 < cfg.alpha < 0.5:
            raise ParameterError("sep2 needs alpha in (0, 1/2)")
    elif sc == "sep4":
        if not 2 <= cfg.n <= 10 or not 0 < cfg.alpha < 0.5:
            raise ParameterError("sep4 needs 2 <= n <= 10 and alpha in (0, 1/2)")
    elif sc == "relu-demo":
        if cfg.full:
            cfg.n, cfg.k = 128, 7
        if not 2 <= cfg.k <= cfg.n or not 0 <= cfg.alpha < 1 or cfg.steps < 1:
            raise ParameterError("relu-demo needs 2 <= k <= n, alpha in [0, 1), steps >= 1")
    elif sc == "compile-check":
        if not 1 <= cfg.n <= 20:
            raise ParameterError("compile-check needs 1 <= n <= 20")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        wr.writerows(rows)


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    results = run_checks(cfg.checks, inject_fault=cfg.inject_fault,
                         on_result=lambda r: print(r.line(), flush=True))
    _write_csv(out / "checks.csv", ["check", "passed [bool]", "value [check units]", "threshold [check units]", "detail"],
               [[r.name, r.passed, _fmt(r.value), _fmt(r.threshold), r.detail] for r in results])
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}", file=sys.stderr)
        return 1
    print(f"all {len(results)} checks passed")
    return 0


def cmd_sep(cfg: RunConfig, out: Path) -> int:
    params = {"tau": cfg.tau, "eta": cfg.eta, "strategies": cfg.strategies, "bound": cfg.bound}
    if cfg.seed is not None:
        params["seed"] = cfg.seed
    kind = cfg.subcommand
    if kind == "sep1":
        params["gamma"] = cfg.alpha / 2
    elif kind == "sep2":
        params["n"] = cfg.n
        if cfg.alpha is not None:
            params["gamma"] = cfg.alpha
    elif kind == "sep3":
        params["eps"] = cfg.alpha
    else:
        params.update(n=cfg.n, eps=cfg.alpha)
    rep = separation_report(kind, {k: v for k, v in params.items() if v is not None})
    (out / "report.md").write_text(rep.to_markdown())
    _write_csv(out / "report.csv", ["quantity", "value [loss or edge units]", "claim", "check"],
               [[q, _fmt(v), c, "-" if ok is None else ("pass" if ok else "FAIL")] for q, v, c, ok in rep.rows])
    ntk = [(q, v) for q, v, _, _ in rep.rows if q.startswith(("NTK loss, B=", "NTK edge, B="))]
    if ntk:
        Bs = [float(q.split("B=")[1]) for q, _ in ntk]
        finite = [(B, v) for B, v in zip(Bs, (v for _, v in ntk)) if math.isfinite(B)]
        if finite:
            label = "tangent-kernel loss" if ntk[0][0].startswith("NTK loss") else "tangent-kernel edge"
            (out / "ntk_sweep.svg").write_text(line_plot(
                {label: ([b for b, _ in finite], [v for _, v in finite])},
                title=f"{kind}: tangent kernel at initialization", xlabel="norm bound B", ylabel=label,
                logx=True, hlines={"null predictor (loss 1/2)": 0.5} if "loss" in label else None))
    if kind in ("sep2", "sep4"):
        n = cfg.n
        P = bsp_family_size(n, max(2, math.ceil(math.log2(n)))) if kind == "sep2" else lp_family_size(n)
        ps = [2 ** j for j in range(0, 2 * n + 1)]
        rows = [[p, _fmt(min(0.5, dimension_edge_bound(p, P)))] for p in ps]
        _write_csv(out / "kernel_bound.csv", ["p [features]", "edge_ceiling [edge]"], rows)
        (out / "kernel_bound.svg").write_text(line_plot(
            {"p/(2|P|)": (ps, [min(0.5, dimension_edge_bound(p, P)) for p in ps])},
            title=f"{kind}: dimension edge ceiling, |P|={P}", xlabel="feature dimension p",
            ylabel="max average edge", logx=True))
    print(rep.to_markdown())
    return 0 if rep.passed else 1


def cmd_relu_demo(cfg: RunConfig, out: Path) -> int:
    rc = ReluDemoConfig(n=cfg.n, k=cfg.k, alphas=(cfg.alpha, 0.0) if cfg.alpha > 0 else (0.0,),
                        seeds=20 if cfg.full else 5, steps=cfg.steps, base_seed=cfg.seed or 0)
    curves = relu_demo(rc)
    rows, series = [], {}
    for (alpha, seed), c in sorted(curves.items(), key=lambda kv: (-kv[0][0], kv[0][1])):
        for s, acc, L in zip(c.steps, c.test_accuracy, c.train_loss):
            rows.append([_fmt(alpha), seed, s, _fmt(acc), "" if math.isnan(L) else _fmt(L)])
    _write_csv(out / "curves.csv", ["alpha", "seed", "step [iterations]", "test_accuracy [fraction]",
                                    "train_loss [square loss, window mean]"], rows)
    summary = []
    for alpha in rc.alphas:
        per = [curves[(alpha, s)] for s in range(rc.seeds)]
        mean = np.mean([c.test_accuracy for c in per], axis=0)
        series[f"alpha={alpha} mean"] = (per[0].steps, list(mean))
        best = max(c.best_accuracy for c in per)
        hits = sum(c.best_accuracy >= 0.95 for c in per)
        summary.append([_fmt(alpha), rc.seeds, hits, _fmt(best), _fmt(float(mean[-1]))])
    _write_csv(out / "summary.csv", ["alpha", "runs [count]", "runs_reaching_0.95 [count]",
                                     "best_accuracy [fraction]", "final_mean_accuracy [fraction]"], summary)
    (out / "accuracy.svg").write_text(line_plot(
        series, title=f"two-layer ReLU, n={rc.n}, k={rc.k}, width {rc.width}", xlabel="step",
        ylabel="test accuracy", ylim=(0.4, 1.0), hlines={"chance": 0.5}))
    hits = {float(r[0]): r[2] for r in summary}
    best = {float(r[0]): float(r[3]) for r in summary}
    ok = best.get(0.0, 0.0) <= 0.6 and (cfg.alpha == 0 or hits.get(cfg.alpha, 0) >= 1)
    for r in summary:
        print(f"alpha={r[0]}: {r[2]}/{r[1]} runs >= 0.95, best {float(r[3]):.3f}")
    return 0 if ok else 1


def cmd_compile_check(cfg: RunConfig, out: Path) -> int:
    n = cfg.n
    net = compile_product_net(n)
    codes = np.arange(1 << n, dtype=np.int64)
    signs = np.where((codes[:, None] >> np.arange(n)) & 1, 1.0, -1.0)
    err_signs = float(np.max(np.abs(eval_sigma_net(net, signs) - np.prod(signs, axis=1))))
    U = np.random.default_rng(cfg.seed).uniform(-1, 1, (10_000, n))
    err_rand = float(np.max(np.abs(eval_sigma_net(net, U) - np.prod(U, axis=1))))
    ok = max(err_signs, err_rand) <= 1e-9 and net.depth <= depth_bound(n)
    _write_csv(out / "compile_check.csv",
               ["n [inputs]", "depth [sigma layers]", "depth_bound [sigma layers]", "edges [count]",
                "sigma_units [count]", "max_err_signs [abs]", "max_err_random [abs]", "passed [bool]"],
               [[n, net.depth, depth_bound(n), net.edge_count, net.sigma_units, _fmt(err_signs),
                 _fmt(err_rand), ok]])
    (out / "net.dot").write_text(net.to_dot() + "\n")
    print(f"n={n} depth={net.depth} edges={net.edge_count} max error {max(err_signs, err_rand):.3g}: "
          f"{'ok' if ok else 'MISMATCH'}")
    return 0 if ok else 1


COMMANDS = {"verify": cmd_verify, "sep1": cmd_sep, "sep2": cmd_sep, "sep3": cmd_sep, "sep4": cmd_sep,
            "relu-demo": cmd_relu_demo, "compile-check": cmd_compile_check}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
    except (ParameterError, TypeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(asdict(cfg), indent=2, sort_keys=True) + "\n")
    return COMMANDS[cfg.subcommand](cfg, out)


if __name__ == "__main__":
    sys.exit(main())
