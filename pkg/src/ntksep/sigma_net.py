"""Product networks built from the piecewise-quadratic sigmoid.

Squares on [-r, r] come from z^2 = 2 r^2 (sigma(z / 2r) + sigma(-z / 2r)), and
pair products from uv = ((u + v)^2 - u^2 - v^2) / 2. A balanced binary tree of
pair products multiplies n inputs in ceil(log2 n) sigma layers with
14 (n - 1) edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError
from .models import sigma

PAIR_RADIUS = 2.0


def square_gadget(z, r: float = PAIR_RADIUS):
    """z^2 for |z| <= r using two sigma units."""
    z = np.asarray(z, dtype=float)
    return 2.0 * r * r * (sigma(z / (2 * r)) + sigma(-z / (2 * r)))


@dataclass(frozen=True)
class Node:
    kind: str  # "input" | "sigma" | "linear"
    inputs: tuple[tuple[int, float], ...] = ()
    bias: float = 0.0
    layer: int = 0


@dataclass
class SigmaNet:
    n: int
    nodes: list[Node] = field(default_factory=list)
    output: int = -1

    @property
    def depth(self) -> int:
        """Number of sigma layers on the longest input-output path."""
        return max((nd.layer for nd in self.nodes), default=0)

    @property
    def edge_count(self) -> int:
        return sum(len(nd.inputs) for nd in self.nodes)

    @property
    def sigma_units(self) -> int:
        return sum(nd.kind == "sigma" for nd in self.nodes)

    def _add(self, node: Node) -> int:
        self.nodes.append(node)
        return len(self.nodes) - 1

    def to_dot(self) -> str:
        lines = ["digraph sigma_net {", "  rankdir=LR;"]
        shapes = {"input": "box", "sigma": "circle", "linear": "diamond"}
        for i, nd in enumerate(self.nodes):
            label = f"x{i}" if nd.kind == "input" else ("s" if nd.kind == "sigma" else "+")
            extra = ", peripheries=2" if i == self.output else ""
            lines.append(f'  n{i} [label="{label}", shape={shapes[nd.kind]}{extra}];')
        for i, nd in enumerate(self.nodes):
            for j, w in nd.inputs:
                lines.append(f'  n{j} -> n{i} [label="{w:.4g}"];')
        lines.append("}")
        return "\n".join(lines)


def _pair_product(net: SigmaNet, u: int, v: int, r: float) -> int:
    lu, lv = net.nodes[u].layer, net.nodes[v].layer
    layer = max(lu, lv) + 1
    s = 1.0 / (2 * r)
    units = []
    for terms, sign in (([(u, s), (v, s)], 1.0), ([(u, -s), (v, -s)], 1.0),
                        ([(u, s)], -1.0), ([(u, -s)], -1.0),
                        ([(v, s)], -1.0), ([(v, -s)], -1.0)):
        units.append((net._add(Node("sigma", tuple(terms), layer=layer)), sign))
    # uv = r^2 * [sigma(+(u+v)) + sigma(-(u+v)) - sigma(+u) - sigma(-u) - sigma(+v) - sigma(-v)]
    return net._add(Node("linear", tuple((k, sign * r * r) for k, sign in units), layer=layer))


def compile_product_net(n: int, r: float = PAIR_RADIUS) -> SigmaNet:
    """Net computing prod(inputs) for inputs in [-1, 1]^n."""
    if n < 1:
        raise ParameterError(f"need n >= 1, got {n}")
    net = SigmaNet(n)
    level = [net._add(Node("input")) for _ in range(n)]
    while len(level) > 1:
        nxt = [_pair_product(net, level[i], level[i + 1], r) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    net.output = level[0]
    return net


def eval_sigma_net(net: SigmaNet, inputs) -> np.ndarray:
    """Evaluate on a batch (m, n) or a single vector; inputs must lie in [-1, 1]."""
    X = np.asarray(inputs, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != net.n:
        raise ParameterError(f"expected {net.n} inputs, got {X.shape[1]}")
    if np.any(np.abs(X) > 1.0) or not np.all(np.isfinite(X)):
        raise DomainError("inputs must lie in [-1, 1]")
    vals: list[np.ndarray] = []
    col = 0
    for nd in net.nodes:
        if nd.kind == "input":
            vals.append(X[:, col])
            col += 1
            continue
        pre = nd.bias + sum(w * vals[j] for j, w in nd.inputs)
        vals.append(sigma(pre) if nd.kind == "sigma" else pre)
    out = vals[net.output]
    return out[0] if single else out


def depth_bound(n: int) -> int:
    return math.ceil(math.log2(n)) if n > 1 else 0


def gate_S_net(net: SigmaNet, s) -> np.ndarray:
    """S(s) = 1 - prod(1 - s_i^2) with squares and the product done by sigma units."""
    s = np.atleast_2d(np.asarray(s, dtype=float))
    return 1.0 - eval_sigma_net(net, 1.0 - square_gadget(s, 1.0))


def product_H_net(net: SigmaNet, s) -> np.ndarray:
    """H(s) = prod(1 + s_i - s_i^2); exact for s in {-1, 0, 1}^n, where every factor is +-1 or 1."""
    s = np.atleast_2d(np.asarray(s, dtype=float))
    return eval_sigma_net(net, 1.0 + s - square_gadget(s, 1.0))
