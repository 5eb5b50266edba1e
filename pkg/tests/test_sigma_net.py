import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from ntksep.errors import DomainError, ParameterError
from ntksep.models import gate_S, product_H
from ntksep.sigma_net import (compile_product_net, depth_bound, eval_sigma_net, gate_S_net,
                              product_H_net, square_gadget)


@given(st.floats(-2, 2))
def test_square_gadget(z):
    assert square_gadget(z) == pytest.approx(z * z, abs=1e-14)


@given(st.integers(1, 12).flatmap(lambda n: st.lists(st.floats(-1, 1), min_size=n, max_size=n)))
def test_product_net_matches_direct_product(u):
    net = compile_product_net(len(u))
    assert eval_sigma_net(net, np.array(u)) == pytest.approx(oracles.product_direct(u), abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 7, 16, 33])
def test_depth_and_size(n):
    net = compile_product_net(n)
    assert net.depth == depth_bound(n)
    assert net.edge_count == 14 * (n - 1)
    assert net.sigma_units == 6 * (n - 1)


def test_domain_errors():
    net = compile_product_net(3)
    with pytest.raises(DomainError):
        eval_sigma_net(net, np.array([0.5, 1.5, 0.0]))
    with pytest.raises(ParameterError):
        eval_sigma_net(net, np.zeros(4))
    with pytest.raises(ParameterError):
        compile_product_net(0)


def test_gate_and_product_nets_on_ternary():
    rng = np.random.default_rng(0)
    s = rng.choice([-1.0, 0.0, 1.0], size=(200, 6))
    net = compile_product_net(6)
    assert np.allclose(gate_S_net(net, s), gate_S(s), atol=1e-12)
    assert np.allclose(product_H_net(net, s), product_H(s), atol=1e-12)


def test_dot_export():
    dot = compile_product_net(4).to_dot()
    assert dot.startswith("digraph") and dot.count("->") == 14 * 3
