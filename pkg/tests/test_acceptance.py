"""Acceptance gate: one test per criterion, each at its stated tolerance.

A pass/fail line per criterion is printed in the terminal summary.
"""

import time

import pytest

from ntksep import checks


def _run(fn, **kw):
    t = time.perf_counter()
    res = fn(**kw)
    res.seconds = time.perf_counter() - t
    print(res.line())
    return res


@pytest.mark.criterion(1, "one-step GD solves all 56 biased sparse parities (n=8, k=3)")
def test_criterion_1_claim31():
    res = _run(checks.check_claim31, n=8, k=3, alphas=(0.1, 0.5))
    assert res.passed, res.detail
    assert res.value <= 1e-12
    assert res.seconds < 10


@pytest.mark.criterion(2, "linear-parity edge closed form, NTK loss floor and edge lower bound")
def test_criterion_2_claim32():
    res = _run(checks.check_claim32, ns=range(2, 11), ks=(2, 3), alphas=(0.1, 0.3, 0.5))
    assert res.passed, res.detail
    assert res.value <= 1e-9


@pytest.mark.criterion(3, "leaky parity: GD loss alpha, zero tangent-kernel edge at init")
def test_criterion_3_claim51():
    res = _run(checks.check_claim51, ns=range(2, 11), alphas=(0.05, 0.1, 0.2))
    assert res.passed, res.detail
    assert res.value <= 1e-12


@pytest.mark.criterion(4, "tangent-kernel improvement witness, 1000 randomized cases")
def test_criterion_4_thm1():
    res = _run(checks.check_thm1, cases=1000)
    assert res.passed, res.detail
    assert res.value <= 1e-10
    assert res.extra["unbiased"] > 0
    assert res.seconds < 60


@pytest.mark.criterion(5, "average tangent edge along zero-label iterates exceeds gamma'")
def test_criterion_5_thm2():
    res = _run(checks.check_thm2, max_n=8, alphas=(0.1, 0.2))
    assert res.passed, res.detail
    assert res.value > 0


@pytest.mark.criterion(6, "random 16-dim kernels within p/(2|P|); indicator edge exact")
def test_criterion_6_kernel_audit():
    res = _run(checks.check_kernel_audit, trials=20, n=8, k=2, p=16)
    assert res.passed, res.detail
    assert res.value <= 1e-8


@pytest.mark.criterion(7, "product network exact on 2^16 signs and 10^4 random inputs")
def test_criterion_7_sigma_net():
    res = _run(checks.check_sigma_net, n=16, random_inputs=10_000)
    assert res.passed, res.detail
    assert res.value <= 1e-9


@pytest.mark.criterion(8, "analytic gradients match finite differences, 1000 probes per model")
def test_criterion_8_gradients():
    res = _run(checks.check_gradients, probes=1000)
    assert res.passed, res.detail
    assert res.value <= 1e-5


@pytest.mark.criterion(9, "ReLU net learns the biased parity, not the unbiased one")
def test_criterion_9_relu_demo():
    res = _run(checks.check_relu_demo, cfg=checks.ReluDemoConfig(stop_at=0.95))
    assert res.passed, res.detail
    assert res.seconds <= 600
