import json
import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from ntksep.bounds import (NORM_BOUND_CONSTANT, FeatureMapSpec, bsp_family, bsp_family_size,
                           calibrate_norm_constant, dimension_edge_bound, family_edge_audit,
                           gaussian_table_map, indicator_edge, indicator_map, lp_family, lp_family_size,
                           norm_edge_bound, parity_map, quadratic_map, rotated, separation_report)
from ntksep.errors import CapacityError, ParameterError
from ntksep.problems import SupportSet, encode, enumerate_lp, uniform_parity


def test_dimension_bound():
    assert dimension_edge_bound(16, 28) == 16 / 56
    with pytest.raises(ParameterError):
        dimension_edge_bound(1, 0)


@given(st.floats(0.01, 100), st.integers(1, 1000))
def test_norm_bound_scaling(B, P):
    base = norm_edge_bound(B, P)
    assert norm_edge_bound(B, 8 * P) == pytest.approx(base / 2, rel=1e-12)
    assert norm_edge_bound(8 * B, P) == pytest.approx(4 * base, rel=1e-12)
    assert norm_edge_bound(B, P, c=1.0) == pytest.approx(B ** (2 / 3) / P ** (1 / 3), rel=1e-12)


def test_norm_bound_validation():
    with pytest.raises(ParameterError):
        norm_edge_bound(-1.0, 4)
    with pytest.raises(ParameterError):
        norm_edge_bound(1.0, 4, c=0.0)


@pytest.mark.parametrize("n", [2, 5, 8])
def test_family_sizes(n):
    assert bsp_family_size(n, 2) == len(list(combinations(range(n), 2))) == len(bsp_family(n, 2, 0.1))
    assert lp_family_size(n) == sum(1 for r in range(2, n + 1) for _ in combinations(range(n), r))
    assert lp_family_size(n) == len(lp_family(n, 0.1))


def test_randomized_audit_is_weighted_mean():
    fam = bsp_family(6, 2, 0.3)
    maps = [gaussian_table_map(6, 4, s) for s in range(3)]
    for m, w in zip(maps, (1.0, 2.0, 5.0)):
        m.weight = w
    mixed = family_edge_audit(maps, fam, B=2.0)
    single = [family_edge_audit(m, fam, B=2.0).edges for m in maps]
    expected = (1 * single[0] + 2 * single[1] + 5 * single[2]) / 8
    assert np.max(np.abs(mixed.edges - expected)) <= 1e-12


def test_audit_edge_matches_oracle_solver():
    fam = bsp_family(5, 2, 0.2)[:3]
    spec = gaussian_table_map(5, 3, 7)
    rep = family_edge_audit(spec, fam, B=1.5, uniform_check=False)
    for mu, e in zip(fam, rep.edges):
        Phi = spec(mu.points)
        R = np.sqrt(np.max(np.sum(Phi ** 2, axis=1)))
        w = oracles.ball_least_squares(Phi, mu.weights, mu.label_mean, 1.5 / R)
        assert e == pytest.approx(oracles.edge_of(Phi, w, list(zip(mu.weights, mu.p_plus))), abs=1e-9)


@pytest.mark.parametrize("alpha", [0.05, 0.3])
def test_parity_map_on_leaky_family(alpha):
    n = 5
    J = SupportSet((1, 3, 4), n)
    fam = lp_family(n, alpha)
    rep = family_edge_audit(parity_map(n, [J]), fam, uniform_check=False)
    for name, mu, e in zip(rep.instances, fam, rep.edges):
        if mu.meta["support"] == J:
            # the leak atom x^J is labeled by a fair coin, so chi_J is wrong there half the time
            assert e == pytest.approx((1 - alpha) ** 2 / 2, abs=1e-12)
            Phi = parity_map(n, [J])(mu.points)
            w = oracles.ball_least_squares(Phi, mu.weights, mu.label_mean, 1e9)
            assert e == pytest.approx(oracles.edge_of(Phi, w, list(zip(mu.weights, mu.p_plus))), abs=1e-9)
        else:
            assert abs(e) <= 1e-12


def test_parity_map_solves_its_biased_instance():
    fam = bsp_family(5, 2, 0.4)
    J = fam[3].meta["support"]
    rep = family_edge_audit(parity_map(5, [J]), fam, uniform_check=False)
    assert rep.edges[3] == pytest.approx(0.5, abs=1e-12)


def test_quadratic_map_meets_dimension_bound_with_equality():
    n, p = 8, 16
    rep = family_edge_audit(quadratic_map(n, p, 0), bsp_family(n, 2, 0.2))
    assert rep.uniform_average == pytest.approx(16 / 56, abs=1e-10)
    assert rep.within_dimension_bound


@pytest.mark.parametrize("p", [1, 5, 12])
def test_indicator_edge(p):
    n, alpha = 5, 0.2
    I = SupportSet((0, 2), n)
    mu = enumerate_lp(n, I, alpha)
    leak = encode(I.leak_atom())
    codes = [c for c in range(2 ** n) if c != leak][:p]
    rep = family_edge_audit(indicator_map(n, codes), [mu], uniform_check=False)
    assert rep.edges[0] == pytest.approx(indicator_edge(n, p, alpha), abs=1e-14)
    assert indicator_edge(n, p, alpha) == (1 - alpha) * p / 2 ** (n + 1)


@given(st.integers(0, 1000))
def test_audit_rotation_invariant(seed):
    fam = bsp_family(4, 2, 0.3)
    spec = gaussian_table_map(4, 3, seed)
    U, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((3, 3)))
    a = family_edge_audit(spec, fam, B=1.0)
    b = family_edge_audit(rotated(spec, U), fam, B=1.0)
    assert np.max(np.abs(a.edges - b.edges)) <= 1e-9


def test_gaussian_maps_within_dimension_bound():
    fam = bsp_family(6, 2, 0.2)
    for s in range(5):
        assert family_edge_audit(gaussian_table_map(6, 4, s), fam).within_dimension_bound


def test_packaged_norm_constant_covers_calibration_subset():
    c, rows = calibrate_norm_constant(trials=2)
    assert len(rows) == 2 * 11
    assert c <= NORM_BOUND_CONSTANT


def test_report_outputs(tmp_path):
    rep = family_edge_audit(gaussian_table_map(4, 2, 0), bsp_family(4, 2, 0.1), B=1.0)
    rep.to_csv(tmp_path / "a.csv")
    rep.to_json(tmp_path / "a.json")
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "I,edge,uniform_edge" and len(lines) == 7
    summary = json.loads((tmp_path / "a.json").read_text())
    assert summary["family_size"] == 6 and summary["dimension_bound"] == 2 / 12


def test_validation_errors():
    with pytest.raises(CapacityError):
        bsp_family(13, 2, 0.1)
    with pytest.raises(CapacityError):
        lp_family(11, 0.1)
    bad = FeatureMapSpec(3, lambda X: np.zeros((len(X), 2)), name="bad")
    with pytest.raises(ParameterError):
        bad(np.ones((1, 4)))
    with pytest.raises(ParameterError):
        family_edge_audit([], bsp_family(4, 2, 0.1))


@pytest.mark.parametrize("kind,params", [
    ("sep1", {}), ("sep2", {"n": 8}), ("sep3", {}), ("sep4", {"n": 6}),
])
def test_separation_reports_pass(kind, params):
    rep = separation_report(kind, params)
    assert rep.passed, rep.to_markdown()
    assert rep.to_markdown().count("\n") >= len(rep.rows)


def test_separation_report_unknown_kind():
    with pytest.raises(ParameterError):
        separation_report("sep9", {})


def test_uniform_edge_of_own_parity():
    # the uniform-marginal parity is fit exactly by its own character
    J = SupportSet((0, 1, 2), 4)
    rep = family_edge_audit(parity_map(4, [J]), [uniform_parity(4, J)], uniform_check=False)
    assert rep.edges[0] == pytest.approx(0.5, abs=1e-14)
    assert math.isinf(rep.norm_bound)
