import math

import numpy as np
import pytest

from eblab.hermite import (
    MAX_HERMITE_DEGREE,
    HermiteSeries,
    _arcsine_rule_gap_exact,
    alpha_bounds_hold,
    expansion_coefficients,
    hermite_eval,
    moment_gap_table,
    prior_moment,
    split_prior_tail,
    truncation_error,
)
from eblab.mixtures import DiscretePrior
from eblab.quadrature import IntegrationSpec, arcsine_moment, chebyshev_rule, hermite_rule, integrate_line


def _random_prior(rng, bound, max_atoms=5):
    size = int(rng.integers(1, max_atoms + 1))
    atoms = np.sort(rng.uniform(-bound, bound, size=size))
    while np.any(np.diff(atoms) < 1e-8):
        atoms = np.sort(rng.uniform(-bound, bound, size=size))
    weights = rng.dirichlet(np.ones(size))
    return DiscretePrior(atoms, weights)


def test_hermite_eval_low_degrees():
    ys = np.linspace(-3.0, 3.0, 11)
    assert np.allclose(hermite_eval(0, ys), 1.0)
    assert np.allclose(hermite_eval(1, ys), ys)
    assert np.allclose(hermite_eval(2, ys), ys**2 - 1.0)
    assert np.allclose(hermite_eval(3, ys), ys**3 - 3.0 * ys)
    assert np.allclose(hermite_eval(4, ys), ys**4 - 6.0 * ys**2 + 3.0)
    assert isinstance(hermite_eval(3, 0.5), float)
    with pytest.raises(ValueError):
        hermite_eval(-1, 0.0)
    with pytest.raises(ValueError):
        hermite_eval(MAX_HERMITE_DEGREE + 1, 0.0)


def test_hermite_orthogonality_under_gaussian_rule():
    # int H_i H_j phi = j! 1{i == j}, checked with a 60-point Gauss rule
    rule = hermite_rule(60)
    vals = np.array([hermite_eval(j, rule.nodes) for j in range(16)])
    gram = (vals * rule.weights) @ vals.T
    expected = np.diag([math.factorial(j) for j in range(16)])
    assert np.max(np.abs(gram - expected) / np.maximum(expected.diagonal()[:, None], 1.0)) <= 1e-9


def test_prior_moment_direct():
    prior = DiscretePrior([-1.0, 2.0], [0.75, 0.25])
    assert prior_moment(prior, 0) == 1.0
    assert abs(prior_moment(prior, 1) - (-0.75 + 0.5)) <= 1e-15
    assert abs(prior_moment(prior, 3) - (0.75 * (-1.0) + 0.25 * 8.0)) <= 1e-15
    with pytest.raises(ValueError):
        prior_moment(prior, -2)


def test_expansion_coefficients_match_moment_gaps():
    g = DiscretePrior([-1.0, 1.2], [0.4, 0.6])
    h = DiscretePrior([0.3], [1.0])
    series = expansion_coefficients(g, h, 12)
    assert series.degree == 12
    assert series.coefficients[0] == 0.0  # both priors have unit mass
    for j in range(1, 13):
        direct = (prior_moment(g, j) - prior_moment(h, j)) / math.factorial(j)
        assert abs(series.coefficients[j] - direct) <= 1e-14 * max(1.0, abs(direct))
    with pytest.raises(ValueError):
        HermiteSeries(coefficients=np.zeros(3), degree=5)


def test_series_evaluate_start_drops_leading_terms():
    rng = np.random.default_rng(5)
    coeffs = rng.normal(size=7)
    series = HermiteSeries(coefficients=coeffs, degree=6)
    ys = np.linspace(-2.0, 2.0, 9)
    head = sum(coeffs[j] * hermite_eval(j, ys) for j in range(3))
    assert np.allclose(series.evaluate(ys, start=3), series.evaluate(ys) - head, atol=1e-12)
    assert isinstance(series.evaluate(0.7), float)


def test_truncation_error_matches_parseval_integral():
    # independent route: integrate the squared series tail against phi
    rng = np.random.default_rng(99)
    full_degree = 60
    for k in (4, 9):
        g = _random_prior(rng, 1.5)
        h = _random_prior(rng, 1.5)
        err_g, err_gp = truncation_error(g, h, k)
        series = expansion_coefficients(g, h, full_degree)
        deriv = np.zeros(full_degree)
        js = np.arange(1, full_degree + 1)
        deriv[js - 1] = js * series.coefficients[1:]
        deriv[: k] = 0.0  # keep only degrees > k of the original series
        dseries = HermiteSeries(coefficients=deriv, degree=full_degree - 1)
        radius = 1.5 + math.sqrt(4.0 * (full_degree + 2) + 2.0) + 6.0
        spec = IntegrationSpec(abs_tol=0.0, rel_tol=1e-10, truncation_radius=radius)

        def tail_sq(y):
            t = series.evaluate(y, start=k + 1)
            return t * t * np.exp(-0.5 * y**2) / math.sqrt(2.0 * math.pi)

        def tail_deriv_sq(y):
            t = dseries.evaluate(y, start=k)
            return t * t * np.exp(-0.5 * y**2) / math.sqrt(2.0 * math.pi)

        assert abs(integrate_line(tail_sq, spec) - err_g) <= 1e-8 * err_g + 1e-18
        assert abs(integrate_line(tail_deriv_sq, spec) - err_gp) <= 1e-8 * err_gp + 1e-18


def test_truncation_error_decreases_and_handles_degenerate_input():
    g = DiscretePrior([-1.0, 1.0], [0.5, 0.5])
    h = DiscretePrior([0.0], [1.0])
    errs = [truncation_error(g, h, k)[1] for k in (2, 6, 12, 24)]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert truncation_error(DiscretePrior([0.0], [1.0]), DiscretePrior([0.0], [1.0]), 3) == (0.0, 0.0)
    with pytest.raises(ValueError):
        truncation_error(g, h, -1)


def test_arcsine_rule_gap_structure():
    m = 3
    rule = chebyshev_rule(m)
    for j in range(0, 21):
        exact = _arcsine_rule_gap_exact(m, j)
        numeric = arcsine_moment(j) - float(np.dot(rule.weights, rule.nodes**j))
        assert abs(exact - numeric) <= 1e-14
        if j % 2 == 1 or j < 2 * m:
            assert exact == 0.0
    assert _arcsine_rule_gap_exact(m, 2 * m) == 2.0 ** (1 - 2 * m)


def test_moment_gap_table_sums_and_validation():
    table = moment_gap_table(4, j_max=120)
    assert table.m == 4 and table.j_max == 120
    alpha = sum(
        0.25 * table.gaps[j] ** 2 / math.factorial(j) for j in range(8, 121)
    )
    beta = sum(
        0.25 * table.gaps[j] ** 2 / math.factorial(j - 1) for j in range(8, 121)
    )
    assert abs(table.alpha_m - alpha) <= 1e-12 * alpha
    assert abs(table.beta_m - beta) <= 1e-12 * beta
    assert table.alpha_remainder >= 0.0 and table.beta_remainder >= 0.0
    with pytest.raises(ValueError):
        moment_gap_table(0)
    with pytest.raises(ValueError):
        moment_gap_table(5, j_max=9)


def test_alpha_bounds_hold_for_small_rules():
    for m in range(1, 11):
        assert alpha_bounds_hold(moment_gap_table(m))


def test_split_prior_tail_partitions_mass():
    prior = DiscretePrior([-2.0, -0.5, 0.1, 3.0], [0.1, 0.2, 0.3, 0.4])
    bulk, tail = split_prior_tail(prior, 1.0)
    assert np.array_equal(bulk.atoms, [-0.5, 0.1])
    assert np.array_equal(tail.atoms, [-2.0, 3.0])
    assert abs(bulk.mass + tail.mass - 1.0) <= 1e-15
    with pytest.raises(ValueError):
        split_prior_tail(prior, -0.1)
