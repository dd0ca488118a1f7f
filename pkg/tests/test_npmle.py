import numpy as np
import pytest

from eblab.mixtures import DiscretePrior, MarginalModel
from eblab.npmle import (
    NotConverged,
    NpmleProblem,
    NpmleSolution,
    cell_rng,
    empirical_regret_experiment,
    gradient_certificate,
    sample_observations,
    solve_npmle,
)

TRUE_PRIOR = DiscretePrior([-1.0, 1.0], [0.5, 0.5])


def _small_problem(seed=3, n=150, **kwargs):
    rng = cell_rng(seed, n)
    y = sample_observations(TRUE_PRIOR, n, rng)
    return NpmleProblem.from_observations(y, grid_size=120, **kwargs)


def test_solver_meets_certificate_and_ascends():
    problem = _small_problem()
    solution = solve_npmle(problem)
    assert solution.gradient_cert <= 1.0 + problem.tol
    trace = solution.loglik_trace
    assert np.all(np.diff(trace) >= -1e-12)  # ascent, up to roundoff
    assert solution.iterations == trace.size
    assert abs(float(np.sum(solution.prior.weights)) - 1.0) <= 1e-12
    assert solution.prior.atoms.min() >= problem.grid[0]
    assert solution.prior.atoms.max() <= problem.grid[-1]
    # reported loglik is the mean log density of the pruned prior
    model = MarginalModel(solution.prior)
    recomputed = float(np.mean(model.log_density(problem.observations)))
    assert abs(recomputed - solution.loglik) <= 1e-10
    # pruning tiny atoms must not break the certificate
    assert abs(gradient_certificate(solution, problem) - solution.gradient_cert) <= 1e-9


def test_no_grid_reweighting_beats_the_fit():
    problem = _small_problem(seed=11)
    solution = solve_npmle(problem)
    kernel = np.exp(-0.5 * (problem.observations[:, None] - problem.grid[None, :]) ** 2)
    kernel /= np.sqrt(2.0 * np.pi)
    rng = np.random.default_rng(0)
    for _ in range(100):
        w = rng.dirichlet(np.ones(problem.grid.size))
        ll = float(np.mean(np.log(kernel @ w)))
        assert ll <= solution.loglik + 1e-9


def test_budget_exhaustion_carries_partial_solution():
    problem = _small_problem(max_iters=3)
    with pytest.raises(NotConverged) as info:
        solve_npmle(problem)
    partial = info.value.solution
    assert isinstance(partial, NpmleSolution)
    assert partial.iterations == 3
    assert partial.gradient_cert > 1.0 + problem.tol


def test_problem_validation():
    with pytest.raises(ValueError):
        NpmleProblem(observations=[], grid=[0.0, 1.0])
    with pytest.raises(ValueError):
        NpmleProblem(observations=[np.inf], grid=[0.0, 1.0])
    with pytest.raises(ValueError):
        NpmleProblem(observations=[0.0], grid=[1.0, 1.0])
    with pytest.raises(ValueError):
        NpmleProblem(observations=[0.0], grid=[0.0, 1.0], tol=0.0)
    with pytest.raises(ValueError):
        NpmleProblem.from_observations([0.0, 1.0], constrained=True)


def test_observation_stranded_off_grid_raises():
    y = np.array([0.0, 0.5, 60.0])
    problem = NpmleProblem(observations=y, grid=np.linspace(-1.0, 1.0, 50))
    with pytest.raises(ValueError):
        solve_npmle(problem)


def test_constrained_grid_respects_bound():
    problem = _small_problem(constrained=True, mprime=0.8)
    assert problem.grid[0] == -0.8
    assert problem.grid[-1] == 0.8
    solution = solve_npmle(problem)
    assert np.max(np.abs(solution.prior.atoms)) <= 0.8


def test_degenerate_sample_gets_padded_grid():
    problem = NpmleProblem.from_observations(np.zeros(5), grid_size=30)
    assert problem.grid[0] == -1.0 and problem.grid[-1] == 1.0
    solution = solve_npmle(problem)
    assert solution.gradient_cert <= 1.0 + problem.tol


def test_cell_rng_streams_are_stable_and_distinct():
    a = cell_rng(0, 1, 2).standard_normal(4)
    b = cell_rng(0, 1, 2).standard_normal(4)
    c = cell_rng(0, 2, 1).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sample_observations_shape_and_determinism():
    y1 = sample_observations(TRUE_PRIOR, 37, cell_rng(5))
    y2 = sample_observations(TRUE_PRIOR, 37, cell_rng(5))
    assert y1.shape == (37,)
    assert np.array_equal(y1, y2)
    assert np.all(np.abs(y1) < 1.0 + 8.0)  # atoms at +-1 plus gaussian noise


def test_empirical_regret_record_is_deterministic():
    first = empirical_regret_experiment(TRUE_PRIOR, 120, seed=7, grid_size=100)
    second = empirical_regret_experiment(TRUE_PRIOR, 120, seed=7, grid_size=100)
    assert first == second
    assert set(first) == {"n", "eps_sq", "regret", "loglik", "cert", "seed"}
    assert first["n"] == 120 and first["seed"] == 7
    assert first["regret"] >= 0.0
    assert first["eps_sq"] >= 0.0
    assert first["cert"] <= 1.0 + 1e-6
    third = empirical_regret_experiment(TRUE_PRIOR, 120, seed=8, grid_size=100)
    assert third["regret"] != first["regret"]
