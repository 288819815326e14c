"""Tests for the coupled LL1 unmixing solver."""

import dataclasses
import itertools

import numpy as np
import pytest

from fresco.degradation import Ll1Scene, SceneDims, synth_ll1_scene
from fresco.exceptions import ConfigError, DimensionError, NumericAbortError, TuningError
from fresco.gradcheck import finite_difference, relative_error
from fresco.tensor_core import Ll1Model, SpectralCube
from fresco.unmixing import (
    BLOCKS,
    FactorState,
    MsrConfig,
    MsrProblem,
    MsrSolution,
    default_lambda_grid,
    initial_factors,
    match_permutation,
    objective,
    reconstruct_msri,
    reconstruct_observed,
    solve_msr,
    tune_lambdas,
)

NO_PENALTY = {"lambda_lr": 0.0, "lambda_sto": 0.0, "lambda_tv": 0.0}


def observations(scene: Ll1Scene) -> tuple[SpectralCube, SpectralCube, np.ndarray]:
    return scene.hsi_model.assemble(), scene.msi_model.assemble(), scene.degradation.P


def identity_factors() -> FactorState:
    eye = np.eye(2)[None]
    return FactorState(A_H=eye, B_H=eye, C=np.ones((1, 3)), A_M=eye, B_M=eye)


@pytest.mark.parametrize("field", ["R", "p", "q", "beta", "step_rule"])
def test_msr_config_validation(field: str) -> None:
    """Tests that out of range fields are refused.

    Args:
        field (str): Field set to an invalid value.
    """
    invalid = {"R": 0, "p": 1.5, "q": 0.0, "beta": 1.0, "step_rule": "newton"}

    with pytest.raises(ConfigError, match=f"msr.{field}"):
        MsrConfig(**{field: invalid[field]})


def test_objective_zero_everything() -> None:
    """Tests that zero factors on zero data with no penalty give a zero objective."""
    zero = FactorState(
        A_H=np.zeros((2, 4, 2)), B_H=np.zeros((2, 4, 2)), C=np.zeros((2, 5)), A_M=np.zeros((2, 6, 2)), B_M=np.zeros((2, 6, 2))
    )
    Y_H, Y_M = SpectralCube(np.zeros((4, 4, 5))), SpectralCube(np.zeros((6, 6, 2)))
    config = MsrConfig(R=2, L_H=2, L_M=2, tau=1.0, **NO_PENALTY)

    assert objective(Y_H, Y_M, np.ones((2, 5)), zero, config) == 0.0


def test_objective_zero_at_truth(small_ll1_scene: Ll1Scene) -> None:
    """Tests that the generating factors fit their own observations exactly.

    Args:
        small_ll1_scene (:class:`Ll1Scene`): Scene with 2 materials.
    """
    Y_H, Y_M, P = observations(small_ll1_scene)
    truth = MsrSolution.from_models(small_ll1_scene.hsi_model, small_ll1_scene.msi_model).factors

    assert objective(Y_H, Y_M, P, truth, MsrConfig(R=2, L_H=2, L_M=2, **NO_PENALTY)) < 1e-20


def test_low_rank_term_identity_maps() -> None:
    """Tests the smoothed Schatten value of identity abundances."""
    problem = MsrProblem(SpectralCube(np.zeros((2, 2, 3))), SpectralCube(np.zeros((2, 2, 1))), np.ones((1, 3)), MsrConfig())

    terms = problem.terms(identity_factors())

    assert terms["low_rank"] == pytest.approx(2 * 2 * 2**0.25)
    assert terms["low_rank"] / 2 == pytest.approx(2.37841, abs=1e-5)


def test_total_variation_of_constant_map() -> None:
    """Tests that a constant map only keeps the smoothing floor."""
    config = MsrConfig(R=1, L_H=1, L_M=1, q=0.5, epsilon=1e-3)
    factors = FactorState(
        A_H=np.ones((1, 2, 1)), B_H=np.ones((1, 2, 1)), C=np.ones((1, 3)), A_M=np.ones((1, 5, 1)), B_M=np.ones((1, 4, 1))
    )
    problem = MsrProblem(SpectralCube(np.zeros((2, 2, 3))), SpectralCube(np.zeros((5, 4, 1))), np.ones((1, 3)), config)

    assert problem.terms(factors)["total_variation"] == pytest.approx(5 * 4 * 2 * 1e-3**0.25)


def test_problem_rejects_bad_response(small_ll1_scene: Ll1Scene) -> None:
    """Tests that ``P`` must map the HSI bands onto the MSI bands.

    Args:
        small_ll1_scene (:class:`Ll1Scene`): Scene with 8 HSI and 3 MSI bands.
    """
    Y_H, Y_M, _ = observations(small_ll1_scene)

    with pytest.raises(DimensionError, match="expected"):
        MsrProblem(Y_H, Y_M, np.ones((3, 7)), MsrConfig(R=2))


@pytest.mark.parametrize("block", BLOCKS)
def test_block_gradients_match_finite_differences(small_ll1_scene: Ll1Scene, block: str) -> None:
    """Tests every analytic block gradient against centered differences.

    Args:
        small_ll1_scene (:class:`Ll1Scene`): Scene with 2 materials.
        block (str): Factor block under test.
    """
    Y_H, Y_M, P = observations(small_ll1_scene)
    config = MsrConfig(R=2, L_H=2, L_M=2, lambda_lr=0.1, lambda_sto=0.1, lambda_tv=0.1, epsilon=0.1, seed=4)
    problem = MsrProblem(Y_H, Y_M, P, config)
    factors = initial_factors(Y_H, Y_M, config)

    numeric = finite_difference(
        lambda x: problem.objective(dataclasses.replace(factors, **{block: x})), getattr(factors, block)
    )

    assert relative_error(problem.gradient(block, factors), numeric) <= 1e-4


def test_gradient_vanishes_at_truth(small_ll1_scene: Ll1Scene) -> None:
    """Tests that the generating factors are stationary without penalties.

    Args:
        small_ll1_scene (:class:`Ll1Scene`): Scene with 2 materials.
    """
    Y_H, Y_M, P = observations(small_ll1_scene)
    truth = MsrSolution.from_models(small_ll1_scene.hsi_model, small_ll1_scene.msi_model).factors
    problem = MsrProblem(Y_H, Y_M, P, MsrConfig(R=2, L_H=2, L_M=2, **NO_PENALTY))

    for block in BLOCKS:
        assert np.linalg.norm(problem.gradient(block, truth)) <= 1e-8


def test_endmember_gradient_without_msi_residual(small_ll1_scene: Ll1Scene) -> None:
    """Tests that a perfect MSI fit leaves only the HSI term in the endmember gradient.

    Args:
        small_ll1_scene (:class:`Ll1Scene`): Scene with 2 materials.
    """
    Y_H, _, P = observations(small_ll1_scene)
    config = MsrConfig(R=2, L_H=2, L_M=2, seed=9, **NO_PENALTY)
    factors = initial_factors(Y_H, small_ll1_scene.msi_model.assemble(), config)
    _, Y_M = reconstruct_observed(MsrSolution.from_factors(factors), P)
    problem = MsrProblem(Y_H, Y_M, P, config)

    S_H = factors.hsi_maps()
    residual_H = np.einsum("rij,rk->ijk", S_H, factors.C) - Y_H.array
    expected = 2.0 * np.einsum("ijk,rij->rk", residual_H, S_H)

    np.testing.assert_allclose(problem.gradient("C", factors), expected, atol=1e-10)


def test_unknown_block_raises(small_ll1_scene: Ll1Scene) -> None:
    """Tests the block name check.

    Args:
        small_ll1_scene (:class:`Ll1Scene`): Scene with 2 materials.
    """
    Y_H, Y_M, P = observations(small_ll1_scene)
    problem = MsrProblem(Y_H, Y_M, P, MsrConfig(R=2))

    with pytest.raises(ValueError, match="Unknown block"):
        problem.gradient("D", initial_factors(Y_H, Y_M, MsrConfig(R=2)))


def test_objective_trace_is_non_increasing(small_ll1_scene: Ll1Scene, small_msr_config: MsrConfig) -> None:
    """Tests that backtracking never accepts an increase.

    Args:
        small_ll1_scene (:class:`Ll1Scene`): Scene with 2 materials.
        small_msr_config (:class:`MsrConfig`): 40 iteration solver settings.
    """
    solution = solve_msr(*observations(small_ll1_scene), small_msr_config)
    trace = np.array(solution.objective_trace)

    assert len(trace) == solution.iters_used + 1
    assert np.all(np.diff(trace) <= 1e-12 * trace[:-1])
    assert trace[-1] < trace[0]
    assert solution.msi_abundances.shape == (2, 12, 12)
    assert reconstruct_msri(solution).shape == (12, 12, 8)


def test_initial_abundance_sums_are_balanced(small_ll1_scene: Ll1Scene) -> None:
    """Tests that the initial per-pixel abundance sums sit around one.

    Args:
        small_ll1_scene (:class:`Ll1Scene`): Scene with 2 materials.
    """
    Y_H, Y_M, _ = observations(small_ll1_scene)

    factors = initial_factors(Y_H, Y_M, MsrConfig(R=2, L_H=2, L_M=2, seed=5))

    assert np.all(factors.A_H >= 0.0) and np.all(factors.B_M >= 0.0)
    for maps in (factors.hsi_maps(), factors.msi_maps()):
        log_sums = np.log(maps.sum(axis=0))
        np.testing.assert_allclose(log_sums.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(log_sums.mean(axis=1), 0.0, atol=1e-12)
        assert np.abs(maps.sum(axis=0) - 1.0).mean() < 0.5


def test_sweep_updates_one_material_at_a_time(small_ll1_scene: Ll1Scene, small_msr_config: MsrConfig) -> None:
    """Tests one fixed-step sweep against blocks updated material by material.

    Args:
        small_ll1_scene (:class:`Ll1Scene`): Scene with 2 materials.
        small_msr_config (:class:`MsrConfig`): 40 iteration solver settings.
    """
    Y_H, Y_M, P = observations(small_ll1_scene)
    config = dataclasses.replace(small_msr_config, step_rule="fixed", step_size=1e-3, max_iters=1, **NO_PENALTY)
    problem = MsrProblem(Y_H, Y_M, P, config)
    start = initial_factors(Y_H, Y_M, config)

    expected = start
    for block in BLOCKS:
        for r in range(config.R):
            updated = getattr(expected, block).copy()
            updated[r] = np.maximum(updated[r] - config.step_size * problem.gradient(block, expected)[r], 0.0)
            expected = dataclasses.replace(expected, **{block: updated})
    whole_block = dataclasses.replace(
        start, A_H=np.maximum(start.A_H - config.step_size * problem.gradient("A_H", start), 0.0)
    )

    solution = solve_msr(Y_H, Y_M, P, config)

    for block in BLOCKS:
        np.testing.assert_allclose(getattr(solution.factors, block), getattr(expected, block), rtol=1e-10, atol=1e-14)
    assert not np.allclose(expected.A_H, whole_block.A_H, rtol=1e-10, atol=1e-14)


def test_sum_to_one_resolves_the_scale(small_ll1_scene: Ll1Scene, small_msr_config: MsrConfig) -> None:
    """Tests that the sum-to-one weight pins the abundance scale left free by the data terms.

    Args:
        small_ll1_scene (:class:`Ll1Scene`): Scene with 2 materials.
        small_msr_config (:class:`MsrConfig`): 40 iteration solver settings.
    """
    Y_H, Y_M, P = observations(small_ll1_scene)
    start = initial_factors(Y_H, Y_M, small_msr_config)
    scaled = dataclasses.replace(start, A_H=2.0 * start.A_H, A_M=2.0 * start.A_M, C=start.C / 2.0)

    def violation(lambda_sto: float) -> float:
        config = dataclasses.replace(
            small_msr_config, lambda_lr=0.0, lambda_tv=0.0, lambda_sto=lambda_sto, max_iters=300, rel_tol=1e-12
        )
        solution = solve_msr(Y_H, Y_M, P, config, initial=scaled)
        return float(np.abs(solution.msi_abundances.sum(axis=0) - 1.0).mean())

    free, pinned = violation(0.0), violation(1.0)

    assert pinned < 0.5 * free
    assert pinned < 0.1


def test_solver_is_deterministic(small_ll1_scene: Ll1Scene, small_msr_config: MsrConfig) -> None:
    """Tests that one seed gives one solution.

    Args:
        small_ll1_scene (:class:`Ll1Scene`): Scene with 2 materials.
        small_msr_config (:class:`MsrConfig`): 40 iteration solver settings.
    """
    config = dataclasses.replace(small_msr_config, max_iters=5)

    first = solve_msr(*observations(small_ll1_scene), config)
    second = solve_msr(*observations(small_ll1_scene), config)

    assert first.objective_trace == second.objective_trace
    np.testing.assert_array_equal(first.msi_abundances, second.msi_abundances)


def test_zero_data_stays_at_zero() -> None:
    """Tests that the zero solution of zero data is kept and reported converged."""
    config = MsrConfig(R=2, L_H=2, L_M=2, **NO_PENALTY)
    zero = FactorState(
        A_H=np.zeros((2, 4, 2)), B_H=np.zeros((2, 4, 2)), C=np.zeros((2, 5)), A_M=np.zeros((2, 6, 2)), B_M=np.zeros((2, 6, 2))
    )

    solution = solve_msr(
        SpectralCube(np.zeros((4, 4, 5))), SpectralCube(np.zeros((6, 6, 2))), np.ones((2, 5)), config, initial=zero
    )

    assert solution.objective_trace[-1] == 0.0
    assert solution.converged
    assert not solution.msi_abundances.any()


def test_non_finite_start_aborts(small_ll1_scene: Ll1Scene) -> None:
    """Tests that a NaN starting point is refused.

    Args:
        small_ll1_scene (:class:`Ll1Scene`): Scene with 2 materials.
    """
    Y_H, Y_M, P = observations(small_ll1_scene)
    config = MsrConfig(R=2, L_H=2, L_M=2)
    start = initial_factors(Y_H, Y_M, config)
    broken = dataclasses.replace(start, C=np.full_like(start.C, np.nan))

    with pytest.raises(NumericAbortError) as error:
        solve_msr(Y_H, Y_M, P, config, initial=broken)
    assert error.value.last_finite_iteration == -1
    assert error.value.exit_code == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergent_fixed_step_aborts(small_ll1_scene: Ll1Scene) -> None:
    """Tests that a huge fixed step is reported with the last finite state.

    Args:
        small_ll1_scene (:class:`Ll1Scene`): Scene with 2 materials.
    """
    config = MsrConfig(R=2, L_H=2, L_M=2, step_rule="fixed", step_size=1e6, max_iters=50)

    with pytest.raises(NumericAbortError, match="last finite iteration") as error:
        solve_msr(*observations(small_ll1_scene), config)
    assert error.value.last_finite_iteration >= 0
    assert isinstance(error.value.state, FactorState)


def test_match_permutation_identity(small_ll1_scene: Ll1Scene) -> None:
    """Tests that the truth matches itself with zero errors.

    Args:
        small_ll1_scene (:class:`Ll1Scene`): Scene with 2 materials.
    """
    truth = (small_ll1_scene.hsi_model, small_ll1_scene.msi_model)

    match = match_permutation(MsrSolution.from_models(*truth), truth)

    assert match.permutation == (0, 1)
    assert match.max_error == pytest.approx(0.0, abs=1e-12)


def test_match_permutation_swapped(small_ll1_scene: Ll1Scene) -> None:
    """Tests that swapped materials are found with zero errors.

    Args:
        small_ll1_scene (:class:`Ll1Scene`): Scene with 2 materials.
    """
    hsi, msi = small_ll1_scene.hsi_model, small_ll1_scene.msi_model
    swapped = MsrSolution.from_models(Ll1Model(hsi.factors[::-1]), Ll1Model(msi.factors[::-1]))

    match = match_permutation(swapped, (hsi, msi))

    assert match.permutation == (1, 0)
    assert match.max_error == pytest.approx(0.0, abs=1e-12)


def test_match_permutation_brute_force(rng: np.random.Generator) -> None:
    """Tests the assignment against an exhaustive search over 4 materials.

    Args:
        rng (:class:`numpy.random.Generator`): Random generator.
    """
    scene = synth_ll1_scene(8, SceneDims(6, 6, 8, 12, 12, 3), L_H=2, L_M=2, R=4)
    truth = MsrSolution.from_models(scene.hsi_model, scene.msi_model)
    order = [2, 0, 3, 1]
    noisy = dataclasses.replace(
        truth.factors,
        **{name: getattr(truth.factors, name)[order] for name in BLOCKS},
    )
    noisy = dataclasses.replace(noisy, C=noisy.C + rng.normal(0.0, 0.01, noisy.C.shape))

    match = match_permutation(MsrSolution.from_factors(noisy), (scene.hsi_model, scene.msi_model))

    def unit(rows):
        return rows / np.linalg.norm(rows, axis=1, keepdims=True)

    similarity = unit(truth.hsi.endmembers) @ unit(noisy.C).T
    best = max(itertools.permutations(range(4)), key=lambda p: sum(similarity[r, p[r]] for r in range(4)))
    assert match.permutation == best
    assert match.permutation == tuple(int(i) for i in np.argsort(order))
    assert max(match.hsi_errors) == pytest.approx(0.0, abs=1e-12)


def test_default_lambda_grid() -> None:
    """Tests the size, bounds and ordering of the log-uniform grid."""
    grid = default_lambda_grid(points=2)

    assert len(grid) == 8
    assert grid == sorted(grid)
    assert grid[0] == pytest.approx((1e-4, 1e-4, 1e-4))
    assert grid[-1] == pytest.approx((1e-2, 1e-2, 1e-2))
    assert len(default_lambda_grid()) == 125


def test_tune_single_cell(small_ll1_scene: Ll1Scene, small_msr_config: MsrConfig) -> None:
    """Tests that a one-cell grid selects that cell.

    Args:
        small_ll1_scene (:class:`Ll1Scene`): Scene with 2 materials.
        small_msr_config (:class:`MsrConfig`): 40 iteration solver settings.
    """
    config = dataclasses.replace(small_msr_config, max_iters=5)

    selected = tune_lambdas(*observations(small_ll1_scene), config, grid=[(2e-3, 3e-3, 4e-3)], max_workers=1)

    assert selected.lambdas == (2e-3, 3e-3, 4e-3)
    assert selected.max_iters == 5


def test_tune_ties_go_to_smallest_cell(mocker, small_ll1_scene: Ll1Scene) -> None:
    """Tests the lexicographic tie-break between equal scores.

    Args:
        mocker (:class:`pytest_mock.MockerFixture`): Mocker fixture.
        small_ll1_scene (:class:`Ll1Scene`): Scene with 2 materials.
    """
    mocker.patch("fresco.unmixing._score_cell", return_value=30.0)
    grid = [(1e-2, 1e-4, 1e-4), (1e-4, 1e-2, 1e-2), (1e-4, 1e-2, 1e-3)]

    selected = tune_lambdas(*observations(small_ll1_scene), MsrConfig(R=2), grid=grid, max_workers=2)

    assert selected.lambdas == (1e-4, 1e-2, 1e-3)


def test_tune_picks_highest_score(mocker, small_ll1_scene: Ll1Scene) -> None:
    """Tests that the best scoring cell wins and diverged cells are skipped.

    Args:
        mocker (:class:`pytest_mock.MockerFixture`): Mocker fixture.
        small_ll1_scene (:class:`Ll1Scene`): Scene with 2 materials.
    """

    def score(Y_H, Y_M, P, config):
        if config.lambda_lr == 1.0:
            raise NumericAbortError("diverged", 3)
        return 10.0 + config.lambda_tv

    mocker.patch("fresco.unmixing._score_cell", side_effect=score)
    grid = [(1.0, 9.0, 0.0), (0.5, 2.0, 0.0), (0.5, 3.0, 0.0)]

    selected = tune_lambdas(*observations(small_ll1_scene), MsrConfig(R=2), grid=grid, max_workers=1)

    assert selected.lambdas == (0.5, 3.0, 0.0)


def test_tune_all_cells_diverged(mocker, small_ll1_scene: Ll1Scene) -> None:
    """Tests that a fully diverged grid raises with its trace.

    Args:
        mocker (:class:`pytest_mock.MockerFixture`): Mocker fixture.
        small_ll1_scene (:class:`Ll1Scene`): Scene with 2 materials.
    """
    mocker.patch("fresco.unmixing._score_cell", side_effect=NumericAbortError("diverged", 0))
    grid = [(1e-3, 1e-3, 1e-3), (1e-2, 1e-2, 1e-2)]

    with pytest.raises(TuningError, match="All 2") as error:
        tune_lambdas(*observations(small_ll1_scene), MsrConfig(R=2), grid=grid, max_workers=1)
    assert [cell for cell, _ in error.value.trace] == grid
    with pytest.raises(ValueError, match="empty"):
        tune_lambdas(*observations(small_ll1_scene), MsrConfig(R=2), grid=[])
