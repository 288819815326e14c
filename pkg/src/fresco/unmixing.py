"""Coupled LL1 unmixing of an HSI/MSI pair (multispectral super-resolution).

Both images are modeled as ``sum_r (A_r B_r^T) o c_r`` with shared endmembers:
the HSI uses ``c_r`` and the MSI uses ``P c_r``. The regularized fitting
criterion is minimized by alternating projected gradient steps over the five
factor blocks, one material at a time inside each block.
"""

import dataclasses
import itertools
import logging

from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import ConfigError, DimensionError, InvalidSpecError, NumericAbortError, TuningError
from .metrics import psnr
from .tensor_core import AbundanceSet, Ll1Model, SpectralCube, assemble_lmm, mode3_apply
from .threads import single_threaded_blas, thread_count

logger = logging.getLogger(__name__)

BLOCKS = ("A_H", "B_H", "C", "A_M", "B_M")
STEP_RULES = ("backtracking", "fixed")

_MAX_BACKTRACKS = 50
_MAX_STEP = 1e6


@dataclasses.dataclass(frozen=True)
class MsrConfig:
    """Parameters of :func:`solve_msr`.

    Attributes:
        R (int): Number of materials.
        L_H (int): Rank cap of the HSI abundance factors.
        L_M (int): Rank cap of the MSI abundance factors.
        lambda_lr (float): Weight of the Schatten-``p`` low-rank surrogate.
        lambda_sto (float): Weight of the sum-to-one penalty.
        lambda_tv (float): Weight of the total variation of the MSI abundances.
        p (float): Schatten exponent in ``(0, 1]``.
        q (float): Total variation exponent in ``(0, 1]``.
        tau (float): Schatten smoothing constant.
        epsilon (float): Total variation smoothing constant.
        max_iters (int): Outer iteration cap.
        rel_tol (float): Relative objective change that stops the solver.
        step_rule (str): ``backtracking`` or ``fixed``.
        step_size (float): Step of the ``fixed`` rule.
        beta (float): Backtracking shrink factor.
        armijo (float): Backtracking sufficient decrease constant.
        seed (int): Initialization seed.
    """

    R: int = 3
    L_H: int = 2
    L_M: int = 3
    lambda_lr: float = 1e-3
    lambda_sto: float = 1e-3
    lambda_tv: float = 1e-3
    p: float = 0.5
    q: float = 0.5
    tau: float = 1.0
    epsilon: float = 1e-3
    max_iters: int = 1000
    rel_tol: float = 1e-6
    step_rule: str = "backtracking"
    step_size: float = 1e-3
    beta: float = 0.5
    armijo: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        """Checks the field invariants.

        Raises:
            ConfigError: If a field is out of range.
        """
        checks = {
            "R": self.R >= 1,
            "L_H": self.L_H >= 1,
            "L_M": self.L_M >= 1,
            "lambda_lr": self.lambda_lr >= 0,
            "lambda_sto": self.lambda_sto >= 0,
            "lambda_tv": self.lambda_tv >= 0,
            "p": 0 < self.p <= 1,
            "q": 0 < self.q <= 1,
            "tau": self.tau > 0,
            "epsilon": self.epsilon > 0,
            "max_iters": self.max_iters >= 1,
            "rel_tol": self.rel_tol > 0,
            "step_rule": self.step_rule in STEP_RULES,
            "step_size": self.step_size > 0,
            "beta": 0 < self.beta < 1,
            "armijo": 0 < self.armijo < 1,
        }
        for name, valid in checks.items():
            if not valid:
                raise ConfigError(f"msr.{name} has an invalid value: {getattr(self, name)!r}.")

    @property
    def lambdas(self) -> tuple[float, float, float]:
        """tuple[float, float, float]: ``(lambda_lr, lambda_tv, lambda_sto)``."""
        return (self.lambda_lr, self.lambda_tv, self.lambda_sto)


@dataclasses.dataclass(frozen=True)
class FactorState:
    """Factor blocks of the coupled model.

    Attributes:
        A_H (numpy.ndarray): ``R x I_H x L_H`` HSI row factors.
        B_H (numpy.ndarray): ``R x J_H x L_H`` HSI column factors.
        C (numpy.ndarray): ``R x K_H`` endmembers.
        A_M (numpy.ndarray): ``R x I_M x L_M`` MSI row factors.
        B_M (numpy.ndarray): ``R x J_M x L_M`` MSI column factors.
    """

    A_H: np.ndarray
    B_H: np.ndarray
    C: np.ndarray
    A_M: np.ndarray
    B_M: np.ndarray

    def hsi_maps(self) -> np.ndarray:
        """Returns the ``R x I_H x J_H`` HSI abundances."""
        return np.einsum("ril,rjl->rij", self.A_H, self.B_H)

    def msi_maps(self) -> np.ndarray:
        """Returns the ``R x I_M x J_M`` MSI abundances."""
        return np.einsum("ril,rjl->rij", self.A_M, self.B_M)

    def is_finite(self) -> bool:
        """bool: True when every block is finite."""
        return all(np.all(np.isfinite(getattr(self, name))) for name in BLOCKS)


@dataclasses.dataclass(frozen=True)
class MsrSolution:
    """Result of :func:`solve_msr`.

    Attributes:
        hsi (:class:`AbundanceSet`): HSI abundances with the shared endmembers.
        msi_abundances (numpy.ndarray): ``R x I_M x J_M`` MSI abundances.
        objective_trace (tuple[float, ...]): Objective at initialization and
            after every outer iteration.
        converged (bool): Whether the relative change dropped below tolerance.
        iters_used (int): Number of outer iterations run.
        factors (:class:`FactorState`): Final factor blocks.
    """

    hsi: AbundanceSet
    msi_abundances: np.ndarray
    objective_trace: tuple[float, ...]
    converged: bool
    iters_used: int
    factors: FactorState

    @classmethod
    def from_factors(cls, factors: FactorState, trace=(), converged=False, iters_used=0) -> "MsrSolution":
        """Wraps a factor state into a solution."""
        return cls(
            hsi=AbundanceSet(factors.hsi_maps(), factors.C, tolerance=np.inf),
            msi_abundances=factors.msi_maps(),
            objective_trace=tuple(trace),
            converged=converged,
            iters_used=iters_used,
            factors=factors,
        )

    @classmethod
    def from_models(cls, hsi_model: Ll1Model, msi_model: Ll1Model) -> "MsrSolution":
        """Builds a solution from known HSI and MSI models sharing their materials.

        Raises:
            InvalidSpecError: If the models have different material counts or
                non-uniform ranks.
        """
        if hsi_model.R != msi_model.R:
            raise InvalidSpecError(f"HSI has {hsi_model.R} materials but MSI has {msi_model.R}.")
        if len(set(hsi_model.ranks)) > 1 or len(set(msi_model.ranks)) > 1:
            raise InvalidSpecError("Models with per-material ranks cannot be stacked into factor blocks.")
        factors = FactorState(
            A_H=np.stack([f.A for f in hsi_model.factors]),
            B_H=np.stack([f.B for f in hsi_model.factors]),
            C=np.stack([f.c for f in hsi_model.factors]),
            A_M=np.stack([f.A for f in msi_model.factors]),
            B_M=np.stack([f.B for f in msi_model.factors]),
        )
        return cls.from_factors(factors)


def _schatten_value(maps: np.ndarray, p: float, tau: float) -> float:
    """``sum_r tr(S_r S_r^T + tau I)^(p/2)`` through the singular values of each map."""
    if not np.all(np.isfinite(maps)):
        return np.inf
    rows = maps.shape[1]
    sigma = np.linalg.svd(maps, compute_uv=False)
    padding = maps.shape[0] * (rows - sigma.shape[1]) * tau ** (p / 2.0)
    return float(np.sum((sigma**2 + tau) ** (p / 2.0)) + padding)


def _schatten_gradient(maps: np.ndarray, p: float, tau: float) -> np.ndarray:
    """``p (S S^T + tau I)^(p/2 - 1) S`` for every map."""
    if not np.all(np.isfinite(maps)):
        return np.full_like(maps, np.nan)
    U, sigma, Vt = np.linalg.svd(maps, full_matrices=False)
    weights = p * sigma * (sigma**2 + tau) ** (p / 2.0 - 1.0)
    return np.einsum("rik,rk,rkj->rij", U, weights, Vt)


def _differences(maps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Circulant first differences along rows and columns."""
    return maps - np.roll(maps, -1, axis=1), maps - np.roll(maps, -1, axis=2)


def _tv_value(maps: np.ndarray, q: float, epsilon: float) -> float:
    return float(sum(np.sum((d**2 + epsilon) ** (q / 2.0)) for d in _differences(maps)))


def _tv_gradient(maps: np.ndarray, q: float, epsilon: float) -> np.ndarray:
    gradient = np.zeros_like(maps)
    for axis, d in zip((1, 2), _differences(maps)):
        g = q * d * (d**2 + epsilon) ** (q / 2.0 - 1.0)
        gradient += g - np.roll(g, 1, axis=axis)
    return gradient


class MsrProblem:
    """Objective and block gradients of the coupled criterion for fixed data.

    Args:
        Y_H (:class:`SpectralCube`): Observed HSI.
        Y_M (:class:`SpectralCube`): Observed MSI.
        P (numpy.ndarray): ``K_M x K_H`` spectral response.
        config (:class:`MsrConfig`): Regularization weights and constants.

    Raises:
        DimensionError: If ``P`` does not match the band counts.
    """

    def __init__(self, Y_H: SpectralCube, Y_M: SpectralCube, P: np.ndarray, config: MsrConfig):
        P = np.asarray(P, dtype=np.float64)
        if P.ndim != 2 or P.shape != (Y_M.bands, Y_H.bands):
            raise DimensionError(
                f"P has shape {P.shape}, expected {(Y_M.bands, Y_H.bands)} for the given images."
            )
        self.Y_H = Y_H.array
        self.Y_M = Y_M.array
        self.P = P
        self.config = config

    def _check_shapes(self, factors: FactorState):
        expected = {
            "A_H": self.Y_H.shape[0],
            "B_H": self.Y_H.shape[1],
            "A_M": self.Y_M.shape[0],
            "B_M": self.Y_M.shape[1],
        }
        for name, size in expected.items():
            if getattr(factors, name).shape[1] != size:
                raise DimensionError(f"{name} has {getattr(factors, name).shape[1]} rows, expected {size}.")
        if factors.C.shape[1] != self.Y_H.shape[2]:
            raise DimensionError(f"C has {factors.C.shape[1]} bands, expected {self.Y_H.shape[2]}.")

    def terms(self, factors: FactorState) -> dict[str, float]:
        """Returns the unweighted value of every term of the objective."""
        self._check_shapes(factors)
        config = self.config
        S_H, S_M = factors.hsi_maps(), factors.msi_maps()
        residual_H = np.einsum("rij,rk->ijk", S_H, factors.C) - self.Y_H
        residual_M = np.einsum("rij,rk->ijk", S_M, factors.C @ self.P.T) - self.Y_M
        return {
            "fit_hsi": float(np.sum(residual_H**2)),
            "fit_msi": float(np.sum(residual_M**2)),
            "low_rank": _schatten_value(S_H, config.p, config.tau) + _schatten_value(S_M, config.p, config.tau),
            "sum_to_one": float(np.sum((S_H.sum(axis=0) - 1.0) ** 2) + np.sum((S_M.sum(axis=0) - 1.0) ** 2)),
            "total_variation": _tv_value(S_M, config.q, config.epsilon),
        }

    def objective(self, factors: FactorState) -> float:
        """Returns the weighted objective.

        Raises:
            NumericAbortError: If a factor entry is not finite.
        """
        if not factors.is_finite():
            raise NumericAbortError("Non-finite factor entries", last_finite_iteration=-1)
        terms = self.terms(factors)
        config = self.config
        return (
            terms["fit_hsi"]
            + terms["fit_msi"]
            + config.lambda_lr * terms["low_rank"]
            + config.lambda_sto * terms["sum_to_one"]
            + config.lambda_tv * terms["total_variation"]
        )

    def _map_gradients(self, factors: FactorState):
        config = self.config
        S_H, S_M = factors.hsi_maps(), factors.msi_maps()
        C_M = factors.C @ self.P.T
        residual_H = np.einsum("rij,rk->ijk", S_H, factors.C) - self.Y_H
        residual_M = np.einsum("rij,rk->ijk", S_M, C_M) - self.Y_M

        grad_H = 2.0 * np.einsum("ijk,rk->rij", residual_H, factors.C)
        grad_M = 2.0 * np.einsum("ijm,rm->rij", residual_M, C_M)
        if config.lambda_lr:
            grad_H += config.lambda_lr * _schatten_gradient(S_H, config.p, config.tau)
            grad_M += config.lambda_lr * _schatten_gradient(S_M, config.p, config.tau)
        if config.lambda_sto:
            grad_H += config.lambda_sto * 2.0 * (S_H.sum(axis=0) - 1.0)
            grad_M += config.lambda_sto * 2.0 * (S_M.sum(axis=0) - 1.0)
        if config.lambda_tv:
            grad_M += config.lambda_tv * _tv_gradient(S_M, config.q, config.epsilon)
        return S_H, S_M, residual_H, residual_M, grad_H, grad_M

    def gradient(self, block: str, factors: FactorState) -> np.ndarray:
        """Exact gradient of the objective with respect to one block.

        Args:
            block (str): One of ``A_H``, ``B_H``, ``C``, ``A_M``, ``B_M``.
            factors (:class:`FactorState`): Evaluation point.

        Raises:
            ValueError: If the block name is unknown.

        Returns:
            numpy.ndarray: Gradient shaped like the block.
        """
        if block not in BLOCKS:
            raise ValueError(f"Unknown block {block!r}, expected one of {BLOCKS}.")
        self._check_shapes(factors)
        S_H, S_M, residual_H, residual_M, grad_H, grad_M = self._map_gradients(factors)
        if block == "A_H":
            return np.einsum("rij,rjl->ril", grad_H, factors.B_H)
        if block == "B_H":
            return np.einsum("rij,ril->rjl", grad_H, factors.A_H)
        if block == "A_M":
            return np.einsum("rij,rjl->ril", grad_M, factors.B_M)
        if block == "B_M":
            return np.einsum("rij,ril->rjl", grad_M, factors.A_M)
        hsi_term = 2.0 * np.einsum("ijk,rij->rk", residual_H, S_H)
        msi_term = 2.0 * np.einsum("ijm,rij->rm", residual_M, S_M) @ self.P
        return hsi_term + msi_term


def objective(Y_H: SpectralCube, Y_M: SpectralCube, P: np.ndarray, factors: FactorState, config: MsrConfig) -> float:
    """Evaluates the coupled criterion, see :meth:`MsrProblem.objective`."""
    return MsrProblem(Y_H, Y_M, P, config).objective(factors)


def gradient_block(
    which: str, Y_H: SpectralCube, Y_M: SpectralCube, P: np.ndarray, factors: FactorState, config: MsrConfig
) -> np.ndarray:
    """Evaluates one block gradient, see :meth:`MsrProblem.gradient`."""
    return MsrProblem(Y_H, Y_M, P, config).gradient(which, factors)


def _balance_abundance_sums(A: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rescales the rows of ``A_r`` and ``B_r`` so the per-pixel sums over ``r`` are close to one.

    With ``T = sum_r A_r B_r^T`` the row scales ``exp(u_i)`` and column scales
    ``exp(v_j)`` are the least-squares fit of ``u_i + v_j = -log T_ij``, so
    ``log T`` has zero mean along every row and every column afterwards.
    """
    log_sums = np.log(np.einsum("ril,rjl->ij", A, B))
    overall = log_sums.mean()
    u = -log_sums.mean(axis=1) + overall / 2.0
    v = -log_sums.mean(axis=0) + overall / 2.0
    return A * np.exp(u)[None, :, None], B * np.exp(v)[None, :, None]


def initial_factors(Y_H: SpectralCube, Y_M: SpectralCube, config: MsrConfig) -> FactorState:
    """Draws i.i.d. uniform factors, then rescales them so every per-pixel abundance sum is near one."""
    rng = np.random.default_rng(config.seed)
    R = config.R
    A_H = rng.uniform(0.0, 1.0, (R, Y_H.rows, config.L_H))
    B_H = rng.uniform(0.0, 1.0, (R, Y_H.cols, config.L_H))
    C = rng.uniform(0.0, 1.0, (R, Y_H.bands))
    A_M = rng.uniform(0.0, 1.0, (R, Y_M.rows, config.L_M))
    B_M = rng.uniform(0.0, 1.0, (R, Y_M.cols, config.L_M))
    A_H, B_H = _balance_abundance_sums(A_H, B_H)
    A_M, B_M = _balance_abundance_sums(A_M, B_M)
    return FactorState(A_H, B_H, C, A_M, B_M)


def _step_block(problem: MsrProblem, factors: FactorState, block: str, material: int, value: float, step: float):
    """One projected gradient step on the ``material`` slice of ``block``.

    Returns:
        tuple: ``(factors, value, next_step)``.
    """
    config = problem.config
    current = getattr(factors, block)
    gradient = problem.gradient(block, factors)[material]
    if not np.all(np.isfinite(gradient)):
        raise NumericAbortError(f"Non-finite gradient on block {block}[{material}]", last_finite_iteration=-1)

    def trial_factors(eta: float) -> tuple[FactorState, np.ndarray]:
        updated = current.copy()
        updated[material] = np.maximum(current[material] - eta * gradient, 0.0)
        return dataclasses.replace(factors, **{block: updated}), updated[material]

    if config.step_rule == "fixed":
        trial, _ = trial_factors(config.step_size)
        return trial, problem.objective(trial), step

    eta = step
    for _ in range(_MAX_BACKTRACKS):
        trial, candidate = trial_factors(eta)
        with np.errstate(over="ignore", invalid="ignore"):
            trial_value = problem.objective(trial) if np.all(np.isfinite(candidate)) else np.inf
        decrease = config.armijo * float(np.sum(gradient * (candidate - current[material])))
        if np.isfinite(trial_value) and trial_value <= value + decrease:
            return trial, trial_value, min(eta / config.beta, _MAX_STEP)
        eta *= config.beta
    logger.debug("Block %s[%d]: no sufficient decrease, keeping the current factors.", block, material)
    return factors, value, step


def solve_msr(
    Y_H: SpectralCube,
    Y_M: SpectralCube,
    P: np.ndarray,
    config: MsrConfig,
    initial: FactorState | None = None,
) -> MsrSolution:
    """Solves the coupled LL1 criterion by alternating projected gradient.

    Every outer iteration updates the blocks in the order ``A_H, B_H, C, A_M,
    B_M``, and inside each block the materials one after the other. Each update
    is a gradient step on the factors of one material followed by clamping at
    zero. With the backtracking rule every ``(block, material)`` pair keeps its
    own step size between iterations.

    Example:
        >>> solution = solve_msr(Y_H, Y_M, P, MsrConfig(R=3, L_H=2, L_M=3))
        >>> msri = reconstruct_msri(solution)

    Args:
        Y_H (:class:`SpectralCube`): Observed HSI.
        Y_M (:class:`SpectralCube`): Observed MSI.
        P (numpy.ndarray): ``K_M x K_H`` spectral response.
        config (:class:`MsrConfig`): Solver parameters.
        initial (:class:`FactorState`, optional): Starting point. Defaults to
            the seeded uniform initialization.

    Raises:
        DimensionError: If ``P`` does not match the band counts.
        NumericAbortError: If the objective becomes non-finite.

    Returns:
        :class:`MsrSolution`: The factors and the objective trace.
    """
    problem = MsrProblem(Y_H, Y_M, P, config)
    factors = initial if initial is not None else initial_factors(Y_H, Y_M, config)
    value = problem.objective(factors)
    if not np.isfinite(value):
        raise NumericAbortError("Objective is not finite at initialization", last_finite_iteration=-1)

    trace = [value]
    steps = {(block, r): 1.0 for block in BLOCKS for r in range(factors.C.shape[0])}
    converged = False
    iteration = 0
    for iteration in range(1, config.max_iters + 1):
        previous, last_good = value, factors
        try:
            for block, r in steps:
                factors, value, steps[block, r] = _step_block(problem, factors, block, r, value, steps[block, r])
        except NumericAbortError as error:
            raise NumericAbortError(str(error), iteration - 1, last_good) from error
        if not np.isfinite(value):
            raise NumericAbortError("Objective became non-finite", iteration - 1, last_good)
        trace.append(value)

        change = abs(previous - value) / max(abs(previous), np.finfo(float).tiny)
        if iteration % 50 == 0:
            logger.debug("Iteration %d: objective %.6e, relative change %.3e.", iteration, value, change)
        if change < config.rel_tol:
            converged = True
            break

    logger.info(
        "MSR solver %s after %d iterations, objective %.6e.",
        "converged" if converged else "stopped",
        iteration,
        value,
    )
    return MsrSolution.from_factors(factors, trace, converged, iteration)


def reconstruct_msri(solution: MsrSolution) -> SpectralCube:
    """Returns the MSI-region super-resolution image ``sum_r S_r^M o c_r^H``."""
    return SpectralCube(np.einsum("rij,rk->ijk", solution.msi_abundances, solution.hsi.endmembers))


def reconstruct_observed(solution: MsrSolution, P: np.ndarray) -> tuple[SpectralCube, SpectralCube]:
    """Returns the model predictions ``(Y_H_hat, Y_M_hat)`` of both observations."""
    return assemble_lmm(solution.hsi), mode3_apply(reconstruct_msri(solution), P)


@dataclasses.dataclass(frozen=True)
class PermutationMatch:
    """Material assignment between an estimate and the ground truth.

    Attributes:
        permutation (tuple[int, ...]): ``permutation[r]`` is the estimated
            material matched to true material ``r``.
        endmember_errors (tuple[float, ...]): Relative error of every ``c_r^H``.
        hsi_errors (tuple[float, ...]): Relative error of every ``S_r^H``.
        msi_errors (tuple[float, ...]): Relative error of every ``S_r^M``.
    """

    permutation: tuple[int, ...]
    endmember_errors: tuple[float, ...]
    hsi_errors: tuple[float, ...]
    msi_errors: tuple[float, ...]

    @property
    def max_error(self) -> float:
        """float: Largest relative error over every material and quantity."""
        return max(self.endmember_errors + self.hsi_errors + self.msi_errors)


def _relative_errors(estimated: np.ndarray, truth: np.ndarray, permutation) -> tuple[float, ...]:
    return tuple(
        float(np.linalg.norm(estimated[permutation[r]] - truth[r]) / max(np.linalg.norm(truth[r]), 1e-300))
        for r in range(truth.shape[0])
    )


def match_permutation(estimated: MsrSolution, truth: tuple[Ll1Model, Ll1Model]) -> PermutationMatch:
    """Matches estimated materials to true ones by endmember cosine similarity.

    Args:
        estimated (:class:`MsrSolution`): Solver output.
        truth (tuple[Ll1Model, Ll1Model]): True HSI and MSI models.

    Raises:
        InvalidSpecError: If the material counts differ.

    Returns:
        :class:`PermutationMatch`: The assignment and per-material errors.
    """
    reference = MsrSolution.from_models(*truth)
    if reference.hsi.R != estimated.hsi.R:
        raise InvalidSpecError(f"Estimate has {estimated.hsi.R} materials but truth has {reference.hsi.R}.")

    def normalize(rows):
        return rows / np.maximum(np.linalg.norm(rows, axis=1, keepdims=True), 1e-300)

    similarity = normalize(reference.hsi.endmembers) @ normalize(estimated.hsi.endmembers).T
    _, columns = linear_sum_assignment(similarity, maximize=True)
    permutation = tuple(int(column) for column in columns)
    return PermutationMatch(
        permutation=permutation,
        endmember_errors=_relative_errors(estimated.hsi.endmembers, reference.hsi.endmembers, permutation),
        hsi_errors=_relative_errors(estimated.hsi.abundances, reference.hsi.abundances, permutation),
        msi_errors=_relative_errors(estimated.msi_abundances, reference.msi_abundances, permutation),
    )


def default_lambda_grid(points: int = 5, low: float = 1e-4, high: float = 1e-2) -> list[tuple[float, float, float]]:
    """Log-uniform ``(lambda_lr, lambda_tv, lambda_sto)`` grid, sorted lexicographically."""
    values = np.logspace(np.log10(low), np.log10(high), points)
    return [tuple(float(v) for v in cell) for cell in itertools.product(values, repeat=3)]


def observed_psnr(solution: MsrSolution, Y_H: SpectralCube, Y_M: SpectralCube, P: np.ndarray) -> float:
    """Sum of the PSNRs of both model predictions against the observations."""
    Y_H_hat, Y_M_hat = reconstruct_observed(solution, P)
    return psnr(Y_H, Y_H_hat) + psnr(Y_M, Y_M_hat)


def _score_cell(Y_H, Y_M, P, config: MsrConfig) -> float:
    with single_threaded_blas():
        solution = solve_msr(Y_H, Y_M, P, config)
    return observed_psnr(solution, Y_H, Y_M, P)


def tune_lambdas(
    Y_H: SpectralCube,
    Y_M: SpectralCube,
    P: np.ndarray,
    config: MsrConfig,
    grid: Sequence[tuple[float, float, float]] | None = None,
    max_workers: int | None = None,
) -> MsrConfig:
    """Grid-searches the regularization weights on the observed data only.

    Every cell ``(lambda_lr, lambda_tv, lambda_sto)`` is solved from the same
    initialization and scored by the summed PSNR of both predicted
    observations. The highest score wins; equal scores go to the smallest
    weight vector in lexicographic order.

    Args:
        Y_H (:class:`SpectralCube`): Observed HSI.
        Y_M (:class:`SpectralCube`): Observed MSI.
        P (numpy.ndarray): Spectral response.
        config (:class:`MsrConfig`): Base configuration; its weights are replaced.
        grid (Sequence, optional): Cells to try. Defaults to :func:`default_lambda_grid`.
        max_workers (int, optional): Worker threads. Defaults to ``FRESCO_THREADS``.

    Raises:
        ValueError: If the grid is empty.
        TuningError: If every cell diverged.

    Returns:
        :class:`MsrConfig`: The base configuration with the selected weights.
    """
    grid = default_lambda_grid() if grid is None else [tuple(float(v) for v in cell) for cell in grid]
    if not grid:
        raise ValueError("The lambda grid is empty.")
    max_workers = max_workers or thread_count()

    def cell_config(cell):
        return dataclasses.replace(config, lambda_lr=cell[0], lambda_tv=cell[1], lambda_sto=cell[2])

    scores: dict[tuple, float] = {}
    trace: list[tuple] = []
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = {executor.submit(_score_cell, Y_H, Y_M, P, cell_config(cell)): cell for cell in grid}
        for future in as_completed(futures):
            cell = futures[future]
            try:
                score = future.result()
            except NumericAbortError as error:
                trace.append((cell, str(error)))
                logger.warning("Lambda cell %s diverged: %s", cell, error)
                continue
            if not np.isfinite(score):
                trace.append((cell, f"non-finite score {score}"))
                continue
            scores[cell] = score
            logger.debug("Lambda cell %s scored %.4f dB.", cell, score)

    if not scores:
        raise TuningError(f"All {len(grid)} lambda grid cells diverged.", sorted(trace))
    best = min(scores, key=lambda cell: (-scores[cell], cell))
    logger.info("Selected lambdas (lr, tv, sto) = %s with observed PSNR %.4f dB.", best, scores[best])
    return cell_config(best)
