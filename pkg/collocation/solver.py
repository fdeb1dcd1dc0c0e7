"""Collocation march across the mesh.

For each step n the solver:
1. Computes the lag terms F_n(t_{n,i}) from the coefficients of steps 0..n-1
2. Reduces the step system to scalar fixed point queries (case 1, case 2)
   or runs the damped iteration for other parameter sets
3. Records the chosen coefficients and their diagnostics
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy import optimize

from collocation.errors import (
    InvalidParams,
    NegativeArgument,
    NoNontrivialSolution,
    NonConvergence,
    StepDivergence,
)
from collocation.fixedpoint import FixedPointQuery, min_nonzero_fixed_point
from collocation.models import CollocationProblem, CollocationSolution, Mesh, make_problem
from collocation.quadrature import weight_calculator
from collocation.results import StepDiagnostics, StepState

logger = logging.getLogger(__name__)

# General-m candidates this close to a fixed point count as stalled, not as no solution
STALL_RTOL = 1e-6


class CollocationSolver:
    """Marches the nondivergent (minimum fixed point) collocation solution."""

    def __init__(self, problem: CollocationProblem):
        self.problem = problem
        self.weights = weight_calculator(problem)
        self.G = problem.nonlinearity
        self.options = problem.options

    def lag_term(self, Z: np.ndarray, n: int) -> np.ndarray:
        """F_n(t_{n,i}) for i = 1..m; zero for n = 0."""
        return self.weights.lag_terms(Z, n)

    def _scalar_step(self, alpha: float, beta: float, n: int, method: str):
        query = FixedPointQuery.from_options(self.G, alpha, beta, self.options)
        outcome = min_nonzero_fixed_point(query)
        if not outcome.found:
            detail = f"{method}: {outcome.status.value} (alpha={alpha:.3e}, beta={beta:.3e})"
            if n == 0:
                raise NoNontrivialSolution(0, detail, outcome)
            raise StepDivergence(n, detail, outcome)
        return outcome

    def solve_step_case1(self, Z: np.ndarray, n: int) -> StepState:
        """Z[n,0] = min fixed point of y -> G(F_n(t_{n,1}) + h_n B_n y)."""
        F = self.lag_term(Z, n)
        h = float(self.problem.mesh.steps[n])
        B = self.weights.step_weights(n)
        outcome = self._scalar_step(F[0], h * B[0, 0], n, "case1")
        coefficients = np.array([outcome.y_star])
        diagnostics = StepDiagnostics(
            step=n, method="case1", roots_detected=outcome.roots_detected, residual=outcome.residual
        )
        return StepState(n, F, coefficients, outcome, diagnostics)

    def solve_step_case2(self, Z: np.ndarray, n: int) -> StepState:
        """Z[n,0] = G(F_n(t_n)), then Z[n,1] from the reduced scalar equation."""
        F = self.lag_term(Z, n)
        h = float(self.problem.mesh.steps[n])
        B = self.weights.step_weights(n)

        z1 = float(self.G(F[0]))
        alpha = F[1] + h * B[1, 0] * z1
        if alpha < 0:
            raise NegativeArgument(n, f"case2: alpha={alpha:.3e}")
        outcome = self._scalar_step(alpha, h * B[1, 1], n, "case2")
        coefficients = np.array([z1, outcome.y_star])
        diagnostics = StepDiagnostics(
            step=n, method="case2", roots_detected=outcome.roots_detected, residual=outcome.residual
        )
        return StepState(n, F, coefficients, outcome, diagnostics)

    def _iterate(self, F: np.ndarray, A: np.ndarray, z: np.ndarray, n: int) -> Tuple[np.ndarray, int, bool]:
        """Damped iteration; returns the last iterate even when the step test never passes."""
        omega = self.options.damping
        tol = self.options.root_rtol
        for iteration in range(1, self.options.max_iterations + 1):
            argument = F + A @ z
            if np.any(argument < 0):
                raise NegativeArgument(n, f"general: min argument {argument.min():.3e}")
            z_next = (1.0 - omega) * z + omega * self.G(argument)
            if np.max(np.abs(z_next - z)) <= tol * np.max(np.abs(z_next)):
                return z_next, iteration, True
            z = z_next
        return z, self.options.max_iterations, False

    def _polish(self, F: np.ndarray, A: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Newton-type refinement of z = G(F + A z) started from an iterate."""
        G = self.G
        result = optimize.root(
            lambda v: v - G(np.maximum(F + A @ v, 0.0)),
            z,
            method="hybr",
            options={"xtol": self.options.root_rtol},
        )
        x = np.asarray(result.x, dtype=float)
        return x if result.success and np.all(np.isfinite(x)) else z

    def _judge(self, F: np.ndarray, A: np.ndarray, z: np.ndarray) -> Tuple[str, float]:
        """Label a candidate: ok, stalled, wandered, negative or collapsed."""
        scale = float(np.max(np.abs(z)))
        if not np.all(np.isfinite(z)) or scale <= self.options.scan_floor:
            return "collapsed", float("inf")
        argument = F + A @ z
        if np.any(argument < -self.options.root_rtol * (np.abs(F) + np.abs(A) @ np.abs(z))):
            return "negative", float("inf")
        residual = float(np.max(np.abs(self.G(np.maximum(argument, 0.0)) - z))) / scale
        if residual <= self.options.residual_rtol:
            return "ok", residual
        return ("stalled" if residual <= STALL_RTOL else "wandered"), residual

    def solve_general_m(self, Z: np.ndarray, n: int) -> StepState:
        """Damped iteration z <- (1 - w) z + w G(F + h_n B_n z), polished by scipy's hybrid root solver.

        Experimental: no existence guarantee. At n = 0 each seed of a log
        grid is tried in turn; later steps start from the previous step.

        Raises:
            NoNontrivialSolution: every seed collapsed to zero, went
                negative or wandered off without approaching a fixed point.
            NonConvergence: some seed stalled close to a fixed point but
                never met the residual tolerance.
        """
        m = self.problem.params.m
        F = self.lag_term(Z, n)
        h = float(self.problem.mesh.steps[n])
        A = h * self.weights.step_weights(n)

        if n == 0:
            seeds = np.logspace(
                np.log10(self.options.seed_min), np.log10(self.options.seed_max), self.options.seed_count
            )
            starts = [np.full(m, s) for s in seeds]
        else:
            starts = [np.array(Z[n - 1], dtype=float)]

        stalled = 0
        for start in starts:
            try:
                z, iterations, converged = self._iterate(F, A, start, n)
            except NegativeArgument as e:
                if n > 0:
                    raise
                logger.debug(f"Seed {start[0]:.1e} rejected: {e}")
                continue

            if not converged:
                z = self._polish(F, A, z)
            label, residual = self._judge(F, A, z)
            if label == "ok":
                diagnostics = StepDiagnostics(
                    step=n, method="general", roots_detected=0, residual=residual, iterations=iterations
                )
                return StepState(n, F, z, None, diagnostics)

            if n > 0:
                error = NegativeArgument if label == "negative" else NonConvergence
                raise error(n, f"general: {label}, relative residual {residual:.3e}")
            stalled += label == "stalled"
            logger.debug(f"Seed {start[0]:.1e} {label} (relative residual {residual:.3e})")

        if stalled:
            raise NonConvergence(0, f"general: {stalled} of {len(starts)} seeds stalled near a fixed point")
        raise NoNontrivialSolution(0, f"general: all {len(starts)} seeds failed or collapsed to zero")

    def step(self, Z: np.ndarray, n: int) -> StepState:
        case = self.problem.case
        if case == 1:
            return self.solve_step_case1(Z, n)
        if case == 2:
            return self.solve_step_case2(Z, n)
        return self.solve_general_m(Z, n)

    def solve(self) -> CollocationSolution:
        mesh, params = self.problem.mesh, self.problem.params
        case = self.problem.case
        if case is None:
            logger.warning(f"Parameters c={params.c} are outside cases 1-2; using the experimental iteration")
        logger.debug(f"Solving: N={mesh.N}, m={params.m}, case={case or 'general'}")

        Z = np.zeros((mesh.N, params.m))
        diagnostics = []
        for n in range(mesh.N):
            state = self.step(Z, n)
            Z[n] = state.coefficients
            diagnostics.append(state.diagnostics)
            if logger.isEnabledFor(logging.DEBUG):
                logger.debug(f"Step {n}: F={state.lag_terms}, Z={state.coefficients}")

        return CollocationSolution(mesh, params, Z, tuple(diagnostics))


def solve(problem: CollocationProblem) -> CollocationSolution:
    return CollocationSolver(problem).solve()


def _prefix(problem: CollocationProblem, prefix, n: int) -> np.ndarray:
    Z = np.zeros((problem.mesh.N, problem.params.m))
    if n > 0:
        Z[:n] = np.asarray(prefix, dtype=float).reshape(-1, problem.params.m)[:n]
    return Z


def lag_term(problem: CollocationProblem, prefix, n: int, i: int) -> float:
    """F_n(t_{n,i}) with 1-based i, from the coefficients of steps 0..n-1."""
    if not 1 <= i <= problem.params.m:
        raise InvalidParams(f"Index i={i} outside 1..{problem.params.m}")
    return float(CollocationSolver(problem).lag_term(_prefix(problem, prefix, n), n)[i - 1])


def solve_step_case1(problem: CollocationProblem, prefix, n: int) -> StepState:
    if problem.case != 1:
        raise InvalidParams(f"Case 1 needs m=1 and c_1>0, got c={problem.params.c}")
    return CollocationSolver(problem).solve_step_case1(_prefix(problem, prefix, n), n)


def solve_step_case2(problem: CollocationProblem, prefix, n: int) -> StepState:
    if problem.case != 2:
        raise InvalidParams(f"Case 2 needs m=2 and c_1=0, got c={problem.params.c}")
    return CollocationSolver(problem).solve_step_case2(_prefix(problem, prefix, n), n)


def solve_general_m(problem: CollocationProblem, prefix, n: int) -> StepState:
    return CollocationSolver(problem).solve_general_m(_prefix(problem, prefix, n), n)


def equation_residuals(problem: CollocationProblem, Z) -> np.ndarray:
    """Relative residuals |G(F + h B Z) - Z| / max(|Z|, |G(...)|) of the step systems.

    Entries where both sides vanish count as zero.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.shape != (problem.mesh.N, problem.params.m):
        raise InvalidParams(f"Coefficient table must have shape {(problem.mesh.N, problem.params.m)}")
    weights = weight_calculator(problem)
    steps = problem.mesh.steps
    residuals = np.zeros_like(Z)
    for n in range(problem.mesh.N):
        argument = weights.lag_terms(Z, n) + steps[n] * weights.step_weights(n) @ Z[n]
        image = problem.nonlinearity(np.maximum(argument, 0.0))
        scale = np.maximum(np.abs(Z[n]), np.abs(image))
        diff = np.abs(image - Z[n])
        residuals[n] = np.divide(diff, scale, out=np.zeros_like(diff), where=scale > 0)
    return residuals


def translate_solution(
    problem: CollocationProblem, sol: CollocationSolution, shift: Optional[float] = None
) -> Tuple[CollocationProblem, CollocationSolution]:
    """Shift a solution right by one zero step of length ``shift`` (default h_0).

    Only convolution kernels carry translates of solutions to solutions.
    """
    if not problem.kernel.is_convolution:
        raise InvalidParams("Translated solutions are only defined for convolution kernels")
    shift = float(problem.mesh.steps[0] if shift is None else shift)
    mesh = Mesh(np.concatenate([[0.0], problem.mesh.points + shift]))
    extended = make_problem(problem.kernel, problem.nonlinearity, mesh, problem.params, problem.options)
    Z = np.vstack([np.zeros((1, problem.params.m)), sol.Z])
    return extended, CollocationSolution(mesh, problem.params, Z)
