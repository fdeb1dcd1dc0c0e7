"""Post-processing: y_h = V z_h, error norms and (h, c) convergence sweeps."""

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from collocation.errors import CollocationError, DegenerateReference, InvalidParams, OutOfDomain
from collocation.models import (
    CollocationParameters,
    CollocationProblem,
    CollocationSolution,
    Mesh,
    make_problem,
)
from collocation.quadrature import QuadratureRule
from collocation.results import OptimumCheck, SweepOptimum, SweepResult, SweepRow
from collocation.solver import solve

logger = logging.getLogger(__name__)

# case -> h -> kind -> (relative error, c) for y = int_0^t (t-s) sqrt(y(s)) ds.
# With y_h = V z_h the case 1 minima and the h <= 0.01 case 2 minima come out
# differently (see DESIGN.md); reproduce-table1/2 report those cells as failed.
REFERENCE_OPTIMA: Dict[int, Dict[float, Dict[str, Tuple[float, float]]]] = {
    1: {
        0.1: {"max": (2.1, 1.0), "min": (2.5e-2, 0.25)},
        0.01: {"max": (3.2e-1, 1.0), "min": (3.4e-3, 0.175)},
        0.001: {"max": (4.1e-2, 1.0), "min": (3.4e-4, 0.168)},
    },
    2: {
        0.1: {"max": (4.2e-1, 0.01), "min": (1.5e-3, 0.358)},
        0.01: {"max": (5.2e-2, 0.01), "min": (1.4e-5, 0.369)},
        0.001: {"max": (5.4e-3, 0.01), "min": (1.4e-7, 0.37)},
    },
}


class PowerSolution:
    """Nontrivial solution y(t) = C t**gamma of y = int_0^t (t-s)^a y(s)^(1/b) ds."""

    def __init__(self, a: float, b: float):
        if not (a > 0 and b > 1):
            raise InvalidParams(f"Exact power solution needs a > 0 and b > 1, got a={a}, b={b}")
        self.a = float(a)
        self.b = float(b)
        self.gamma = (self.a + 1.0) * self.b / (self.b - 1.0)
        self.C = special.beta(self.a + 1.0, self.gamma / self.b + 1.0) ** (self.b / (self.b - 1.0))

    def __call__(self, t):
        return self.C * np.power(np.asarray(t, dtype=float), self.gamma)

    def z(self, t):
        """z = G(y) = y**(1/b)."""
        return np.power(self(t), 1.0 / self.b)

    def __repr__(self):
        return f"PowerSolution(a={self.a}, b={self.b}, C={self.C:.6e}, gamma={self.gamma:g})"


def exact_power_solution(a: float, b: float) -> PowerSolution:
    return PowerSolution(a, b)


def reference_for(problem: CollocationProblem) -> PowerSolution:
    """Closed-form reference for a power_convolution / power_root pair."""
    kernel, G = problem.kernel, problem.nonlinearity
    if kernel.name != "power_convolution" or G.name != "power_root":
        raise InvalidParams(
            f"No closed-form reference for {kernel.name}/{G.name}; pass one explicitly"
        )
    return PowerSolution(kernel.parameters["a"], G.parameters["b"])


class VolterraOperator:
    """Evaluates y_h(t) = int_0^t K(t, s) z_h(s) ds for one solution."""

    def __init__(self, problem: CollocationProblem, sol: CollocationSolution):
        if sol.Z.shape != (problem.mesh.N, problem.params.m):
            raise InvalidParams("Solution does not match the problem's mesh and parameters")
        self.problem = problem
        self.sol = sol
        self.rule = QuadratureRule(problem.options.quadrature_nodes)
        self._basis_nodes = problem.params.basis(self.rule.nodes)  # (q, m)

    def __call__(self, t: float) -> float:
        mesh = self.problem.mesh
        if not 0.0 <= t <= mesh.T:
            raise OutOfDomain(f"t={t} outside [0, {mesh.T}]")
        if t == 0.0:
            return 0.0
        n = mesh.locate(t)
        kernel, x, w = self.problem.kernel, self.rule.nodes, self.rule.weights
        Z = self.sol.Z

        # Full subintervals 0..n-1
        s = mesh.points[:n, None] + x[None, :] * mesh.steps[:n, None]
        k = kernel.evaluate(t, s)
        full = np.einsum("lr,r,rj,lj,l->", k, w, self._basis_nodes, Z[:n], mesh.steps[:n])

        # Partial subinterval ]t_n, t]
        v = (t - mesh.points[n]) / mesh.steps[n]
        k = kernel.evaluate(t, mesh.points[n] + v * x * mesh.steps[n])
        z = self.problem.params.basis(v * x) @ Z[n]
        partial = mesh.steps[n] * v * np.dot(w * k, z)
        return float(full + partial)

    def values_at(self, points) -> np.ndarray:
        return np.array([self(float(t)) for t in np.asarray(points, dtype=float).ravel()])

    def node_values(self, rule: QuadratureRule) -> np.ndarray:
        """y_h at t_n + x_p h_n for the nodes x_p of ``rule``, shape (N, p)."""
        mesh = self.problem.mesh
        if self.problem.kernel.is_convolution and mesh.is_uniform:
            return self._uniform_node_values(rule)
        points = mesh.points[:-1, None] + rule.nodes[None, :] * mesh.steps[:, None]
        return self.values_at(points).reshape(points.shape)

    def _uniform_node_values(self, rule: QuadratureRule) -> np.ndarray:
        # On a uniform mesh the contribution of subinterval l to node (n, p)
        # depends on n - l only, so the lag sum is a discrete convolution.
        mesh = self.problem.mesh
        N, h = mesh.N, mesh.T / mesh.N
        kernel, params = self.problem.kernel, self.problem.params
        x, w = self.rule.nodes, self.rule.weights
        xp = rule.nodes

        # P[p, j] = x_p sum_r w_r k(x_p (1 - x_r) h) L_j(x_p x_r)
        inner = xp[:, None] * x[None, :]
        k = kernel.lagged(xp[:, None] * (1.0 - x[None, :]) * h)
        L = params.basis(inner.ravel()).reshape(xp.size, x.size, params.m)
        P = xp[:, None] * np.einsum("r,pr,prj->pj", w, k, L)

        # V[d, p, j] = sum_r w_r k((d + x_p - x_r) h) L_j(x_r), V[0] = 0
        d = np.arange(N, dtype=float)
        u = (d[:, None, None] + xp[None, :, None] - x[None, None, :]) * h
        k = np.zeros_like(u)
        k[1:] = kernel.lagged(u[1:])
        V = np.einsum("dpr,r,rj->dpj", k, w, self._basis_nodes)

        Z = self.sol.Z
        values = h * (Z @ P.T)
        for p in range(xp.size):
            for j in range(params.m):
                values[:, p] += h * np.convolve(V[:, p, j], Z[:, j])[:N]
        return values


def apply_volterra(problem: CollocationProblem, sol: CollocationSolution, t: float) -> float:
    """y_h(t) for t in [0, T]; y_h(0) = 0."""
    return VolterraOperator(problem, sol)(t)


def relative_error(
    problem: CollocationProblem, sol: CollocationSolution, reference: Callable
) -> float:
    """int_0^T |y_h - y| / int_0^T y by Gauss-Legendre on every mesh subinterval.

    Raises:
        DegenerateReference: int_0^T y <= 0.
    """
    mesh = problem.mesh
    rule = QuadratureRule(problem.options.quadrature_nodes)
    points = mesh.points[:-1, None] + rule.nodes[None, :] * mesh.steps[:, None]
    exact = np.asarray(reference(points), dtype=float)
    if exact.shape != points.shape:
        exact = np.vectorize(reference, otypes=[float])(points)

    weights = rule.weights[None, :] * mesh.steps[:, None]
    norm = float(np.sum(weights * exact))
    if not norm > 0:
        raise DegenerateReference(f"Reference integrates to {norm:g} over [0, {mesh.T}]")
    approx = VolterraOperator(problem, sol).node_values(rule)
    return float(np.sum(weights * np.abs(approx - exact)) / norm)


def c_grid(start: float = 0.01, stop: float = 1.0, step: float = 0.001) -> np.ndarray:
    """Inclusive grid start, start + step, ..., stop, rounded to 12 decimals."""
    if not step > 0 or stop < start:
        raise InvalidParams(f"Bad c grid: start={start}, stop={stop}, step={step}")
    count = int(round((stop - start) / step)) + 1
    return np.round(start + step * np.arange(count), 12)


def _case_params(case: int, c: float) -> CollocationParameters:
    if case == 1:
        return CollocationParameters.case1(c)
    if case == 2:
        return CollocationParameters.case2(c)
    raise InvalidParams(f"Sweeps cover case 1 or 2, got case={case}")


def _sweep_row(
    base: CollocationProblem, h: float, c: float, case: int, reference: Callable
) -> SweepRow:
    start = time.perf_counter()
    try:
        problem = make_problem(
            base.kernel,
            base.nonlinearity,
            Mesh.from_stepsize(base.mesh.T, h),
            _case_params(case, c),
            base.options,
        )
        error = relative_error(problem, solve(problem), reference)
        # m equals the case number for cases 1-2
        return SweepRow(case, case, h, c, error, time.perf_counter() - start)
    except CollocationError as e:
        logger.warning(f"Sweep row h={h:g}, c={c:g} failed: {e}")
        return SweepRow(case, case, h, c, None, time.perf_counter() - start, "failed", str(e))


def _optima(rows: List[SweepRow], hs: Sequence[float]) -> List[SweepOptimum]:
    optima = []
    for h in hs:
        ok = [r for r in rows if r.h == h and r.status == "ok"]
        if not ok:
            continue
        best = min(ok, key=lambda r: r.relative_error)
        worst = max(ok, key=lambda r: r.relative_error)
        optima.append(SweepOptimum(h, best.c, best.relative_error, worst.c, worst.relative_error))
    return optima


def convergence_sweep(
    base: CollocationProblem,
    hs: Sequence[float],
    cs: Sequence[float],
    case: int,
    reference: Optional[Callable] = None,
    threads: int = 1,
) -> SweepResult:
    """Solve and measure the relative error for every (h, c) pair.

    Kernel, nonlinearity, T and options come from ``base``. Failed pairs
    become rows with status ``failed``. Rows are ordered by (h, c)
    whatever order the workers finish in.
    """
    reference = reference or reference_for(base)
    hs = sorted({float(h) for h in hs}, reverse=True)
    pairs = [(h, float(c)) for h in hs for c in cs]
    workers = threads or os.cpu_count() or 1
    logger.info(f"Sweep case {case}: {len(hs)} stepsizes x {len(cs)} parameters on {workers} thread(s)")

    start = time.perf_counter()
    if workers == 1:
        rows = [_sweep_row(base, h, c, case, reference) for h, c in pairs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda pair: _sweep_row(base, *pair, case, reference), pairs))
    rows.sort(key=lambda r: (r.h, r.c))

    failed = sum(r.status != "ok" for r in rows)
    logger.info(f"Sweep finished in {time.perf_counter() - start:.1f}s ({failed} failed rows)")

    optima = _optima(rows, hs)
    ratios = [
        (coarse.h, fine.h, coarse.min_error / fine.min_error, coarse.max_error / fine.max_error)
        for coarse, fine in zip(optima, optima[1:])
    ]
    return SweepResult(rows=rows, optima=optima, rate_ratios=ratios)


def check_optima(
    result: SweepResult,
    expected: Dict[float, Dict[str, Tuple[float, float]]],
    tolerance: float = 0.15,
    c_tolerance: float = 0.02,
) -> List[OptimumCheck]:
    """Compare per-h extreme errors and their c with expected table cells."""
    checks = []
    for h, cells in sorted(expected.items(), reverse=True):
        optimum = result.optimum_for(h)
        for kind in ("max", "min"):
            expected_error, expected_c = cells[kind]
            if optimum is None:
                checks.append(OptimumCheck(h, kind, None, None, expected_error, expected_c, False))
                continue
            error, c = (
                (optimum.max_error, optimum.argmax_c) if kind == "max" else (optimum.min_error, optimum.argmin_c)
            )
            passed = (
                abs(error - expected_error) <= tolerance * expected_error
                and abs(c - expected_c) <= c_tolerance + 1e-9
            )
            if not passed:
                logger.warning(
                    f"h={h:g} {kind}: error {error:.3e} at c={c:.3f}, "
                    f"expected {expected_error:.3e} at c={expected_c:.3f}"
                )
            checks.append(OptimumCheck(h, kind, error, c, expected_error, expected_c, passed))
    return checks
