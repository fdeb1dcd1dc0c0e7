"""Collocation weights: Lagrange basis and the integrals B_n(i, j), B_n^l(i, j)."""

import logging
import threading
from functools import lru_cache
from typing import Dict, Optional

import numpy as np

from collocation.errors import InvalidParams, KernelEvaluationError
from collocation.models import CollocationParameters, CollocationProblem

logger = logging.getLogger(__name__)


class QuadratureRule:
    """Gauss-Legendre rule with q nodes mapped to [0, 1]."""

    def __init__(self, q: int = 16):
        if q < 1:
            raise InvalidParams(f"Quadrature needs at least one node, got q={q}")
        self.q = q
        knots, weights = np.polynomial.legendre.leggauss(q)
        self.nodes = 0.5 * (knots + 1.0)
        self.weights = 0.5 * weights

    def on(self, a: float, b: float):
        """Nodes and weights on [a, b]."""
        return a + (b - a) * self.nodes, (b - a) * self.weights

    def integrate(self, f, a: float = 0.0, b: float = 1.0) -> float:
        x, w = self.on(a, b)
        return float(np.dot(w, f(x)))

    def __repr__(self):
        return f"QuadratureRule(q={self.q})"


def lagrange_basis(params: CollocationParameters, j: int, v: float) -> float:
    """L_j(v) for 1 <= j <= m; identically 1 when m = 1."""
    if not 1 <= j <= params.m:
        raise InvalidParams(f"Basis index j={j} outside 1..{params.m}")
    return float(params.basis(v)[0, j - 1])


class WeightCalculator:
    """Computes and caches the weight tables of one problem.

    Convolution kernels get their step weights cached by h_n. On a uniform
    mesh the lag weights depend only on d = n - l and are tabulated once.
    """

    def __init__(self, problem: CollocationProblem):
        self.problem = problem
        self.rule = QuadratureRule(problem.options.quadrature_nodes)
        self._c = problem.params.nodes
        self._basis_nodes = problem.params.basis(self.rule.nodes)  # (q, m)
        self._step_cache: Dict[float, np.ndarray] = {}
        self._lag_table: Optional[np.ndarray] = None
        self._lock = threading.Lock()

        self.uniform_convolution = problem.kernel.is_convolution and problem.mesh.is_uniform

    def _checked(self, values: np.ndarray, where: str) -> np.ndarray:
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            bad = values[~np.isfinite(values) | (values < 0)]
            raise KernelEvaluationError(
                f"Kernel '{self.problem.kernel.name}' returned {bad.flat[0]} {where}"
            )
        return values

    def step_weights(self, n: int) -> np.ndarray:
        """m x m table B_n(i, j) = int_0^{c_i} K(t_{n,i}, t_n + s h_n) L_j(s) ds."""
        mesh = self.problem.mesh
        if not 0 <= n < mesh.N:
            raise InvalidParams(f"Step index n={n} outside 0..{mesh.N - 1}")
        h = float(mesh.steps[n])

        if self.problem.kernel.is_convolution:
            key = float(f"{h:.13e}")
            with self._lock:
                cached = self._step_cache.get(key)
            if cached is not None:
                return cached

        c = self._c
        m = c.size
        # Nodes s = c_i x_r on [0, c_i], shape (m, q)
        s = c[:, None] * self.rule.nodes[None, :]
        w = c[:, None] * self.rule.weights[None, :]
        if self.problem.kernel.is_convolution:
            k = self.problem.kernel.lagged((c[:, None] - s) * h)
        else:
            t_ni = mesh.points[n] + c * h
            k = self.problem.kernel.evaluate(t_ni[:, None], mesh.points[n] + s * h)
        k = self._checked(k, f"on step {n}")
        L = self.problem.params.basis(s.ravel()).reshape(m, -1, m)
        B = np.einsum("ir,ir,irj->ij", w, k, L)
        B.setflags(write=False)

        if self.problem.kernel.is_convolution:
            with self._lock:
                self._step_cache[key] = B
        return B

    def _uniform_lag_table(self) -> np.ndarray:
        """W[d, i, j] = int_0^1 k((d + c_i - s) h) L_j(s) ds for d = 0..N-1."""
        with self._lock:
            if self._lag_table is not None:
                return self._lag_table
        mesh = self.problem.mesh
        h = mesh.T / mesh.N
        d = np.arange(mesh.N, dtype=float)
        u = (d[:, None, None] + self._c[None, :, None] - self.rule.nodes[None, None, :]) * h
        k = np.zeros_like(u)
        k[1:] = self._checked(self.problem.kernel.lagged(u[1:]), "in lag weights")
        table = np.einsum("dir,r,rj->dij", k, self.rule.weights, self._basis_nodes)
        table.setflags(write=False)
        logger.debug(f"Tabulated uniform lag weights: N={mesh.N}, m={self._c.size}, h={h:g}")
        with self._lock:
            self._lag_table = table
        return table

    def lag_block(self, n: int) -> np.ndarray:
        """Array of shape (n, m, m) holding B_n^l(i, j) for l = 0..n-1."""
        mesh = self.problem.mesh
        if not 0 <= n < mesh.N:
            raise InvalidParams(f"Step index n={n} outside 0..{mesh.N - 1}")
        m = self._c.size
        if n == 0:
            return np.zeros((0, m, m))
        if self.uniform_convolution:
            return self._uniform_lag_table()[n:0:-1]

        t_ni = self.problem.collocation_points(n)  # (m,)
        s = mesh.points[:n, None] + self.rule.nodes[None, :] * mesh.steps[:n, None]  # (n, q)
        k = self.problem.kernel.evaluate(t_ni[None, :, None], s[:, None, :])  # (n, m, q)
        k = self._checked(k, f"in lag weights of step {n}")
        return np.einsum("lir,r,rj->lij", k, self.rule.weights, self._basis_nodes)

    def lag_weights(self, n: int, l: int) -> np.ndarray:
        """m x m table B_n^l(i, j) for 0 <= l < n."""
        if not 0 <= l < n:
            raise InvalidParams(f"Lag weights need 0 <= l < n, got l={l}, n={n}")
        return self.lag_block(n)[l]

    def lag_terms(self, Z: np.ndarray, n: int) -> np.ndarray:
        """F_n(t_{n,i}) = sum_l h_l sum_j B_n^l(i, j) Z[l, j], for every i."""
        if n == 0:
            return np.zeros(self._c.size)
        block = self.lag_block(n)
        steps = self.problem.mesh.steps[:n]
        return np.einsum("lij,lj,l->i", block, np.asarray(Z, dtype=float)[:n], steps)


@lru_cache(maxsize=16)
def weight_calculator(problem: CollocationProblem) -> WeightCalculator:
    """Shared calculator per problem, so module-level calls reuse caches."""
    return WeightCalculator(problem)


def step_weights(problem: CollocationProblem, n: int) -> np.ndarray:
    return weight_calculator(problem).step_weights(n)


def lag_weights(problem: CollocationProblem, n: int, l: int, i: int, j: int) -> float:
    """B_n^l(i, j) with 1-based i and j."""
    m = problem.params.m
    if not (1 <= i <= m and 1 <= j <= m):
        raise InvalidParams(f"Indices i={i}, j={j} outside 1..{m}")
    return float(weight_calculator(problem).lag_weights(n, l)[i - 1, j - 1])
