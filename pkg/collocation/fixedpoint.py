"""Nonzero fixed points of the scalar map y -> G(alpha + beta * y).

Every case 1 / case 2 collocation step reduces to one such query. Roots are
bracketed on a geometric grid and refined by bisection, so the smallest
transversal root is always the one selected.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import optimize

from collocation.config import SolverOptions
from collocation.errors import InvalidParams, NonFiniteEvaluation
from collocation.results import FixedPointOutcome, FixedPointStatus

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FixedPointQuery:
    """f(y) = G(alpha + beta y) - y scanned over [scan_floor, scan_cap]."""

    G: Callable
    alpha: float
    beta: float
    scan_floor: float = 1e-300
    scan_cap: Optional[float] = None
    scan_ratio: float = 2.0
    scan_refinement: int = 1
    rtol: float = 1e-12

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidParams(f"Fixed point query needs beta > 0, got {self.beta}")
        if not self.alpha >= 0:
            raise InvalidParams(f"Fixed point query needs alpha >= 0, got {self.alpha}")
        if not self.scan_ratio > 1:
            raise InvalidParams(f"scan_ratio must be > 1, got {self.scan_ratio}")
        if not 0 < self.scan_floor < self.cap():
            raise InvalidParams("Fixed point query needs 0 < scan_floor < scan_cap")

    @classmethod
    def from_options(cls, G: Callable, alpha: float, beta: float, options: SolverOptions) -> "FixedPointQuery":
        return cls(
            G=G,
            alpha=float(alpha),
            beta=float(beta),
            scan_floor=options.scan_floor,
            scan_cap=options.scan_cap,
            scan_ratio=options.scan_ratio,
            scan_refinement=options.scan_refinement,
            rtol=options.root_rtol,
        )

    def cap(self) -> float:
        if self.scan_cap is not None:
            return float(self.scan_cap)
        return 1e12 * max(1.0, float(self.G(self.alpha)))

    def grid(self) -> np.ndarray:
        """Geometric grid scan_floor * ratio**(k / refinement), closed by the cap."""
        floor, cap = self.scan_floor, self.cap()
        step = np.log(self.scan_ratio) / self.scan_refinement
        count = int(np.ceil((np.log(cap) - np.log(floor)) / step))
        points = np.exp(np.log(floor) + step * np.arange(count + 1))
        points[-1] = cap
        return points

    def residual(self, y: float) -> float:
        return abs(float(self.G(self.alpha + self.beta * y)) - y)

    def _scalar_map(self) -> Callable[[float], float]:
        # The raw callable skips the array wrapping of NonlinearitySpec
        raw = getattr(self.G, "function", self.G)
        alpha, beta = self.alpha, self.beta
        return lambda y: float(raw(alpha + beta * y)) - y


def _scan(query: FixedPointQuery) -> Tuple[np.ndarray, np.ndarray]:
    grid = query.grid()
    with np.errstate(over="ignore", invalid="ignore"):
        values = np.asarray(query.G(query.alpha + query.beta * grid), dtype=float) - grid
    if not np.all(np.isfinite(values)):
        k = int(np.flatnonzero(~np.isfinite(values))[0])
        raise NonFiniteEvaluation(
            f"G returned a non-finite value at y={grid[k]:g} "
            f"(alpha={query.alpha:g}, beta={query.beta:g})"
        )
    return grid, values


def _brackets(grid: np.ndarray, values: np.ndarray) -> List[Tuple[float, float]]:
    """Ascending (lo, hi) pairs holding a root; lo == hi marks an exact grid root."""
    signs = np.sign(values)
    exact = np.flatnonzero(signs == 0)
    changes = np.flatnonzero(signs[:-1] * signs[1:] < 0)
    brackets = [(grid[k], grid[k]) for k in exact]
    brackets += [(grid[k], grid[k + 1]) for k in changes]
    return sorted(brackets)


def _refine(query: FixedPointQuery, bracket: Tuple[float, float]) -> float:
    lo, hi = bracket
    if lo == hi:
        return float(lo)
    return float(
        optimize.bisect(
            query._scalar_map(),
            lo,
            hi,
            xtol=np.finfo(float).tiny,
            rtol=4 * np.finfo(float).eps,
            maxiter=200,
        )
    )


def _is_root(query: FixedPointQuery, y: float) -> Tuple[bool, float]:
    residual = query.residual(y)
    if residual > query.rtol * (1.0 + y):
        logger.warning(
            f"Sign change at y={y:.6e} is not a fixed point (residual {residual:.3e}); G jumps there"
        )
        return False, residual
    return True, residual


def _roots(
    query: FixedPointQuery, first_only: bool = False
) -> Tuple[List[Tuple[float, float]], np.ndarray, int]:
    """Refined roots with their residuals, ascending, the scan values and the bracket count."""
    grid, values = _scan(query)
    brackets = _brackets(grid, values)
    roots = []
    for bracket in brackets:
        y = _refine(query, bracket)
        ok, residual = _is_root(query, y)
        if ok:
            roots.append((y, residual))
            if first_only:
                break
    return roots, values, len(brackets)


def min_nonzero_fixed_point(query: FixedPointQuery) -> FixedPointOutcome:
    """Smallest root of G(alpha + beta y) = y in [scan_floor, scan_cap].

    Starting strictly above zero excludes the trivial root when alpha = 0.
    Every sign change of f(y) = G(alpha + beta y) - y is a candidate, in
    either direction; a candidate whose refined residual exceeds
    rtol * (1 + y) is a jump of G, not a root, and is skipped.

    Returns:
        ``found`` with the refined root, ``diverged`` when f stays positive
        up to the cap, ``none_in_bracket`` otherwise.

    Raises:
        NonFiniteEvaluation: G returned NaN or inf on the scan grid.
    """
    roots, values, detected = _roots(query, first_only=True)
    if not roots:
        status = FixedPointStatus.DIVERGED if np.all(values > 0) else FixedPointStatus.NONE_IN_BRACKET
        logger.debug(f"No fixed point: alpha={query.alpha:g}, beta={query.beta:g}, status={status.value}")
        return FixedPointOutcome(status=status)

    y_star, residual = roots[0]
    return FixedPointOutcome(
        status=FixedPointStatus.FOUND,
        y_star=y_star,
        residual=residual,
        roots_detected=detected,
    )


def scan_fixed_points(query: FixedPointQuery) -> List[float]:
    """Every bracketed root in (0, scan_cap], ascending."""
    roots, _, _ = _roots(query)
    return [y for y, _ in roots]


def iterate_fixed_point(
    query: FixedPointQuery, y0: float, max_iterations: int = 200, tol: float = 1e-12
) -> Tuple[float, int, bool]:
    """Plain iteration y <- G(alpha + beta y) from y0.

    Returns (y, iterations, converged); converged once |dy| <= tol * (1 + y).
    """
    step = query._scalar_map()
    y = float(y0)
    for iteration in range(1, max_iterations + 1):
        y_next = step(y) + y
        if not np.isfinite(y_next):
            raise NonFiniteEvaluation(f"Iteration left the finite range at step {iteration}")
        if abs(y_next - y) <= tol * (1.0 + abs(y_next)):
            return y_next, iteration, True
        y = y_next
    return y, max_iterations, False
