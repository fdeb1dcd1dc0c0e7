"""Domain types for collocation problems of implicitly linear Volterra equations.

A problem couples a kernel K, a nonlinearity G, a mesh on [0, T] and a set of
collocation parameters; a solution is the coefficient table Z[n, i] = z_h(t_{n,i}).
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from collocation.config import SolverOptions
from collocation.errors import InvalidParams, OutOfDomain
from collocation.results import StepDiagnostics

logger = logging.getLogger(__name__)


class PowerProfile:
    """Convolution profile k(u) = u**a."""

    def __init__(self, a: float):
        self.a = a

    def __call__(self, u):
        return np.power(u, self.a)

    def __repr__(self):
        return f"PowerProfile(a={self.a})"


class ConstantProfile:
    """Convolution profile k(u) = value."""

    def __init__(self, value: float):
        self.value = value

    def __call__(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.value)

    def __repr__(self):
        return f"ConstantProfile(value={self.value})"


class PowerFunction:
    """Nonlinearity G(y) = y**p."""

    def __init__(self, p: float):
        self.p = p

    def __call__(self, y):
        return np.power(y, self.p)

    def __repr__(self):
        return f"PowerFunction(p={self.p})"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel K(t, s), either a convolution profile k(t - s) or a general K.

    Exactly one of ``profile`` and ``function`` is set. Both must accept numpy
    arrays. Structural properties are declared, not inferred.
    """

    name: str
    profile: Optional[Callable] = None
    function: Optional[Callable] = None
    declared_monotone_in_t: bool = False
    parameters: Dict[str, float] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if (self.profile is None) == (self.function is None):
            raise InvalidParams(
                f"Kernel '{self.name}' needs exactly one of profile or function"
            )

    @property
    def is_convolution(self) -> bool:
        return self.profile is not None

    def lagged(self, u) -> np.ndarray:
        """Evaluate the convolution profile k(u) for u >= 0."""
        if not self.is_convolution:
            raise InvalidParams(f"Kernel '{self.name}' is not a convolution kernel")
        u = np.asarray(u, dtype=float)
        return np.broadcast_to(np.asarray(self.profile(u), dtype=float), u.shape)

    def evaluate(self, t, s) -> np.ndarray:
        """Evaluate K(t, s), returning 0 wherever s > t."""
        t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
        inside = s <= t
        if self.is_convolution:
            values = self.lagged(np.where(inside, t - s, 0.0))
        else:
            values = np.broadcast_to(np.asarray(self.function(t, s), dtype=float), t.shape)
        return np.where(inside, values, 0.0)

    @classmethod
    def power_convolution(cls, a: float) -> "KernelSpec":
        """k(u) = u**a with a > 0; nondecreasing profile, so monotone in t."""
        if not a > 0:
            raise InvalidParams(f"power_convolution needs a > 0, got {a}")
        return cls(
            name="power_convolution",
            profile=PowerProfile(float(a)),
            declared_monotone_in_t=True,
            parameters={"a": float(a)},
        )

    @classmethod
    def constant(cls, value: float = 1.0) -> "KernelSpec":
        if not value > 0:
            raise InvalidParams(f"constant kernel needs value > 0, got {value}")
        return cls(
            name="constant",
            profile=ConstantProfile(float(value)),
            declared_monotone_in_t=True,
            parameters={"value": float(value)},
        )


@dataclass(frozen=True)
class NonlinearitySpec:
    """Nonlinearity G with declared behaviour of the ratio G(y)/y.

    ``ratio_unbounded`` refers to the whole half line ]0, +inf[; left as None
    it follows ``ratio_unbounded_near_zero`` when that is true and is unknown
    otherwise.
    """

    name: str
    function: Callable
    ratio_unbounded_near_zero: bool = False
    ratio_bounded_away_from_zero: bool = False
    ratio_strictly_decreasing: bool = False
    ratio_vanishing_sequence: bool = False
    well_behaved: bool = False
    ratio_unbounded: Optional[bool] = None
    parameters: Dict[str, float] = field(default_factory=dict, compare=False)

    def __call__(self, y):
        arr = np.asarray(y, dtype=float)
        out = np.asarray(self.function(arr), dtype=float)
        if out.shape != arr.shape:
            out = np.vectorize(self.function, otypes=[float])(arr)
        return out if arr.ndim else float(out)

    @property
    def ratio_unbounded_declared(self) -> Optional[bool]:
        if self.ratio_unbounded is not None:
            return self.ratio_unbounded
        return True if self.ratio_unbounded_near_zero else None

    @classmethod
    def power(cls, p: float) -> "NonlinearitySpec":
        """G(y) = y**p, p > 0, with the ratio properties that follow from p."""
        if not p > 0:
            raise InvalidParams(f"power nonlinearity needs p > 0, got {p}")
        sublinear = p < 1
        return cls(
            name="power",
            function=PowerFunction(float(p)),
            ratio_unbounded_near_zero=sublinear,
            ratio_bounded_away_from_zero=p <= 1,
            ratio_strictly_decreasing=sublinear,
            ratio_vanishing_sequence=sublinear,
            well_behaved=sublinear,
            ratio_unbounded=p != 1,
            parameters={"p": float(p)},
        )

    @classmethod
    def power_root(cls, b: float) -> "NonlinearitySpec":
        """G(y) = y**(1/b), b > 1: every ratio property holds."""
        if not b > 1:
            raise InvalidParams(f"power_root needs b > 1, got {b}")
        spec = cls.power(1.0 / float(b))
        return cls(
            name="power_root",
            function=spec.function,
            ratio_unbounded_near_zero=True,
            ratio_bounded_away_from_zero=True,
            ratio_strictly_decreasing=True,
            ratio_vanishing_sequence=True,
            well_behaved=True,
            ratio_unbounded=True,
            parameters={"b": float(b)},
        )


@dataclass(frozen=True, eq=False)
class Mesh:
    """Strictly increasing mesh 0 = t_0 < t_1 < ... < t_N = T."""

    points: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim != 1 or points.size < 2:
            raise InvalidParams("Mesh needs at least two points (N >= 1)")
        if not np.all(np.isfinite(points)):
            raise InvalidParams("Mesh points must be finite")
        if points[0] != 0.0:
            raise InvalidParams(f"Mesh must start at t_0 = 0, got {points[0]}")
        if np.any(np.diff(points) <= 0):
            raise InvalidParams("Mesh points must be strictly increasing")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @classmethod
    def uniform(cls, T: float, N: int) -> "Mesh":
        if N < 1 or not T > 0:
            raise InvalidParams(f"Uniform mesh needs T > 0 and N >= 1, got T={T}, N={N}")
        return cls(T * np.arange(N + 1) / N)

    @classmethod
    def from_stepsize(cls, T: float, h: float) -> "Mesh":
        """Uniform mesh with stepsize h; T/h must be (numerically) an integer."""
        if not (h > 0 and T > 0):
            raise InvalidParams(f"Stepsize mesh needs T > 0 and h > 0, got T={T}, h={h}")
        N = int(round(T / h))
        if N < 1 or abs(N * h - T) > 1e-9 * T:
            raise InvalidParams(f"T={T} is not a multiple of h={h}")
        return cls.uniform(T, N)

    @property
    def N(self) -> int:
        return self.points.size - 1

    @property
    def T(self) -> float:
        return float(self.points[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def h(self) -> float:
        """Stepsize max h_n."""
        return float(self.steps.max())

    @property
    def is_uniform(self) -> bool:
        steps = self.steps
        return bool(np.allclose(steps, self.T / self.N, rtol=1e-9, atol=0.0))

    def locate(self, t: float) -> int:
        """Index n of the subinterval ]t_n, t_{n+1}] containing t."""
        if not (0.0 < t <= self.T):
            raise OutOfDomain(f"t={t} outside ]0, {self.T}]")
        n = int(np.searchsorted(self.points, t, side="left")) - 1
        return min(max(n, 0), self.N - 1)


@dataclass(frozen=True)
class CollocationParameters:
    """Collocation parameters 0 <= c_1 < ... < c_m <= 1."""

    c: Tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.c))
        if not c:
            raise InvalidParams("At least one collocation parameter is required")
        if any(v < 0.0 or v > 1.0 for v in c):
            raise InvalidParams(f"Collocation parameters must lie in [0, 1], got {c}")
        if any(b <= a for a, b in zip(c, c[1:])):
            raise InvalidParams(f"Collocation parameters must be strictly increasing, got {c}")
        object.__setattr__(self, "c", c)

    @classmethod
    def case1(cls, c1: float) -> "CollocationParameters":
        return cls((c1,))

    @classmethod
    def case2(cls, c2: float) -> "CollocationParameters":
        return cls((0.0, c2))

    @property
    def m(self) -> int:
        return len(self.c)

    @property
    def nodes(self) -> np.ndarray:
        return np.array(self.c)

    @property
    def case(self) -> Optional[int]:
        """1 for m=1 with c_1>0, 2 for m=2 with c_1=0, None otherwise."""
        if self.m == 1 and self.c[0] > 0.0:
            return 1
        if self.m == 2 and self.c[0] == 0.0:
            return 2
        return None

    def basis(self, v) -> np.ndarray:
        """Lagrange fundamental polynomials L_j(v), shape (len(v), m)."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        c = self.nodes
        values = np.ones((v.size, self.m))
        for j in range(self.m):
            for k in range(self.m):
                if k != j:
                    values[:, j] *= (v - c[k]) / (c[j] - c[k])
        return values


@dataclass(frozen=True)
class CollocationProblem:
    kernel: KernelSpec
    nonlinearity: NonlinearitySpec
    mesh: Mesh
    params: CollocationParameters
    options: SolverOptions = field(default_factory=SolverOptions)

    @property
    def case(self) -> Optional[int]:
        return self.params.case

    def collocation_points(self, n: int) -> np.ndarray:
        """t_{n,i} = t_n + c_i h_n for i = 1..m."""
        return self.mesh.points[n] + self.params.nodes * self.mesh.steps[n]


def make_problem(
    kernel: KernelSpec,
    nonlinearity: NonlinearitySpec,
    mesh: Mesh,
    params: CollocationParameters,
    options: Optional[SolverOptions] = None,
) -> CollocationProblem:
    """Validate the pieces and assemble a collocation problem.

    Raises:
        InvalidParams: wrong component types, m=1 with c_1=0 (only the
            trivial solution exists), or a non-default branch policy.
    """
    options = options or SolverOptions()
    expected = (
        (kernel, KernelSpec, "kernel"),
        (nonlinearity, NonlinearitySpec, "nonlinearity"),
        (mesh, Mesh, "mesh"),
        (params, CollocationParameters, "params"),
        (options, SolverOptions, "options"),
    )
    for value, cls, label in expected:
        if not isinstance(value, cls):
            raise InvalidParams(f"{label} must be a {cls.__name__}, got {type(value).__name__}")

    if params.m == 1 and params.c[0] == 0.0:
        raise InvalidParams("m=1 with c_1=0 admits only the trivial collocation solution")
    if not options.nondivergent_selection:
        raise InvalidParams("Only the nondivergent (minimum fixed point) selection is supported")

    problem = CollocationProblem(kernel, nonlinearity, mesh, params, options)
    logger.debug(
        f"Problem: {kernel.name} {kernel.parameters}, {nonlinearity.name} "
        f"{nonlinearity.parameters}, N={mesh.N}, h={mesh.h:g}, c={params.c}"
    )
    return problem


@dataclass(frozen=True, eq=False)
class CollocationSolution:
    """Coefficient table Z[n, i] = z_h(t_{n,i}) plus per-step diagnostics."""

    mesh: Mesh
    params: CollocationParameters
    Z: np.ndarray
    diagnostics: Tuple[StepDiagnostics, ...] = ()

    def __post_init__(self):
        Z = np.array(self.Z, dtype=float)
        if Z.shape != (self.mesh.N, self.params.m):
            raise InvalidParams(
                f"Coefficient table must have shape {(self.mesh.N, self.params.m)}, got {Z.shape}"
            )
        Z.setflags(write=False)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))

    def evaluate(self, t: float) -> float:
        return evaluate_solution(self, t)

    def collocation_points(self) -> np.ndarray:
        """Array of t_{n,i}, shape (N, m)."""
        return self.mesh.points[:-1, None] + self.params.nodes[None, :] * self.mesh.steps[:, None]


def evaluate_solution(sol: CollocationSolution, t: float) -> float:
    """z_h(t_n + v h_n) = sum_j L_j(v) Z[n, j] for t in ]t_n, t_{n+1}].

    With c_1 = 0 the coefficient Z[n, 0] is the right limit z_h(t_n+); the
    point t_n itself belongs to the previous subinterval.

    Raises:
        OutOfDomain: t <= 0 or t > T.
    """
    n = sol.mesh.locate(t)
    v = (t - sol.mesh.points[n]) / sol.mesh.steps[n]
    return float(sol.params.basis(v)[0] @ sol.Z[n])
