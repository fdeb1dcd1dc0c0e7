"""Configuration management for collocation runs.

Solver options are shared by every problem; a run configuration describes one
batch command (solve, sweep, classify, probe, reproduce-table1/2).
"""

import logging
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Mapping, Optional, Tuple

from collocation.errors import ConfigError

logger = logging.getLogger(__name__)

COMMANDS = ("solve", "sweep", "classify", "probe", "reproduce-table1", "reproduce-table2")

# name -> required parameter keys
KERNELS = {"power_convolution": ("a",), "constant": ("value",)}
NONLINEARITIES = {"power_root": ("b",), "power": ("p",)}


@dataclass(frozen=True)
class SolverOptions:
    """Numerical settings for quadrature, fixed point scans and iteration."""

    quadrature_nodes: int = 16
    scan_floor: float = 1e-300
    scan_cap: Optional[float] = None  # None: 1e12 * max(1, G(alpha)) per query
    scan_ratio: float = 2.0
    scan_refinement: int = 1
    root_rtol: float = 1e-12
    residual_rtol: float = 1e-10

    # Experimental general-m iteration
    damping: float = 0.5
    max_iterations: int = 10_000
    seed_count: int = 16
    seed_min: float = 1e-12
    seed_max: float = 1e2

    nondivergent_selection: bool = True

    def __post_init__(self):
        if self.quadrature_nodes < 1:
            raise ConfigError(f"quadrature_nodes must be >= 1, got {self.quadrature_nodes}")
        if not self.scan_ratio > 1:
            raise ConfigError(f"scan_ratio must be > 1, got {self.scan_ratio}")
        if self.scan_refinement < 1:
            raise ConfigError(f"scan_refinement must be >= 1, got {self.scan_refinement}")
        if not self.scan_floor > 0:
            raise ConfigError(f"scan_floor must be > 0, got {self.scan_floor}")
        if self.scan_cap is not None and not self.scan_cap > self.scan_floor:
            raise ConfigError("scan_cap must exceed scan_floor")
        if not 0 < self.damping <= 1:
            raise ConfigError(f"damping must be in ]0, 1], got {self.damping}")
        if self.max_iterations < 1 or self.seed_count < 1:
            raise ConfigError("max_iterations and seed_count must be positive")


def _as_float(key: str, value: Any) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def _as_int(key: str, value: Any) -> int:
    number = _as_float(key, value)
    if number != int(number):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    return int(number)


def _as_bool(key: str, value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("true", "yes", "1", "on"):
        return True
    if text in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _as_floats(key: str, value: Any) -> Tuple[float, ...]:
    if isinstance(value, (list, tuple)):
        items = list(value)
    else:
        items = [item for item in str(value).split(",") if item.strip()]
    if not items:
        raise ConfigError(f"{key}: expected a comma separated list of numbers")
    return tuple(_as_float(key, item) for item in items)


_OPTION_KEYS = {
    "solver.quadrature_nodes": ("quadrature_nodes", _as_int),
    "solver.scan_floor": ("scan_floor", _as_float),
    "solver.scan_cap": ("scan_cap", _as_float),
    "solver.scan_ratio": ("scan_ratio", _as_float),
    "solver.scan_refinement": ("scan_refinement", _as_int),
    "solver.root_rtol": ("root_rtol", _as_float),
    "solver.residual_rtol": ("residual_rtol", _as_float),
    "solver.damping": ("damping", _as_float),
    "solver.max_iterations": ("max_iterations", _as_int),
    "solver.seed_count": ("seed_count", _as_int),
}

_KNOWN_KEYS = {
    "command", "kernel", "kernel.a", "kernel.value", "G", "G.b", "G.p", "T",
    "mesh.N", "mesh.h", "case", "m", "c", "c1", "c2",
    "sweep.h", "sweep.c_start", "sweep.c_stop", "sweep.c_step", "probe.h0",
    "output.path", "output.samples", "output.timings",
    "reproduce.tolerance", "reproduce.c_tolerance", "threads", "debug",
} | set(_OPTION_KEYS)


@dataclass
class RunConfig:
    """Main configuration container for one batch command."""

    command: str = "solve"
    kernel: str = "power_convolution"
    kernel_params: Dict[str, float] = field(default_factory=lambda: {"a": 1.0})
    nonlinearity: str = "power_root"
    nonlinearity_params: Dict[str, float] = field(default_factory=lambda: {"b": 2.0})
    T: float = 1.0
    mesh_N: Optional[int] = None
    mesh_h: Optional[float] = None
    case: Optional[int] = None
    c: Tuple[float, ...] = ()
    sweep_h: Tuple[float, ...] = (0.1, 0.01, 0.001)
    c_start: float = 0.01
    c_stop: float = 1.0
    c_step: float = 0.001
    probe_h0: Tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    options: SolverOptions = field(default_factory=SolverOptions)
    output_path: Optional[str] = None
    samples: int = 101
    timings: bool = False
    tolerance: float = 0.15
    c_tolerance: float = 0.02
    threads: int = 1
    debug: bool = False

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "RunConfig":
        """Build a configuration from flat dotted keys (``kernel.a``, ``mesh.h``...)."""
        unknown = sorted(set(data) - _KNOWN_KEYS)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}")

        config = cls()
        if "command" in data:
            config.command = str(data["command"]).strip()
            if config.command not in COMMANDS:
                raise ConfigError(f"command must be one of {COMMANDS}, got {config.command!r}")

        if "kernel" in data:
            config.kernel = str(data["kernel"]).strip()
            config.kernel_params = {}
        if config.kernel not in KERNELS:
            raise ConfigError(f"Unknown kernel {config.kernel!r}; builtins: {sorted(KERNELS)}")
        for name in KERNELS[config.kernel]:
            if f"kernel.{name}" in data:
                config.kernel_params[name] = _as_float(f"kernel.{name}", data[f"kernel.{name}"])
        if config.kernel == "constant":
            config.kernel_params.setdefault("value", 1.0)
        missing = [k for k in KERNELS[config.kernel] if k not in config.kernel_params]
        if missing:
            raise ConfigError(f"kernel {config.kernel} needs kernel.{missing[0]}")

        if "G" in data:
            config.nonlinearity = str(data["G"]).strip()
            config.nonlinearity_params = {}
        if config.nonlinearity not in NONLINEARITIES:
            raise ConfigError(
                f"Unknown nonlinearity {config.nonlinearity!r}; builtins: {sorted(NONLINEARITIES)}"
            )
        for name in NONLINEARITIES[config.nonlinearity]:
            if f"G.{name}" in data:
                config.nonlinearity_params[name] = _as_float(f"G.{name}", data[f"G.{name}"])
        missing = [k for k in NONLINEARITIES[config.nonlinearity] if k not in config.nonlinearity_params]
        if missing:
            raise ConfigError(f"G {config.nonlinearity} needs G.{missing[0]}")

        if "T" in data:
            config.T = _as_float("T", data["T"])
        if "mesh.N" in data:
            config.mesh_N = _as_int("mesh.N", data["mesh.N"])
        if "mesh.h" in data:
            config.mesh_h = _as_float("mesh.h", data["mesh.h"])
        if config.mesh_N is not None and config.mesh_h is not None:
            raise ConfigError("Give either mesh.N or mesh.h, not both")

        if "case" in data:
            config.case = _as_int("case", data["case"])
            if config.case not in (1, 2):
                raise ConfigError(f"case must be 1 or 2, got {config.case}")
        config.c = _collocation_parameters(data, config.case)
        if "m" in data and config.c and _as_int("m", data["m"]) != len(config.c):
            raise ConfigError(f"m={data['m']} does not match {len(config.c)} collocation parameters")

        if "sweep.h" in data:
            config.sweep_h = _as_floats("sweep.h", data["sweep.h"])
        for key, attr in (("sweep.c_start", "c_start"), ("sweep.c_stop", "c_stop"), ("sweep.c_step", "c_step")):
            if key in data:
                setattr(config, attr, _as_float(key, data[key]))
        if not config.c_step > 0 or config.c_stop < config.c_start:
            raise ConfigError("sweep needs c_step > 0 and c_stop >= c_start")
        if "probe.h0" in data:
            config.probe_h0 = _as_floats("probe.h0", data["probe.h0"])

        overrides = {
            attr: convert(key, data[key]) for key, (attr, convert) in _OPTION_KEYS.items() if key in data
        }
        if overrides:
            config.options = replace(config.options, **overrides)

        if "output.path" in data:
            config.output_path = str(data["output.path"]).strip()
        if "output.samples" in data:
            config.samples = _as_int("output.samples", data["output.samples"])
        if "output.timings" in data:
            config.timings = _as_bool("output.timings", data["output.timings"])
        if "reproduce.tolerance" in data:
            config.tolerance = _as_float("reproduce.tolerance", data["reproduce.tolerance"])
        if "reproduce.c_tolerance" in data:
            config.c_tolerance = _as_float("reproduce.c_tolerance", data["reproduce.c_tolerance"])
        if "threads" in data:
            config.threads = _as_int("threads", data["threads"])
        if "debug" in data:
            config.debug = _as_bool("debug", data["debug"])
        return config

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        from collocation.config_loader import load_config_mapping

        return cls.from_mapping(load_config_mapping(path))

    @classmethod
    def from_environment(cls) -> "RunConfig":
        """Load from COLLOCATION_CONFIG (if set), then apply environment overrides."""
        path = os.getenv("COLLOCATION_CONFIG", "").strip()
        config = cls.from_file(path) if path else cls()
        threads = os.getenv("COLLOCATION_THREADS", "").strip()
        if threads:
            config.threads = _as_int("COLLOCATION_THREADS", threads)
        debug = os.getenv("COLLOCATION_DEBUG", "").strip()
        if debug:
            config.debug = _as_bool("COLLOCATION_DEBUG", debug)
        return config

    def to_mapping(self) -> Dict[str, Any]:
        """Flat dotted-key view, the inverse of ``from_mapping``."""
        data: Dict[str, Any] = {"command": self.command, "kernel": self.kernel}
        data.update({f"kernel.{k}": v for k, v in self.kernel_params.items()})
        data["G"] = self.nonlinearity
        data.update({f"G.{k}": v for k, v in self.nonlinearity_params.items()})
        data["T"] = self.T
        if self.mesh_N is not None:
            data["mesh.N"] = self.mesh_N
        if self.mesh_h is not None:
            data["mesh.h"] = self.mesh_h
        if self.case is not None:
            data["case"] = self.case
        if self.c:
            data["c"] = ", ".join(repr(v) for v in self.c)
        data["sweep.h"] = ", ".join(repr(v) for v in self.sweep_h)
        data["sweep.c_start"] = self.c_start
        data["sweep.c_stop"] = self.c_stop
        data["sweep.c_step"] = self.c_step
        data["probe.h0"] = ", ".join(repr(v) for v in self.probe_h0)
        defaults = SolverOptions()
        for key, (attr, _) in _OPTION_KEYS.items():
            value = getattr(self.options, attr)
            if value != getattr(defaults, attr):
                data[key] = value
        if self.output_path:
            data["output.path"] = self.output_path
        data["output.samples"] = self.samples
        data["output.timings"] = str(self.timings).lower()
        data["reproduce.tolerance"] = self.tolerance
        data["reproduce.c_tolerance"] = self.c_tolerance
        data["threads"] = self.threads
        data["debug"] = str(self.debug).lower()
        return data

    def build_kernel(self):
        # Imported here: models depends on this module for SolverOptions.
        from collocation.models import KernelSpec

        return getattr(KernelSpec, self.kernel)(**self.kernel_params)

    def build_nonlinearity(self):
        from collocation.models import NonlinearitySpec

        return getattr(NonlinearitySpec, self.nonlinearity)(**self.nonlinearity_params)

    def build_mesh(self, h: Optional[float] = None):
        from collocation.models import Mesh

        if h is not None:
            return Mesh.from_stepsize(self.T, h)
        if self.mesh_N is not None:
            return Mesh.uniform(self.T, self.mesh_N)
        return Mesh.from_stepsize(self.T, self.mesh_h if self.mesh_h is not None else 0.1)

    def build_params(self, c: Optional[float] = None):
        """Collocation parameters; ``c`` overrides the swept parameter of the case."""
        from collocation.models import CollocationParameters

        if c is not None:
            if self.case == 1:
                return CollocationParameters.case1(c)
            if self.case == 2:
                return CollocationParameters.case2(c)
            raise ConfigError("A swept collocation parameter needs case = 1 or 2")
        if not self.c:
            raise ConfigError("No collocation parameters given (c, c1/c2 with case)")
        return CollocationParameters(self.c)

    def to_problem(self, c: Optional[float] = None, h: Optional[float] = None):
        from collocation.models import make_problem

        return make_problem(
            self.build_kernel(),
            self.build_nonlinearity(),
            self.build_mesh(h),
            self.build_params(c),
            self.options,
        )

    def log_config(self) -> None:
        """Log the current configuration."""
        logger.info("=" * 60)
        logger.info("COLLOCATION RUN - CONFIGURATION")
        logger.info("=" * 60)
        logger.info(f"Command: {self.command}")
        logger.info(f"Kernel: {self.kernel} {self.kernel_params}")
        logger.info(f"Nonlinearity: {self.nonlinearity} {self.nonlinearity_params}")
        mesh = f"N={self.mesh_N}" if self.mesh_N is not None else f"h={self.mesh_h or 0.1}"
        logger.info(f"Interval: [0, {self.T}], mesh {mesh}")
        logger.info(f"Case: {self.case or '-'}, c: {self.c or '-'}")
        if self.command in ("sweep", "reproduce-table1", "reproduce-table2"):
            logger.info(f"Sweep: h in {self.sweep_h}, c from {self.c_start} to {self.c_stop} step {self.c_step}")
        logger.info("-" * 40)
        logger.info(
            f"Quadrature nodes: {self.options.quadrature_nodes}, "
            f"scan [{self.options.scan_floor:g}, {self.options.scan_cap or 'auto'}] "
            f"ratio {self.options.scan_ratio}"
        )
        logger.info(f"Threads: {self.threads or 'auto'}, Debug: {self.debug}")
        logger.info("=" * 60)


def _collocation_parameters(data: Mapping[str, Any], case: Optional[int]) -> Tuple[float, ...]:
    if "c" in data:
        c = _as_floats("c", data["c"])
    elif "c1" in data or "c2" in data:
        c1 = _as_float("c1", data["c1"]) if "c1" in data else None
        c2 = _as_float("c2", data["c2"]) if "c2" in data else None
        if case == 2:
            if c2 is None:
                raise ConfigError("case = 2 needs c2")
            c = (c1 if c1 is not None else 0.0, c2)
        elif case == 1:
            if c1 is None:
                raise ConfigError("case = 1 needs c1")
            c = (c1,)
        else:
            c = tuple(v for v in (c1, c2) if v is not None)
    else:
        return ()

    if case == 1 and len(c) != 1:
        raise ConfigError(f"case = 1 takes one collocation parameter, got {c}")
    if case == 2 and (len(c) != 2 or c[0] != 0.0):
        raise ConfigError(f"case = 2 takes c = (0, c2), got {c}")
    return c
