"""Batch command line front end.

Runs one command per invocation:
- solve: coefficient table and y_h samples for one problem
- sweep: relative errors over an (h, c) grid
- classify: existence / uniqueness / nondivergence report
- probe: first-step nondivergence probe over shrinking h_0
- reproduce-table1 / reproduce-table2: extreme errors of the c sweeps
  checked against the reference values

Usage: python -m collocation.main --config profiles/table1.conf --out table1.csv
"""

import argparse
import logging
import sys
from dataclasses import replace
from typing import List, Optional

import numpy as np

from collocation.analysis import check_kernel, check_nonlinearity, classify_existence, nondivergence_probe
from collocation.config import COMMANDS, RunConfig
from collocation.config_loader import load_run_config
from collocation.errors import CollocationError, ConfigError, InvalidParams, OutOfDomain
from collocation.postprocess import REFERENCE_OPTIMA, c_grid, check_optima, convergence_sweep
from collocation.reporting import (
    samples_path,
    write_key_value_csv,
    write_optima_csv,
    write_probe_csv,
    write_samples_csv,
    write_solution_csv,
    write_sweep_csv,
)
from collocation.solver import equation_residuals, solve

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2


class CollocationApp:
    """Runs the configured command and writes its CSV artifact."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.output = config.output_path

    def run(self) -> int:
        command = self.config.command
        logger.info(f"Running '{command}'")
        handler = {
            "solve": self._solve,
            "sweep": self._sweep,
            "classify": self._classify,
            "probe": self._probe,
            "reproduce-table1": lambda: self._reproduce(1),
            "reproduce-table2": lambda: self._reproduce(2),
        }[command]
        handler()
        logger.info(f"'{command}' complete")
        return EXIT_OK

    def _solve(self) -> None:
        problem = self.config.to_problem()
        sol = solve(problem)
        residual = float(np.max(equation_residuals(problem, sol.Z)))
        logger.info(f"Solved N={problem.mesh.N} steps, max relative residual {residual:.2e}")
        write_solution_csv(self.output, sol)
        samples = samples_path(self.output)
        if samples is None:
            logger.info("Solution written to stdout; y_h samples skipped")
            return
        write_samples_csv(samples, problem, sol, self.config.samples)

    def _sweep_case(self) -> int:
        case = self.config.case
        if case not in (1, 2):
            raise ConfigError("sweep needs case = 1 or 2")
        return case

    def _sweep(self) -> None:
        case = self._sweep_case()
        cs = c_grid(self.config.c_start, self.config.c_stop, self.config.c_step)
        base = self.config.to_problem(c=float(cs[0]), h=self.config.sweep_h[0])
        result = convergence_sweep(base, self.config.sweep_h, cs, case, threads=self.config.threads)
        for optimum in result.optima:
            logger.info(
                f"h={optimum.h:g}: min {optimum.min_error:.3e} at c={optimum.argmin_c:.3f}, "
                f"max {optimum.max_error:.3e} at c={optimum.argmax_c:.3f}"
            )
        for coarse, fine, min_ratio, max_ratio in result.rate_ratios:
            logger.info(f"h={coarse:g} -> {fine:g}: error ratios min {min_ratio:.2f}, max {max_ratio:.2f}")
        write_sweep_csv(self.output, result, timings=self.config.timings)

    def _classify(self) -> None:
        kernel = self.config.build_kernel()
        nonlinearity = self.config.build_nonlinearity()
        report = classify_existence(kernel, nonlinearity, self.config.build_params())
        rows = report.as_rows()
        rows += [("kernel_check", text) for text in check_kernel(kernel, self.config.T)]
        rows += [("nonlinearity_check", text) for text in check_nonlinearity(nonlinearity)]
        logger.info(f"Existence: {report.category.value}, uniqueness: {report.uniqueness}")
        write_key_value_csv(self.output, rows)

    def _probe(self) -> None:
        problem = self.config.to_problem()
        diagnostic = nondivergence_probe(problem, self.config.probe_h0)
        write_probe_csv(self.output, diagnostic)

    def _reproduce(self, case: int) -> None:
        """Case sweep of y = int_0^t (t-s) sqrt(y(s)) ds on [0, 1]."""
        config = replace(
            self.config,
            kernel="power_convolution",
            kernel_params={"a": 1.0},
            nonlinearity="power_root",
            nonlinearity_params={"b": 2.0},
            T=1.0,
            case=case,
        )
        cs = c_grid(config.c_start, config.c_stop, config.c_step)
        base = config.to_problem(c=float(cs[0]), h=config.sweep_h[0])
        result = convergence_sweep(base, config.sweep_h, cs, case, threads=config.threads)

        table = REFERENCE_OPTIMA[case]
        expected = {}
        for h in config.sweep_h:
            match = [key for key in table if np.isclose(key, h, rtol=1e-9, atol=0.0)]
            if match:
                expected[h] = table[match[0]]
            else:
                logger.warning(f"No reference values for h={h:g}; skipped in the check")
        checks = check_optima(result, expected, config.tolerance, config.c_tolerance)
        failed = sum(not check.passed for check in checks)
        if failed:
            logger.warning(f"{failed} of {len(checks)} table cells outside tolerance")
        else:
            logger.info(f"All {len(checks)} table cells within tolerance")
        write_optima_csv(self.output, checks)


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="collocation", description="Nontrivial collocation solutions of homogeneous Volterra equations"
    )
    parser.add_argument("--config", metavar="PATH", help="run configuration (key = value or YAML)")
    parser.add_argument("--out", metavar="PATH", help="CSV output path ('-' for stdout)")
    parser.add_argument("--threads", type=int, metavar="N", help="sweep worker threads (0 = auto)")
    parser.add_argument("--command", help="override the configured command")
    parser.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    return parser.parse_args(argv)


def setup_logging(level: int) -> None:
    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
    )
    logging.getLogger().setLevel(level)


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit status."""
    args = parse_args(argv)
    setup_logging(logging.WARNING if args.quiet else logging.INFO)

    try:
        config = load_run_config(args.config) if args.config else RunConfig.from_environment()
        overrides = {}
        if args.command:
            overrides["command"] = args.command
        if args.out:
            overrides["output_path"] = args.out
        if args.threads is not None:
            overrides["threads"] = args.threads
        if overrides:
            config = replace(config, **overrides)
        if config.command not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}, got {config.command!r}")
        if config.threads < 0:
            raise ConfigError(f"threads must be >= 0, got {config.threads}")
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG

    if config.debug and not args.quiet:
        logging.getLogger().setLevel(logging.DEBUG)
    config.log_config()

    try:
        return CollocationApp(config).run()
    except (ConfigError, InvalidParams, OutOfDomain) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_CONFIG
    except CollocationError as e:
        logger.error(f"Solver error: {e}")
        return EXIT_SOLVER
    except OSError as e:
        logger.error(f"Cannot write output: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
