"""Existence, uniqueness and nondivergence analysis.

``classify_existence`` is a pure function of the properties declared on the
kernel and the nonlinearity. ``check_kernel``/``check_nonlinearity`` spot
check those declarations on sample grids, and ``nondivergence_probe``
observes the first step numerically as h_0 shrinks.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np

from collocation.errors import InvalidParams, NoNontrivialSolution
from collocation.models import (
    CollocationParameters,
    CollocationProblem,
    KernelSpec,
    Mesh,
    NonlinearitySpec,
    make_problem,
)
from collocation.quadrature import QuadratureRule
from collocation.results import (
    ExistenceCategory,
    ExistenceReport,
    FixedPointStatus,
    NondivergenceDiagnostic,
    ProbeVerdict,
    RuleMatch,
)
from collocation.solver import CollocationSolver

logger = logging.getLogger(__name__)


def classify_existence(
    kernel: KernelSpec, nonlinearity: NonlinearitySpec, params: CollocationParameters
) -> ExistenceReport:
    """Classify existence, uniqueness and nondivergence from declared properties.

    The category is the strongest one whose rule fires; every fired rule is
    listed with the hypotheses it matched. Parameter sets outside cases 1-2
    stay ``unknown``.
    """
    case = params.case
    report = ExistenceReport(case=case)

    if params.m == 1 and params.c[0] == 0.0:
        report.category = ExistenceCategory.NO_NONTRIVIAL
        report.nondivergent_existence = False
        report.nondivergent_uniqueness = False
        report.rules.append(RuleMatch("trivial_only_parameters", ("m=1", "c1=0"), "no_nontrivial"))
        return report
    if case is None:
        logger.debug(f"No classification rule covers c={params.c}")
        return report

    unbounded_near_zero = nonlinearity.ratio_unbounded_near_zero
    monotone = kernel.declared_monotone_in_t
    case_hypothesis = f"case={case}"

    # Case 2 needs c_2 = 1 or a monotone kernel on top of the ratio conditions
    if case == 1:
        side = (case_hypothesis,)
    elif params.c[-1] == 1.0:
        side = (case_hypothesis, "c2=1")
    elif monotone:
        side = (case_hypothesis, "declared_monotone_in_t")
    else:
        side = None

    candidates = []

    ratio_unbounded = nonlinearity.ratio_unbounded_declared
    if monotone and ratio_unbounded is not None:
        conclusion = ExistenceCategory.NEAR_ZERO if ratio_unbounded else ExistenceCategory.NO_NONTRIVIAL
        hypotheses = (case_hypothesis, "declared_monotone_in_t",
                      "ratio_unbounded" if ratio_unbounded else "ratio_bounded")
        report.rules.append(RuleMatch("monotone_kernel_characterisation", hypotheses, conclusion.value))
        candidates.append(conclusion)

    existence_rule_fired = False
    if unbounded_near_zero and nonlinearity.ratio_bounded_away_from_zero and side:
        conclusion = ExistenceCategory.FINE_MESHES if kernel.is_convolution else ExistenceCategory.NEAR_ZERO
        hypotheses = side + ("ratio_unbounded_near_zero", "ratio_bounded_away_from_zero")
        if kernel.is_convolution:
            hypotheses += ("convolution",)
        report.rules.append(RuleMatch("ratio_bounded_away_from_zero", hypotheses, conclusion.value))
        candidates.append(conclusion)
        existence_rule_fired = True

    if unbounded_near_zero and nonlinearity.ratio_vanishing_sequence and side:
        hypotheses = side + ("ratio_unbounded_near_zero", "ratio_vanishing_sequence")
        report.rules.append(
            RuleMatch("ratio_vanishing_at_infinity", hypotheses, ExistenceCategory.UNCONDITIONAL.value)
        )
        candidates.append(ExistenceCategory.UNCONDITIONAL)
        existence_rule_fired = True

    if candidates:
        report.category = max(candidates, key=lambda category: category.rank)

    if existence_rule_fired and nonlinearity.ratio_strictly_decreasing:
        report.uniqueness = True
        report.rules.append(
            RuleMatch("ratio_strictly_decreasing", ("ratio_strictly_decreasing",), "uniqueness")
        )

    # Nondivergent existence holds exactly when the ratio is unbounded near zero
    if not unbounded_near_zero:
        report.nondivergent_existence = False
        report.nondivergent_uniqueness = False
        report.rules.append(
            RuleMatch("nondivergence_characterisation", ("ratio_bounded_near_zero",), "no nondivergent existence")
        )
    elif report.category.has_existence:
        report.nondivergent_existence = True
        report.rules.append(
            RuleMatch(
                "nondivergence_characterisation",
                (report.category.value, "ratio_unbounded_near_zero"),
                "nondivergent existence",
            )
        )
        if nonlinearity.well_behaved:
            report.nondivergent_uniqueness = True
            report.rules.append(
                RuleMatch("well_behaved_nonlinearity", ("nondivergent existence", "well_behaved"),
                          "nondivergent uniqueness")
            )

    if report.category.has_existence:
        report.guarantees.append("coefficients Z[n,i] are nonnegative")
        if case == 1 and monotone:
            report.guarantees.append("case 1, monotone kernel: Z[n,1] strictly increasing in n")
        if case == 2 and monotone:
            report.guarantees.append("case 2, monotone kernel: 0 = Z[0,1] < Z[0,2] < Z[1,1] < Z[1,2] < ...")
        if case == 2 and params.c[-1] == 1.0:
            report.guarantees.append("case 2 with c2 = 1: collocation solution strictly increasing")

    logger.debug(f"Classified {kernel.name}/{nonlinearity.name} c={params.c}: {report.category.value}")
    return report


def check_kernel(kernel: KernelSpec, T: float = 1.0, samples: int = 32) -> List[str]:
    """Spot check the kernel's conditions on a sample grid.

    Returns the violated conditions, empty when all checks pass.
    """
    rule = QuadratureRule(16)
    t = T * np.arange(1, samples + 1) / samples
    s = t[:, None] * rule.nodes[None, :]
    with np.errstate(all="ignore"):
        values = kernel.evaluate(t[:, None], s)
    violations = []

    if not np.all(np.isfinite(values)):
        violations.append("kernel not finite on 0 <= s <= t")
        return violations
    if np.any(values < 0):
        violations.append("kernel negative on 0 <= s <= t")

    integrals = t * (values @ rule.weights)
    if np.any(np.diff(integrals) <= 0):
        violations.append("t -> int_0^t K(t, s) ds not strictly increasing")

    if kernel.declared_monotone_in_t:
        later = kernel.evaluate(t[1:, None], s[:-1])
        if np.any(values[:-1] > later * (1 + 1e-12)):
            violations.append("declared_monotone_in_t: K(t, s) > K(t', s) for some t < t'")
    return violations


def check_nonlinearity(nonlinearity: NonlinearitySpec, low: float = 1e-12, high: float = 1e12) -> List[str]:
    """Spot check G and its declared ratio properties on a log grid."""
    y = np.logspace(np.log10(low), np.log10(high), 97)
    values = nonlinearity(y)
    violations = []

    if nonlinearity(0.0) != 0.0:
        violations.append("G(0) != 0")
    if np.any(values <= 0):
        violations.append("G(y) <= 0 for some y > 0")
    if np.any(np.diff(values) <= 0):
        violations.append("G not strictly increasing")

    ratio = values / y
    if nonlinearity.ratio_strictly_decreasing and np.any(np.diff(ratio) >= 0):
        violations.append("ratio_strictly_decreasing: G(y)/y not strictly decreasing")
    # Asymptotic declarations can only be checked for a trend
    offset = 12
    if nonlinearity.ratio_unbounded_near_zero and not ratio[0] > ratio[offset]:
        violations.append("ratio_unbounded_near_zero: G(y)/y does not grow toward zero")
    if nonlinearity.ratio_vanishing_sequence and not ratio[-1] < ratio[-1 - offset]:
        violations.append("ratio_vanishing_sequence: G(y)/y does not shrink toward infinity")
    if nonlinearity.ratio_bounded_away_from_zero and not np.all(ratio > 0):
        violations.append("ratio_bounded_away_from_zero: G(y)/y vanishes on the grid")
    return violations


def probe_verdict(values: Sequence[Optional[float]]) -> ProbeVerdict:
    """Bounded when the last value stays within 10x the median of the last
    three and the sequence does not keep growing by factors above 2."""
    if not values:
        return ProbeVerdict.INCONCLUSIVE
    gaps = sum(v is None for v in values)
    if gaps > len(values) / 2:
        return ProbeVerdict.INCONCLUSIVE
    if any(v is not None and np.isinf(v) for v in values):
        return ProbeVerdict.DIVERGING

    finite = [float(v) for v in values if v is not None]
    if len(finite) < 2:
        return ProbeVerdict.INCONCLUSIVE
    tail_median = float(np.median(finite[-3:]))
    growing = all(b > 2.0 * a for a, b in zip(finite, finite[1:]))
    if finite[-1] <= 10.0 * tail_median and not growing:
        return ProbeVerdict.BOUNDED
    return ProbeVerdict.DIVERGING


def nondivergence_probe(problem: CollocationProblem, schedule: Sequence[float]) -> NondivergenceDiagnostic:
    """Solve only the first step on [0, h_0] for each h_0 of a shrinking schedule.

    Records max_i Z[0, i] per h_0; a step-0 failure is a gap, or +inf when
    the root escaped past the scan cap.
    """
    if problem.case not in (1, 2):
        raise InvalidParams(f"The nondivergence probe covers cases 1-2 only, got c={problem.params.c}")
    schedule = tuple(float(h0) for h0 in schedule)
    if any(h0 <= 0 for h0 in schedule) or any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise InvalidParams(f"Probe schedule must be positive and strictly decreasing, got {schedule}")

    values: List[Optional[float]] = []
    for h0 in schedule:
        first_step = make_problem(
            problem.kernel, problem.nonlinearity, Mesh([0.0, h0]), problem.params, problem.options
        )
        try:
            state = CollocationSolver(first_step).step(np.zeros((1, problem.params.m)), 0)
            values.append(float(np.max(state.coefficients)))
        except NoNontrivialSolution as e:
            escaped = e.outcome is not None and e.outcome.status is FixedPointStatus.DIVERGED
            values.append(float("inf") if escaped else None)
            logger.debug(f"Probe h0={h0:g}: {e}")

    verdict = probe_verdict(values)
    logger.info(f"Nondivergence probe over {len(schedule)} h0 values: {verdict.value}")
    return NondivergenceDiagnostic(schedule=schedule, values=tuple(values), verdict=verdict)
