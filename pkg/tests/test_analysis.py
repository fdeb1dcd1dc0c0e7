import numpy as np
import pytest

from collocation.analysis import (
    check_kernel,
    check_nonlinearity,
    classify_existence,
    nondivergence_probe,
    probe_verdict,
)
from collocation.config import SolverOptions
from collocation.errors import InvalidParams
from collocation.models import CollocationParameters, KernelSpec, NonlinearitySpec
from collocation.results import ExistenceCategory, ProbeVerdict

from conftest import power_problem, problem_with

SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


def _rules(report):
    return {match.rule for match in report.rules}


def _sum_kernel():
    return KernelSpec(name="sum", function=lambda t, s: t + s)


def _root_like(**flags):
    """sqrt with a chosen subset of declared ratio properties."""
    return NonlinearitySpec(name="root_like", function=np.sqrt, **flags)


class TestClassifyExistence:
    def test_power_pair_is_unconditional(self, linear_kernel, sqrt_G):
        report = classify_existence(linear_kernel, sqrt_G, CollocationParameters.case1(0.5))
        assert report.category is ExistenceCategory.UNCONDITIONAL
        assert report.uniqueness is True
        assert report.nondivergent_existence is True
        assert report.nondivergent_uniqueness is True
        assert {"ratio_vanishing_at_infinity", "ratio_strictly_decreasing", "well_behaved_nonlinearity"} <= _rules(report)

    def test_power_pair_case2(self, linear_kernel, sqrt_G):
        report = classify_existence(linear_kernel, sqrt_G, CollocationParameters.case2(0.37))
        assert report.category is ExistenceCategory.UNCONDITIONAL
        assert any("0 = Z[0,1]" in text for text in report.guarantees)

    def test_ratio_bounded_near_zero_has_no_nondivergent_existence(self, linear_kernel):
        report = classify_existence(linear_kernel, NonlinearitySpec.power(2.0), CollocationParameters.case1(0.5))
        assert report.nondivergent_existence is False
        assert report.nondivergent_uniqueness is False
        assert report.category is ExistenceCategory.NEAR_ZERO
        assert "monotone_kernel_characterisation" in _rules(report)

    def test_fine_meshes_for_convolution_case2_unit_node(self, linear_kernel):
        G = _root_like(ratio_unbounded_near_zero=True, ratio_bounded_away_from_zero=True)
        report = classify_existence(linear_kernel, G, CollocationParameters.case2(1.0))
        assert report.category is ExistenceCategory.FINE_MESHES
        assert report.uniqueness is None
        assert report.nondivergent_existence is True
        assert report.nondivergent_uniqueness is None

    def test_general_kernel_gives_existence_near_zero(self):
        G = _root_like(ratio_unbounded_near_zero=True, ratio_bounded_away_from_zero=True)
        report = classify_existence(_sum_kernel(), G, CollocationParameters.case1(0.5))
        assert report.category is ExistenceCategory.NEAR_ZERO
        assert _rules(report) == {"ratio_bounded_away_from_zero", "nondivergence_characterisation"}

    def test_case2_side_condition(self):
        G = _root_like(ratio_unbounded_near_zero=True, ratio_bounded_away_from_zero=True)
        report = classify_existence(_sum_kernel(), G, CollocationParameters.case2(0.5))
        assert report.category is ExistenceCategory.UNKNOWN
        assert report.nondivergent_existence is None
        assert report.rules == []

    def test_linear_nonlinearity_has_no_nontrivial_solution(self, linear_kernel):
        report = classify_existence(linear_kernel, NonlinearitySpec.power(1.0), CollocationParameters.case1(0.5))
        assert report.category is ExistenceCategory.NO_NONTRIVIAL
        assert report.nondivergent_existence is False
        assert report.guarantees == []

    def test_trivial_only_parameters(self, linear_kernel, sqrt_G):
        report = classify_existence(linear_kernel, sqrt_G, CollocationParameters((0.0,)))
        assert report.category is ExistenceCategory.NO_NONTRIVIAL
        assert _rules(report) == {"trivial_only_parameters"}

    def test_general_parameters_stay_unknown(self, linear_kernel, sqrt_G):
        report = classify_existence(linear_kernel, sqrt_G, CollocationParameters((0.0, 0.5, 1.0)))
        assert report.case is None
        assert report.category is ExistenceCategory.UNKNOWN
        assert report.rules == []

    def test_pure_function_of_declarations(self, linear_kernel, sqrt_G):
        params = CollocationParameters.case2(0.5)
        assert classify_existence(linear_kernel, sqrt_G, params) == classify_existence(linear_kernel, sqrt_G, params)

    def test_rows(self, linear_kernel, sqrt_G):
        rows = dict(classify_existence(linear_kernel, sqrt_G, CollocationParameters.case1(0.5)).as_rows()[:5])
        assert rows == {
            "case": "1",
            "category": "unconditional",
            "uniqueness": "true",
            "nondivergent_existence": "true",
            "nondivergent_uniqueness": "true",
        }

    def test_category_ranks(self):
        order = [
            ExistenceCategory.NO_NONTRIVIAL,
            ExistenceCategory.NEAR_ZERO,
            ExistenceCategory.FINE_MESHES,
            ExistenceCategory.UNCONDITIONAL,
        ]
        assert [category.rank for category in order] == sorted(category.rank for category in order)
        assert not ExistenceCategory.UNKNOWN.has_existence


class TestSpotChecks:
    def test_builtin_kernels_pass(self, linear_kernel, unit_kernel):
        assert check_kernel(linear_kernel) == []
        assert check_kernel(unit_kernel, T=2.0) == []
        assert check_kernel(_sum_kernel()) == []

    def test_mislabelled_monotone_kernel(self):
        decaying = KernelSpec(name="decay", profile=lambda u: np.exp(-u), declared_monotone_in_t=True)
        violations = check_kernel(decaying)
        assert len(violations) == 1
        assert violations[0].startswith("declared_monotone_in_t")

    def test_negative_kernel(self):
        violations = check_kernel(KernelSpec(name="neg", function=lambda t, s: s - t))
        assert "kernel negative on 0 <= s <= t" in violations

    def test_builtin_nonlinearities_pass(self, sqrt_G):
        assert check_nonlinearity(sqrt_G) == []
        assert check_nonlinearity(NonlinearitySpec.power_root(5.0)) == []
        assert check_nonlinearity(NonlinearitySpec.power(2.0)) == []

    def test_mislabelled_nonlinearity(self):
        liar = NonlinearitySpec(name="liar", function=lambda y: y ** 2, ratio_unbounded_near_zero=True)
        violations = check_nonlinearity(liar)
        assert any(v.startswith("ratio_unbounded_near_zero") for v in violations)


class TestProbeVerdict:
    @pytest.mark.parametrize(
        "values, verdict",
        [
            ([], ProbeVerdict.INCONCLUSIVE),
            ([None, None, 1.0], ProbeVerdict.INCONCLUSIVE),
            ([1.0], ProbeVerdict.INCONCLUSIVE),
            ([1.0, float("inf")], ProbeVerdict.DIVERGING),
            ([1.0, 0.5, 0.25], ProbeVerdict.BOUNDED),
            ([1.0, None, 0.5], ProbeVerdict.BOUNDED),
            ([1.0, 3.0, 10.0], ProbeVerdict.DIVERGING),
            ([1.0, 1.0, 1.0, 100.0], ProbeVerdict.DIVERGING),
        ],
    )
    def test_verdicts(self, values, verdict):
        assert probe_verdict(values) is verdict


class TestNondivergenceProbe:
    def test_square_root_stays_bounded(self):
        diagnostic = nondivergence_probe(power_problem(h=0.1, c=(0.5,)), SCHEDULE)
        assert diagnostic.verdict is ProbeVerdict.BOUNDED
        assert diagnostic.failures == 0
        # Z[0,1] = h0^2 c1^2 / 2
        for h0, value in zip(SCHEDULE, diagnostic.values):
            assert value == pytest.approx(h0 * h0 * 0.125, rel=1e-10)

    def test_case2_probe(self):
        diagnostic = nondivergence_probe(power_problem(h=0.1, c=(0.0, 1.0)), SCHEDULE[:4])
        assert diagnostic.verdict is ProbeVerdict.BOUNDED
        for h0, value in zip(SCHEDULE, diagnostic.values):
            assert value == pytest.approx(h0 * h0 / 6, rel=1e-10)

    def test_square_diverges(self):
        schedule = (1e-1, 5e-2, 2e-2, 1e-2)
        problem = problem_with(nonlinearity=NonlinearitySpec.power(2.0), c=(0.5,))
        diagnostic = nondivergence_probe(problem, schedule)
        assert diagnostic.verdict is ProbeVerdict.DIVERGING
        # y* = 1 / beta^2 with beta = h0^2 / 8
        for h0, value in zip(schedule, diagnostic.values):
            assert value == pytest.approx(64.0 / h0 ** 4, rel=1e-9)

    def test_root_escaping_the_cap_counts_as_divergence(self):
        problem = power_problem(h=0.1, c=(0.5,), options=SolverOptions(scan_cap=1e-20))
        diagnostic = nondivergence_probe(problem, (0.1, 0.01))
        assert all(np.isinf(value) for value in diagnostic.values)
        assert diagnostic.verdict is ProbeVerdict.DIVERGING

    def test_no_solution_is_inconclusive(self):
        problem = problem_with(nonlinearity=NonlinearitySpec.power(1.0))
        diagnostic = nondivergence_probe(problem, (0.1, 0.01, 0.001))
        assert diagnostic.values == (None, None, None)
        assert diagnostic.failures == 3
        assert diagnostic.verdict is ProbeVerdict.INCONCLUSIVE

    def test_empty_schedule(self):
        assert nondivergence_probe(power_problem(h=0.1), ()).verdict is ProbeVerdict.INCONCLUSIVE

    @pytest.mark.parametrize("schedule", [(0.1, 0.1), (0.01, 0.1), (0.1, -0.01)])
    def test_invalid_schedule(self, schedule):
        with pytest.raises(InvalidParams):
            nondivergence_probe(power_problem(h=0.1), schedule)

    def test_general_parameters_rejected(self):
        with pytest.raises(InvalidParams):
            nondivergence_probe(power_problem(h=0.1, c=(0.0, 0.5, 1.0)), (0.1,))
