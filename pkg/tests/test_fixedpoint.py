import numpy as np
import pytest

from collocation.config import SolverOptions
from collocation.errors import InvalidParams, NonFiniteEvaluation
from collocation.fixedpoint import (
    FixedPointQuery,
    iterate_fixed_point,
    min_nonzero_fixed_point,
    scan_fixed_points,
)
from collocation.models import NonlinearitySpec
from collocation.results import FixedPointStatus


@pytest.fixture
def square():
    return NonlinearitySpec.power(2.0)


@pytest.mark.parametrize(
    "alpha, beta, expected",
    [
        (0.0, 0.5, 0.5),
        (0.75, 1.0, 1.5),
        (0.0, 1e-6, 1e-6),
        (4.0, 3.0, 4.0),
    ],
)
def test_square_root_roots(sqrt_G, alpha, beta, expected):
    outcome = min_nonzero_fixed_point(FixedPointQuery(sqrt_G, alpha, beta))
    assert outcome.found
    assert outcome.y_star == pytest.approx(expected, rel=1e-12)
    assert outcome.roots_detected == 1


def test_small_beta_approaches_g_of_alpha(sqrt_G):
    outcome = min_nonzero_fixed_point(FixedPointQuery(sqrt_G, 4.0, 1e-8))
    assert outcome.y_star == pytest.approx(2.0, abs=1e-6)


def test_residual_bound(sqrt_G):
    for alpha, beta in [(0.0, 0.5), (0.3, 2.0), (1e3, 1e-4)]:
        query = FixedPointQuery(sqrt_G, alpha, beta)
        outcome = min_nonzero_fixed_point(query)
        assert outcome.residual <= 1e-12 * (1.0 + outcome.y_star)
        assert query.residual(outcome.y_star) == outcome.residual


def test_square_fixed_point_is_inverse_beta(square):
    """G(y) = y^2 with alpha = 0: y* = 1/beta grows without bound as beta shrinks."""
    values = []
    for beta in (0.1, 0.01, 0.001):
        outcome = min_nonzero_fixed_point(FixedPointQuery(square, 0.0, beta))
        assert outcome.found
        assert outcome.y_star == pytest.approx(1.0 / beta, rel=1e-12)
        values.append(outcome.y_star)
    assert values[0] < values[1] < values[2]


def test_linear_map_has_no_nonzero_root():
    query = FixedPointQuery(NonlinearitySpec.power(1.0), 0.0, 0.5)
    assert scan_fixed_points(query) == []
    outcome = min_nonzero_fixed_point(query)
    assert outcome.status is FixedPointStatus.NONE_IN_BRACKET
    assert outcome.y_star is None


def test_root_beyond_cap_is_divergence(sqrt_G):
    # sqrt(100 y) > y below y = 100, so f > 0 on the whole grid up to the cap
    outcome = min_nonzero_fixed_point(FixedPointQuery(sqrt_G, 0.0, 100.0, scan_cap=10.0))
    assert outcome.status is FixedPointStatus.DIVERGED
    assert not outcome.found


def test_two_roots_select_the_smaller():
    mixed = NonlinearitySpec(name="mixed", function=lambda y: np.sqrt(y) + y ** 2 / 1000.0)
    for beta in (0.1, 0.01):
        query = FixedPointQuery(mixed, 0.0, beta)
        roots = scan_fixed_points(query)
        assert len(roots) >= 2
        assert roots == sorted(roots)
        outcome = min_nonzero_fixed_point(query)
        assert outcome.y_star == roots[0]
        assert outcome.roots_detected == len(roots)
    # The smaller root shrinks with beta while the larger one escapes
    small = scan_fixed_points(FixedPointQuery(mixed, 0.0, 0.01))
    large = scan_fixed_points(FixedPointQuery(mixed, 0.0, 0.1))
    assert small[0] < large[0]
    assert small[-1] > large[-1]


def test_downward_jump_is_not_a_root(caplog):
    step = lambda x: np.where(x < 0.5, 1.0, 0.0)
    query = FixedPointQuery(step, 0.0, 1.0, scan_cap=100.0)
    outcome = min_nonzero_fixed_point(query)
    assert outcome.status is FixedPointStatus.NONE_IN_BRACKET
    assert outcome.y_star is None
    assert scan_fixed_points(query) == []
    assert "not a fixed point" in caplog.text


def test_jumps_are_skipped_before_the_first_root():
    stairs = lambda x: np.where(x < 0.5, 1.0, np.where(x < 2.0, 0.0, 4.0))
    query = FixedPointQuery(stairs, 0.0, 1.0, scan_cap=100.0)
    outcome = min_nonzero_fixed_point(query)
    assert outcome.found
    assert outcome.y_star == pytest.approx(4.0, rel=1e-12)
    assert outcome.roots_detected == 3
    assert scan_fixed_points(query) == [outcome.y_star]


@pytest.mark.parametrize("alpha", [0.5, 4.0])
def test_converges_to_g_of_alpha(sqrt_G, alpha):
    outcome = min_nonzero_fixed_point(FixedPointQuery(sqrt_G, alpha, 2.0 ** -20))
    assert abs(outcome.y_star - np.sqrt(alpha)) <= 1e-5 * np.sqrt(alpha)


def test_monotone_in_beta(sqrt_G):
    roots = [min_nonzero_fixed_point(FixedPointQuery(sqrt_G, 0.5, 2.0 ** -k)).y_star for k in range(10, 21)]
    assert all(b < a for a, b in zip(roots, roots[1:]))


def test_minimality_against_full_scan(sqrt_G):
    for alpha, beta in [(0.0, 0.3), (2.0, 0.01), (0.1, 50.0)]:
        query = FixedPointQuery(sqrt_G, alpha, beta)
        roots = scan_fixed_points(query)
        assert min_nonzero_fixed_point(query).y_star == min(roots)


@pytest.mark.parametrize("alpha", [0.0, 0.5, 4.0])
def test_square_root_found_for_every_beta(sqrt_G, alpha):
    for beta in np.logspace(-6, 6, 13):
        assert min_nonzero_fixed_point(FixedPointQuery(sqrt_G, alpha, float(beta))).found


def test_bounded_ratio_eventually_found():
    """A ratio unbounded near zero and bounded away from zero: found once beta is small."""
    G = NonlinearitySpec(
        name="offset_root",
        function=lambda y: np.sqrt(y) + y,
        ratio_unbounded_near_zero=True,
        ratio_bounded_away_from_zero=True,
    )
    found = [min_nonzero_fixed_point(FixedPointQuery(G, 1.0, float(beta))).found for beta in (2.0, 0.5, 0.1, 0.01)]
    assert not found[0]
    assert all(found[1:])


@pytest.mark.parametrize("alpha, beta", [(0.0, 0.5), (0.75, 1.0), (3.0, 0.2)])
def test_fixed_point_is_an_attractor(sqrt_G, alpha, beta):
    query = FixedPointQuery(sqrt_G, alpha, beta)
    y_star = min_nonzero_fixed_point(query).y_star
    y, iterations, converged = iterate_fixed_point(query, 1.5 * y_star)
    assert converged
    assert iterations <= 200
    assert abs(y - y_star) <= 1e-10


def test_non_finite_values_raise():
    broken = NonlinearitySpec(name="broken", function=lambda y: np.where(y > 1.0, np.nan, np.sqrt(y)))
    with pytest.raises(NonFiniteEvaluation):
        min_nonzero_fixed_point(FixedPointQuery(broken, 0.0, 0.5))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(alpha=0.0, beta=0.0),
        dict(alpha=-1.0, beta=0.5),
        dict(alpha=0.0, beta=0.5, scan_ratio=1.0),
        dict(alpha=0.0, beta=0.5, scan_cap=1e-301),
    ],
)
def test_invalid_queries(sqrt_G, kwargs):
    with pytest.raises(InvalidParams):
        FixedPointQuery(sqrt_G, **kwargs)


def test_grid_spans_floor_to_cap(sqrt_G):
    query = FixedPointQuery(sqrt_G, 4.0, 1.0)
    grid = query.grid()
    assert grid[0] == pytest.approx(1e-300, rel=1e-12)
    assert grid[-1] == query.cap() == 2e12
    assert np.all(np.diff(grid) > 0)


def test_from_options_copies_scan_settings(sqrt_G):
    options = SolverOptions(scan_cap=5.0, scan_ratio=1.5, scan_refinement=2, root_rtol=1e-10)
    query = FixedPointQuery.from_options(sqrt_G, 0.0, 0.5, options)
    assert query.cap() == 5.0
    assert query.scan_ratio == 1.5
    assert query.rtol == 1e-10
    assert min_nonzero_fixed_point(query).y_star == pytest.approx(0.5, rel=1e-12)
