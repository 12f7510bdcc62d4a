import math

import pytest

from helixchaos.detect import STABLE_HELIX
from helixchaos.errors import (
    BracketError,
    InsufficientDataError,
    NonMonotoneError,
    NotInRegimeError,
    UnreachableTargetError,
    UsageError,
)
from helixchaos.families import bind, builtin
from helixchaos.sweep import (
    INVALID,
    MuEvaluator,
    SweepRecord,
    classify_grid,
    find_boundary,
    grid_values,
    helix_windows,
    invert_mu,
    locate_boundary,
    measure_mu,
    mu,
    vier_estimate,
    vier_from_inverse,
    vier_ratios,
    widest_window_bracket,
)

SINE = builtin("sine")
COMPOSITE = builtin("composite")


def test_grid_endpoints_and_count():
    vals = grid_values(1.2, 1.3, 11)
    assert len(vals) == 11 and vals[0] == 1.2 and vals[-1] == 1.3
    assert grid_values(0.0, 1.0, 2) == [0.0, 1.0]
    with pytest.raises(UsageError):
        grid_values(0.0, 1.0, 1)
    with pytest.raises(UsageError):
        grid_values(1.0, 1.0, 5)


def test_composite_grid_endpoints():
    recs = classify_grid(COMPOSITE, "beta", 1.2, 1.3, 11)
    assert len(recs) == 11
    assert (recs[0].verdict, recs[0].period) == (STABLE_HELIX, 3)
    assert (recs[-1].verdict, recs[-1].period) == (STABLE_HELIX, 4)
    assert [r.param_value for r in recs] == grid_values(1.2, 1.3, 11)


def test_non_ascending_points_are_invalid():
    recs = classify_grid(SINE, "beta", 0.2, 0.6, 5, fixed_other=0.4)
    for r in recs:
        if r.param_value - 0.4 <= 0:
            assert r.verdict == INVALID and r.error
        else:
            assert r.verdict != INVALID


def test_parallel_grid_matches_sequential():
    a = classify_grid(SINE, "beta", 1.55, 1.7, 6, fixed_other=0.4)
    b = classify_grid(SINE, "beta", 1.55, 1.7, 6, fixed_other=0.4, workers=2)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]


def test_helix_windows_and_bracket():
    v = [SweepRecord("beta", float(i), "Chaotic") for i in range(8)]
    for i in (2, 3, 4):
        v[i] = SweepRecord("beta", float(i), STABLE_HELIX, period=5)
    v[6] = SweepRecord("beta", 6.0, STABLE_HELIX, period=2)
    assert helix_windows(v) == [(2, 4, 5), (6, 6, 2)]
    assert widest_window_bracket(v, "left") == (1.0, 2.0, 5)
    assert widest_window_bracket(v, "right") == (4.0, 5.0, 5)
    with pytest.raises(BracketError):
        widest_window_bracket(v[:1], "left")


@pytest.mark.parametrize("c", [0.1, 1 / 3, 0.7071, 0.999])
def test_locate_boundary_step_function(c):
    res = locate_boundary(lambda v: v >= c, 0.0, 1.0, tol=1e-9)
    assert res.converged
    assert abs(res.value - c) <= 1e-9
    assert 0.0 <= res.lo <= res.value <= res.hi <= 1.0
    assert (res.pred_lo, res.pred_hi) == (False, True)


def test_locate_boundary_errors_and_budget():
    with pytest.raises(BracketError):
        locate_boundary(lambda v: True, 0.0, 1.0)
    with pytest.raises(UsageError):
        locate_boundary(lambda v: v > 0.5, 1.0, 0.0)
    res = locate_boundary(lambda v: v > 0.3, 0.0, 1.0, tol=1e-12, iter_max=5)
    assert not res.converged and res.iterations == 5
    assert res.lo <= 0.3 <= res.hi


def test_sine_boundary():
    res = find_boundary(SINE, "beta", 1.59, 1.61, fixed_other=0.4)
    assert res.converged and res.helix_order == 1
    assert 1.59 < res.value < 1.61
    assert abs(res.value - 1.6) < 1e-5
    assert res.width < 1e-9


def test_find_boundary_needs_differing_verdicts():
    with pytest.raises(BracketError):
        find_boundary(SINE, "beta", 1.65, 1.7, fixed_other=0.4)


def test_mu_values_and_errors():
    assert mu(SINE, 1.59, 0.4) == pytest.approx(20.18, abs=0.05)
    with pytest.raises(NotInRegimeError):
        mu(SINE, 1.7, 0.4)
    with pytest.raises(InsufficientDataError):
        mu(SINE, 1.5995, 0.4, horizon=1_500)
    with pytest.raises(UsageError):
        measure_mu(bind(SINE, alpha=0.4, beta=1.59), horizon=500)


def test_mu_grows_toward_boundary():
    ev = MuEvaluator(SINE, "beta", 0.4, boundary=1.6, side="left")
    vals = [ev(1.6 - 8e-3 / 2 ** k) for k in range(4)]
    assert all(a < b for a, b in zip(vals, vals[1:])), vals


# A toy mu(v) = C / (2 - v) with boundary 2 approached from the left.
def _toy(C=1.0):
    return lambda v: C / (2.0 - v)


def test_invert_mu_toy():
    inv = invert_mu(_toy(), 2.0, "left", 100.0, start_distance=0.5, mu_rel_tol=0.01)
    assert inv.value == pytest.approx(1.99, abs=1e-6)
    assert inv.residual < 0.01


def test_invert_mu_unreachable_and_non_monotone():
    with pytest.raises(UnreachableTargetError):
        invert_mu(_toy(), 2.0, "left", 1.0, start_distance=0.5)  # mu(1.5) = 2 > 1
    with pytest.raises(UnreachableTargetError):
        invert_mu(lambda v: 5.0, 2.0, "left", 100.0, start_distance=0.5, max_halvings=10)
    with pytest.raises(NonMonotoneError):
        invert_mu(lambda v: 10.0 * (2.0 - v), 2.0, "left", 100.0, start_distance=0.5)


@pytest.mark.parametrize("rho", [2.0, 4.0, 10.0])
def test_vier_geometric_model(rho):
    # b(T) = 1 - 0.3 * rho^-(log2(T / P0)) gives b-gaps shrinking by rho
    P0 = 50.0
    est = vier_from_inverse(lambda T: 1 - 0.3 * rho ** (-math.log2(T / P0)), P0, 5)
    assert est.targets == [50, 100, 200, 400, 800]
    assert all(r == pytest.approx(rho, rel=1e-9) for r in est.ratios)


def test_vier_ratio_formula():
    assert vier_ratios([0.0, 4.0, 5.0, 5.25]) == [4.0, 4.0]
    with pytest.raises(UsageError):
        vier_from_inverse(lambda T: T, 1.0, 2)


class _Recorded:
    """Evaluator stand-in: toy mu with a hard failure past a given distance."""
    x0s, horizon, horizon_max, min_steady_points = (0.5,), 0, 0, 0

    class opts:
        transient = 0

    def __init__(self, fail_below=None):
        self.fail_below = fail_below
        self.hint = None

    def __call__(self, v):
        if self.fail_below is not None and 2.0 - v < self.fail_below:
            raise InsufficientDataError("horizon cap reached")
        return 1.0 / (2.0 - v)


def test_vier_estimate_with_toy_evaluator():
    est = vier_estimate(None, "beta", 2.0, "left", 10.0, 4, start_distance=0.5,
                        mu_rel_tol=1e-3, evaluator=_Recorded())
    assert est.complete and len(est.b) == 4
    assert all(r == pytest.approx(2.0, rel=1e-2) for r in est.ratios)


def test_vier_partial_failure():
    est = vier_estimate(None, "beta", 2.0, "left", 10.0, 4, start_distance=0.5,
                        mu_rel_tol=1e-3, evaluator=_Recorded(fail_below=0.03))
    assert not est.complete
    assert est.failed_level == 2 and len(est.b) == 2
    assert "InsufficientDataError" in est.error
    assert est.ratios == []


@pytest.mark.slow
def test_sine_targets_ordered_toward_boundary():
    est = vier_estimate(SINE, "beta", 1.6, "left", 25.0, 3, fixed_other=0.4,
                        start_distance=1e-2)
    assert est.complete, est.error
    assert est.b[0] < est.b[1] < est.b[2] < 1.6
    assert all(r < 0.05 for r in est.residuals)
