import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helixchaos.errors import InsufficientDataError, UsageError
from helixchaos.families import bind, builtin
from helixchaos.metrics import (
    DEFAULT_SHIFTS,
    average_periodicity,
    chaos_mod1_test,
    make_train,
    quasi_ap_check,
    shifted_frac_distance,
)

APPENDIX_ORDERS = [74, 223, 368, 519, 669, 820]
PHI_13999 = [1065, 2210, 3014, 4095, 5178, 6458, 7538, 8611, 10176, 11305]
PHI_139999 = [4988, 11051, 17121, 23185, 28974, 35420, 41447, 47523, 53575]


def test_average_periodicity_examples():
    assert average_periodicity(APPENDIX_ORDERS) == 149.2
    assert average_periodicity([10, 20, 30]) == 10
    with pytest.raises(InsufficientDataError):
        average_periodicity([5])
    with pytest.raises(UsageError):
        average_periodicity([5, 5, 9])


@settings(max_examples=200, deadline=None)
@given(st.integers(-10 ** 6, 10 ** 6), st.integers(1, 10 ** 5), st.integers(2, 60))
def test_average_periodicity_of_progression_is_exact(start, step, n):
    assert average_periodicity([start + step * k for k in range(n)]) == step


def test_quasi_ap_appendix():
    q = quasi_ap_check(APPENDIX_ORDERS)
    assert q.verdict
    assert q.differences == [149, 145, 151, 150, 151]
    assert q.band[0] == pytest.approx(143.89, abs=0.01)
    assert q.band[1] == pytest.approx(154.51, abs=0.01)
    assert q.band == (149.2 - 149.2 ** (1 / 3), 149.2 + 149.2 ** (1 / 3))


def test_quasi_ap_phi_lists():
    q = quasi_ap_check(PHI_13999)
    assert not q.verdict
    assert q.average_periodicity == pytest.approx(1137.78, abs=0.01)
    assert q.band[0] == pytest.approx(1127.3, abs=0.05)
    assert q.band[1] == pytest.approx(1148.2, abs=0.05)
    assert 804 in q.outliers
    q = quasi_ap_check(PHI_139999)
    assert not q.verdict
    assert q.average_periodicity == 6073.375
    assert q.band[0] == pytest.approx(6055.1, abs=0.05)
    assert q.band[1] == pytest.approx(6091.6, abs=0.05)
    assert {5789, 6446} <= set(q.outliers)


def test_quasi_ap_needs_three():
    with pytest.raises(InsufficientDataError):
        quasi_ap_check([1, 2])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 500), min_size=2, max_size=12), st.integers(-10 ** 6, 10 ** 6))
def test_quasi_ap_shift_invariant(gaps, shift):
    orders = np.cumsum([1] + gaps).tolist()
    a = quasi_ap_check(orders)
    b = quasi_ap_check([o + shift for o in orders])
    assert a.verdict == b.verdict
    assert a.differences == b.differences


def test_train_fields():
    t = make_train(APPENDIX_ORDERS)
    assert t.average_periodicity == 149.2 and t.quasi_ap is True
    t = make_train([74, 223])
    assert t.average_periodicity == 149 and t.quasi_ap is None
    assert make_train([]).average_periodicity is None


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True))
def test_shift_coverage(a, b):
    d = abs(a - b)
    for s in DEFAULT_SHIFTS:
        v = float(shifted_frac_distance(a, b, s))
        assert min(abs(v - d), abs(v - (1 - d))) < 1e-12
    best = min(float(shifted_frac_distance(a, b, s)) for s in DEFAULT_SHIFTS)
    assert best <= min(d, 1 - d) + 1e-12


def test_duplicate_pair_is_excluded():
    m = bind(builtin("composite"), beta=1.2)
    rep = chaos_mod1_test(m, horizon=5_000, burn_in=100, pairs=[[0.3, 0.3], [0.1, 0.6], [0.2, 0.9]])
    dup = rep.pairs[0]
    assert dup.degenerate and dup.spread == 0.0
    assert all(v == 0.0 for v in dup.min_frac_distance.values())
    live = [p for p in rep.pairs if not p.degenerate]
    assert rep.spread_estimate == min(p.spread for p in live)


def test_stable_helix_is_not_chaotic():
    # sine alpha=0.4, beta=1.7 is an order-1 helix (see the detect tests)
    m = bind(builtin("sine"), alpha=0.4, beta=1.7)
    rep = chaos_mod1_test(m, pair_count=10, horizon=20_000, burn_in=1_000, seed=3)
    assert not rep.verdict
    assert rep.spread_estimate < 0.1
    assert "finite-horizon" in rep.note


def test_verdict_monotone_in_lambda():
    m = bind(builtin("sine"), alpha=0.4, beta=1.59)
    verdicts = [chaos_mod1_test(m, pair_count=6, horizon=20_000, burn_in=500,
                                lambda_threshold=lam, seed=1).verdict
                for lam in (0.01, 0.1, 0.5, 1.0, 5.0)]
    assert all(a or not b for a, b in zip(verdicts, verdicts[1:]))  # never false -> true


def test_chaos_report_is_seeded():
    m = bind(builtin("sine"), alpha=0.4, beta=1.59)
    a = chaos_mod1_test(m, pair_count=4, horizon=5_000, burn_in=100, seed=9).to_dict()
    b = chaos_mod1_test(m, pair_count=4, horizon=5_000, burn_in=100, seed=9).to_dict()
    c = chaos_mod1_test(m, pair_count=4, horizon=5_000, burn_in=100, seed=10).to_dict()
    assert a == b
    assert a["pairs"] != c["pairs"]


def test_chaos_argument_checks():
    m = bind(builtin("sine"), alpha=0.4, beta=1.59)
    with pytest.raises(UsageError):
        chaos_mod1_test(m, horizon=100, burn_in=100)
    with pytest.raises(UsageError):
        chaos_mod1_test(m, horizon=1000, burn_in=10, shifts=[1.0])
