"""Metric formulas: exact examples, properties, and scipy cross-checks."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as scipy_stats

from conftest import make_auction_transcript, make_newsvendor_transcript
from gameaudit.errors import DomainError, ValidationError
from gameaudit.metrics import (
    agent_metrics,
    behavioral_entropy,
    ecdf_table,
    ks_distance,
    mean_order_bias,
    pearson_r,
    premium_capture_rate,
    reserve_by_bidder_count,
    sell_through_rate,
    summary_stats,
    welch_t_test,
)

actions_lists = st.lists(st.integers(min_value=0, max_value=100), min_size=1, max_size=80)


class TestKS:
    def test_identical(self):
        assert ks_distance([1, 2, 3], [1, 2, 3]) == 0.0

    def test_disjoint(self):
        assert ks_distance([0, 0], [1, 1]) == 1.0

    def test_hand_enumerated(self):
        assert ks_distance([1, 2, 3], [2, 3, 4]) == pytest.approx(1 / 3, abs=1e-12)

    def test_empty(self):
        with pytest.raises(DomainError):
            ks_distance([], [1])

    @given(actions_lists, actions_lists)
    @settings(max_examples=200)
    def test_symmetry_and_bounds(self, a, b):
        d = ks_distance(a, b)
        assert 0.0 <= d <= 1.0
        assert d == ks_distance(b, a)

    @given(actions_lists, actions_lists)
    @settings(max_examples=100)
    def test_monotone_transform_invariance(self, a, b):
        f = lambda xs: [3 * x + 7 for x in xs]
        assert ks_distance(a, b) == pytest.approx(ks_distance(f(a), f(b)), abs=1e-12)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    @given(actions_lists, actions_lists)
    @settings(max_examples=100)
    def test_matches_scipy(self, a, b):
        ours = ks_distance(a, b)
        ref = scipy_stats.ks_2samp(a, b, method="asymp").statistic
        assert ours == pytest.approx(float(ref), abs=1e-12)


class TestEntropy:
    def test_degenerate(self):
        assert behavioral_entropy([5, 5, 5, 5]) == 0.0

    def test_two_point_uniform(self):
        assert behavioral_entropy([1, 2, 1, 2]) == 1.0

    def test_half_quarter_quarter(self):
        assert behavioral_entropy([1, 1, 2, 4]) == pytest.approx(1.5, abs=1e-12)

    def test_empty(self):
        with pytest.raises(DomainError):
            behavioral_entropy([])

    def test_binning(self):
        assert behavioral_entropy([0, 1, 2, 3], bin_width=2) == 1.0
        assert behavioral_entropy([0, 1, 2, 3], bin_width=4) == 0.0

    @given(actions_lists)
    @settings(max_examples=300)
    def test_bounds(self, a):
        h = behavioral_entropy(a)
        assert 0.0 <= h <= np.log2(len(set(a))) + 1e-9
        if len(set(a)) == 1:
            assert h == 0.0

    def test_uniform_attains_upper_bound(self):
        assert behavioral_entropy(list(range(16))) == 4.0


class TestRates:
    def test_str_example(self):
        assert sell_through_rate([True, True, False, True]) == 0.75

    def test_pcr_zero_when_reserve_never_binds(self):
        t = make_auction_transcript([10, 10], [(2, [80, 50]), (2, [90, 20])])
        # second round: reserve 10 <= b2 20? yes -> not bound; first same
        assert premium_capture_rate(t.rounds) == 0.0

    def test_pcr_single_binding_sale(self):
        t = make_auction_transcript([40], [(2, [60, 30])])
        assert premium_capture_rate(t.rounds) == 1.0

    def test_pcr_no_sales_flagged_zero(self):
        t = make_auction_transcript([100], [(2, [60, 30])])
        assert premium_capture_rate(t.rounds) == 0.0
        row = agent_metrics(t)
        assert row["pcr_defined"] is False

    @given(
        st.lists(st.integers(min_value=0, max_value=100), min_size=1, max_size=40),
        st.randoms(use_true_random=False),
    )
    @settings(max_examples=100)
    def test_rates_invariant_under_reordering(self, actions, rnd):
        sched = [(2, sorted([rnd.randrange(101), rnd.randrange(101)], reverse=True)) for _ in actions]
        t = make_auction_transcript(actions, sched)
        order = list(range(len(actions)))
        rnd.shuffle(order)
        shuffled = make_auction_transcript(
            [actions[i] for i in order], [sched[i] for i in order]
        )
        assert sell_through_rate([r.sale for r in t.rounds]) == pytest.approx(
            sell_through_rate([r.sale for r in shuffled.rounds])
        )
        assert premium_capture_rate(t.rounds) == pytest.approx(premium_capture_rate(shuffled.rounds))
        # bound sales can never outnumber sales
        bound = premium_capture_rate(t.rounds) * sum(r.sale for r in t.rounds)
        assert bound <= sum(r.sale for r in t.rounds)


class TestBias:
    def test_oracle_zero(self):
        t = make_newsvendor_transcript([150, 150], [100, 200], [(10, 5)] * 2)
        assert mean_order_bias([r.bias for r in t.rounds]) == 0.0

    def test_constant_shift(self):
        t = make_newsvendor_transcript([160, 160], [100, 200], [(10, 5)] * 2)
        assert mean_order_bias([r.bias for r in t.rounds]) == 10.0

    def test_cancelling(self):
        t = make_newsvendor_transcript([100, 200], [100, 200], [(10, 5)] * 2)
        assert mean_order_bias([r.bias for r in t.rounds]) == 0.0


class TestTests:
    def test_welch_identical(self):
        t, p = welch_t_test([1, 2, 3, 4], [1, 2, 3, 4])
        assert t == 0.0 and p == pytest.approx(1.0)

    def test_welch_matches_scipy(self):
        gen = np.random.default_rng(0)
        a = gen.normal(0, 1, 30)
        b = gen.normal(0.5, 2, 40)
        t, p = welch_t_test(a, b)
        ref = scipy_stats.ttest_ind(a, b, equal_var=False)
        assert t == pytest.approx(float(ref.statistic)) and p == pytest.approx(float(ref.pvalue))

    def test_welch_calibration(self):
        # under the null, a level-0.05 test rejects about 5% of the time
        gen = np.random.default_rng(123)
        rejections = 0
        reps = 1000
        for _ in range(reps):
            a = gen.normal(size=25)
            b = gen.normal(size=25)
            _, p = welch_t_test(a, b)
            rejections += p < 0.05
        assert abs(rejections / reps - 0.05) < 0.02

    def test_pearson_exact_lines(self):
        assert pearson_r([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-9)
        assert pearson_r([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-9)

    def test_pearson_zero_variance(self):
        with pytest.raises(DomainError):
            pearson_r([1, 1, 1], [1, 2, 3])

    def test_pearson_length_mismatch(self):
        with pytest.raises(ValidationError):
            pearson_r([1, 2], [1, 2, 3])


class TestTables:
    def test_ecdf_counting(self):
        table = dict(ecdf_table([1, 1, 2]))
        assert table[1.0] == pytest.approx(2 / 3)
        assert table[2.0] == 1.0

    def test_ecdf_right_continuous_sorted(self):
        table = ecdf_table([5, 3, 3, 9])
        values = [v for v, _ in table]
        fracs = [f for _, f in table]
        assert values == sorted(values)
        assert fracs == sorted(fracs) and fracs[-1] == 1.0

    def test_reserve_by_bidder_count_degenerate(self):
        sched = [(1, [50]), (4, [50, 40, 30, 20]), (4, [60, 10, 5, 1])]
        ts = [make_auction_transcript([20, 20, 20], sched, agent_id=f"a{i}") for i in range(3)]
        groups = reserve_by_bidder_count(ts)
        assert set(groups) == {1, 4}
        for g in groups.values():
            assert g["mean"] == 20.0
            assert g["ci_low"] == g["ci_high"] == 20.0

    def test_reserve_by_bidder_count_matches_bruteforce(self):
        gen = np.random.default_rng(21)
        ts = []
        rows = {}
        for i in range(8):
            actions, sched = [], []
            for t in range(40):
                n = int(gen.choice([1, 4, 7, 10]))
                vals = sorted(int(v) for v in gen.integers(0, 101, n))[::-1]
                a = int(gen.integers(0, 101))
                actions.append(a)
                sched.append((n, vals))
                rows.setdefault(n, []).append(a)
            ts.append(make_auction_transcript(actions, sched, agent_id=f"a{i}"))
        groups = reserve_by_bidder_count(ts)
        for n, acts in rows.items():
            arr = np.asarray(acts, float)
            assert groups[n]["mean"] == pytest.approx(arr.mean(), abs=1e-9)
            half = 1.96 * arr.std(ddof=1) / np.sqrt(arr.size)
            assert groups[n]["ci_high"] - groups[n]["mean"] == pytest.approx(half, abs=1e-9)

    def test_bootstrap_ci_is_seeded(self):
        sched = [(4, [90, 70, 30, 5])] * 10
        gen = np.random.default_rng(3)
        ts = [
            make_auction_transcript([int(v) for v in gen.integers(0, 101, 10)], sched)
            for _ in range(4)
        ]
        a = reserve_by_bidder_count(ts, ci_method="bootstrap", seed=5)
        b = reserve_by_bidder_count(ts, ci_method="bootstrap", seed=5)
        assert a == b

    def test_summary_stats_fields(self):
        s = summary_stats([1, 2, 3, 4])
        assert s["mean"] == 2.5 and s["min"] == 1.0 and s["max"] == 4.0
        assert s["sd"] == pytest.approx(np.std([1, 2, 3, 4], ddof=1))
        assert s["entropy_bits"] == 2.0


class TestAgentMetrics:
    def test_window_selection(self):
        sched = [(2, [80, 40])] * 10
        t = make_auction_transcript(list(range(10)), sched)
        full = agent_metrics(t)
        tail = agent_metrics(t, window=(6, 10))
        assert full["rounds"] == 10 and tail["rounds"] == 5
        assert tail["mean_action"] == np.mean([5, 6, 7, 8, 9])

    def test_newsvendor_fields(self):
        t = make_newsvendor_transcript([150, 100], [100, 200], [(10, 5)] * 2)
        row = agent_metrics(t)
        assert row["mean_bias"] == -25.0
        assert "str" not in row
