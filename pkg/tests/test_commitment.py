import math

import pytest

from unitdispatch import (
    EfficiencyCurve,
    Fleet,
    Regime,
    SwitchingSchedule,
    Unit,
    allocate_best,
    best_commitment,
    feasible_subsets,
    oracle_commitment,
    sweep,
    switching_schedule,
    verify_theorem2,
)
from unitdispatch.errors import DomainError, InfeasibleError

from conftest import A1, A2_CASE1, A2_CASE2, B1, B2_CASE1, B2_CASE2, random_fleet


def eta1(p):
    return A1 * p - B1 * p * p


def eta2(p):
    return A2_CASE1 * p - B2_CASE1 * p * p


class TestFeasibleSubsets:
    def test_all_combinations(self, case1):
        assert feasible_subsets(case1, 50.0) == [("1",), ("2",), ("1", "2")]

    def test_cap_filter(self, case1):
        assert feasible_subsets(case1, 200.0) == [("2",), ("1", "2")]
        assert feasible_subsets(case1, 300.0) == [("1", "2")]
        assert feasible_subsets(case1, 500.0) == []

    def test_three_units_at_zero(self, rng):
        assert len(feasible_subsets(random_fleet(rng, 3), 0.0)) == 7

    def test_order_by_size_then_ids(self, rng):
        fleet = Fleet(tuple(Unit(i, u.curve) for i, u in zip("cab", random_fleet(rng, 3))))
        subsets = feasible_subsets(fleet, 0.0)
        assert subsets[:3] == [("a",), ("b",), ("c",)]
        assert [len(s) for s in subsets] == [1, 1, 1, 2, 2, 2, 3]


class TestBestCommitment:
    def test_below_first_switch(self, case1):
        subset, alloc = best_commitment(case1, 50.0)
        assert subset == ("1",) and alloc.loads == (50.0,)

    def test_middle(self, case1):
        subset, alloc = best_commitment(case1, 120.0)
        assert subset == ("2",) and alloc.loads == (120.0,)
        assert eta2(120.0) == pytest.approx(0.88) and eta1(120.0) == pytest.approx(0.66)

    def test_both(self, case1):
        subset, alloc = best_commitment(case1, 200.0)
        assert subset == ("1", "2")
        assert alloc.loads == pytest.approx((80.0, 120.0), abs=1e-9)

    def test_zero(self, case1):
        subset, alloc = best_commitment(case1, 0.0)
        assert subset == () and alloc.w_t == 0.0 and alloc.eta_t == 0.0

    def test_errors(self, case1):
        with pytest.raises(InfeasibleError):
            best_commitment(case1, 401.0)
        with pytest.raises(DomainError):
            best_commitment(case1, -1.0)

    def test_dominates_every_subset(self, rng):
        for _ in range(10):
            fleet = random_fleet(rng, 3)
            p_t = rng.uniform(0.05, 0.95) * fleet.capacity
            _, best = best_commitment(fleet, p_t)
            for subset in feasible_subsets(fleet, p_t):
                assert best.w_t >= allocate_best(fleet.subset(subset), p_t).w_t - 1e-12

    def test_matches_oracle_subset(self, rng):
        checked = 0
        for _ in range(15):
            fleet = random_fleet(rng, int(rng.integers(2, 4)))
            p_t = rng.uniform(0.05, 0.95) * fleet.capacity
            ws = sorted(
                (allocate_best(fleet.subset(s), p_t).w_t for s in feasible_subsets(fleet, p_t)),
                reverse=True,
            )
            if len(ws) > 1 and ws[0] - ws[1] <= 1e-3 * ws[0]:
                continue
            subset, _ = best_commitment(fleet, p_t)
            o_subset, _ = oracle_commitment(fleet, p_t, p_t / 500)
            # a subset whose best split idles a unit ties with the smaller subset
            assert subset == o_subset
            checked += 1
        assert checked > 0

    def test_envelope_monotone_up_to_peak(self, rng):
        for _ in range(5):
            fleet = random_fleet(rng, 2)
            p_peak = sum(u.curve.w_argmax for u in fleet)
            prev = 0.0
            for k in range(1, 61):
                w = best_commitment(fleet, p_peak * k / 60)[1].w_t
                assert w >= prev - 1e-12
                prev = w


class TestSchedule:
    def test_case1(self, case1):
        sched = switching_schedule(case1, 1.0, 300.0, 0.5)
        assert sched.breakpoints == pytest.approx((96.0, 150.0), abs=0.01)
        assert [r.active_set for r in sched.regimes] == [("1",), ("2",), ("1", "2")]
        assert all(r.rule == "proportional" for r in sched.regimes)

    def test_regimes_tile(self, case2):
        sched = switching_schedule(case2, 1.0, 160.0)
        assert sched.regimes[0].p_lo == 1.0 and sched.regimes[-1].p_hi == 160.0
        for left, right in zip(sched.regimes[:-1], sched.regimes[1:]):
            assert left.p_hi == right.p_lo
            assert left.active_set != right.active_set
        assert sched.regimes[-1].rule == "stationary"

    def test_case2_first_switch_closed_form(self, case2):
        sched = switching_schedule(case2, 1.0, 160.0)
        crossing = (A2_CASE2 - A1) / (B2_CASE2 - B1)
        assert sched.breakpoints[0] == pytest.approx(crossing, abs=1e-6)
        assert crossing == pytest.approx(69.913, abs=1e-3)

    def test_single_unit(self, unit1):
        sched = switching_schedule(Fleet((unit1,)), 1.0, 150.0)
        assert len(sched.regimes) == 1 and sched.breakpoints == ()

    def test_outputs_agree_at_breakpoints(self, case1, case2):
        for fleet, hi in ((case1, 300.0), (case2, 160.0)):
            sched = switching_schedule(fleet, 1.0, hi)
            for wa, wb in sched.outputs:
                assert abs(wa - wb) <= 1e-6 * max(1.0, wa)

    def test_from_zero(self, case1):
        sched = switching_schedule(case1, 0.0, 120.0, 1.0)
        assert sched.regimes[0].active_set == ("1",)

    def test_capacity_switch(self):
        fleet = Fleet((Unit("1", EfficiencyCurve(A1, B1, 50.0)),
                       Unit("2", EfficiencyCurve(A2_CASE2, B2_CASE2, 60.0))))
        sched = switching_schedule(fleet, 1.0, 110.0, 0.5)
        assert sched.breakpoints == pytest.approx((60.0,), abs=1e-6)

    @pytest.mark.parametrize("args", [(5.0, 1.0, 0.1), (1.0, 300.0, 0.0), (1.0, 300.0, 500.0)])
    def test_invalid(self, case1, args):
        with pytest.raises(DomainError):
            switching_schedule(case1, *args)

    def test_beyond_capacity(self, case1):
        with pytest.raises(InfeasibleError):
            switching_schedule(case1, 1.0, 500.0)


class TestVerifyTheorem2:
    def test_case1(self, case1):
        sched = switching_schedule(case1, 1.0, 300.0, 0.5)
        first, second = verify_theorem2(sched, case1)
        # 0.022*96 - 0.0001375*96^2
        assert first.eta_left == pytest.approx(0.8448, abs=1e-6)
        assert first.eta_right == pytest.approx(0.8448, abs=1e-6)
        assert eta2(96.0) == pytest.approx(0.8448, abs=1e-12)
        # eta_2(150) = eta_1(60) = 0.825
        assert second.eta_left == pytest.approx(0.825, abs=1e-6)
        assert second.eta_right == pytest.approx(0.825, abs=1e-6)
        assert first.ok and second.ok and first.reason == "equal-efficiency"

    def test_case2(self, case2):
        sched = switching_schedule(case2, 1.0, 160.0)
        report = verify_theorem2(sched, case2)
        assert len(report) == 2 and all(c.ok for c in report)

    def test_at_cap(self):
        fleet = Fleet((Unit("1", EfficiencyCurve(A1, B1)),
                       Unit("2", EfficiencyCurve(A2_CASE2, B2_CASE2, 60.0))))
        sched = SwitchingSchedule(
            (Regime(("2",), 1.0, 60.0, "proportional"), Regime(("1",), 60.0, 100.0, "proportional")),
            (60.0,),
        )
        (check,) = verify_theorem2(sched, fleet)
        assert check.ok and check.reason == "at-cap" and check.capped_units == ("2",)

    def test_detects_failure(self, case1):
        sched = SwitchingSchedule(
            (Regime(("1",), 1.0, 80.0, "proportional"), Regime(("2",), 80.0, 150.0, "proportional")),
            (80.0,),
        )
        (check,) = verify_theorem2(sched, case1)
        assert not check.ok


class TestSweep:
    def test_case1_envelope(self, case1):
        rows = sweep(case1, 1.0, 300.0, 1.0)
        assert len(rows) == 300
        for row in rows:
            p = row.p_t
            if p < 96:
                expected = eta1(p)
            elif 96 < p < 150:
                expected = eta2(p)
            elif p > 150:
                expected = eta1(0.4 * p)
            else:
                continue
            assert abs(row.eta_t - expected) <= 1e-9

    def test_near_zero(self, case1):
        rows = sweep(case1, 0.0, 1e-3, 1e-4)
        assert rows[0].eta_t == 0.0
        assert rows[1].eta_t < 1e-5

    def test_continuous_at_breakpoints(self, case1):
        sched = switching_schedule(case1, 1.0, 300.0, 0.5)
        for p in sched.breakpoints:
            left = best_commitment(case1, p - 1e-5)[1].eta_t
            right = best_commitment(case1, p + 1e-5)[1].eta_t
            assert abs(left - right) <= 1e-3

    def test_deterministic(self, case2):
        assert sweep(case2, 1.0, 160.0, 7.0) == sweep(case2, 1.0, 160.0, 7.0)

    def test_invalid_step(self, case1):
        with pytest.raises(DomainError):
            sweep(case1, 1.0, 2.0, 5.0)
