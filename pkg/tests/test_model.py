import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from edgemarket.model import (CostFamily, DataPlan, Decision, SlotRealization,
                              UtilityFamily, monthly_payoff, price_cap_E_bar,
                              slot_data_usage, virtual_payoff)

U = UtilityFamily(0.5)
E = CostFamily(1.0)


class TestFamilies:
    def test_alpha_fair_values(self):
        assert U.eval(1.0) == pytest.approx(2.0)
        assert U.eval(0.0) == 0.0
        assert U.marginal(1.0) == pytest.approx(1.0)
        assert U.inverse_marginal(2.0) == pytest.approx(0.25)

    def test_quadratic_cost_values(self):
        assert E.eval(0.2) == pytest.approx(0.02)
        assert E.marginal(3.0) == 3.0
        assert E.inverse_marginal(0.2) == 0.2

    @pytest.mark.parametrize("a", [0.0, 1.0, -0.2, 1.5])
    def test_utility_exponent_range(self, a):
        with pytest.raises(ValueError):
            UtilityFamily(a)

    def test_cost_exponent_range(self):
        with pytest.raises(ValueError):
            CostFamily(0.5)

    @pytest.mark.parametrize("a", [0.3, 0.5, 0.9])
    def test_utility_increasing_concave(self, a):
        fam = UtilityFamily(a)
        xs = np.linspace(1e-6, 1.0, 500)
        vals = fam.eval(xs)
        assert (np.diff(vals) > 0).all()
        assert (np.diff(vals, 2) < 0).all()

    @pytest.mark.parametrize("b", [1.0, 2.0])
    def test_cost_increasing_convex(self, b):
        fam = CostFamily(b)
        ss = np.linspace(0.0, 3.0, 500)
        vals = fam.eval(ss)
        assert (np.diff(vals) > 0).all()
        assert (np.diff(vals, 2) > -1e-12).all()

    @given(st.floats(1e-6, 1.0), st.sampled_from([0.3, 0.5, 0.7, 0.9]))
    def test_utility_marginal_round_trip(self, x, a):
        fam = UtilityFamily(a)
        assert fam.inverse_marginal(fam.marginal(x)) == pytest.approx(x, rel=1e-12)

    @given(st.floats(1e-6, 10.0), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
    def test_cost_marginal_round_trip(self, s, b):
        fam = CostFamily(b)
        assert fam.inverse_marginal(fam.marginal(s)) == pytest.approx(s, rel=1e-12)


class TestTypes:
    def test_decision_offload_share(self):
        assert Decision(0.5, 0.25).y == pytest.approx(0.5)
        assert Decision(0.0, 0.0).y == 0.0

    @pytest.mark.parametrize("x,z", [(0.5, 0.6), (1.2, 0.1), (0.5, -0.1), (-0.1, -0.2)])
    def test_decision_rejects_infeasible(self, x, z):
        with pytest.raises(ValueError):
            Decision(x, z)

    def test_slot_validation(self):
        with pytest.raises(ValueError):
            SlotRealization(d=-1, r=0, c=0, theta=1, beta=1, price=0)
        with pytest.raises(ValueError):
            SlotRealization(d=0, r=0, c=0, theta=2.5, beta=1, price=0)
        with pytest.raises(ValueError):
            SlotRealization(d=0, r=0, c=0, theta=1, beta=1, price=-0.1)

    def test_plan_validation(self):
        with pytest.raises(ValueError):
            DataPlan(Q=1, Pi=10, pi=0.0)
        with pytest.raises(ValueError):
            DataPlan(Q=-1, Pi=10, pi=15)


class TestSlotFormulas:
    def test_worked_example(self):
        slot = SlotRealization(d=1, r=0.5, c=1, theta=1.5, beta=1, price=0.2)
        dec = Decision(1.0, 0.8)
        # 1.5*2 - (0.2^2)/2 - 0.2*0.8
        assert virtual_payoff(slot, dec, U, E) == pytest.approx(2.82)
        assert slot_data_usage(slot, dec) == pytest.approx(1.4)

    def test_idle_slot_pays_nothing(self):
        slot = SlotRealization(d=1, r=0.5, c=1, theta=1.5, beta=1, price=0.2)
        assert virtual_payoff(slot, Decision(0, 0), U, E) == 0.0
        assert slot_data_usage(slot, Decision(0, 0)) == 0.0

    def test_pure_utility(self):
        slot = SlotRealization(d=1, r=0.5, c=1, theta=1, beta=0, price=0)
        assert virtual_payoff(slot, Decision(1, 0), U, E) == pytest.approx(2.0)

    def test_usage_arithmetic(self):
        slot = SlotRealization(d=0.3, r=0.2, c=1, theta=1, beta=1, price=0.2)
        assert slot_data_usage(slot, Decision(0.5, 0.5)) == pytest.approx(0.25)

    def test_joint_concavity_midpoints(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            slot = SlotRealization(d=rng.uniform(0, 1), r=rng.uniform(0, 1),
                                   c=rng.uniform(0, 2), theta=rng.uniform(0, 2),
                                   beta=rng.uniform(0, 2), price=rng.uniform(0, 1))
            x1, x2 = sorted(rng.uniform(0, 1, 2))
            d1 = Decision(x2, rng.uniform(0, x2))
            d2 = Decision(x1, rng.uniform(0, x1))
            mid = Decision(0.5 * (d1.x + d2.x), 0.5 * (d1.z + d2.z))
            f1 = virtual_payoff(slot, d1, U, E)
            f2 = virtual_payoff(slot, d2, U, E)
            assert virtual_payoff(slot, mid, U, E) >= 0.5 * (f1 + f2) - 1e-9


class TestMonthFormulas:
    def _slots(self, rng, t_len):
        return [SlotRealization(d=rng.uniform(0, 1), r=rng.uniform(0, 0.5),
                                c=rng.uniform(0, 1), theta=rng.uniform(0, 2),
                                beta=rng.uniform(0, 2), price=rng.uniform(0, 1))
                for _ in range(t_len)]

    def test_idle_month_costs_subscription(self):
        rng = np.random.default_rng(0)
        slots = self._slots(rng, 5)
        decs = [Decision(0, 0)] * 5
        plan = DataPlan(Q=1, Pi=10, pi=15)
        assert monthly_payoff(slots, decs, plan, U, E) == pytest.approx(-10.0)

    def test_overage_arithmetic(self):
        # one slot with virtual payoff 3 and usage 1.5 GB against a 1 GB cap
        slot = SlotRealization(d=1.5, r=0, c=1, theta=1.5, beta=0, price=0)
        plan = DataPlan(Q=1, Pi=10, pi=15)
        payoff = monthly_payoff([slot], [Decision(1, 0)], plan, U, E)
        assert payoff == pytest.approx(3 - 15 * 0.5 - 10)

    def test_length_mismatch(self):
        rng = np.random.default_rng(1)
        with pytest.raises(ValueError):
            monthly_payoff(self._slots(rng, 3), [Decision(0, 0)] * 2,
                           DataPlan(1, 10, 15), U, E)

    def test_lagrangian_scan_identity(self):
        # month payoff equals the minimum over lam in [0, pi] of the summed
        # per-slot dual objectives minus the subscription fee
        rng = np.random.default_rng(7)
        plan = DataPlan(Q=1.2, Pi=10, pi=15)
        for _ in range(20):
            slots = self._slots(rng, 4)
            decs = []
            for s in slots:
                x = rng.uniform(0, 1)
                decs.append(Decision(x, rng.uniform(0, x)))
            direct = monthly_payoff(slots, decs, plan, U, E)
            lams = np.arange(0.0, plan.pi + 1e-12, 1e-3)
            virtual = sum(virtual_payoff(s, d, U, E) for s, d in zip(slots, decs))
            usage = sum(slot_data_usage(s, d) for s, d in zip(slots, decs))
            duals = virtual - lams * (usage - plan.Q) - plan.Pi
            assert direct == pytest.approx(float(duals.min()), abs=1e-9)


class TestPriceCap:
    def test_max_over_slots(self):
        slots = [SlotRealization(d=0, r=0, c=1, theta=1, beta=b, price=0)
                 for b in (0.5, 1.0, 2.0)]
        assert price_cap_E_bar(slots, E, c_bar=1.0) == pytest.approx(2.0)

    def test_zero_sensitivity(self):
        slots = [SlotRealization(d=0, r=0, c=1, theta=1, beta=0, price=0)]
        assert price_cap_E_bar(slots, E, c_bar=1.0) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            price_cap_E_bar([], E, c_bar=1.0)
