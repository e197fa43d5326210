import numpy as np
import pytest

from edgemarket.model import (CostFamily, DataPlan, Decision, SlotRealization,
                              UtilityFamily, monthly_payoff)
from edgemarket.offline import (Region, best_response_arrays, classify_region,
                                optimal_shadow_price, potential_usage,
                                region_memberships_arrays, slot_best_response,
                                slot_lagrangian, solve_offline,
                                solve_offline_arrays)
from edgemarket.oracles import (_frontier_argmax, _usage_payoff_frontier,
                                brute_force_month_oracle,
                                brute_force_slot_oracle)

U = UtilityFamily(0.5)
E = CostFamily(1.0)


def random_slot(rng, price=None):
    return SlotRealization(d=float(rng.uniform(0, 0.3)),
                           r=float(rng.uniform(0, 0.15)),
                           c=float(rng.uniform(0, 1.5)),
                           theta=float(rng.uniform(0, 2)),
                           beta=float(rng.uniform(0, 2)),
                           price=float(price if price is not None
                                       else rng.uniform(0.02, 1.5)))


class TestRegions:
    # the four witness states from one base draw (d=1, r=0.5, c=1, p=0.2)
    cases = [
        (dict(theta=1.5, beta=0.1), Region.I, Decision(1.0, 0.0)),
        (dict(theta=1.5, beta=1.0), Region.II, Decision(1.0, 0.8)),
        (dict(theta=0.1, beta=2.0), Region.III, Decision(0.25, 0.15)),
        (dict(theta=0.1, beta=0.2), Region.IV, Decision(0.5 ** (2 / 3), 0.0)),
    ]

    def _slot(self, **kw):
        return SlotRealization(d=1, r=0.5, c=1, price=0.2, **kw)

    @pytest.mark.parametrize("kw,region,expected", cases)
    def test_classification(self, kw, region, expected):
        assert classify_region(self._slot(**kw), 0.0, U, E) is region

    @pytest.mark.parametrize("kw,region,expected", cases)
    def test_closed_forms(self, kw, region, expected):
        dec = slot_best_response(self._slot(**kw), 0.0, U, E)
        assert dec.x == pytest.approx(expected.x, abs=1e-9)
        assert dec.z == pytest.approx(expected.z, abs=1e-9)

    @pytest.mark.parametrize("kw,region,expected", cases)
    def test_grid_oracle_agreement(self, kw, region, expected):
        oracle = brute_force_slot_oracle(self._slot(**kw), 0.0, U, E, 401)
        assert oracle.x == pytest.approx(expected.x, abs=1 / 400)
        assert oracle.z == pytest.approx(expected.z, abs=1 / 400)

    def test_negative_shadow_price_rejected(self):
        with pytest.raises(ValueError):
            classify_region(self._slot(theta=1, beta=1), -0.1, U, E)

    def test_partition_exact_on_random_draws(self):
        rng = np.random.default_rng(42)
        n = 20_000
        draws = (rng.uniform(0, 0.3, n), rng.uniform(0, 0.15, n),
                 rng.uniform(0, 1.5, n), rng.uniform(0, 2, n),
                 rng.uniform(0, 2, n), rng.uniform(0, 1.5, n))
        members = region_memberships_arrays(*draws, rng.uniform(0, 15, n), U, E)
        counts = np.sum(members, axis=0)
        assert float((counts == 1).mean()) >= 0.999

    def test_every_state_classifies(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            slot = random_slot(rng)
            lam = float(rng.uniform(0, 15))
            classify_region(slot, lam, U, E)  # must not raise

    def test_degenerate_states(self):
        # zero computing amount: nothing to offload
        slot = SlotRealization(d=0.2, r=0.1, c=0.0, theta=1.0, beta=1.0, price=0.5)
        dec = slot_best_response(slot, 0.0, U, E)
        assert dec == Decision(1.0, 0.0)
        # zero valuation: stay idle
        slot = SlotRealization(d=0.2, r=0.1, c=1.0, theta=0.0, beta=0.5, price=0.5)
        dec = slot_best_response(slot, 1.0, U, E)
        assert dec.x == 0.0 and dec.z == 0.0
        # free slot, zero sensitivity: acquire fully
        slot = SlotRealization(d=0.2, r=0.1, c=1.0, theta=1.0, beta=0.0, price=0.0)
        dec = slot_best_response(slot, 0.0, U, E)
        assert dec.x == 1.0


class TestBestResponseOptimality:
    def test_beats_grid_oracle_values(self):
        # closed-form Lagrangian value >= grid value - 1e-4 at grid_n = 400
        rng = np.random.default_rng(11)
        for _ in range(200):
            slot = random_slot(rng)
            lam = float(rng.uniform(0, 15))
            closed = slot_best_response(slot, lam, U, E)
            grid = brute_force_slot_oracle(slot, lam, U, E, 400)
            assert (slot_lagrangian(slot, closed, lam, U, E)
                    >= slot_lagrangian(slot, grid, lam, U, E) - 1e-4)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(5)
        slots = [random_slot(rng) for _ in range(200)]
        lam = rng.uniform(0, 15, 200)
        cols = np.asarray([[s.d, s.r, s.c, s.theta, s.beta, s.price]
                           for s in slots]).T
        x, z = best_response_arrays(*cols, lam, U, E)
        for i, slot in enumerate(slots):
            dec = slot_best_response(slot, float(lam[i]), U, E)
            assert dec.x == pytest.approx(float(x[i]), abs=1e-12)
            assert dec.z == pytest.approx(float(z[i]), abs=1e-12)


class TestPotentialUsage:
    def test_single_full_acquisition_slot(self):
        slot = SlotRealization(d=1, r=0.5, c=1, theta=1.5, beta=0.1, price=0.2)
        assert potential_usage([slot], 0.0, U, E) == pytest.approx(1.0)

    def test_weakly_decreasing(self):
        rng = np.random.default_rng(9)
        for _ in range(300):
            slots = [random_slot(rng) for _ in range(6)]
            l1, l2 = np.sort(rng.uniform(0, 15, 2))
            assert (potential_usage(slots, float(l1), U, E)
                    >= potential_usage(slots, float(l2), U, E) - 1e-9)

    def test_no_offload_cap(self):
        # a price above every kill price leaves only the content term
        rng = np.random.default_rng(13)
        slots = [random_slot(rng, price=10.0) for _ in range(8)]
        usage = potential_usage(slots, 0.0, U, E)
        assert usage <= sum(s.d for s in slots) + 1e-12


class TestOptimalShadowPrice:
    def test_loose_cap_is_free(self):
        rng = np.random.default_rng(2)
        slots = [random_slot(rng) for _ in range(5)]
        plan = DataPlan(Q=sum(s.d + s.r for s in slots) + 1.0, Pi=10, pi=15)
        assert optimal_shadow_price(slots, plan, U, E) == 0.0

    def test_zero_cap_saturates(self):
        slot = SlotRealization(d=1, r=0.5, c=1, theta=2.0, beta=0.1, price=0.2)
        plan = DataPlan(Q=0.0, Pi=10, pi=15)
        assert optimal_shadow_price([slot], plan, U, E) == plan.pi

    def test_matches_dual_grid_argmin(self):
        # the dual function min over a 1e-3 grid recovers the same multiplier
        rng = np.random.default_rng(21)
        for _ in range(5):
            slots = [random_slot(rng, price=0.3) for _ in range(3)]
            plan = DataPlan(Q=float(rng.uniform(0.05, 0.5)), Pi=10, pi=15)
            lam_star = optimal_shadow_price(slots, plan, U, E)
            lams = np.arange(0.0, plan.pi + 1e-12, 1e-3)
            cols = np.asarray([[s.d, s.r, s.c, s.theta, s.beta, s.price]
                               for s in slots]).T
            duals = np.empty(lams.size)
            for i, lam in enumerate(lams):
                x, z = best_response_arrays(*cols, lam, U, E)
                f = (cols[3] * U.eval(x) - cols[4] * E.eval((x - z) * cols[2])
                     - cols[5] * z * cols[2])
                h = cols[0] * x + cols[1] * z
                duals[i] = f.sum() - lam * (h.sum() - plan.Q)
            grid_argmin = float(lams[int(np.argmin(duals))])
            assert lam_star == pytest.approx(grid_argmin, abs=1e-3)


class TestSolveOffline:
    def test_zero_demand_month(self):
        slots = [SlotRealization(d=0.2, r=0.1, c=1, theta=0.0, beta=1.0, price=0.2)
                 for _ in range(4)]
        plan = DataPlan(Q=1, Pi=10, pi=15)
        sol = solve_offline(slots, plan, U, E)
        assert all(d.x == 0.0 and d.z == 0.0 for d in sol.decisions)
        assert sol.payoff == pytest.approx(-plan.Pi)

    def test_cap_price_stops_offloading(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            betas = rng.uniform(0, 2, 6)
            cap = float(betas.max()) * E.marginal(1.5)
            slots = [SlotRealization(d=float(rng.uniform(0, 0.3)),
                                     r=float(rng.uniform(0, 0.15)),
                                     c=float(rng.uniform(0, 1.5)),
                                     theta=float(rng.uniform(0, 2)),
                                     beta=float(b), price=cap)
                     for b in betas]
            sol = solve_offline(slots, DataPlan(0.5, 10, 15), U, E)
            assert sum(d.z for d in sol.decisions) == 0.0

    def test_kkt_bounds_and_slackness(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            slots = [random_slot(rng) for _ in range(6)]
            plan = DataPlan(Q=float(rng.uniform(0.05, 1.0)), Pi=10, pi=15)
            sol = solve_offline(slots, plan, U, E)
            assert 0.0 <= sol.shadow_price <= plan.pi
            usage = sum(s.d * d.x + s.r * d.z
                        for s, d in zip(slots, sol.decisions))
            assert abs(sol.shadow_price * (sol.overage + plan.Q - usage)) <= 1e-6

    def test_agrees_with_month_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(3):
            slots = [random_slot(rng, price=float(rng.uniform(0.05, 1.0)))
                     for _ in range(4)]
            plan = DataPlan(Q=float(rng.uniform(0.05, 0.4)), Pi=10, pi=15)
            sol = solve_offline(slots, plan, U, E)
            _, oracle = brute_force_month_oracle(slots, plan, U, E, 400)
            assert sol.payoff >= oracle - 1e-3 * max(1.0, abs(oracle))
            assert abs(sol.payoff - oracle) <= 1e-3 * max(1.0, abs(oracle))

    def test_array_solver_matches_scalar(self):
        rng = np.random.default_rng(37)
        rows = []
        for _ in range(8):
            rows.append([random_slot(rng, price=0.25) for _ in range(10)])
        plan = DataPlan(Q=0.6, Pi=10, pi=15)
        arrays = {
            name: np.asarray([[getattr(s, name) for s in row] for row in rows])
            for name in ("d", "r", "c", "theta", "beta", "price")}
        x, z, lam = solve_offline_arrays(arrays["d"], arrays["r"], arrays["c"],
                                         arrays["theta"], arrays["beta"],
                                         arrays["price"], plan, U, E)
        for i, row in enumerate(rows):
            sol = solve_offline(row, plan, U, E)
            assert sol.shadow_price == pytest.approx(float(lam[i]), abs=1e-8)
            assert np.allclose([d.x for d in sol.decisions], x[i], atol=1e-8)
            assert np.allclose([d.z for d in sol.decisions], z[i], atol=1e-8)


class TestOracles:
    def test_slot_oracle_needs_fine_grid(self):
        slot = SlotRealization(d=1, r=0.5, c=1, theta=1.5, beta=1, price=0.2)
        with pytest.raises(ValueError):
            brute_force_slot_oracle(slot, 0.0, U, E, 50)

    def test_huge_shadow_price_kills_usage(self):
        slot = SlotRealization(d=1, r=0.5, c=1, theta=1.5, beta=1, price=0.2)
        dec = brute_force_slot_oracle(slot, 1e6, U, E, 200)
        assert dec.x <= 1 / 199 + 1e-12

    def test_month_oracle_size_limit(self):
        rng = np.random.default_rng(1)
        slots = [random_slot(rng) for _ in range(6)]
        with pytest.raises(ValueError):
            brute_force_month_oracle(slots, DataPlan(1, 10, 15), U, E, 200)

    def test_single_slot_loose_cap_reduces_to_slot_oracle(self):
        rng = np.random.default_rng(3)
        slot = random_slot(rng, price=0.3)
        plan = DataPlan(Q=5.0, Pi=10, pi=15)
        decs, payoff = brute_force_month_oracle([slot], plan, U, E, 400)
        free = brute_force_slot_oracle(slot, 0.0, U, E, 400)
        assert decs[0].x == pytest.approx(free.x, abs=1e-12)
        assert decs[0].z == pytest.approx(free.z, abs=1e-12)
        assert payoff == pytest.approx(
            monthly_payoff([slot], [free], plan, U, E), abs=1e-12)

    def test_frontier_is_exact_envelope(self):
        # the concave frontier reproduces the brute-force maximum of
        # payoff - lam*usage for every nonnegative lam
        rng = np.random.default_rng(19)
        for _ in range(20):
            usage = rng.uniform(0, 2, 500)
            payoff = rng.normal(0, 1, 500)
            fu, fp, _ = _usage_payoff_frontier(usage, payoff)
            lams = rng.uniform(0, 20, 100)
            picks = _frontier_argmax(fu, fp, lams)
            via_frontier = fp[picks] - lams * fu[picks]
            direct = (payoff[None, :] - lams[:, None] * usage[None, :]).max(axis=1)
            assert np.allclose(via_frontier, direct, atol=1e-12)
