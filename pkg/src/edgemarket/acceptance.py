"""Acceptance suite: the eight verification criteria the package must meet.

Each criterion is a standalone function returning a CriterionResult, so
both the pytest gate (tests/test_acceptance.py) and ``edgemarket verify``
can run them and print one pass/fail line per criterion.  Tolerances are
fixed here, not configurable.
"""
from __future__ import annotations

import sys
import time
from dataclasses import dataclass

import numpy as np

from .ecosystem import (PopulationSpec, PricingParams, build_grid,
                        ex_post_optimal_revenue, run_scenario,
                        sample_population, simulate_greedy_months,
                        simulate_months, simulate_offline_months,
                        slots_for_user)
from .model import CostFamily, DataPlan, UtilityFamily, price_cap_E_bar
from .offline import (best_response_arrays, classify_region,
                      region_memberships_arrays, solve_offline,
                      solve_offline_arrays)
from .online import regret_report, step_schedule
from .oracles import brute_force_month_oracle
from .pricing import phi_loss
from .model import SlotRealization

# evaluation defaults shared by the criteria
_U = UtilityFamily(0.5)
_E = CostFamily(1.0)
_MU_SPEC = dict(n_users=1, T=30, d_bar=0.2, r_bar=0.1, c_bar=1.0)
_ESP_SPEC = dict(n_users=500, T=30, d_bar=0.2, r_bar=0.1, c_bar=1.0,
                 plan=DataPlan(3.0, 10.0, 15.0))
_ECO_SPEC = dict(n_users=500, T=30, d_bar=0.06, r_bar=0.03,
                 plan=DataPlan(1.0, 10.0, 15.0))
_PRICING = PricingParams.from_alpha(1.0, p_min=0.113, refinement=20)
_FIG4_SWEEP = (0.1, 0.15, 0.2, 0.25, 0.3)          # d_bar values, midpoint 0.2
_FIG5_SWEEP = (0.05, 0.075, 0.1, 0.125, 0.15)      # r_bar values, midpoint 0.1
_FIG6_SWEEP = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)       # c_bar values


@dataclass(frozen=True)
class CriterionResult:
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _result(name, start, passed, detail) -> CriterionResult:
    return CriterionResult(name, bool(passed), detail, time.time() - start)


def _rel_gap(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


def criterion_1_offline_vs_oracle(n_instances: int = 50) -> CriterionResult:
    """Closed-form month solver agrees with the brute-force oracle on
    random 4-slot instances, within 1e-3 relative payoff, with the KKT
    residuals in tolerance, in under two minutes."""
    start = time.time()
    rng = np.random.default_rng(101)
    worst_gap = 0.0
    worst_cs = 0.0
    for _ in range(n_instances):
        plan = DataPlan(float(rng.uniform(0.05, 0.4)), 10.0, 15.0)
        slots = [SlotRealization(d=float(rng.uniform(0, 0.2)),
                                 r=float(rng.uniform(0, 0.1)),
                                 c=float(rng.uniform(0, 1.0)),
                                 theta=float(rng.uniform(0, 2.0)),
                                 beta=float(rng.uniform(0, 2.0)),
                                 price=float(rng.uniform(0.02, 1.0)))
                 for _ in range(4)]
        sol = solve_offline(slots, plan, _U, _E)
        _, oracle_payoff = brute_force_month_oracle(slots, plan, _U, _E, 400)
        if sol.payoff < oracle_payoff - 1e-3 * max(1.0, abs(oracle_payoff)):
            return _result("offline vs oracle", start, False,
                           f"solver {sol.payoff:.6f} below oracle "
                           f"{oracle_payoff:.6f}")
        worst_gap = max(worst_gap, _rel_gap(sol.payoff, oracle_payoff))
        total = sum(s.d * d.x + s.r * d.z
                    for s, d in zip(slots, sol.decisions))
        worst_cs = max(worst_cs,
                       abs(sol.shadow_price * (sol.overage + plan.Q - total)))
        if not 0.0 <= sol.shadow_price <= plan.pi:
            return _result("offline vs oracle", start, False,
                           f"shadow price {sol.shadow_price} outside [0, pi]")
    elapsed = time.time() - start
    ok = worst_gap <= 1e-3 and worst_cs <= 1e-6 and elapsed <= 120.0
    return _result(
        "offline vs oracle", start, ok,
        f"{n_instances} instances, worst payoff gap {worst_gap:.2e} "
        f"(tol 1e-3), worst slackness residual {worst_cs:.2e} (tol 1e-6)")


def criterion_2_regret_bound(n_months: int = 100) -> CriterionResult:
    """Measured per-slot payoff gap never exceeds pi*(Xi+Psi)/sqrt(T)."""
    start = time.time()
    spec = PopulationSpec(**_MU_SPEC, seed=0)
    etas = step_schedule(spec.plan, spec.T, spec.d_bar, spec.r_bar)
    violations = 0
    worst_margin = -np.inf
    for seed in range(n_months):
        pop = sample_population(PopulationSpec(**_MU_SPEC, seed=seed))
        slots = slots_for_user(pop, 0, 0.2)
        try:
            rep = regret_report(slots, spec.plan, _U, _E, etas,
                                spec.d_bar, spec.r_bar)
        except AssertionError:
            violations += 1
            continue
        closed_form = spec.plan.pi * (rep.Xi + rep.Psi) / np.sqrt(spec.T)
        if rep.measured_gap > closed_form + 1e-9:
            violations += 1
        worst_margin = max(worst_margin, rep.measured_gap - closed_form)
    return _result(
        "theorem regret bound", start, violations == 0,
        f"{n_months} months, {violations} violations, worst margin "
        f"{worst_margin:.3e} below the bound")


def criterion_3_strategy_ratios(n_seeds: int = 100) -> CriterionResult:
    """Adaptive strategy earns >= 85% of hindsight on average over the
    cap and overage-fee sweeps; myopic is significantly worse at the
    medium cap (two-sided 95% CI)."""
    start = time.time()

    def ratios(spec, price=0.2):
        pop = sample_population(spec)
        plan = spec.plan
        opt = simulate_offline_months(pop, plan, _U, _E, price).payoffs(plan)
        alg1 = simulate_months(pop, plan, _U, _E, price).payoffs(plan)
        greedy = simulate_greedy_months(pop, plan, _U, _E, price).payoffs(plan)
        return (float(alg1.mean() / opt.mean()),
                float(greedy.mean() / opt.mean()))

    q_sweep = (0.4, 0.9, 1.4, 1.9, 2.4, 2.9, 3.4, 3.9)
    q_ratios, medium_diffs = [], []
    for q in q_sweep:
        for seed in range(n_seeds):
            spec = PopulationSpec(**_MU_SPEC, seed=seed,
                                  plan=DataPlan(q, 10.0, 15.0))
            a, g = ratios(spec)
            q_ratios.append(a)
            if q == 2.4:
                medium_diffs.append(a - g)
    pi_ratios = []
    for fee in (10.0, 12.5, 15.0, 17.5, 20.0):
        for seed in range(n_seeds):
            spec = PopulationSpec(**_MU_SPEC, seed=seed,
                                  plan=DataPlan(2.4, 10.0, fee))
            pi_ratios.append(ratios(spec)[0])

    q_mean = float(np.mean(q_ratios))
    pi_mean = float(np.mean(pi_ratios))
    diffs = np.asarray(medium_diffs)
    ci_low = float(diffs.mean() - 1.96 * diffs.std(ddof=1) / np.sqrt(diffs.size))
    ok = q_mean >= 0.85 and pi_mean >= 0.85 and ci_low > 0.0
    return _result(
        "strategy payoff ratios", start, ok,
        f"cap sweep mean {q_mean:.3f}, fee sweep mean {pi_mean:.3f} "
        f"(floor 0.85); medium-cap adaptive-minus-myopic CI low {ci_low:.4f}")


def criterion_4_virtual_revenue_and_floor() -> CriterionResult:
    """Across a full 500-user priced month, every importance-weighted
    candidate revenue is <= 1 and every selection probability stays at or
    above its exploration floor."""
    start = time.time()
    spec = PopulationSpec(**_ESP_SPEC, seed=0)
    try:
        led = run_scenario(spec, "edge", _PRICING)
    except AssertionError as exc:
        return _result("virtual revenue and exploration floor", start, False,
                       str(exc))
    state = led.policy
    ok = state.max_virtual_revenue <= 1.0 + 1e-12 and state.min_floor_margin >= -1e-15
    return _result(
        "virtual revenue and exploration floor", start, ok,
        f"max virtual revenue {state.max_virtual_revenue:.4f} (<= 1), "
        f"min floor margin {state.min_floor_margin:.2e} (>= 0)")


def criterion_5_rounding_guarantee(n_markets: int = 100) -> CriterionResult:
    """Best grid candidate earns at least v*/(1+eps) on every market."""
    start = time.time()
    worst = np.inf
    for seed in range(n_markets):
        d_bar = _FIG4_SWEEP[seed % len(_FIG4_SWEEP)]
        spec = PopulationSpec(**{**_ESP_SPEC, "n_users": 200, "d_bar": d_bar},
                              seed=seed)
        pop = sample_population(spec)
        grid = build_grid(_PRICING.p_min, _PRICING.epsilon, spec.price_cap)
        try:
            bench = ex_post_optimal_revenue(pop, spec.plan, _U, _E, grid, 10)
        except AssertionError as exc:
            return _result("candidate rounding guarantee", start, False,
                           str(exc))
        worst = min(worst, bench.best_candidate_revenue
                    / (bench.v_star / (1.0 + grid.epsilon)))
    return _result(
        "candidate rounding guarantee", start, True,
        f"{n_markets} markets, worst candidate/(v*/(1+eps)) = {worst:.3f} "
        f"(>= 1 required)")


def criterion_6_policy_revenue_floor(n_seeds: int = 100) -> CriterionResult:
    """Dynamic pricing earns >= 60% of the hindsight-optimal fixed-price
    revenue on average at both sweep midpoints, and >= 50% on any run
    where the competitive-ratio precondition v* >= 8*Phi holds."""
    start = time.time()
    means = {}
    conditional_ok = True
    for label, overrides, seed0 in (("d_bar midpoint", {"d_bar": 0.2}, 0),
                                    ("r_bar midpoint", {"r_bar": 0.1}, 100)):
        ratios = []
        for seed in range(seed0, seed0 + n_seeds):
            spec = PopulationSpec(**{**_ESP_SPEC, **overrides}, seed=seed)
            led = run_scenario(spec, "edge", _PRICING)
            pop = sample_population(spec)
            grid = build_grid(_PRICING.p_min, _PRICING.epsilon, spec.price_cap)
            bench = ex_post_optimal_revenue(pop, spec.plan, _U, _E, grid,
                                            _PRICING.refinement)
            ratio = led.esp_revenue / bench.v_star
            ratios.append(ratio)
            phi = phi_loss(_PRICING.epsilon, _PRICING.delta, _PRICING.gamma,
                           spec.n_users, spec.price_cap, spec.c_bar,
                           _PRICING.p_min)
            if bench.v_star >= 8.0 * phi and ratio < 0.50:
                conditional_ok = False
        means[label] = float(np.mean(ratios))
    ok = all(m >= 0.60 for m in means.values()) and conditional_ok
    detail = ", ".join(f"{k} mean ratio {v:.3f}" for k, v in means.items())
    return _result("policy revenue floor", start, ok,
                   detail + " (floor 0.60); conditional 0.50 floor "
                   + ("respected" if conditional_ok else "violated"))


def criterion_7_ecosystem_direction(n_seeds: int = 102) -> CriterionResult:
    """Adding edge service improves user payoff, content revenue, carrier
    revenue and social welfare on average over the compute-intensity sweep."""
    start = time.time()
    deltas = {"mu": [], "cp": [], "isp": [], "welfare": []}
    per_sweep = max(1, n_seeds // len(_FIG6_SWEEP))
    for ci, c_bar in enumerate(_FIG6_SWEEP):
        for s in range(per_sweep):
            spec = PopulationSpec(**{**_ECO_SPEC, "c_bar": c_bar},
                                  seed=ci * per_sweep + s)
            none = run_scenario(spec, "none")
            edge = run_scenario(spec, "edge", _PRICING)
            deltas["mu"].append(float(edge.mu_payoffs.sum() - none.mu_payoffs.sum()))
            deltas["cp"].append(edge.cp_revenue - none.cp_revenue)
            deltas["isp"].append(edge.isp_revenue - none.isp_revenue)
            deltas["welfare"].append(edge.social_welfare - none.social_welfare)
    means = {k: float(np.mean(v)) for k, v in deltas.items()}
    ok = all(m > 0.0 for m in means.values())
    return _result(
        "ecosystem directional gains", start, ok,
        "mean edge-minus-none: " + ", ".join(f"{k} {v:+.1f}" for k, v in means.items()))


def criterion_8_property_suites() -> CriterionResult:
    """Bulk property checks: usage monotone in the shadow price, regime
    partition exhaustive, cap price kills offloading, ledger identities,
    marginal/inverse-marginal round trips."""
    start = time.time()
    rng = np.random.default_rng(2024)
    problems = []

    # potential usage weakly decreasing in the shadow price (1000 instances)
    n, t_len = 1000, 8
    d = rng.uniform(0, 0.3, (n, t_len))
    r = rng.uniform(0, 0.15, (n, t_len))
    c = rng.uniform(0, 1.5, (n, t_len))
    theta = rng.uniform(0, 2, (n, t_len))
    beta = rng.uniform(0, 2, (n, t_len))
    price = rng.uniform(0, 1.5, (n, t_len))
    lam = np.sort(rng.uniform(0, 15, (n, 2)), axis=1)
    usages = []
    for k in range(2):
        x, z = best_response_arrays(d, r, c, theta, beta, price,
                                    lam[:, k][:, None], _U, _E)
        usages.append((d * x + r * z).sum(axis=1))
    if not (usages[0] >= usages[1] - 1e-9).all():
        problems.append("usage not monotone in shadow price")

    # regime partition: 1e5 random states (fresh draws, same generator)
    m = 100_000
    draws = [rng.uniform(0, hi, m) for hi in (0.3, 0.15, 1.5, 2, 2, 1.5, 15)]
    members = region_memberships_arrays(*draws[:6], draws[6], _U, _E)
    counts = np.sum(members, axis=0)
    frac_exact = float((counts == 1).mean())
    if frac_exact < 0.999:
        problems.append(f"regime sets matched exactly once on only "
                        f"{frac_exact:.4%} of draws")
    for i in np.nonzero(counts != 1)[0][:50]:
        slot = SlotRealization(*(float(col[i]) for col in draws[:6]))
        classify_region(slot, float(draws[6][i]), _U, _E)  # must not raise

    # posting the cap price forces zero offloading (100 months, exact)
    for seed in range(100):
        spec = PopulationSpec(**_MU_SPEC, seed=seed)
        pop = sample_population(spec)
        slots = slots_for_user(pop, 0, 0.0)
        cap = price_cap_E_bar(slots, _E, spec.c_bar)
        x, z, _ = solve_offline_arrays(pop.d, pop.r, pop.c, pop.theta,
                                       pop.beta, cap, spec.plan, _U, _E)
        if float(np.abs(z).sum()) != 0.0:
            problems.append(f"offloading at the cap price (seed {seed})")
            break

    # ledger conservation identities on one run of each mode
    spec = PopulationSpec(n_users=40, T=20, d_bar=0.2, r_bar=0.1, seed=5,
                          plan=DataPlan(1.5, 10.0, 15.0))
    from .ecosystem import isp_revenue as isp_rev
    for mode, kwargs in (("none", {}), ("edge", {"pricing": _PRICING}),
                         ("edge_opt", {"pricing": PricingParams(p_min=0.113, refinement=5)}),
                         ("offline", {"fixed_prices": 0.3})):
        led = run_scenario(spec, mode, **kwargs)
        if abs(led.esp_revenue - led.per_user_edge_payment.sum()) > 1e-9:
            problems.append(f"edge payments mismatch in {mode}")
        if abs(led.isp_revenue - isp_rev(led.per_user_usage, spec.plan)) > 1e-9:
            problems.append(f"carrier revenue mismatch in {mode}")
        welfare = (led.mu_payoffs.sum() + led.isp_revenue + led.cp_revenue
                   + led.esp_revenue)
        if abs(led.social_welfare - welfare) > 1e-9:
            problems.append(f"welfare identity broken in {mode}")
        if mode == "none" and led.esp_revenue != 0.0:
            problems.append("edge revenue nonzero without edge service")

    # marginal / inverse-marginal round trips
    xs = np.geomspace(1e-6, 1.0, 2001)
    for a in (0.3, 0.5, 0.8):
        fam = UtilityFamily(a)
        err = np.max(np.abs(fam.inverse_marginal(fam.marginal(xs)) - xs) / xs)
        if err > 1e-12:
            problems.append(f"utility round trip error {err:.2e} at a={a}")
    ss = np.geomspace(1e-6, 10.0, 2001)
    for b in (1.0, 2.0, 3.0):
        fam = CostFamily(b)
        err = np.max(np.abs(fam.inverse_marginal(fam.marginal(ss)) - ss) / ss)
        if err > 1e-12:
            problems.append(f"cost round trip error {err:.2e} at b={b}")

    detail = ("all property suites clean"
              if not problems else "; ".join(problems))
    return _result("property suites", start, not problems, detail)


CRITERIA = (
    criterion_1_offline_vs_oracle,
    criterion_2_regret_bound,
    criterion_3_strategy_ratios,
    criterion_4_virtual_revenue_and_floor,
    criterion_5_rounding_guarantee,
    criterion_6_policy_revenue_floor,
    criterion_7_ecosystem_direction,
    criterion_8_property_suites,
)


def run_all(stream=None) -> list[CriterionResult]:
    stream = stream or sys.stdout
    start = time.time()
    results = []
    for criterion in CRITERIA:
        try:
            res = criterion()
        except Exception as exc:  # a crash is a failure, not an abort
            res = CriterionResult(criterion.__name__, False,
                                  f"crashed: {exc}", 0.0)
        results.append(res)
        print(res.line(), file=stream, flush=True)
    total = time.time() - start
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed in {total:.0f}s "
          f"(budget 600s)", file=stream, flush=True)
    return results
