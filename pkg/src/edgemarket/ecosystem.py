"""Population sampling, full-market scenarios and ecosystem accounting.

A population is N users, each with an (N, T) block of content-service
draws and preference scalars.  Scenarios run a whole month under one of
four market modes and return a ledger of user payoffs and provider
revenues; the "none" mode posts the price cap (provably equivalent to
offering no edge service), so every mode shares one code path.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import (PREF_MAX, CostFamily, DataPlan, SlotRealization,
                    UtilityFamily)
from .offline import best_response_arrays, solve_offline_arrays
from .online import demand_divergence_bound
from .pricing import (PolicyState, PriceGrid, build_grid, candidate_mask,
                      corollary_parameters, draw_prices, init_policy,
                      settle_slot, sweep_prices)

DEFAULT_PLAN = DataPlan(Q=1.0, Pi=10.0, pi=15.0)


@dataclass(frozen=True)
class PopulationSpec:
    """Everything needed to draw a reproducible user population.

    Content draws (d, r, c) are truncated normals on [0, bound] with the
    midpoint mean and a quarter-width standard deviation; the preference
    scalars theta and beta live on [0, 2] with mean 1.
    """

    n_users: int = 500
    T: int = 30
    d_bar: float = 0.2
    r_bar: float = 0.1
    c_bar: float = 1.0
    a: float = 0.5
    b: float = 1.0
    plan: DataPlan = DEFAULT_PLAN
    cp_tau: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_users < 1 or self.T < 1:
            raise ValueError("population needs n_users >= 1 and T >= 1")
        if min(self.d_bar, self.r_bar, self.c_bar) < 0.0:
            raise ValueError("support bounds must be non-negative")
        if not 0.0 < self.cp_tau < 1.0:
            raise ValueError("cp_tau must lie in (0, 1)")

    @property
    def utility(self) -> UtilityFamily:
        return UtilityFamily(self.a)

    @property
    def cost(self) -> CostFamily:
        return CostFamily(self.b)

    @property
    def price_cap(self) -> float:
        """Support-based cap: beta never exceeds PREF_MAX, so no user
        offloads at PREF_MAX * e'(c_bar) regardless of the realization."""
        return PREF_MAX * float(self.cost.marginal(self.c_bar))

    def step_sizes(self) -> np.ndarray:
        xi = demand_divergence_bound(self.plan, self.T, self.d_bar, self.r_bar)
        return np.full(self.T, self.plan.pi / (xi * np.sqrt(self.T)))


@dataclass(frozen=True, eq=False)
class Population:
    """Realized month for every user; all arrays are (n_users, T)."""

    spec: PopulationSpec
    d: np.ndarray
    r: np.ndarray
    c: np.ndarray
    theta: np.ndarray
    beta: np.ndarray


def _truncated_normal(rng: np.random.Generator, hi: float,
                      size: tuple[int, ...]) -> np.ndarray:
    """Normal(mean=hi/2, sd=hi/4) redrawn until inside [0, hi]."""
    if hi == 0.0:
        return np.zeros(size)
    out = rng.normal(hi / 2.0, hi / 4.0, size)
    bad = (out < 0.0) | (out > hi)
    while bad.any():
        out[bad] = rng.normal(hi / 2.0, hi / 4.0, int(bad.sum()))
        bad = (out < 0.0) | (out > hi)
    return out


def sample_population(spec: PopulationSpec) -> Population:
    """Draw the whole population; identical seeds give identical draws."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0]))
    size = (spec.n_users, spec.T)
    return Population(
        spec=spec,
        d=_truncated_normal(rng, spec.d_bar, size),
        r=_truncated_normal(rng, spec.r_bar, size),
        c=_truncated_normal(rng, spec.c_bar, size),
        theta=_truncated_normal(rng, PREF_MAX, size),
        beta=_truncated_normal(rng, PREF_MAX, size),
    )


def slots_for_user(pop: Population, user: int, prices) -> list[SlotRealization]:
    """Scalar-API view of one user's month at the given posted prices."""
    prices = np.broadcast_to(np.asarray(prices, dtype=float), (pop.spec.T,))
    return [SlotRealization(pop.d[user, t], pop.r[user, t], pop.c[user, t],
                            pop.theta[user, t], pop.beta[user, t],
                            float(prices[t]))
            for t in range(pop.spec.T)]


# ---------------------------------------------------------------------------
# provider revenue primitives
# ---------------------------------------------------------------------------

def isp_revenue(usages: Sequence[float] | np.ndarray,
                plans: DataPlan | Sequence[DataPlan]) -> float:
    """Subscription plus overage, summed over users."""
    usages = np.asarray(usages, dtype=float)
    if isinstance(plans, DataPlan):
        over = np.maximum(0.0, usages - plans.Q)
        return float(usages.size * plans.Pi + plans.pi * over.sum())
    if len(plans) != usages.size:
        raise ValueError("one plan per user required")
    return float(sum(p.Pi + p.pi * max(0.0, g - p.Q)
                     for p, g in zip(plans, usages)))


def cp_revenue(total_acquisition: float, tau: float) -> float:
    """Advertising revenue x^(1-tau)/(1-tau) of the total acquired time."""
    if total_acquisition < 0.0:
        raise ValueError("total acquisition must be non-negative")
    return float(total_acquisition ** (1.0 - tau) / (1.0 - tau))


def esp_revenue(prices, comps, execs) -> float:
    """Edge revenue sum(p * c * z) over whatever entries are passed in."""
    return float(np.sum(np.asarray(prices, dtype=float)
                        * np.asarray(comps, dtype=float)
                        * np.asarray(execs, dtype=float)))


# ---------------------------------------------------------------------------
# vectorized month simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MonthAggregates:
    """Per-user month totals; arrays share a common leading shape that
    ends with the user axis (price-sweep runs prepend a price axis)."""

    virtual: np.ndarray       # sum of slot payoffs before plan charges
    usage: np.ndarray         # GB consumed
    edge_payment: np.ndarray  # $ paid to the edge provider
    acquisition: np.ndarray   # sum of x over slots
    offloaded: np.ndarray     # cycle units executed at the edge

    def payoffs(self, plan: DataPlan) -> np.ndarray:
        return (self.virtual - plan.pi * np.maximum(0.0, self.usage - plan.Q)
                - plan.Pi)


def _virtual_payoff_grid(d, r, c, theta, beta, price, x, z, u, e):
    return theta * u.eval(x) - beta * e.eval((x - z) * c) - price * z * c


def _adaptive_months(pop: Population, plan: DataPlan, u, e,
                     slot_price) -> MonthAggregates:
    """Run every user's adaptive strategy for a month.

    ``slot_price(t)`` returns the posted prices for slot t, broadcastable
    against the user axis; extra leading axes (a price sweep) are carried
    through the whole run.
    """
    n, t_len = pop.d.shape
    etas = pop.spec.step_sizes()
    quota = plan.Q / t_len
    shape = np.broadcast_shapes(np.shape(slot_price(0)), (n,))
    lam = np.zeros(shape)
    virtual = np.zeros(shape)
    usage_total = np.zeros(shape)
    paid = np.zeros(shape)
    acq = np.zeros(shape)
    off = np.zeros(shape)
    for t in range(t_len):
        d, r, c = pop.d[:, t], pop.r[:, t], pop.c[:, t]
        theta, beta = pop.theta[:, t], pop.beta[:, t]
        price = slot_price(t)
        x, z = best_response_arrays(d, r, c, theta, beta, price, lam, u, e)
        used = d * x + r * z
        lam = np.clip(lam + etas[t] * (used - quota), 0.0, plan.pi)
        virtual += _virtual_payoff_grid(d, r, c, theta, beta, price, x, z, u, e)
        usage_total += used
        paid += price * c * z
        acq += x
        off += c * z
    return MonthAggregates(virtual, usage_total, paid, acq, off)


def simulate_months(pop: Population, plan: DataPlan, u, e,
                    prices) -> MonthAggregates:
    """Adaptive-strategy month at fixed posted prices (scalar or (T,))."""
    prices = np.broadcast_to(np.asarray(prices, dtype=float), (pop.spec.T,))
    return _adaptive_months(pop, plan, u, e, lambda t: prices[t])


def simulate_price_sweep(pop: Population, plan: DataPlan, u, e,
                         levels: np.ndarray) -> MonthAggregates:
    """Adaptive-strategy months at every constant price level at once.

    Returns aggregates shaped (len(levels), n_users).
    """
    levels = np.asarray(levels, dtype=float)[:, None]
    return _adaptive_months(pop, plan, u, e, lambda t: levels)


def simulate_policy_months(pop: Population, plan: DataPlan, u, e,
                           grid: PriceGrid, gamma: float, delta: float,
                           rng: np.random.Generator
                           ) -> tuple[MonthAggregates, PolicyState]:
    """Month with per-user prices drawn by the exponential-weights policy.

    Users run the adaptive strategy against their personal quotes; the
    policy settles all payments at the end of each slot before requoting.
    """
    n, t_len = pop.d.shape
    etas = pop.spec.step_sizes()
    quota = plan.Q / t_len
    state = init_policy(grid, gamma, delta)
    lam = np.zeros(n)
    virtual = np.zeros(n)
    usage_total = np.zeros(n)
    paid = np.zeros(n)
    acq = np.zeros(n)
    off = np.zeros(n)
    for t in range(t_len):
        d, r, c = pop.d[:, t], pop.r[:, t], pop.c[:, t]
        theta, beta = pop.theta[:, t], pop.beta[:, t]
        kappas = draw_prices(state, n, rng)
        price = grid.candidates[kappas]
        x, z = best_response_arrays(d, r, c, theta, beta, price, lam, u, e)
        used = d * x + r * z
        lam = np.clip(lam + etas[t] * (used - quota), 0.0, plan.pi)
        payments = price * c * z
        state = settle_slot(state, kappas, payments, n, pop.spec.c_bar)
        virtual += _virtual_payoff_grid(d, r, c, theta, beta, price, x, z, u, e)
        usage_total += used
        paid += payments
        acq += x
        off += c * z
    return MonthAggregates(virtual, usage_total, paid, acq, off), state


def simulate_greedy_months(pop: Population, plan: DataPlan, u, e,
                           prices) -> MonthAggregates:
    """Myopic month for every user at fixed posted prices: data is priced
    at 0 under the cap and at the overage fee beyond it."""
    prices = np.broadcast_to(np.asarray(prices, dtype=float), (pop.spec.T,))
    n, t_len = pop.d.shape
    cum = np.zeros(n)
    virtual = np.zeros(n)
    paid = np.zeros(n)
    acq = np.zeros(n)
    off = np.zeros(n)
    for t in range(t_len):
        d, r, c = pop.d[:, t], pop.r[:, t], pop.c[:, t]
        theta, beta = pop.theta[:, t], pop.beta[:, t]
        lam = np.where(cum < plan.Q, 0.0, plan.pi)
        x, z = best_response_arrays(d, r, c, theta, beta, prices[t], lam, u, e)
        cum += d * x + r * z
        virtual += _virtual_payoff_grid(d, r, c, theta, beta, prices[t], x, z, u, e)
        paid += prices[t] * c * z
        acq += x
        off += c * z
    return MonthAggregates(virtual, cum, paid, acq, off)


def simulate_offline_months(pop: Population, plan: DataPlan, u, e,
                            prices) -> MonthAggregates:
    """Hindsight-optimal month for every user at fixed posted prices."""
    prices = np.broadcast_to(np.asarray(prices, dtype=float),
                             (pop.spec.n_users, pop.spec.T))
    x, z, _ = solve_offline_arrays(pop.d, pop.r, pop.c, pop.theta, pop.beta,
                                   prices, plan, u, e)
    virtual = _virtual_payoff_grid(pop.d, pop.r, pop.c, pop.theta, pop.beta,
                                   prices, x, z, u, e).sum(axis=1)
    usage = (pop.d * x + pop.r * z).sum(axis=1)
    paid = (prices * pop.c * z).sum(axis=1)
    return MonthAggregates(virtual, usage, paid, x.sum(axis=1),
                           (pop.c * z).sum(axis=1))


# ---------------------------------------------------------------------------
# hindsight price benchmark
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExPostOptimum:
    """Best fixed-price revenue in hindsight and the sweep that found it."""

    v_star: float
    p_opt: float
    best_candidate_revenue: float
    prices: np.ndarray
    revenues: np.ndarray


def ex_post_optimal_revenue(pop: Population, plan: DataPlan, u, e,
                            grid: PriceGrid, refinement: int = 20
                            ) -> ExPostOptimum:
    """Sweep fixed prices over the grid plus refinements and keep the best.

    The user response model is the same adaptive strategy the live market
    uses, so the ratio policy-revenue / v_star is meaningful.  Rounding
    the optimal price down to a grid candidate costs at most a factor
    (1+epsilon); the sweep verifies that guarantee on every call.
    """
    prices = sweep_prices(grid, refinement)
    agg = simulate_price_sweep(pop, plan, u, e, prices)
    revenues = agg.edge_payment.sum(axis=-1)
    best = int(np.argmax(revenues))
    v_star = float(revenues[best])
    cand = candidate_mask(grid, prices)
    best_candidate = float(revenues[cand].max())
    if best_candidate < v_star / (1.0 + grid.epsilon) - 1e-9:
        raise AssertionError(
            f"best candidate revenue {best_candidate:.6g} fell below "
            f"v_star/(1+eps) = {v_star / (1 + grid.epsilon):.6g}")
    return ExPostOptimum(v_star, float(prices[best]), best_candidate,
                         prices, revenues)


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PricingParams:
    """Knobs of the dynamic-pricing policy and its benchmark sweep."""

    p_min: float = 0.01
    epsilon: float = 1.0 / 3.0
    delta: float = 1.0 / 6.0
    gamma: float = 1.0 / 12.0
    refinement: int = 20

    @classmethod
    def from_alpha(cls, alpha: float, p_min: float = 0.01,
                   refinement: int = 20) -> "PricingParams":
        eps, delta, gamma = corollary_parameters(alpha)
        return cls(p_min, eps, delta, gamma, refinement)


@dataclass(frozen=True, eq=False)
class ScenarioLedger:
    """Month outcome of one market scenario.

    The welfare field is the sum of user payoffs and all three provider
    revenues; transfers (edge bills, overage fees) cancel inside it.
    """

    mode: str
    mu_payoffs: np.ndarray
    per_user_usage: np.ndarray
    per_user_edge_payment: np.ndarray
    isp_revenue: float
    cp_revenue: float
    esp_revenue: float
    social_welfare: float
    total_acquisition: float
    total_usage: float
    total_offloaded: float
    policy: PolicyState | None = None
    p_opt: float | None = None
    v_star: float | None = None


MODES = ("none", "edge", "edge_opt", "offline")


def _ledger(mode: str, spec: PopulationSpec, agg: MonthAggregates,
            policy: PolicyState | None = None, p_opt: float | None = None,
            v_star: float | None = None) -> ScenarioLedger:
    payoffs = agg.payoffs(spec.plan)
    isp = isp_revenue(agg.usage, spec.plan)
    cp = cp_revenue(float(agg.acquisition.sum()), spec.cp_tau)
    esp = float(agg.edge_payment.sum())
    welfare = float(payoffs.sum()) + isp + cp + esp
    return ScenarioLedger(
        mode=mode, mu_payoffs=payoffs, per_user_usage=agg.usage,
        per_user_edge_payment=agg.edge_payment, isp_revenue=isp,
        cp_revenue=cp, esp_revenue=esp, social_welfare=welfare,
        total_acquisition=float(agg.acquisition.sum()),
        total_usage=float(agg.usage.sum()),
        total_offloaded=float(agg.offloaded.sum()),
        policy=policy, p_opt=p_opt, v_star=v_star)


def run_scenario(spec: PopulationSpec, mode: str,
                 pricing: PricingParams | None = None,
                 fixed_prices=None) -> ScenarioLedger:
    """Run one full-market month.

    none:     every slot is quoted the price cap, so nobody offloads.
    edge:     the dynamic-pricing policy quotes every user personally.
    edge_opt: the hindsight-optimal fixed price is posted throughout.
    offline:  users solve the month in hindsight at ``fixed_prices``.

    Identical (spec, mode, params) always produce an identical ledger:
    the population derives from spec.seed and the policy's quote draws
    from an independent stream of the same seed.
    """
    u, e = spec.utility, spec.cost
    pop = sample_population(spec)
    if mode == "none":
        agg = simulate_months(pop, spec.plan, u, e, spec.price_cap)
        return _ledger(mode, spec, agg)
    if mode == "offline":
        if fixed_prices is None:
            raise ValueError("offline mode needs fixed_prices")
        agg = simulate_offline_months(pop, spec.plan, u, e, fixed_prices)
        return _ledger(mode, spec, agg)
    if mode in ("edge", "edge_opt"):
        pricing = pricing or PricingParams()
        grid = build_grid(pricing.p_min, pricing.epsilon, spec.price_cap)
        if mode == "edge":
            rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1]))
            agg, state = simulate_policy_months(
                pop, spec.plan, u, e, grid, pricing.gamma, pricing.delta, rng)
            return _ledger(mode, spec, agg, policy=state)
        bench = ex_post_optimal_revenue(pop, spec.plan, u, e, grid,
                                        pricing.refinement)
        agg = simulate_months(pop, spec.plan, u, e, bench.p_opt)
        return _ledger(mode, spec, agg, p_opt=bench.p_opt, v_star=bench.v_star)
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
