"""Simulator and solvers for a mobile-internet market with a usage-priced
edge-compute provider: per-user content-acquisition/offloading optimization
(hindsight and causal), exponential-weights dynamic pricing, and
ecosystem revenue accounting."""

from .model import (PREF_MAX, CostFamily, DataPlan, Decision, SlotRealization,
                    UtilityFamily, monthly_payoff, price_cap_E_bar,
                    slot_data_usage, virtual_payoff)
from .offline import (OfflineSolution, Region, RegionGapError,
                      best_response_arrays, classify_region,
                      optimal_shadow_price, potential_usage,
                      slot_best_response, solve_offline, solve_offline_arrays)
from .online import (MonthRun, OnlineState, RegretReport,
                     consumption_fluctuation, demand_divergence,
                     demand_divergence_bound, greedy_step, initial_state,
                     online_step, regret_report, run_greedy_month,
                     run_online_month, slot_divergences, step_schedule)
from .oracles import brute_force_month_oracle, brute_force_slot_oracle
from .pricing import (PolicyState, PriceGrid, build_grid, candidate_mask,
                      corollary_parameters, draw_prices, init_policy,
                      phi_loss, selection_distribution, settle_slot,
                      sweep_prices)
from .ecosystem import (DEFAULT_PLAN, ExPostOptimum, MonthAggregates,
                        Population, PopulationSpec, PricingParams,
                        ScenarioLedger, cp_revenue, esp_revenue,
                        ex_post_optimal_revenue, isp_revenue,
                        run_scenario, sample_population,
                        simulate_months, simulate_offline_months,
                        simulate_policy_months, simulate_price_sweep,
                        slots_for_user)

__version__ = "0.1.0"
