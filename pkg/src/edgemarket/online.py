"""Causal month strategies and their regret diagnostics.

The adaptive strategy tracks a running shadow price: each slot it plays
the per-slot best response at the current estimate, then nudges the
estimate up or down by how far the slot's data usage overshot the
average quota, projected back into [0, pi].  The myopic baseline instead
prices data at 0 until the cap is spent and at pi afterwards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .model import (CostFamily, DataPlan, Decision, SlotRealization,
                    UtilityFamily, monthly_payoff, slot_data_usage)
from .offline import OfflineSolution, slot_best_response, solve_offline


@dataclass(frozen=True)
class OnlineState:
    """Running state of one user's month: shadow-price estimate, slot
    index, cumulative data usage, and the step-size schedule."""

    lambda_hat: float
    t: int
    cumulative_usage: float
    step_sizes: tuple[float, ...]


@dataclass(frozen=True)
class RegretReport:
    """Measured per-slot payoff gap to hindsight and its guaranteed bound.

    Xi is the maximal demand divergence (worst per-slot distance between
    usage and the average quota), Psi the maximal consumption fluctuation
    of the hindsight solution.  With the default constant step size the
    bound equals pi*(Xi + Psi)/sqrt(T).
    """

    Xi: float
    Psi: float
    measured_gap: float
    bound: float


def step_schedule(plan: DataPlan, T: int, d_bar: float, r_bar: float,
                  kind: str = "constant") -> tuple[float, ...]:
    """Step sizes eta_t = pi / (Xi * sqrt(T)); "decaying" uses sqrt(t)."""
    xi = demand_divergence_bound(plan, T, d_bar, r_bar)
    if kind == "constant":
        return tuple(plan.pi / (xi * math.sqrt(T)) for _ in range(T))
    if kind == "decaying":
        return tuple(plan.pi / (xi * math.sqrt(t)) for t in range(1, T + 1))
    raise ValueError(f"unknown step schedule {kind!r}")


def initial_state(plan: DataPlan, step_sizes: Sequence[float]) -> OnlineState:
    """Fresh month state; the shadow-price estimate starts at zero."""
    return OnlineState(0.0, 0, 0.0, tuple(step_sizes))


def online_step(state: OnlineState, slot: SlotRealization, plan: DataPlan,
                u: UtilityFamily, e: CostFamily) -> tuple[Decision, OnlineState]:
    """One slot of the adaptive strategy.

    Plays the best response at the current shadow-price estimate, then
    moves the estimate by eta_t times the usage overshoot against the
    average quota Q/T, clamped into [0, pi].
    """
    if state.t >= len(state.step_sizes):
        raise ValueError("month is already over for this state")
    dec = slot_best_response(slot, state.lambda_hat, u, e)
    usage = slot_data_usage(slot, dec)
    eta = state.step_sizes[state.t]
    lam = state.lambda_hat + eta * (usage - plan.Q / len(state.step_sizes))
    lam = min(max(lam, 0.0), plan.pi)
    new = replace(state, lambda_hat=lam, t=state.t + 1,
                  cumulative_usage=state.cumulative_usage + usage)
    return dec, new


def greedy_step(state: OnlineState, slot: SlotRealization, plan: DataPlan,
                u: UtilityFamily, e: CostFamily) -> tuple[Decision, OnlineState]:
    """One slot of the myopic baseline.

    Data is treated as free while cumulative usage is under the cap and
    as costing the full overage fee afterwards.  On the slot that
    straddles the cap the decision still follows this two-state rule;
    the exact overage is charged by the month accounting regardless.
    """
    if state.t >= len(state.step_sizes):
        raise ValueError("month is already over for this state")
    lam = 0.0 if state.cumulative_usage < plan.Q else plan.pi
    dec = slot_best_response(slot, lam, u, e)
    usage = slot_data_usage(slot, dec)
    new = replace(state, lambda_hat=lam, t=state.t + 1,
                  cumulative_usage=state.cumulative_usage + usage)
    return dec, new


@dataclass(frozen=True)
class MonthRun:
    decisions: tuple[Decision, ...]
    payoff: float
    lambdas: tuple[float, ...]       # estimate used in each slot
    final_lambda: float
    total_usage: float


def _run_month(stepper, slots, plan, u, e, step_sizes) -> MonthRun:
    state = initial_state(plan, step_sizes)
    decisions, lambdas = [], []
    for slot in slots:
        lambdas.append(state.lambda_hat if stepper is online_step
                       else (0.0 if state.cumulative_usage < plan.Q else plan.pi))
        dec, state = stepper(state, slot, plan, u, e)
        decisions.append(dec)
    payoff = monthly_payoff(slots, decisions, plan, u, e)
    return MonthRun(tuple(decisions), payoff, tuple(lambdas),
                    state.lambda_hat, state.cumulative_usage)


def run_online_month(slots: Sequence[SlotRealization], plan: DataPlan,
                     u: UtilityFamily, e: CostFamily,
                     step_sizes: Sequence[float]) -> MonthRun:
    return _run_month(online_step, slots, plan, u, e, tuple(step_sizes))


def run_greedy_month(slots: Sequence[SlotRealization], plan: DataPlan,
                     u: UtilityFamily, e: CostFamily) -> MonthRun:
    return _run_month(greedy_step, slots, plan, u, e, (0.0,) * len(slots))


def demand_divergence_bound(plan: DataPlan, T: int,
                            d_bar: float, r_bar: float) -> float:
    """Maximal demand divergence Xi = max(|q - d_bar - r_bar|, q) from the
    support bounds, where q = Q/T is the average quota.  Bounds how far
    any slot's usage can sit from the quota."""
    q = plan.Q / T
    return max(abs(q - d_bar - r_bar), q)


def demand_divergence(slots: Sequence[SlotRealization], plan: DataPlan,
                      d_bar: float | None = None,
                      r_bar: float | None = None) -> float:
    """Xi for a realized month; support bounds default to realized maxima."""
    if not slots:
        raise ValueError("need at least one slot")
    if d_bar is None:
        d_bar = max(s.d for s in slots)
    if r_bar is None:
        r_bar = max(s.r for s in slots)
    return demand_divergence_bound(plan, len(slots), d_bar, r_bar)


def slot_divergences(slots: Sequence[SlotRealization],
                     plan: DataPlan) -> np.ndarray:
    """Per-slot divergence |q - d_t - r_t| against the average quota."""
    q = plan.Q / len(slots)
    return np.asarray([abs(q - s.d - s.r) for s in slots])


def consumption_fluctuation(offline: OfflineSolution,
                            slots: Sequence[SlotRealization],
                            plan: DataPlan) -> float:
    """Maximal consumption fluctuation Psi of the hindsight solution.

    With l_t the per-slot leftover quota q - usage_t of the hindsight
    decisions, Psi is the largest absolute gap between the cumulative
    leftover and its uniform pace t * mean(l).  Zero iff hindsight usage
    is perfectly level.
    """
    q = plan.Q / len(slots)
    leftovers = np.asarray([q - slot_data_usage(s, d)
                            for s, d in zip(slots, offline.decisions)])
    pace = np.arange(1, leftovers.size + 1) * leftovers.mean()
    return float(np.max(np.abs(pace - np.cumsum(leftovers))))


def regret_report(slots: Sequence[SlotRealization], plan: DataPlan,
                  u: UtilityFamily, e: CostFamily,
                  step_sizes: Sequence[float],
                  d_bar: float | None = None,
                  r_bar: float | None = None) -> RegretReport:
    """Run one month online and compare against hindsight.

    The guaranteed bound for an arbitrary schedule is
    (pi^2/(2*eta_T) + (Xi^2/2 + Xi*Psi) * sum(eta)) / T; the measured gap
    must never exceed it (that is a theorem, so a violation raises).
    """
    offline = solve_offline(slots, plan, u, e)
    run = run_online_month(slots, plan, u, e, step_sizes)
    t_len = len(slots)
    xi = demand_divergence(slots, plan, d_bar, r_bar)
    psi = consumption_fluctuation(offline, slots, plan)
    gap = (offline.payoff - run.payoff) / t_len
    etas = np.asarray(step_sizes, dtype=float)
    bound = float((plan.pi**2 / (2.0 * etas[-1])
                   + (xi**2 / 2.0 + xi * psi) * etas.sum()) / t_len)
    if gap > bound + 1e-9:
        raise AssertionError(
            f"online payoff gap {gap:.6g} exceeded its guaranteed bound {bound:.6g}")
    return RegretReport(xi, psi, gap, bound)
