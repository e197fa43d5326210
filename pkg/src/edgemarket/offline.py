"""Closed-form solver for the hindsight month problem.

The month problem (maximize total slot payoff minus overage minus
subscription, over 0 <= z_t <= x_t <= 1) is convex after substituting
z = x*y, and its KKT system reduces to a single scalar dual variable: the
shadow price lam the user charges itself per GB of data.  Given lam, each
slot decouples into one of four closed-form regimes; the optimal lam is
found by bisecting the cap-feasibility condition on the month's potential
data usage A(lam).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import (CostFamily, DataPlan, Decision, SlotRealization,
                    UtilityFamily, monthly_payoff, slot_data_usage)

# Lower end of the regime-IV root bracket; roots below it collapse to 0.
_X_MIN = 1e-12
_ROOT_ITERS = 44            # bisection to ~6e-14 < 1e-10 in x
_LAMBDA_ITERS = 60          # dual bisection iteration cap
_LAMBDA_WIDTH = 1e-9        # dual bisection bracket width target
_CLAMP_TOL = 1e-9           # tolerated float excursion of closed forms


class Region(enum.Enum):
    """Per-slot best-response regime, indexed by (sensitivity, valuation)
    relative to shadow-price-dependent thresholds."""

    I = "I"      # weak sensitivity, high valuation: acquire fully, all local
    II = "II"    # strong sensitivity, high valuation: acquire fully, offload some
    III = "III"  # strong sensitivity, low valuation: partial acquire, offload some
    IV = "IV"    # weak sensitivity, low valuation: partial acquire, all local


class RegionGapError(RuntimeError):
    """No regime matched a slot state; indicates a numerical boundary issue."""


@dataclass(frozen=True)
class OfflineSolution:
    """Hindsight optimum of one month: per-slot decisions, the optimal
    shadow price, the overage volume and the achieved payoff."""

    decisions: tuple[Decision, ...]
    shadow_price: float
    overage: float
    payoff: float


# ---------------------------------------------------------------------------
# vectorized best response
# ---------------------------------------------------------------------------

def best_response_arrays(d, r, c, theta, beta, price, lam,
                         u: UtilityFamily, e: CostFamily):
    """Elementwise per-slot best response (x, z) at shadow price lam.

    All seven leading arguments broadcast together.  Implements the
    four-regime closed form; regime IV's acquisition level is the root of
    the strictly decreasing stationarity residual
    theta*u'(x) - beta*c*e'(x*c) - d*lam, found by bisection.
    """
    d, r, c, theta, beta, price, lam = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (d, r, c, theta, beta, price, lam)))
    shape = d.shape

    u1 = float(u.marginal(1.0))
    den = c * e.marginal(c)              # c * e'(c); zero only when c == 0
    edge_cost = price * c + r * lam      # marginal $ of one executing unit
    both_cost = price * c + (d + r) * lam
    stay_gain = beta * den + d * lam     # marginal $ of the last acquired unit, all-local

    # "strong" sensitivity: local marginal cost at full load meets the edge
    # price, i.e. beta >= (p*c + r*lam) / (c*e'(c)), tested product-form so
    # c == 0 degenerates to the weak branch (nothing to offload).
    strong = (den > 0.0) & (beta * den >= edge_cost)

    x = np.zeros(shape)
    z = np.zeros(shape)
    need_root = np.zeros(shape, dtype=bool)

    weak = ~strong
    if weak.any():
        full = theta[weak] * u1 > stay_gain[weak]       # regime I
        x[weak] = np.where(full, 1.0, 0.0)
        iv = np.zeros(shape, dtype=bool)
        iv[weak] = ~full
        need_root |= iv

    if strong.any():
        s = strong
        ec, bc = edge_cost[s], beta[s] * c[s]
        with np.errstate(divide="ignore", invalid="ignore"):
            arg = np.where(ec > 0.0, ec / np.where(bc > 0.0, bc, 1.0), 0.0)
            arg = np.where((ec > 0.0) & (bc <= 0.0), np.inf, arg)
            # threshold local share: below it local execution beats the edge
            m = np.minimum(e.inverse_marginal(arg) / c[s], 1.0)
            full = theta[s] * u1 > both_cost[s]          # regime II
            ratio = np.where(theta[s] > 0.0, both_cost[s] / theta[s], np.inf)
            x3 = np.where(np.isfinite(ratio), u.inverse_marginal(ratio), 0.0)
            x3 = np.where(ratio > 0.0, x3, 1.0)          # free slot: acquire fully
        x3 = np.clip(x3, 0.0, 1.0)
        xs = np.where(full, 1.0, x3)
        zs = xs - m
        iii = full | (zs >= 0.0)                          # regime II or III
        x[s] = np.where(iii, xs, 0.0)
        z[s] = np.where(iii, np.maximum(zs, 0.0), 0.0)
        iv = np.zeros(shape, dtype=bool)
        iv[s] = ~iii
        need_root |= iv

    if need_root.any():
        x[need_root] = _acquisition_root(
            d[need_root], c[need_root], theta[need_root], beta[need_root],
            lam[need_root], u, e)

    # the lemma closed forms are interior by construction; clamping only
    # absorbs round-off, never a modeling error
    over = max(float(np.max(z - x, initial=0.0)), float(np.max(-z, initial=0.0)),
               float(np.max(x - 1.0, initial=0.0)))
    if over > _CLAMP_TOL:
        raise RegionGapError(f"closed-form decision violated feasibility by {over:.3e}")
    z = np.minimum(np.maximum(z, 0.0), x)
    return x, z


def _acquisition_root(d, c, theta, beta, lam, u, e):
    """Root of theta*u'(x) = beta*c*e'(x*c) + d*lam on (0, 1], elementwise.

    The residual is strictly decreasing with an infinite limit at 0+ when
    theta > 0, so bisection is safe; Newton is not, because u' has an
    unbounded derivative near 0 for fractional exponents.  States whose
    residual is already non-positive at the bracket floor collapse to 0.
    """
    with np.errstate(divide="ignore"):
        g_lo = theta * u.marginal(_X_MIN) - beta * c * e.marginal(_X_MIN * c) - d * lam
    lo = np.full(d.shape, _X_MIN)
    hi = np.ones(d.shape)
    for _ in range(_ROOT_ITERS):
        mid = 0.5 * (lo + hi)
        g = theta * u.marginal(mid) - beta * c * e.marginal(mid * c) - d * lam
        pos = g > 0.0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    return np.where(g_lo <= 0.0, 0.0, 0.5 * (lo + hi))


# ---------------------------------------------------------------------------
# scalar classification and best response
# ---------------------------------------------------------------------------

def region_memberships_arrays(d, r, c, theta, beta, price, lam,
                              u: UtilityFamily, e: CostFamily):
    """The four regime sets evaluated as written, elementwise.

    Returns four boolean arrays (I, II, III, IV).  Exactly one holds for
    generic states; ties on the measure-zero boundaries are resolved
    downstream by order and by Lagrangian value.
    """
    d, r, c, theta, beta, price, lam = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (d, r, c, theta, beta, price, lam)))
    u1 = float(u.marginal(1.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        den = c * e.marginal(c)
        edge_cost = price * c + r * lam
        both_cost = price * c + (d + r) * lam
        t1 = (beta * den + d * lam) / u1
        t2 = both_cost / u1
        beta_low = np.where(den > 0.0, beta * den < edge_cost, True)
        arg = np.where((beta * c) > 0.0, edge_cost / np.where(beta * c > 0.0, beta * c, 1.0),
                       np.where(edge_cost > 0.0, np.inf, 0.0))
        m = np.where(c > 0.0, e.inverse_marginal(arg) / np.where(c > 0.0, c, 1.0), np.inf)
        u_m = np.where(m > 0.0, u.marginal(np.maximum(m, _X_MIN)), np.inf)
        t3 = np.where(np.isinf(u_m), 0.0, both_cost / u_m)
        t3 = np.where(np.isinf(m), np.inf, t3)
    in_i = (theta > t1) & beta_low
    in_ii = (theta > t2) & ~beta_low
    in_iii = (t3 <= theta) & (theta <= t2)
    in_iv = (theta < t3) & (theta <= t1)
    return in_i, in_ii, in_iii, in_iv


def slot_lagrangian(slot: SlotRealization, dec: Decision, lam: float,
                    u: UtilityFamily, e: CostFamily) -> float:
    """Per-slot dual objective: virtual payoff minus lam-priced data usage.

    The constant lam*Q/T offset of the month Lagrangian is dropped; it
    does not affect any per-slot comparison.
    """
    local = (dec.x - dec.z) * slot.c
    payoff = (slot.theta * u.eval(dec.x) - slot.beta * e.eval(local)
              - slot.price * dec.z * slot.c)
    return payoff - lam * slot_data_usage(slot, dec)


def _region_candidates(slot, lam, u, e):
    """Closed-form decision each regime would produce, feasible ones only."""
    out = {}
    d, r, c, th, be, p = slot.d, slot.r, slot.c, slot.theta, slot.beta, slot.price
    out[Region.I] = Decision(1.0, 0.0)
    if be > 0.0 and c > 0.0:
        m = min(float(e.inverse_marginal((p * c + r * lam) / (be * c)) / c), 1.0)
        out[Region.II] = Decision(1.0, 1.0 - m)
        if th > 0.0:
            x3 = min(float(u.inverse_marginal((p * c + (d + r) * lam) / th)), 1.0)
            if x3 - m >= 0.0:
                out[Region.III] = Decision(x3, x3 - m)
    x4 = float(_acquisition_root(*(np.asarray([v], dtype=float)
                                   for v in (d, c, th, be, lam)), u, e)[0])
    out[Region.IV] = Decision(min(x4, 1.0), 0.0)
    return out


def classify_region(slot: SlotRealization, lam: float,
                    u: UtilityFamily, e: CostFamily) -> Region:
    """Regime of the slot state at shadow price lam.

    Tests the four sets as written, in order I, II, III, IV.  If rounding
    leaves a boundary state unmatched, falls back to the regime whose
    closed-form decision attains the best per-slot Lagrangian value.
    """
    if lam < 0.0:
        raise ValueError("shadow price must be non-negative")
    members = region_memberships_arrays(slot.d, slot.r, slot.c, slot.theta,
                                        slot.beta, slot.price, lam, u, e)
    for region, hit in zip(Region, members):
        if bool(hit):
            return region
    candidates = _region_candidates(slot, lam, u, e)
    if not candidates:
        raise RegionGapError(f"region gap at {slot} with lam={lam}")
    return max(candidates,
               key=lambda reg: slot_lagrangian(slot, candidates[reg], lam, u, e))


def slot_best_response(slot: SlotRealization, lam: float,
                       u: UtilityFamily, e: CostFamily) -> Decision:
    """Maximizer of the per-slot Lagrangian over 0 <= z <= x <= 1."""
    if lam < 0.0:
        raise ValueError("shadow price must be non-negative")
    x, z = best_response_arrays(slot.d, slot.r, slot.c, slot.theta, slot.beta,
                                slot.price, lam, u, e)
    return Decision(float(x), float(z))


# ---------------------------------------------------------------------------
# month-level solve
# ---------------------------------------------------------------------------

def _slot_arrays(slots: Sequence[SlotRealization]):
    cols = [(s.d, s.r, s.c, s.theta, s.beta, s.price) for s in slots]
    d, r, c, theta, beta, price = (np.asarray(col, dtype=float)
                                   for col in zip(*cols))
    return d, r, c, theta, beta, price


def potential_usage(slots: Sequence[SlotRealization], lam: float,
                    u: UtilityFamily, e: CostFamily) -> float:
    """Month data usage A(lam) the user would choose at internal price lam.

    Weakly decreasing in lam: a higher shadow price never increases usage.
    """
    d, r, c, theta, beta, price = _slot_arrays(slots)
    x, z = best_response_arrays(d, r, c, theta, beta, price, lam, u, e)
    return float(np.sum(d * x + r * z))


def optimal_shadow_price(slots: Sequence[SlotRealization], plan: DataPlan,
                         u: UtilityFamily, e: CostFamily) -> float:
    """Optimal dual value: min(pi, smallest lam with A(lam) <= Q).

    If even the overage fee does not curb demand below the cap, the
    shadow price saturates at pi.  Otherwise bisection returns the upper
    endpoint of the bracket, which keeps A(lam) <= Q feasible even when
    A is flat around the crossing.
    """
    if not slots:
        raise ValueError("need at least one slot")
    d, r, c, theta, beta, price = _slot_arrays(slots)

    def usage(lam: float) -> float:
        x, z = best_response_arrays(d, r, c, theta, beta, price, lam, u, e)
        return float(np.sum(d * x + r * z))

    if usage(plan.pi) > plan.Q:
        return plan.pi
    if usage(0.0) <= plan.Q:
        return 0.0
    lo, hi = 0.0, plan.pi
    for _ in range(_LAMBDA_ITERS):
        if hi - lo <= _LAMBDA_WIDTH:
            break
        mid = 0.5 * (lo + hi)
        if usage(mid) <= plan.Q:
            hi = mid
        else:
            lo = mid
    # the regime map is continuous in lam, so A must not jump at the root
    for probe in (max(0.0, hi - 1e-7), min(plan.pi, hi + 1e-7)):
        if abs(usage(probe) - usage(hi)) >= 1e-3:
            raise RegionGapError(f"potential usage discontinuous near lam={hi}")
    return hi


def solve_offline(slots: Sequence[SlotRealization], plan: DataPlan,
                  u: UtilityFamily, e: CostFamily) -> OfflineSolution:
    """Hindsight optimum: decisions are the regime map at the optimal
    shadow price; the overage is whatever usage then exceeds the cap."""
    lam = optimal_shadow_price(slots, plan, u, e)
    d, r, c, theta, beta, price = _slot_arrays(slots)
    x, z = best_response_arrays(d, r, c, theta, beta, price, lam, u, e)
    decisions = tuple(Decision(float(xi), float(zi)) for xi, zi in zip(x, z))
    usage = float(np.sum(d * x + r * z))
    overage = max(0.0, usage - plan.Q)
    payoff = monthly_payoff(slots, decisions, plan, u, e)
    return OfflineSolution(decisions, lam, overage, payoff)


def solve_offline_arrays(d, r, c, theta, beta, price, plan: DataPlan,
                         u: UtilityFamily, e: CostFamily):
    """Row-wise hindsight solve for a population.

    Inputs are (N, T) arrays (price may broadcast).  Returns
    (x, z, shadow_price) with x, z shaped (N, T) and shadow_price (N,).
    Each row runs the same dual bisection as ``optimal_shadow_price``.
    """
    d, r, c, theta, beta, price = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (d, r, c, theta, beta, price)))

    def usage_rows(lam_rows):
        x, z = best_response_arrays(d, r, c, theta, beta, price,
                                    lam_rows[:, None], u, e)
        return (d * x + r * z).sum(axis=1)

    n = d.shape[0]
    at_cap = usage_rows(np.full(n, plan.pi)) > plan.Q
    free = usage_rows(np.zeros(n)) <= plan.Q
    lo = np.where(at_cap, plan.pi, 0.0)
    hi = np.where(free, 0.0, plan.pi)
    hi = np.maximum(hi, lo)
    for _ in range(_LAMBDA_ITERS):
        if float(np.max(hi - lo)) <= _LAMBDA_WIDTH:
            break
        mid = 0.5 * (lo + hi)
        feasible = usage_rows(mid) <= plan.Q
        lo = np.where(feasible, lo, mid)
        hi = np.where(feasible, mid, hi)
    lam = hi
    x, z = best_response_arrays(d, r, c, theta, beta, price, lam[:, None], u, e)
    return x, z, lam
