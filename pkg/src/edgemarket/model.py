"""Domain types and primitive per-slot payoff/usage formulas.

Conventions used throughout the package: data volumes are in GB,
computation in normalized CPU-cycle units, money in dollars.  A month is
a sequence of T slots; in each slot the user picks an acquisition
fraction x and an executing fraction z (the share of the slot's
computation run at the edge), with 0 <= z <= x <= 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Valuation/sensitivity scalars (theta, beta) live on [0, PREF_MAX] with
# mean PREF_MAX / 2 under the default population model.
PREF_MAX = 2.0


@dataclass(frozen=True)
class UtilityFamily:
    """Alpha-fair satisfaction curve u(x) = x^(1-a) / (1-a) with 0 < a < 1.

    Strictly increasing and strictly concave on (0, 1]; u(0) = 0 by
    continuous extension.  The closed-form marginal u'(x) = x^-a and its
    inverse are what the per-slot solver relies on, so the family is a
    fixed parametric form rather than an arbitrary callable.
    """

    a: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"utility exponent must be in (0, 1), got {self.a}")

    def eval(self, x):
        return x ** (1.0 - self.a) / (1.0 - self.a)

    def marginal(self, x):
        if self.a == 0.5:  # fast path for the default exponent
            return 1.0 / np.sqrt(x)
        return x ** (-self.a)

    def inverse_marginal(self, y):
        if self.a == 0.5:
            return 1.0 / (y * y)
        return y ** (-1.0 / self.a)


@dataclass(frozen=True)
class CostFamily:
    """Local-execution cost curve e(s) = s^(1+b) / (1+b) with b >= 1.

    Strictly increasing and strictly convex for s >= 0.  b = 1 is the
    quadratic default e(s) = s^2 / 2.
    """

    b: float = 1.0

    def __post_init__(self) -> None:
        if self.b < 1.0:
            raise ValueError(f"cost exponent must be >= 1, got {self.b}")

    def eval(self, s):
        return s ** (1.0 + self.b) / (1.0 + self.b)

    def marginal(self, s):
        if self.b == 1.0:
            return s
        return s**self.b

    def inverse_marginal(self, y):
        if self.b == 1.0:
            return y
        return y ** (1.0 / self.b)


@dataclass(frozen=True)
class SlotRealization:
    """One slot's content-service draw plus user state and posted edge price.

    d: wireless data volume of full acquisition (GB); r: raw input data
    that offloading migrates (GB); c: computing amount (cycle units);
    theta: valuation scalar; beta: local-cost sensitivity scalar;
    price: edge unit price ($ per cycle unit).
    """

    d: float
    r: float
    c: float
    theta: float
    beta: float
    price: float

    def __post_init__(self) -> None:
        if min(self.d, self.r, self.c) < 0.0:
            raise ValueError("slot volumes (d, r, c) must be non-negative")
        if not 0.0 <= self.theta <= PREF_MAX:
            raise ValueError(f"theta must be in [0, {PREF_MAX}], got {self.theta}")
        if not 0.0 <= self.beta <= PREF_MAX:
            raise ValueError(f"beta must be in [0, {PREF_MAX}], got {self.beta}")
        if self.price < 0.0:
            raise ValueError("edge price must be non-negative")


@dataclass(frozen=True)
class DataPlan:
    """Three-part wireless tariff: cap Q (GB), subscription Pi ($/month),
    overage fee pi ($/GB above the cap)."""

    Q: float
    Pi: float
    pi: float

    def __post_init__(self) -> None:
        if self.Q < 0.0 or self.Pi < 0.0:
            raise ValueError("data cap and subscription fee must be non-negative")
        if self.pi <= 0.0:
            raise ValueError("overage fee must be positive")


@dataclass(frozen=True)
class Decision:
    """Per-slot pair (x, z): acquisition fraction and executing fraction.

    z substitutes for the product x*y of acquisition and offload share;
    the offload share is recovered as y = z/x when x > 0 (and 0 else).
    """

    x: float
    z: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.z <= self.x <= 1.0:
            raise ValueError(f"decision must satisfy 0 <= z <= x <= 1, got {self}")

    @property
    def y(self) -> float:
        return self.z / self.x if self.x > 0.0 else 0.0


def virtual_payoff(slot: SlotRealization, dec: Decision,
                   u: UtilityFamily, e: CostFamily) -> float:
    """Slot payoff before any data-plan charge.

    theta*u(x) - beta*e((x - z)*c) - price*z*c: satisfaction from
    acquiring, minus local-execution dissatisfaction on the share kept on
    the device, minus the edge bill for the offloaded share.
    """
    local = (dec.x - dec.z) * slot.c
    return (slot.theta * u.eval(dec.x)
            - slot.beta * e.eval(local)
            - slot.price * dec.z * slot.c)


def slot_data_usage(slot: SlotRealization, dec: Decision) -> float:
    """Wireless data consumed in the slot: d*x content plus r*z raw-data
    migration for the offloaded computation."""
    return slot.d * dec.x + slot.r * dec.z


def monthly_payoff(slots: Sequence[SlotRealization], decs: Sequence[Decision],
                   plan: DataPlan, u: UtilityFamily, e: CostFamily) -> float:
    """Sum of slot payoffs minus overage charge minus the subscription fee."""
    if len(slots) != len(decs):
        raise ValueError(f"got {len(slots)} slots but {len(decs)} decisions")
    total = sum(virtual_payoff(s, d, u, e) for s, d in zip(slots, decs))
    usage = sum(slot_data_usage(s, d) for s, d in zip(slots, decs))
    return total - plan.pi * max(0.0, usage - plan.Q) - plan.Pi


def price_cap_E_bar(slots: Sequence[SlotRealization], e: CostFamily,
                    c_bar: float) -> float:
    """Price above which no rational user ever offloads.

    max over slots of beta * e'(c_bar): at or above this price the edge
    bill exceeds the worst-case local marginal cost, so z = 0 is a best
    response in every slot.  Posting it is equivalent to offering no edge
    service at all.
    """
    if not slots:
        raise ValueError("price cap needs at least one slot")
    return max(s.beta * e.marginal(c_bar) for s in slots)
