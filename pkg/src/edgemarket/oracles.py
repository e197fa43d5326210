"""Brute-force oracles that verify the closed-form solver independently.

Nothing here reuses the regime map: the slot oracle enumerates a grid
over the feasible triangle, and the month oracle enumerates a dense
shadow-price grid (dual enumeration) plus, for very short months, the
joint decision grid.  Both therefore deliver independent lower bounds
that the closed-form solver must match.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .model import CostFamily, DataPlan, Decision, SlotRealization, UtilityFamily

_LAMBDA_STEP = 1e-3          # dual-grid resolution of the month oracle
_JOINT_LIMIT = 4_000_000     # max joint-grid cells before falling back to dual only


def _triangle_grid(slot: SlotRealization, u: UtilityFamily, e: CostFamily,
                   grid_n: int):
    """Feasible (x, z) grid points with their payoff and usage values."""
    pts = np.linspace(0.0, 1.0, grid_n)
    x, z = np.meshgrid(pts, pts, indexing="ij")
    keep = z <= x
    x, z = x[keep], z[keep]
    payoff = (slot.theta * u.eval(x) - slot.beta * e.eval((x - z) * slot.c)
              - slot.price * z * slot.c)
    usage = slot.d * x + slot.r * z
    return x, z, payoff, usage


def brute_force_slot_oracle(slot: SlotRealization, lam: float,
                            u: UtilityFamily, e: CostFamily,
                            grid_n: int = 400) -> Decision:
    """Grid argmax of the per-slot Lagrangian over 0 <= z <= x <= 1."""
    if grid_n < 100:
        raise ValueError(f"slot oracle needs grid_n >= 100, got {grid_n}")
    x, z, payoff, usage = _triangle_grid(slot, u, e, grid_n)
    best = int(np.argmax(payoff - lam * usage))
    return Decision(float(x[best]), float(z[best]))


def _usage_payoff_frontier(usage, payoff):
    """Upper-concave frontier of the (usage, payoff) cloud.

    For every lam >= 0, max_i payoff_i - lam*usage_i is attained on this
    frontier, so the dual enumeration only has to scan its vertices.
    Returns (usage, payoff, point index) of the vertices, usage ascending.
    """
    order = np.lexsort((-payoff, usage))
    usage, payoff = usage[order], payoff[order]
    first = np.concatenate(([True], np.diff(usage) > 0.0))
    usage, payoff, order = usage[first], payoff[first], order[first]
    hull: list[int] = []
    for i in range(usage.size):
        while len(hull) >= 2:
            h1, h2 = hull[-2], hull[-1]
            # drop h2 if it falls below the chord h1 -> i
            if ((payoff[h2] - payoff[h1]) * (usage[i] - usage[h1])
                    <= (payoff[i] - payoff[h1]) * (usage[h2] - usage[h1])):
                hull.pop()
            else:
                break
        hull.append(i)
    idx = np.asarray(hull, dtype=int)
    # points dominated from the left (lower usage, higher payoff) are never
    # maximizers for lam >= 0
    keep = payoff[idx] > np.concatenate(([-np.inf], np.maximum.accumulate(payoff[idx])[:-1]))
    idx = idx[keep]
    return usage[idx], payoff[idx], order[idx]


def _frontier_argmax(usage, payoff, lams):
    """Index of the frontier vertex maximizing payoff - lam*usage per lam."""
    if usage.size == 1:
        return np.zeros(lams.size, dtype=int)
    slopes = np.diff(payoff) / np.diff(usage)   # decreasing along the frontier
    return np.searchsorted(-slopes, -lams, side="left")


def brute_force_month_oracle(slots: Sequence[SlotRealization], plan: DataPlan,
                             u: UtilityFamily, e: CostFamily,
                             grid_n: int = 400):
    """Independent month optimum for short months (T <= 5).

    Dual enumeration: for every shadow price on a fine grid of [0, pi],
    take each slot's grid argmax of the Lagrangian and score the
    resulting decision profile with the exact month payoff; the best
    profile over the whole grid is returned.  For T <= 2 a joint grid
    search runs as well and the better result wins.

    Returns (decisions, payoff).
    """
    t_len = len(slots)
    if t_len == 0 or t_len > 5:
        raise ValueError(f"month oracle handles 1 <= T <= 5 slots, got {t_len}")

    grids = [_triangle_grid(s, u, e, grid_n) for s in slots]
    n_lams = int(round(plan.pi / _LAMBDA_STEP)) + 1
    lams = np.linspace(0.0, plan.pi, n_lams)

    sel_payoff = np.empty((t_len, n_lams))
    sel_usage = np.empty((t_len, n_lams))
    sel_point = np.empty((t_len, n_lams), dtype=int)
    for t, (_, _, payoff, usage) in enumerate(grids):
        fr_usage, fr_payoff, fr_idx = _usage_payoff_frontier(usage, payoff)
        pick = _frontier_argmax(fr_usage, fr_payoff, lams)
        sel_payoff[t] = fr_payoff[pick]
        sel_usage[t] = fr_usage[pick]
        sel_point[t] = fr_idx[pick]

    month_usage = sel_usage.sum(axis=0)
    month_payoff = (sel_payoff.sum(axis=0)
                    - plan.pi * np.maximum(0.0, month_usage - plan.Q) - plan.Pi)
    best_lam = int(np.argmax(month_payoff))
    best_payoff = float(month_payoff[best_lam])
    decisions = tuple(
        Decision(float(grids[t][0][sel_point[t, best_lam]]),
                 float(grids[t][1][sel_point[t, best_lam]]))
        for t in range(t_len))

    joint = _joint_grid_optimum(slots, plan, grids, grid_n)
    if joint is not None and joint[1] > best_payoff:
        decisions, best_payoff = joint
    return decisions, best_payoff


def _joint_grid_optimum(slots, plan, grids, grid_n):
    """Exhaustive two-slot (or single-slot) grid search; None if too large."""
    t_len = len(slots)
    sizes = [g[0].size for g in grids]
    if t_len > 2 or float(np.prod(sizes)) > _JOINT_LIMIT:
        return None
    if t_len == 1:
        x, z, payoff, usage = grids[0]
        total = payoff - plan.pi * np.maximum(0.0, usage - plan.Q) - plan.Pi
        best = int(np.argmax(total))
        return (Decision(float(x[best]), float(z[best])),), float(total[best])
    (x0, z0, f0, h0), (x1, z1, f1, h1) = grids
    total = (f0[:, None] + f1[None, :]
             - plan.pi * np.maximum(0.0, h0[:, None] + h1[None, :] - plan.Q)
             - plan.Pi)
    i, j = np.unravel_index(int(np.argmax(total)), total.shape)
    decisions = (Decision(float(x0[i]), float(z0[i])),
                 Decision(float(x1[j]), float(z1[j])))
    return decisions, float(total[i, j])
