"""Exponential-weights dynamic pricing for the edge provider.

The provider quotes each user, each slot, one of K geometrically spaced
price candidates.  Candidates are drawn from a mixture of an
exploitation term (weights grown multiplicatively by past revenue) and a
geometric exploration term that leans towards higher prices.  Weight
updates use importance-weighted "virtual" revenues, which are provably
at most 1 per slot, so log-space weights stay bounded by T*ln(1+delta).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True, eq=False)
class PriceGrid:
    """Geometric price candidates p(k) = p_min*(1+epsilon)^k, k = 1..K.

    K = floor(log_{1+eps}(E_bar/p_min)), so every candidate sits in
    (p_min, E_bar].  ``candidates[i]`` holds p(i+1).
    """

    p_min: float
    epsilon: float
    E_bar: float
    candidates: np.ndarray

    @property
    def K(self) -> int:
        return self.candidates.size

    @property
    def geometric_weights(self) -> np.ndarray:
        """(1+eps)^k for k = 1..K, the exploration profile."""
        return (1.0 + self.epsilon) ** np.arange(1, self.K + 1)


def build_grid(p_min: float, epsilon: float, E_bar: float) -> PriceGrid:
    """Candidate grid between the market floor price and the price cap."""
    if p_min <= 0.0 or epsilon <= 0.0:
        raise ValueError("need p_min > 0 and epsilon > 0")
    if not p_min < E_bar:
        raise ValueError(f"need p_min < E_bar, got {p_min} >= {E_bar}")
    k = math.floor(math.log(E_bar / p_min) / math.log1p(epsilon) + 1e-9)
    while k >= 1 and p_min * (1.0 + epsilon) ** k > E_bar * (1.0 + 1e-9):
        k -= 1
    if k < 1:
        raise ValueError(
            f"no candidate fits: E_bar={E_bar} is below p_min*(1+eps)={p_min * (1 + epsilon)}")
    candidates = p_min * (1.0 + epsilon) ** np.arange(1, k + 1)
    return PriceGrid(p_min, epsilon, E_bar, candidates)


@dataclass(frozen=True, eq=False)
class PolicyState:
    """One slot's worth of pricing state: the grid, log-space candidate
    weights, the exploration/learning parameters and running revenue.

    ``max_virtual_revenue`` and ``min_floor_margin`` are diagnostics: the
    largest importance-weighted revenue ever credited (provably <= 1) and
    the smallest slack of the selection probabilities over their
    exploration floor (provably >= 0).
    """

    grid: PriceGrid
    log_weights: np.ndarray
    gamma: float
    delta: float
    cumulative_revenue: float = 0.0
    max_virtual_revenue: float = 0.0
    min_floor_margin: float = math.inf


def init_policy(grid: PriceGrid, gamma: float, delta: float) -> PolicyState:
    if not 0.0 < gamma < 1.0 or not 0.0 < delta < 1.0:
        raise ValueError("gamma and delta must lie in (0, 1)")
    return PolicyState(grid, np.zeros(grid.K), gamma, delta)


def selection_distribution(state: PolicyState) -> np.ndarray:
    """Mixture of weight-proportional exploitation and geometric exploration.

    Every entry is at least gamma*(1+eps)^k / sum_i (1+eps)^i, the
    exploration floor that caps the importance weights.
    """
    w = np.exp(state.log_weights - state.log_weights.max())
    geo = state.grid.geometric_weights
    h = (1.0 - state.gamma) * w / w.sum() + state.gamma * geo / geo.sum()
    total = float(h.sum())
    if abs(total - 1.0) > 1e-12:
        raise AssertionError(f"selection probabilities sum to {total}")
    return h


def draw_prices(state: PolicyState, n_users: int,
                rng_seed: int | np.random.Generator) -> np.ndarray:
    """i.i.d. candidate indices (0-based into ``grid.candidates``) for all
    users this slot; deterministic for a fixed seed."""
    rng = (rng_seed if isinstance(rng_seed, np.random.Generator)
           else np.random.default_rng(rng_seed))
    return rng.choice(state.grid.K, size=n_users, p=selection_distribution(state))


def settle_slot(state: PolicyState, kappas: np.ndarray, revenues: np.ndarray,
                n_users: int, c_bar: float) -> PolicyState:
    """Credit one slot's payments and grow the candidate weights.

    Per candidate k, the realized revenue is the sum of payments from
    users quoted k; the virtual revenue rescales it by the selection
    probability (importance weighting) and by the per-slot revenue scale
    N*c_bar*p_min.  The virtual revenue can never exceed 1 - that is the
    invariant making the multiplicative update safe - so a larger value
    raises immediately.
    """
    kappas = np.asarray(kappas)
    revenues = np.asarray(revenues, dtype=float)
    if revenues.size and float(revenues.min()) < 0.0:
        raise ValueError("negative revenue entry")
    h = selection_distribution(state)
    geo = state.grid.geometric_weights
    floor = state.gamma * geo / geo.sum()
    realized = np.bincount(kappas, weights=revenues, minlength=state.grid.K)
    virtual = (realized / (n_users * c_bar * state.grid.p_min)
               * state.gamma / (h * geo.sum()))
    if float(virtual.max()) > 1.0 + 1e-9:
        raise AssertionError(
            f"virtual candidate revenue {virtual.max():.6f} exceeded 1")
    return replace(
        state,
        log_weights=state.log_weights + virtual * math.log1p(state.delta),
        cumulative_revenue=state.cumulative_revenue + float(revenues.sum()),
        max_virtual_revenue=max(state.max_virtual_revenue, float(virtual.max())),
        min_floor_margin=min(state.min_floor_margin, float((h - floor).min())),
    )


def phi_loss(epsilon: float, delta: float, gamma: float, n_users: int,
             E_bar: float, c_bar: float, p_min: float) -> float:
    """Constant revenue-loss term of the policy's guarantee.

    (1-gamma)/gamma * (1+eps)/eps * N*E_bar*c_bar/delta * ln(ln(E_bar/p_min)/ln(1+eps)).
    Strictly decreasing in gamma, delta and (over the admissible range)
    epsilon; linear in the population size.
    """
    if not 0.0 < gamma < 1.0 or not 0.0 < delta < 1.0 or epsilon <= 0.0:
        raise ValueError("need epsilon > 0 and gamma, delta in (0, 1)")
    if p_min <= 0.0 or E_bar <= p_min:
        raise ValueError("need 0 < p_min < E_bar")
    ratio = math.log(E_bar / p_min) / math.log1p(epsilon)
    if ratio <= 1.0:
        raise ValueError(
            f"price range too narrow for the loss constant: log ratio {ratio:.4f} <= 1")
    return ((1.0 - gamma) / gamma * (1.0 + epsilon) / epsilon
            * n_users * E_bar * c_bar / delta * math.log(ratio))


def corollary_parameters(alpha: float) -> tuple[float, float, float]:
    """(epsilon, delta, gamma) = (alpha/3, alpha/6, alpha/12).

    With these parameters the policy earns at least a 1/(1+alpha)
    fraction of the best fixed-price revenue in hindsight, provided that
    revenue is at least (8/alpha) * phi_loss(alpha/3, alpha/6, alpha/12).
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    return alpha / 3.0, alpha / 6.0, alpha / 12.0


def sweep_prices(grid: PriceGrid, refinement: int = 20) -> np.ndarray:
    """Price points for the hindsight benchmark sweep.

    All candidates, plus ``refinement`` uniform sub-points inside every
    gap between consecutive candidates, plus the end segments
    [p_min, p(1)] and [p(K), E_bar], so the sweep covers the whole
    admissible range and the candidates are an exact subset.
    """
    if refinement < 0:
        raise ValueError("refinement must be non-negative")
    anchors = np.concatenate(([grid.p_min], grid.candidates, [grid.E_bar]))
    anchors = np.unique(anchors)
    points = [anchors]
    for lo, hi in zip(anchors[:-1], anchors[1:]):
        if refinement and hi > lo:
            points.append(np.linspace(lo, hi, refinement + 2)[1:-1])
    return np.unique(np.concatenate(points))


def candidate_mask(grid: PriceGrid, prices: np.ndarray) -> np.ndarray:
    """Boolean mask marking which sweep prices are grid candidates."""
    return np.isin(prices, grid.candidates)
