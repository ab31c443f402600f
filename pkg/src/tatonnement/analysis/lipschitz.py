"""Upper bounds on the local cross-Lipschitz constants of the potential.

Within one time unit of an update, every price stays within a factor
exp(+-lam') of its value, lam' = 2 lam (lam + 1). Demands then move by at most
exp(lam' (2E - 1)), and each cross-partial is bounded by
theta * sum_i x_ij x_ik / e_i. Combining both gives pairwise bounds evaluated
at a single reference price vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..market import MarketInstance, check_prices


def price_drift(lam: float) -> float:
    """lam' = 2 lam (lam + 1), the log-range of any price over two time units."""
    return 2.0 * lam * (lam + 1.0)


def demand_inflation(market: MarketInstance, lam: float) -> float:
    """Worst-case growth factor of a cross-partial over the reachable price box."""
    return math.exp(2.0 * price_drift(lam) * (2.0 * market.E - 1.0))


def lipschitz_matrix(market: MarketInstance, p_ref, lam: float) -> np.ndarray:
    """L[j, k] bounding |d2 phi / dp_j dp_k| near ``p_ref``; zero diagonal."""
    p = check_prices(p_ref, market.n)
    X = market.demand_matrix(p)
    L = (X.T / market.budgets) @ X
    L *= market.theta * demand_inflation(market, lam)
    np.fill_diagonal(L, 0.0)
    return L


@dataclass(frozen=True)
class LipschitzBound:
    sum_out: float  # bound on sum_{k != j} L_jk p_k / p_j
    sum_in: float  # bound on the staleness-window sum feeding good j
    raw_sum: float  # sum_{k != j} |d2 phi / dp_j dp_k| p_k / p_j at p_ref
    raw_bound: float  # theta x_j / p_j, what raw_sum may not exceed

    @property
    def raw_ok(self) -> bool:
        return self.raw_sum <= self.raw_bound * (1 + 1e-12)


def pairwise_lipschitz_bound(market: MarketInstance, p_ref, j: int, lam: float) -> LipschitzBound:
    p = check_prices(p_ref, market.n)
    X = market.demand_matrix(p)
    xj = float(X[:, j].sum())
    E, theta = market.E, market.theta
    ll = lam * (lam + 1.0)
    sum_out = theta * math.exp((8.0 * E - 4.0) * ll) * xj / p[j]
    sum_in = 2.0 * theta * math.exp(8.0 * E * ll) * xj / p[j]
    H = np.abs((X.T * (market.thetas / market.budgets)) @ X)
    mask = np.arange(market.n) != j
    raw = float(np.sum(H[j, mask] * p[mask]) / p[j])
    return LipschitzBound(sum_out=sum_out, sum_in=sum_in, raw_sum=raw, raw_bound=theta * xj / p[j])
