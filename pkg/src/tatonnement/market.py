"""Fisher market data model: buyer demand, excess demand and the convex potential.

Every good has unit supply. Buyers carry a budget and one of three utility
families (CES, Cobb-Douglas, Leontief). Demand, unit-spending utility and the
potential are evaluated in closed form, vectorised per utility family, with the
CES expressions kept in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "CES",
    "CobbDouglas",
    "Leontief",
    "Buyer",
    "MarketInstance",
    "PriceVector",
    "DemandProfile",
    "MarketError",
    "DomainError",
    "check_prices",
    "demand",
    "demand_matrix",
    "demand_profile",
    "excess_demand",
    "unit_utility",
    "potential",
    "potential_gradient",
    "hessian_cross",
    "cross_partials",
    "EnvelopeCheck",
    "demand_scaling_envelope",
]

# CES exponents below this are numerically indistinguishable from Leontief
# and are rejected; use the explicit Leontief kind instead.
MIN_RHO = -100.0
CD_SUM_TOL = 1e-12


class MarketError(ValueError):
    """Invalid market definition. ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class DomainError(ValueError):
    """Prices outside the open positive orthant."""


def _weights(values, path: str) -> tuple[float, ...]:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise MarketError("must be a non-empty vector", path)
    if not np.all(np.isfinite(arr)):
        raise MarketError("must be finite", path)
    if np.any(arr < 0):
        raise MarketError("entries must be non-negative", path)
    if not np.any(arr > 0):
        raise MarketError("at least one entry must be positive", path)
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class CES:
    """u(x) = (sum_j a_j x_j^rho)^(1/rho), rho < 1 and rho != 0."""

    rho: float
    a: tuple[float, ...]

    def __post_init__(self):
        rho = float(self.rho)
        if not math.isfinite(rho):
            raise MarketError("rho must be finite", "rho")
        if rho >= 1:
            raise MarketError("rho must be < 1", "rho")
        if rho == 0:
            raise MarketError("rho = 0 is Cobb-Douglas; use that kind", "rho")
        if rho < MIN_RHO:
            raise MarketError(f"rho must be >= {MIN_RHO}; use the Leontief kind", "rho")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "a", _weights(self.a, "a"))

    @property
    def theta(self) -> float:
        return self.rho / (self.rho - 1.0)


@dataclass(frozen=True)
class CobbDouglas:
    """u(x) = prod_j x_j^a_j with the exponents summing to one."""

    a: tuple[float, ...]

    def __post_init__(self):
        a = _weights(self.a, "a")
        if abs(math.fsum(a) - 1.0) > CD_SUM_TOL:
            raise MarketError("Cobb-Douglas exponents must sum to 1", "a")
        object.__setattr__(self, "a", a)

    rho = 0.0
    theta = 0.0


@dataclass(frozen=True)
class Leontief:
    """u(x) = min_j x_j / c_j over goods with c_j > 0."""

    c: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "c", _weights(self.c, "c"))

    rho = -math.inf
    theta = 1.0


UtilitySpec = Union[CES, CobbDouglas, Leontief]


def _support(u: UtilitySpec) -> tuple[float, ...]:
    return u.c if isinstance(u, Leontief) else u.a


@dataclass(frozen=True)
class Buyer:
    budget: float
    utility: UtilitySpec

    def __post_init__(self):
        e = float(self.budget)
        if not (math.isfinite(e) and e > 0):
            raise MarketError("budget must be a positive finite number", "budget")
        object.__setattr__(self, "budget", e)


@dataclass(frozen=True)
class PriceVector:
    p: np.ndarray
    time: float = 0.0


@dataclass(frozen=True)
class DemandProfile:
    x: np.ndarray  # (m, n)
    z: np.ndarray  # (n,)


class MarketInstance:
    """A Fisher market with ``n`` unit-supply goods and a list of buyers.

    Derived constants ``rho`` (largest buyer exponent, Leontief counts as
    ``-inf``), ``theta`` and ``E`` are attached on construction together with a
    ``market_class`` label in {complementary, substitute, mixed, leontief}.
    """

    def __init__(self, n_goods: int, buyers: Sequence[Buyer]):
        if int(n_goods) != n_goods or n_goods < 1:
            raise MarketError("must be a positive integer", "goods")
        self.n = int(n_goods)
        self.buyers = tuple(buyers)
        if not self.buyers:
            raise MarketError("at least one buyer is required", "buyers")
        wanted = np.zeros(self.n, dtype=bool)
        for i, b in enumerate(self.buyers):
            if not isinstance(b, Buyer):
                raise MarketError("expected a Buyer", f"buyers[{i}]")
            w = _support(b.utility)
            if len(w) != self.n:
                raise MarketError(
                    f"expected {self.n} entries, got {len(w)}", f"buyers[{i}].utility"
                )
            wanted |= np.asarray(w) > 0
        if not wanted.all():
            missing = [int(j) for j in np.flatnonzero(~wanted)]
            raise MarketError(f"goods {missing} are not desired by any buyer", "buyers")
        self._prepare()

    @property
    def m(self) -> int:
        return len(self.buyers)

    def _prepare(self):
        self.budgets = np.array([b.budget for b in self.buyers])
        self.thetas = np.array([b.utility.theta for b in self.buyers])
        rhos = [b.utility.rho for b in self.buyers]
        self.rho = max(rhos)
        if self.rho == -math.inf:
            self.theta = 1.0
            self.E = 1.0
        else:
            self.theta = max(self.rho / (1.0 - self.rho), 1.0)
            self.E = max(1.0 / (1.0 - self.rho), 1.0)
        if all(r == -math.inf for r in rhos):
            self.market_class = "leontief"
        elif self.rho <= 0:
            self.market_class = "complementary"
        elif min(rhos) >= 0:
            self.market_class = "substitute"
        else:
            self.market_class = "mixed"

        def group(kind):
            idx = np.array(
                [i for i, b in enumerate(self.buyers) if isinstance(b.utility, kind)],
                dtype=int,
            )
            w = np.array([_support(self.buyers[i].utility) for i in idx]).reshape(
                len(idx), self.n
            )
            return idx, w

        self._ces_idx, ces_a = group(CES)
        self._cd_idx, self._cd_a = group(CobbDouglas)
        self._leo_idx, self._leo_c = group(Leontief)
        rho = np.array([self.buyers[i].utility.rho for i in self._ces_idx])
        self._ces_rho = rho
        self._ces_s = 1.0 / (1.0 - rho)
        self._ces_th = rho / (rho - 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            self._ces_loga = np.log(ces_a)
            cd_loga = np.log(self._cd_a)
            # 0 * log 0 counts as 0
            self._cd_aloga = np.where(self._cd_a > 0, self._cd_a * cd_loga, 0.0)
        self._ces_sloga = self._ces_s[:, None] * self._ces_loga

    def __eq__(self, other):
        if not isinstance(other, MarketInstance):
            return NotImplemented
        return self.n == other.n and self.buyers == other.buyers

    def __hash__(self):
        return hash((self.n, self.buyers))

    def __repr__(self):
        return f"MarketInstance(n={self.n}, m={self.m}, class={self.market_class!r})"

    # -- vectorised kernels -------------------------------------------------

    def _ces_terms(self, logp):
        # T_ik = s_i log a_ik + theta_i log p_k ; lse_i = log sum_k exp(T_ik)
        T = self._ces_sloga + self._ces_th[:, None] * logp[None, :]
        return logsumexp(T, axis=1)

    def demand_matrix(self, p: np.ndarray) -> np.ndarray:
        """Demands x[i, j] for already validated prices ``p``."""
        X = np.empty((self.m, self.n))
        if self._ces_idx.size:
            logp = np.log(p)
            lse = self._ces_terms(logp)
            e = self.budgets[self._ces_idx]
            logx = (
                np.log(e)[:, None]
                + self._ces_sloga
                - self._ces_s[:, None] * logp[None, :]
                - lse[:, None]
            )
            X[self._ces_idx] = np.exp(logx)
        if self._cd_idx.size:
            X[self._cd_idx] = self._cd_a * self.budgets[self._cd_idx, None] / p[None, :]
        if self._leo_idx.size:
            cp = self._leo_c @ p
            X[self._leo_idx] = self._leo_c * (self.budgets[self._leo_idx] / cp)[:, None]
        return X

    def log_unit_utilities(self, p: np.ndarray) -> np.ndarray:
        out = np.empty(self.m)
        if self._ces_idx.size:
            lse = self._ces_terms(np.log(p))
            out[self._ces_idx] = (1.0 - self._ces_rho) / self._ces_rho * lse
        if self._cd_idx.size:
            out[self._cd_idx] = self._cd_aloga.sum(axis=1) - self._cd_a @ np.log(p)
        if self._leo_idx.size:
            out[self._leo_idx] = -np.log(self._leo_c @ p)
        return out

    def excess(self, p: np.ndarray) -> np.ndarray:
        return self.demand_matrix(p).sum(axis=0) - 1.0

    def phi(self, p: np.ndarray) -> float:
        return float(math.fsum(p) + self.budgets @ self.log_unit_utilities(p))


def check_prices(p, n: int | None = None) -> np.ndarray:
    """Return ``p`` as a 1-D float array, raising DomainError unless strictly positive."""
    if isinstance(p, PriceVector):
        p = p.p
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"prices must be a vector, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise DomainError(f"expected {n} prices, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"prices must be finite and strictly positive: {arr}")
    return arr


def demand(market: MarketInstance, buyer_index: int, p) -> np.ndarray:
    p = check_prices(p, market.n)
    return market.demand_matrix(p)[buyer_index]


def demand_matrix(market: MarketInstance, p) -> np.ndarray:
    return market.demand_matrix(check_prices(p, market.n))


def demand_profile(market: MarketInstance, p) -> DemandProfile:
    X = demand_matrix(market, p)
    return DemandProfile(x=X, z=X.sum(axis=0) - 1.0)


def excess_demand(market: MarketInstance, p) -> np.ndarray:
    return market.excess(check_prices(p, market.n))


def unit_utility(market: MarketInstance, buyer_index: int, p) -> float:
    """Best utility buyer ``buyer_index`` attains with one unit of money."""
    p = check_prices(p, market.n)
    return float(np.exp(market.log_unit_utilities(p)[buyer_index]))


def potential(market: MarketInstance, p) -> float:
    """sum_k p_k + sum_i e_i log u_i(p), with u_i the unit-spending utility."""
    return market.phi(check_prices(p, market.n))


def potential_gradient(market: MarketInstance, p) -> np.ndarray:
    return -excess_demand(market, p)


def cross_partials(market: MarketInstance, p) -> np.ndarray:
    """Matrix of d2 phi / dp_j dp_k = sum_i theta_i x_ij x_ik / e_i (diagonal zeroed)."""
    X = demand_matrix(market, p)
    H = (X.T * (market.thetas / market.budgets)) @ X
    np.fill_diagonal(H, 0.0)
    return H


def hessian_cross(market: MarketInstance, p, j: int, k: int) -> float:
    if j == k:
        raise ValueError("hessian_cross is defined for j != k only")
    X = demand_matrix(market, p)
    w = market.thetas / market.budgets
    return float(np.sum(w * X[:, j] * X[:, k]))


@dataclass(frozen=True)
class EnvelopeCheck:
    ratios: np.ndarray
    lower: float
    upper: float
    passed: bool


def demand_scaling_envelope(market: MarketInstance, p, p_prime, rtol: float = 1e-12) -> EnvelopeCheck:
    """Check aggregate demand ratios x(p')/x(p) against the price-scaling envelope.

    Complementary and Leontief markets use [1/r2, 1/r1] with r1, r2 the min and
    max price ratios; otherwise [r^-(2E-1), r^(2E-1)] with r = max(r2, 1/r1).
    """
    p = check_prices(p, market.n)
    q = check_prices(p_prime, market.n)
    x = market.demand_matrix(p).sum(axis=0)
    xq = market.demand_matrix(q).sum(axis=0)
    if np.any(x <= 0) or np.any(xq <= 0):
        raise ValueError("aggregate demand vanished for some good")
    ratio = q / p
    r1, r2 = float(ratio.min()), float(ratio.max())
    if market.market_class in ("complementary", "leontief"):
        lower, upper = 1.0 / r2, 1.0 / r1
    else:
        r = max(r2, 1.0 / r1)
        k = 2.0 * market.E - 1.0
        lower, upper = r ** (-k), r**k
    dr = xq / x
    ok = bool(np.all(dr >= lower * (1 - rtol)) and np.all(dr <= upper * (1 + rtol)))
    return EnvelopeCheck(ratios=dr, lower=lower, upper=upper, passed=ok)
