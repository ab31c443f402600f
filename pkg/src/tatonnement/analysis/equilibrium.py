from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dynamics import max_safe_lambda, sync_step
from ..market import MarketInstance, check_prices


@dataclass(frozen=True)
class EquilibriumCertificate:
    p_star: np.ndarray
    residual: float
    method: str
    iterations: int
    tolerance: float
    phi_min: float  # smallest potential seen along the way

    @property
    def valid(self) -> bool:
        return self.residual <= self.tolerance


def equilibrium_residual(market: MarketInstance, p, tol_p=0.0, pseudo: bool = False) -> float:
    """Distance from equilibrium conditions at ``p``.

    Goods priced above ``tol_p`` must clear exactly (|z_j|); goods at or below
    it only need weak over-supply (max(z_j, 0)). With ``pseudo`` the
    effectively-free goods are ignored altogether.
    """
    p = check_prices(p, market.n)
    z = market.excess(p)
    priced = p > np.broadcast_to(tol_p, p.shape)
    if pseudo:
        vals = np.abs(z[priced])
    else:
        vals = np.where(priced, np.abs(z), np.maximum(z, 0.0))
    return float(vals.max()) if vals.size else 0.0


def default_start(market: MarketInstance) -> np.ndarray:
    return np.full(market.n, market.budgets.sum() / market.n)


def reference_equilibrium(market: MarketInstance, tol: float = 1e-10, p0=None,
                          max_iter: int = 10**6, lam: float | None = None) -> EquilibriumCertificate:
    """Synchronous tatonnement at a quarter of the safe step until the residual drops below ``tol``.

    Leontief markets may have a whole set of equilibria; the certificate then
    vouches for the residual only.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    p = default_start(market) if p0 is None else check_prices(p0, market.n).copy()
    tol_p = 1e-6 * p
    if lam is None:
        lam = max_safe_lambda(market.market_class, market.E) / 4.0
    phi_min = market.phi(p)
    best_p, best_r = p.copy(), equilibrium_residual(market, p, tol_p)
    it = 0
    while best_r > tol and it < max_iter:
        z = market.excess(p)
        p = sync_step(p, z, lam)
        it += 1
        r = equilibrium_residual(market, p, tol_p)
        phi_min = min(phi_min, market.phi(p))
        if r <= best_r:
            best_p, best_r = p.copy(), r
    method = "sync_tatonnement" if best_r <= tol else "unconverged"
    return EquilibriumCertificate(best_p, best_r, method, it, tol, phi_min)


def reference_phi_star(market: MarketInstance, p0=None, tol: float = 1e-11,
                       refine_iter: int = 10**5) -> float:
    """Best available lower estimate of min phi.

    Strictly convex markets use phi at the certified equilibrium. For Leontief
    markets the minimum along the reference run is refined by a fine-step
    synchronous pass at 1/16 of the reference step.
    """
    cert = reference_equilibrium(market, tol=tol, p0=p0)
    if market.market_class != "leontief":
        return min(cert.phi_min, market.phi(cert.p_star))
    lam = max_safe_lambda("leontief") / 4.0 / 16.0
    p = cert.p_star.copy()
    best = cert.phi_min
    for _ in range(refine_iter):
        z = market.excess(p)
        if np.max(np.abs(z)) < 1e-14:
            break
        p = sync_step(p, z, lam)
        best = min(best, market.phi(p))
    return best
