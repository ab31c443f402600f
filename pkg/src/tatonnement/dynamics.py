"""Price update rules and the step-size constants that make them provably safe."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GammaRecord",
    "StepParams",
    "sync_step",
    "async_step",
    "additive_step",
    "max_safe_lambda",
    "safety_condition",
    "analysis_constants",
    "descent_lambda_bound",
]

COMPLEMENTARY_LAMBDA = 1.0 / 25.5


@dataclass(frozen=True)
class GammaRecord:
    """Inverse step scale of one update: max(1, z_tilde) / (lambda * p_before)."""

    gamma: float
    z_tilde: float
    p_before: float
    dt: float


@dataclass(frozen=True)
class StepParams:
    lam: float
    market_class: str
    E: float = 1.0
    strict: bool = True

    def __post_init__(self):
        if not (self.lam > 0):
            raise ValueError("lambda must be positive")
        if self.strict:
            bound = max_safe_lambda(self.market_class, self.E)
            if self.lam > bound:
                raise ValueError(
                    f"lambda={self.lam} exceeds the safe bound {bound} for a "
                    f"{self.market_class} market; use exploratory mode"
                )


def _check_lambda(lam):
    if not (0 < lam < 1):
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")


def sync_step(p, z, lam: float) -> np.ndarray:
    """Simultaneous multiplicative update p_j * (1 + lam * min(z_j, 1))."""
    _check_lambda(lam)
    p = np.asarray(p, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(z < -1):
        raise ValueError("excess demand below -1 is impossible")
    return p * (1.0 + lam * np.minimum(z, 1.0))


def async_step(p_before: float, z_tilde: float, lam: float, dt: float) -> tuple[float, GammaRecord]:
    """Update one price after ``dt`` time units using the observed excess demand."""
    _check_lambda(lam)
    if not dt > 0:
        raise ValueError(f"dt must be positive (event ordering), got {dt}")
    if dt > 1:
        raise ValueError(f"dt must be at most 1 time unit, got {dt}")
    if not p_before > 0:
        raise ValueError("price must be positive")
    if z_tilde < -1:
        raise ValueError("excess demand below -1 is impossible")
    p_after = p_before * (1.0 + lam * min(z_tilde, 1.0) * dt)
    gamma = max(1.0, z_tilde) / (lam * p_before)
    return p_after, GammaRecord(gamma=gamma, z_tilde=z_tilde, p_before=p_before, dt=dt)


def additive_step(record: GammaRecord) -> float:
    """The same update written as p + z_tilde * dt / gamma."""
    return record.p_before + record.z_tilde * record.dt / record.gamma


def max_safe_lambda(market_class: str, E: float = 1.0) -> float:
    """Largest step constant covered by the convergence guarantees.

    1/25.5 for complementary and Leontief markets, 1/(26 E) otherwise.
    """
    if E < 1:
        raise ValueError(f"E must be >= 1, got {E}")
    if market_class in ("complementary", "leontief"):
        return COMPLEMENTARY_LAMBDA
    if market_class in ("substitute", "mixed"):
        return 1.0 / (26.0 * E)
    raise ValueError(f"unknown market class {market_class!r}")


def safety_condition(lam: float, theta: float = 1.0, E: float = 1.0) -> float:
    """Value of 4 sqrt(21) lam theta exp(8 E lam (lam + 1)); safe when <= 1."""
    return 4.0 * math.sqrt(21.0) * lam * theta * math.exp(8.0 * E * lam * (lam + 1.0))


def descent_lambda_bound(E: float = 1.0) -> float:
    """Step bound under which the single-update descent inequality holds."""
    return 1.0 / (10.0 * E)


def analysis_constants(lam: float) -> tuple[float, float, float]:
    """Amortisation constants (c1, c2, c3) for step constant ``lam``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    c1 = 2.0 / math.sqrt(21.0) * math.exp(2.0 * lam * (lam + 1.0))
    return c1, 0.25, 21.0 * c1 / 8.0
