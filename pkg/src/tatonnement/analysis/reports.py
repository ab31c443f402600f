from __future__ import annotations

from dataclasses import dataclass


def default_tolerance(lhs: float, rhs: float) -> float:
    return 1e-9 * (1.0 + abs(lhs) + abs(rhs))


@dataclass(frozen=True)
class InequalityReport:
    """Outcome of checking ``lhs >= rhs`` at one event."""

    event_index: int
    lhs: float
    rhs: float
    checker: str = ""
    tolerance: float | None = None

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs

    @property
    def tol(self) -> float:
        return default_tolerance(self.lhs, self.rhs) if self.tolerance is None else self.tolerance

    @property
    def passed(self) -> bool:
        return self.margin >= -self.tol


def all_passed(reports) -> bool:
    return all(r.passed for r in reports)


def worst(reports) -> InequalityReport | None:
    """Report with the most negative margin relative to its tolerance."""
    return min(reports, key=lambda r: r.margin / r.tol, default=None)
