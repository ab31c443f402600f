"""Turns checker reports into a verdict.

The checkers never raise; this is the one place that decides whether a run
passed. Strict mode means the trace's step size is within the safe bound.
"""

from __future__ import annotations

from collections import defaultdict

from ..dynamics import max_safe_lambda
from ..scheduler import SimulationTrace
from .accounting import (
    TraceView,
    gamma_requirement_reports,
    leontief_drop_check,
    descent_reports,
    shift_reports,
    phi_with_bank_monotone,
    single_update_progress,
)
from .reports import InequalityReport, worst


def is_strict(trace: SimulationTrace) -> bool:
    m = trace.market
    # lambda read back from a CSV trace is only known to rounding
    return trace.lam <= max_safe_lambda(m.market_class, m.E) * (1 + 1e-9)


def run_checks(trace: SimulationTrace, eps_min: float = 1e-4) -> list[InequalityReport]:
    """Every per-event reporter applicable to the trace's market, in a fixed order."""
    if not trace.events:
        return []
    v = TraceView(trace)
    reports = []
    reports += descent_reports(trace, v)
    reports += phi_with_bank_monotone(trace, v)
    reports += gamma_requirement_reports(trace, v)
    reports += shift_reports(trace, v)
    if trace.market.market_class == "leontief":
        reports += single_update_progress(trace, v)
        reports += leontief_drop_check(trace, eps_min=eps_min, view=v)
    return reports


def summarize(reports: list[InequalityReport]) -> dict:
    by = defaultdict(list)
    for r in reports:
        by[r.checker].append(r)
    out = {}
    for name, rs in by.items():
        w = worst(rs)
        out[name] = {
            "count": len(rs),
            "failed": sum(not r.passed for r in rs),
            "worst_event": w.event_index,
            "worst_margin": w.margin,
        }
    return out


def verdict(trace: SimulationTrace, reports: list[InequalityReport]) -> bool:
    """True iff the run is strict and nothing failed. Non-strict runs never pass."""
    return is_strict(trace) and all(r.passed for r in reports)
