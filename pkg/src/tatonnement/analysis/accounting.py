"""Per-update progress accounting over a simulation trace.

The amortisation bank stores part of each update's progress for the following
time unit; adding it to the potential gives a quantity that never increases.
All checkers here are reporters: they return InequalityReport lists and never
raise on a failed inequality.
"""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np

from ..dynamics import analysis_constants
from ..scheduler import SimulationTrace, UpdateEvent
from .lipschitz import lipschitz_matrix
from .reports import InequalityReport


class TraceView:
    """Array view of a trace with the per-event quantities the checkers share."""

    def __init__(self, trace: SimulationTrace, lam: float | None = None):
        if not trace.events:
            raise ValueError("trace has no events")
        self.trace = trace
        self.market = trace.market
        self.lam = trace.lam if lam is None else lam
        self.c1 = analysis_constants(self.lam)[0]
        ev = trace.events
        self.N = len(ev)
        self.t = np.array([e.t for e in ev])
        self.good = np.array([e.good for e in ev], dtype=int)
        self.dt = np.array([e.dt for e in ev])
        self.gamma = np.array([e.gamma for e in ev])
        self.z_tilde = np.array([e.z_tilde for e in ev])
        self.z_acc = np.array([e.z_accurate for e in ev])
        self.p_before = np.array([e.p_before for e in ev])
        self.p_after = np.array([e.p_after for e in ev])
        self.dp = self.p_after - self.p_before
        self.P = trace.price_states()
        self.phi = trace.phi_states()
        prev = np.full(self.N, -1, dtype=int)
        last = {}
        for i, j in enumerate(self.good):
            prev[i] = last.get(j, -1)
            last[j] = i
        self.prev = prev

    @cached_property
    def L(self) -> np.ndarray:
        """L[i] is the pairwise Lipschitz bound matrix at the prices before event i."""
        return np.stack([lipschitz_matrix(self.market, self.P[i], self.lam) for i in range(self.N)])

    @cached_property
    def bank_weights(self) -> np.ndarray:
        """W[v, k] = L_{k_v,k} p_k / p_{k_v} (dp_v)^2 / dt_v for k != k_v."""
        W = np.empty((self.N, self.market.n))
        for v in range(self.N):
            j = self.good[v]
            W[v] = self.L[v, j] * self.P[v + 1] / self.P[v, j] * (self.dp[v] ** 2 / self.dt[v])
            W[v, j] = 0.0
        return W

    @cached_property
    def bank(self) -> np.ndarray:
        """A after each event (the instant of event i, counting events 0..i)."""
        n = self.market.n
        W = self.bank_weights
        A = np.empty(self.N)
        last = np.full(n, -1, dtype=int)
        start = 0
        for i in range(self.N):
            last[self.good[i]] = i
            while self.t[start] <= self.t[i] - 1.0:
                start += 1
            idx = np.arange(start, i + 1)
            fresh = last[None, :] <= idx[:, None]
            A[i] = self.c1 * float(np.sum((1.0 + fresh) * W[start : i + 1]))
        return A

    @cached_property
    def Phi(self) -> np.ndarray:
        """Phi[s] = phi + A after the first s events; Phi[0] is the initial potential."""
        return np.concatenate([[self.phi[0]], self.phi[1:] + self.bank])


def _view(trace, view):
    return view if view is not None else TraceView(trace)


def descent_margin(trace: SimulationTrace, index: int, view: TraceView | None = None) -> InequalityReport:
    """phi drop across one update versus (gamma/4) dp^2/dt - (z - z_tilde)^2 dt / gamma."""
    v = _view(trace, view)
    i = index
    g, dt = v.gamma[i], v.dt[i]
    lhs = v.phi[i] - v.phi[i + 1]
    rhs = g / 4.0 * v.dp[i] ** 2 / dt - (v.z_acc[i] - v.z_tilde[i]) ** 2 * dt / g
    return InequalityReport(i, float(lhs), float(rhs), "descent")


def descent_reports(trace, view=None):
    v = _view(trace, view)
    return [descent_margin(trace, i, v) for i in range(v.N)]


def amortization_bank(trace: SimulationTrace, t: float, c1: float | None = None) -> float:
    """Bank value at time ``t``: progress of updates in (t-1, t] held in reserve.

    Each update contributes, for every other good k, its bound-weighted squared
    move, doubled while k has not been updated since.
    """
    if t <= 0:
        return 0.0
    v = TraceView(trace)
    c1 = v.c1 if c1 is None else c1
    upto = int(np.searchsorted(v.t, t, side="right"))
    total = []
    for nu in range(upto):
        if not v.t[nu] > t - 1.0:
            continue
        j = v.good[nu]
        for k in range(v.market.n):
            if k == j:
                continue
            later = np.any(v.good[nu + 1 : upto] == k)
            total.append((1.0 if later else 2.0) * v.bank_weights[nu, k])
    return c1 * math.fsum(total)


def phi_with_bank_monotone(trace: SimulationTrace, view: TraceView | None = None) -> list[InequalityReport]:
    """Phi before each update versus Phi after it; Phi = phi + bank must not rise."""
    v = _view(trace, view)
    return [
        InequalityReport(i, float(v.Phi[i]), float(v.Phi[i + 1]), "phi_monotone",
                         1e-9 * (1.0 + abs(v.Phi[i])))
        for i in range(v.N)
    ]


def gamma_requirement_check(trace: SimulationTrace, index: int, c1: float | None = None,
                            view: TraceView | None = None) -> tuple[InequalityReport, InequalityReport]:
    """Both step-scale requirements for event ``index`` with bound-instantiated L values.

    First: gamma >= 21 c1 sum_{k != j} L_jk p_k / p_j.
    Second: gamma >= (2 / c1) sum over updates v since good j last moved of
    L_{k_v, j} dt_v p_{k_v} / p_j, with L taken at the prices before this update.
    """
    v = _view(trace, view)
    c1 = v.c1 if c1 is None else c1
    i = index
    j = v.good[i]
    pj = v.P[i, j]
    L = v.L[i]
    mask = np.arange(v.market.n) != j
    rhs1 = 21.0 * c1 * float(np.sum(L[j, mask] * v.P[i + 1, mask])) / pj
    terms = [L[v.good[nu], j] * v.dt[nu] * v.P[nu, v.good[nu]] for nu in range(v.prev[i] + 1, i)]
    rhs2 = 2.0 / c1 * math.fsum(terms) / pj
    g = float(v.gamma[i])
    return (
        InequalityReport(i, g, rhs1, "gamma_requirement_1"),
        InequalityReport(i, g, rhs2, "gamma_requirement_2"),
    )


def gamma_requirement_reports(trace, view=None):
    v = _view(trace, view)
    out = []
    for i in range(v.N):
        out.extend(gamma_requirement_check(trace, i, view=v))
    return out


def shift_margin(event: UpdateEvent, hypothetical_z_tilde: float) -> InequalityReport:
    """Progress with the used z_tilde versus half the progress of an alternative."""
    g, dt = event.gamma, event.dt
    dp = event.z_tilde * dt / g
    dp_alt = hypothetical_z_tilde * dt / g
    lhs = g * dp**2 / dt
    rhs = g / 2.0 * dp_alt**2 / dt - (event.z_tilde - hypothetical_z_tilde) ** 2 * dt / g
    return InequalityReport(-1, lhs, rhs, "shift")


def shift_reports(trace, view=None):
    """Shift check against the accurate excess demand for every event."""
    out = []
    for i, e in enumerate(trace.events):
        r = shift_margin(e, e.z_accurate)
        out.append(InequalityReport(i, r.lhs, r.rhs, "shift"))
    return out


def single_update_progress(trace: SimulationTrace, view: TraceView | None = None) -> list[InequalityReport]:
    """Phi at the good's previous update minus Phi now, versus (gamma/8) dp^2/dt."""
    v = _view(trace, view)
    out = []
    for i in range(v.N):
        before = v.Phi[v.prev[i] + 1]
        lhs = before - v.Phi[i + 1]
        rhs = v.gamma[i] / 8.0 * v.dp[i] ** 2 / v.dt[i]
        out.append(InequalityReport(i, float(lhs), float(rhs), "single_update_progress",
                                    1e-9 * (1.0 + abs(before))))
    return out


def leontief_drop_check(trace: SimulationTrace, lam: float | None = None, U: float | None = None,
                        eps_min: float = 1e-4, view: TraceView | None = None) -> list[InequalityReport]:
    """Potential drop over runs of one good's updates spanning at most two time units.

    For each update of good j, the window extends to the last later update of j
    within two time units. A net price move of eps forces Phi to fall by at
    least min(eps, 1)^2 min(1/16, 1/(64 lam U)).
    """
    v = _view(trace, view)
    lam = v.lam if lam is None else lam
    U = float(v.P.max()) if U is None else U
    coef = min(1.0 / 16.0, 1.0 / (64.0 * lam * U))
    out = []
    for j in range(v.market.n):
        idx = np.flatnonzero(v.good == j)
        for a, i0 in enumerate(idx):
            b = int(np.searchsorted(v.t[idx], v.t[i0] + 2.0, side="right")) - 1
            if b <= a:
                continue
            im = idx[b]
            eps = abs(v.P[im + 1, j] - v.P[i0 + 1, j])
            if eps < eps_min:
                continue
            lhs = float(v.Phi[i0 + 1] - v.Phi[im + 1])
            rhs = min(eps, 1.0) ** 2 * coef
            out.append(InequalityReport(int(im), lhs, float(rhs), "window_drop", 1e-9))
    return out
