from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..scheduler import SimulationTrace

# gaps below this multiple of machine epsilon (scaled by |phi*|) are rounding noise
NOISE_ULPS = 1000.0


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    n_points: int


def fit_log_gap(times, gaps, tail: float = 0.8, floor: float = 0.0) -> RateFit:
    """Least squares of log(gap) on time over the last ``tail`` fraction of points.

    Points from the first gap at or below ``floor`` onward are dropped.
    """
    times = np.asarray(times, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    bad = np.flatnonzero(gaps <= floor)
    cut = bad[0] if bad.size else gaps.size
    times, gaps = times[:cut], gaps[:cut]
    keep = int(np.floor(tail * gaps.size + 1e-9))
    times, y = times[gaps.size - keep :], np.log(gaps[gaps.size - keep :])
    if y.size < 2:
        raise ValueError("need at least two positive gaps to fit a rate")
    slope, intercept = np.polyfit(times, y, 1)
    resid = y - (slope * times + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return RateFit(float(slope), float(intercept), r2, int(y.size))


def convergence_fit(trace: SimulationTrace, phi_star: float, tail: float = 0.8) -> RateFit:
    """Exponential rate of phi(p^t) - phi* along the trace; negative slope means convergence."""
    gaps = np.asarray(trace.phi) - phi_star
    floor = NOISE_ULPS * np.finfo(float).eps * (1.0 + abs(phi_star))
    return fit_log_gap(trace.times(), gaps, tail=tail, floor=floor)
