"""File formats: market and scenario JSON, trace and report CSV.

Market file (schema_version 1)::

    {"schema_version": 1, "goods": 2,
     "buyers": [{"budget": 1.0, "utility": "ces", "rho": -1.0, "weights": [1, 1]},
                {"budget": 2.0, "utility": "cobb_douglas", "weights": [0.5, 0.5]},
                {"budget": 1.0, "utility": "leontief", "coefficients": [1, 2]}]}

Scenario file (schema_version 1)::

    {"schema_version": 1,
     "timing": {"model": "poisson_clipped", "rates": [1.0]},
     "staleness": "adversarial_max_gap", "lambda": "max_safe",
     "lambda_mode": "strict", "horizon": 200, "initial_prices": [1, 1],
     "seed": 7, "tolerance": 1e-8}

``lambda`` may be a number or ``"max_safe"``, which resolves against the market.
Floats in CSV output use ``%.17g`` so they parse back to the same doubles.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .dynamics import max_safe_lambda
from .market import CES, Buyer, CobbDouglas, Leontief, MarketError, MarketInstance
from .scheduler import (
    STALENESS_MODELS,
    ConfigError,
    JitteredFixed,
    PoissonClipped,
    RoundRobin,
    ScenarioConfig,
    Scripted,
    SimulationTrace,
    UpdateEvent,
)

SCHEMA_VERSION = 1
TRACE_COLUMNS = ("t", "good", "dt", "z_tilde", "z_accurate", "z_min", "z_max",
                 "gamma", "p_before", "p_after", "phi")
REPORT_COLUMNS = ("event_index", "checker", "lhs", "rhs", "margin", "pass")

# short names accepted on input
STALENESS_ALIASES = {"average": "time_weighted_average", "adversarial": "adversarial_max_gap"}
TIMING_ALIASES = {"jittered": "jittered_fixed"}

_UTIL_FIELD = {"ces": "weights", "cobb_douglas": "weights", "leontief": "coefficients"}


def fmt(x: float) -> str:
    return "%.17g" % x


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise MarketError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(path)) from None


def _field(obj, key, path, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise MarketError("missing field", f"{path}.{key}" if path else key)
    val = obj[key]
    if kind is not None and (not isinstance(val, kind) or isinstance(val, bool)):
        raise MarketError(f"expected {kind.__name__ if isinstance(kind, type) else 'number'}",
                          f"{path}.{key}" if path else key)
    return val


def _check_version(doc, path=""):
    v = _field(doc, "schema_version", path, int)
    if v != SCHEMA_VERSION:
        raise MarketError(f"unsupported schema version {v}", "schema_version")


def market_from_dict(doc: dict) -> MarketInstance:
    if not isinstance(doc, dict):
        raise MarketError("market document must be a JSON object")
    _check_version(doc)
    n = _field(doc, "goods", "", int)
    raw = _field(doc, "buyers", "", list)
    buyers = []
    for i, rec in enumerate(raw):
        path = f"buyers[{i}]"
        kind = _field(rec, "utility", path, str)
        if kind not in _UTIL_FIELD:
            raise MarketError(f"unknown utility kind {kind!r}", f"{path}.utility")
        wkey = _UTIL_FIELD[kind]
        weights = _field(rec, wkey, path, list)
        if len(weights) != n:
            raise MarketError(f"expected {n} entries, got {len(weights)}", f"{path}.{wkey}")
        if any(isinstance(w, bool) or not isinstance(w, (int, float)) for w in weights):
            raise MarketError("entries must be numbers", f"{path}.{wkey}")
        budget = _field(rec, "budget", path, (int, float))
        rho = _field(rec, "rho", path, (int, float)) if kind == "ces" else None
        try:
            if kind == "ces":
                util = CES(rho, weights)
            elif kind == "cobb_douglas":
                util = CobbDouglas(weights)
            else:
                util = Leontief(weights)
            buyers.append(Buyer(budget, util))
        except MarketError as exc:
            sub = {"a": wkey, "c": wkey}.get(exc.path, exc.path)
            raise MarketError(exc.args[0].split(": ", 1)[-1], f"{path}.{sub}") from None
    return MarketInstance(n, buyers)


def market_to_dict(market: MarketInstance) -> dict:
    buyers = []
    for b in market.buyers:
        u = b.utility
        if isinstance(u, CES):
            rec = {"budget": b.budget, "utility": "ces", "rho": u.rho, "weights": list(u.a)}
        elif isinstance(u, CobbDouglas):
            rec = {"budget": b.budget, "utility": "cobb_douglas", "weights": list(u.a)}
        else:
            rec = {"budget": b.budget, "utility": "leontief", "coefficients": list(u.c)}
        buyers.append(rec)
    return {"schema_version": SCHEMA_VERSION, "goods": market.n, "buyers": buyers}


def load_market(path) -> MarketInstance:
    return market_from_dict(_read_json(path))


def write_market(market: MarketInstance, path) -> None:
    # json writes floats with repr, which round-trips exactly
    Path(path).write_text(json.dumps(market_to_dict(market), indent=2) + "\n")


def _timing_from_dict(d: dict):
    if not isinstance(d, dict):
        raise ConfigError("timing: expected an object")
    model = TIMING_ALIASES.get(d.get("model"), d.get("model"))
    try:
        if model == "round_robin":
            offs = d.get("offsets")
            return RoundRobin(None if offs is None else tuple(float(o) for o in offs), float(d.get("period", 1.0)))
        if model == "poisson_clipped":
            return PoissonClipped(tuple(float(r) for r in d["rates"]))
        if model == "jittered_fixed":
            return JitteredFixed(float(d["period"]), float(d["jitter"]))
        if model == "scripted":
            return Scripted(tuple((float(t), int(j)) for t, j in d["events"]))
    except KeyError as exc:
        raise ConfigError(f"timing.{exc.args[0]}: missing field") from None
    raise ConfigError(f"timing.model: unknown timing model {d.get('model')!r}")


def _timing_to_dict(tm) -> dict:
    if isinstance(tm, RoundRobin):
        return {"model": tm.name, "period": tm.period, "offsets": None if tm.offsets is None else list(tm.offsets)}
    if isinstance(tm, PoissonClipped):
        return {"model": tm.name, "rates": list(tm.rates)}
    if isinstance(tm, JitteredFixed):
        return {"model": tm.name, "period": tm.period, "jitter": tm.jitter}
    return {"model": tm.name, "events": [[t, j] for t, j in tm.events]}


def resolve_lambda(value, market: MarketInstance | None) -> float:
    if value == "max_safe":
        if market is None:
            raise ConfigError("lambda: 'max_safe' needs a market to resolve against")
        return max_safe_lambda(market.market_class, market.E)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("lambda: expected a number or 'max_safe'")
    return float(value)


def scenario_from_dict(doc: dict, market: MarketInstance | None = None, seed: int | None = None) -> ScenarioConfig:
    """Build a config; ``seed`` (e.g. from the command line) overrides the file's."""
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be a JSON object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}")
    for key in ("timing", "staleness", "lambda", "horizon"):
        if key not in doc:
            raise ConfigError(f"{key}: missing field")
    staleness = STALENESS_ALIASES.get(doc["staleness"], doc["staleness"])
    if staleness not in STALENESS_MODELS:
        raise ConfigError(f"staleness: unknown model {doc['staleness']!r}")
    p0 = doc.get("initial_prices")
    if p0 is None:
        if market is None:
            raise ConfigError("initial_prices: missing field")
        p0 = [market.budgets.sum() / market.n] * market.n
    cfg = ScenarioConfig(
        timing=_timing_from_dict(doc["timing"]),
        staleness=staleness,
        lam=resolve_lambda(doc["lambda"], market),
        horizon=float(doc["horizon"]),
        initial_prices=tuple(p0),
        seed=seed if seed is not None else doc.get("seed"),
        lambda_mode=doc.get("lambda_mode", "strict"),
        tolerance=float(doc.get("tolerance", 1e-8)),
    )
    if market is not None:
        cfg.validate(market)
    return cfg


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "timing": _timing_to_dict(cfg.timing),
        "staleness": cfg.staleness,
        "lambda": cfg.lam,
        "lambda_mode": cfg.lambda_mode,
        "horizon": cfg.horizon,
        "initial_prices": list(cfg.initial_prices),
        "seed": cfg.seed,
        "tolerance": cfg.tolerance,
    }


def load_scenario(path, market: MarketInstance | None = None, seed: int | None = None) -> ScenarioConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return scenario_from_dict(doc, market, seed)


def write_scenario(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(cfg), indent=2) + "\n")


def write_trace(trace: SimulationTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for e, phi in zip(trace.events, trace.phi):
            w.writerow([fmt(e.t), e.good, fmt(e.dt), fmt(e.z_tilde), fmt(e.z_accurate), fmt(e.z_min),
                        fmt(e.z_max), fmt(e.gamma), fmt(e.p_before), fmt(e.p_after), fmt(phi)])


def read_trace(path, market: MarketInstance, config: ScenarioConfig | None = None,
               initial_prices=None) -> SimulationTrace:
    """Parse a trace CSV back into a SimulationTrace.

    Initial prices come from ``initial_prices``, the config, or else each
    good's first ``p_before``. A good that never moved needs one of the first two.
    """
    events, phis = [], []
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"{path}: header must be {','.join(TRACE_COLUMNS)}")
        last = {}
        for lineno, row in enumerate(rows, start=2):
            if len(row) != len(TRACE_COLUMNS):
                raise ValueError(f"{path}:{lineno}: expected {len(TRACE_COLUMNS)} fields")
            try:
                t = float(row[0])
                j = int(row[1])
                vals = [float(v) for v in row[2:]]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed number") from None
            if not 0 <= j < market.n:
                raise ValueError(f"{path}:{lineno}: good {j} out of range")
            dt, zt, za, zmin, zmax, g, pb, pa, phi = vals
            events.append(UpdateEvent(t, j, last.get(j, 0.0), dt, zt, za, zmin, zmax, g, pb, pa))
            last[j] = t
            phis.append(phi)
    if initial_prices is None and config is not None:
        initial_prices = config.initial_prices
    if initial_prices is None:
        first = {}
        for e in events:
            first.setdefault(e.good, e.p_before)
        if len(first) < market.n:
            raise ValueError(f"{path}: goods {sorted(set(range(market.n)) - set(first))} never move; "
                             "initial prices are needed")
        initial_prices = [first[j] for j in range(market.n)]
    p0 = np.array(initial_prices, dtype=float)
    trace = SimulationTrace(market, config, p0, events, phis, market.phi(p0), p0.copy())
    trace.final_prices = trace.price_states()[-1]
    return trace


def write_reports(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            w.writerow([r.event_index, r.checker, fmt(r.lhs), fmt(r.rhs), fmt(r.margin), int(r.passed)])


def write_summary(summary: dict, path) -> None:
    def clean(o):
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        if isinstance(o, float) and not math.isfinite(o):
            return str(o)
        if isinstance(o, np.generic):
            return o.item()
        return o

    Path(path).write_text(json.dumps(clean(summary), indent=2, sort_keys=True) + "\n")
