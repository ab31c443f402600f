"""Built-in scenario corpus.

Five markets (two complementary CES, one mixed CES, a two-good and a
three-good Leontief market), each run under three (timing, staleness) pairs,
always at the largest strict step size. Seeds pick round-robin phase offsets
and drive the stochastic timing models.

Set ``TATONNEMENT_CORPUS`` to a directory of JSON files to replace the
built-in list. Each file holds ``{"name", "market", "scenario"}`` with the
market and scenario documents in the formats of :mod:`tatonnement.io`; round
robin scenarios without offsets get seeded ones as here.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dynamics import max_safe_lambda
from .io import market_from_dict, scenario_from_dict
from .market import CES, Buyer, CobbDouglas, Leontief, MarketInstance
from .scheduler import JitteredFixed, PoissonClipped, RoundRobin, ScenarioConfig

ENV_VAR = "TATONNEMENT_CORPUS"
SEEDS = tuple(range(10))
CHECK_HORIZON = 100.0  # time units replayed by the per-event checkers


@dataclass(frozen=True)
class CorpusScenario:
    name: str
    market: MarketInstance
    base: ScenarioConfig

    @property
    def kind(self) -> str:
        return self.market.market_class

    def config(self, seed: int, horizon: float | None = None, **changes) -> ScenarioConfig:
        cfg = replace(self.base, seed=seed, **changes)
        if horizon is not None:
            cfg = replace(cfg, horizon=horizon)
        tm = cfg.timing
        if isinstance(tm, RoundRobin) and tm.offsets is None:
            offs = np.random.default_rng(seed).uniform(0.0, tm.period, self.market.n)
            cfg = replace(cfg, timing=RoundRobin(tuple(float(o) for o in offs), tm.period))
        return cfg


def _markets():
    return {
        "complementary_3": (
            MarketInstance(3, [
                Buyer(1.0, CES(-0.5, (1.0, 2.0, 1.0))),
                Buyer(1.5, CES(-0.25, (2.0, 1.0, 1.0))),
                Buyer(0.5, CobbDouglas((0.2, 0.3, 0.5))),
            ]),
            (0.5, 2.0, 1.0), 500.0,
        ),
        "complementary_2": (
            MarketInstance(2, [Buyer(1.0, CES(-0.5, (1.0, 3.0))), Buyer(1.0, CES(-0.2, (2.0, 1.0)))]),
            (0.5, 1.5), 500.0,
        ),
        "mixed_3": (
            MarketInstance(3, [Buyer(1.0, CES(-2.0, (1.0, 1.0, 0.5))), Buyer(2.0, CES(0.5, (0.3, 1.0, 1.0)))]),
            (1.5, 0.5, 1.0), 500.0,
        ),
        "leontief_2": (
            MarketInstance(2, [Buyer(1.0, Leontief((1.0, 0.2))), Buyer(1.0, Leontief((0.2, 1.0)))]),
            (1.6, 0.4), 2000.0,
        ),
        "leontief_3": (
            MarketInstance(3, [
                Buyer(1.0, Leontief((1.0, 0.2, 0.2))),
                Buyer(1.0, Leontief((0.2, 1.0, 0.2))),
                Buyer(1.0, Leontief((0.2, 0.2, 1.0))),
            ]),
            (2.0, 0.5, 0.5), 2000.0,
        ),
    }


VARIANTS = (
    ("rr_endpoint", RoundRobin(), "endpoint"),
    ("poisson_adversarial", PoissonClipped((1.0,)), "adversarial_max_gap"),
    ("jittered_average", JitteredFixed(0.75, 0.25), "time_weighted_average"),
)


def builtin_corpus() -> list[CorpusScenario]:
    out = []
    for mname, (market, p0, horizon) in _markets().items():
        lam = max_safe_lambda(market.market_class, market.E)
        for vname, timing, staleness in VARIANTS:
            cfg = ScenarioConfig(timing, staleness, lam, horizon, p0, seed=0)
            out.append(CorpusScenario(f"{mname}/{vname}", market, cfg))
    return out


def corpus_from_dir(path) -> list[CorpusScenario]:
    out = []
    for f in sorted(Path(path).glob("*.json")):
        doc = json.loads(f.read_text())
        market = market_from_dict(doc["market"])
        cfg = scenario_from_dict(doc["scenario"], market, seed=doc["scenario"].get("seed", 0))
        out.append(CorpusScenario(doc.get("name", f.stem), market, cfg))
    if not out:
        raise FileNotFoundError(f"no scenario files in {path}")
    return out


def load_corpus() -> list[CorpusScenario]:
    d = os.environ.get(ENV_VAR)
    return corpus_from_dir(d) if d else builtin_corpus()
