"""Asynchronous tatonnement in Fisher markets: simulation and progress accounting."""

from .dynamics import async_step, max_safe_lambda, sync_step
from .market import CES, Buyer, CobbDouglas, Leontief, MarketError, MarketInstance
from .scheduler import (
    JitteredFixed,
    PoissonClipped,
    RoundRobin,
    ScenarioConfig,
    Scripted,
    SimulationTrace,
    run_simulation,
)

__version__ = "0.1.0"
