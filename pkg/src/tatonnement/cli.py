"""Command-line entry points: simulate, equilibrium, check, sweep, fit."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from .analysis import (
    convergence_fit,
    equilibrium_residual,
    is_strict,
    reference_equilibrium,
    reference_phi_star,
    run_checks,
    summarize,
    verdict,
)
from .corpus import load_corpus
from .io import fmt, load_market, load_scenario, read_trace, write_reports, write_summary, write_trace
from .market import MarketError
from .scheduler import ConfigError, SimulationError, run_simulation

log = logging.getLogger("tatonnement")

DEFAULT_SWEEP_SCENARIO = "complementary_3/rr_endpoint"


class UsageError(Exception):
    pass


def _seed(value: str) -> int:
    v = int(value)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tatonnement", description="Asynchronous tatonnement in Fisher markets.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario and write the trace CSV")
    s.add_argument("--market", required=True)
    s.add_argument("--scenario", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=_seed, help="overrides the scenario seed; required for stochastic models")

    e = sub.add_parser("equilibrium", help="compute a reference equilibrium certificate")
    e.add_argument("--market", required=True)
    e.add_argument("--tol", type=float, default=1e-10)
    e.add_argument("--max-iter", type=int, default=10**6)
    e.add_argument("--out", help="certificate JSON (default: stdout)")

    c = sub.add_parser("check", help="run all per-event checkers on a trace")
    c.add_argument("--trace", required=True)
    c.add_argument("--market", required=True)
    c.add_argument("--scenario", help="scenario file the trace came from (supplies lambda and initial prices)")
    c.add_argument("--report", help="report CSV path")
    c.add_argument("--summary", help="summary JSON path")

    w = sub.add_parser("sweep", help="run a lambda grid and summarize convergence")
    w.add_argument("--market")
    w.add_argument("--scenario")
    w.add_argument("--corpus-scenario", default=DEFAULT_SWEEP_SCENARIO,
                   help="corpus entry used when --market/--scenario are not given")
    w.add_argument("--lambda-min", type=float, required=True)
    w.add_argument("--lambda-max", type=float, required=True)
    w.add_argument("--steps", type=int, required=True)
    w.add_argument("--horizon", type=float)
    w.add_argument("--seed", type=_seed, default=0)
    w.add_argument("--out", help="summary CSV path (default: stdout)")

    f = sub.add_parser("fit", help="fit the exponential convergence rate of a trace")
    f.add_argument("--trace", required=True)
    f.add_argument("--market", required=True)
    f.add_argument("--scenario")
    f.add_argument("--phi-star", type=float, help="minimum potential (default: computed)")
    return ap


def _load_pair(args):
    market = load_market(args.market)
    cfg = None
    if args.scenario:
        # replaying a finished trace: the seed only has to be present, not meaningful
        with open(args.scenario) as fh:
            seed = json.load(fh).get("seed")
        cfg = load_scenario(args.scenario, market, seed=0 if seed is None else seed)
    return market, cfg


def cmd_simulate(args) -> int:
    market = load_market(args.market)
    cfg = load_scenario(args.scenario, market, seed=args.seed)
    trace = run_simulation(market, cfg)
    write_trace(trace, args.out)
    r = equilibrium_residual(market, trace.final_prices)
    print(f"events={len(trace)} stop={trace.stop_reason} residual={fmt(r)} gap_caps={trace.gap_caps}")
    return 0


def cmd_equilibrium(args) -> int:
    market = load_market(args.market)
    cert = reference_equilibrium(market, tol=args.tol, max_iter=args.max_iter)
    doc = {
        "p_star": [float(v) for v in cert.p_star],
        "residual": cert.residual,
        "tolerance": cert.tolerance,
        "method": cert.method,
        "iterations": cert.iterations,
        "phi": market.phi(cert.p_star),
        "valid": cert.valid,
    }
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if cert.valid else 1


def cmd_check(args) -> int:
    market, cfg = _load_pair(args)
    trace = read_trace(args.trace, market, cfg)
    reports = run_checks(trace)
    summary = summarize(reports)
    ok = verdict(trace, reports)
    if args.report:
        write_reports(reports, args.report)
    if args.summary:
        write_summary({"strict": is_strict(trace), "passed": ok, "checkers": summary}, args.summary)
    for name, s in summary.items():
        print(f"{name:24s} {s['count'] - s['failed']:6d}/{s['count']:<6d} worst margin {s['worst_margin']:.3e}")
    if not is_strict(trace):
        print(f"lambda={trace.lam:.6g} is above the strict bound; run is exploratory")
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def _sweep_rows(market, base, lams, seed):
    seqs = np.random.SeedSequence(seed).spawn(len(lams))
    for lam, ss in zip(lams, seqs):
        cfg = replace(base, lam=float(lam), lambda_mode="exploratory", seed=int(ss.generate_state(1, np.uint64)[0]))
        try:
            trace = run_simulation(market, cfg)
        except SimulationError as exc:
            yield [fmt(lam), "", 0, "diverged", "nan", ""]
            log.info("lambda=%s: %s", lam, exc)
            continue
        res = equilibrium_residual(market, trace.final_prices, 1e-6 * np.asarray(cfg.initial_prices))
        reports = run_checks(trace)
        yield [fmt(lam), int(is_strict(trace)), len(trace), trace.stop_reason, fmt(res),
               int(all(r.passed for r in reports))]


def cmd_sweep(args) -> int:
    if args.steps < 1:
        raise UsageError("--steps must be at least 1")
    if not 0 < args.lambda_min <= args.lambda_max < 1:
        raise UsageError("need 0 < --lambda-min <= --lambda-max < 1")
    if bool(args.market) != bool(args.scenario):
        raise UsageError("--market and --scenario go together")
    if args.market:
        market = load_market(args.market)
        base = load_scenario(args.scenario, market, seed=args.seed)
    else:
        entries = {sc.name: sc for sc in load_corpus()}
        if args.corpus_scenario not in entries:
            raise UsageError(f"unknown corpus scenario {args.corpus_scenario!r}")
        sc = entries[args.corpus_scenario]
        market, base = sc.market, sc.config(args.seed)
    if args.horizon:
        base = replace(base, horizon=args.horizon)
    lams = np.linspace(args.lambda_min, args.lambda_max, args.steps)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["lambda", "strict", "events", "stop", "residual", "checks_passed"])
        for row in _sweep_rows(market, base, lams, args.seed):
            w.writerow(row)
    finally:
        if args.out:
            out.close()
    return 0


def cmd_fit(args) -> int:
    market, cfg = _load_pair(args)
    trace = read_trace(args.trace, market, cfg)
    phi_star = args.phi_star if args.phi_star is not None else reference_phi_star(market)
    fit = convergence_fit(trace, phi_star)
    print(f"slope={fmt(fit.slope)} r_squared={fmt(fit.r_squared)} points={fit.n_points}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "equilibrium": cmd_equilibrium,
    "check": cmd_check,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (OSError, MarketError, ConfigError, UsageError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"tatonnement {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"tatonnement {args.command}: simulation aborted: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
