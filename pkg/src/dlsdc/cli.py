"""Command line entry point: ``dlsdc {simulate,sweep,upper-bound,export-lp,generate-scenario}``.

On failure every command prints a single JSON line to stderr,
``{"status": "error", "type": ..., "message": ...}``, and exits nonzero
(2 for bad input, 1 for anything else).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .core import InvalidInputError
from .ev_model import PriceConfig
from .harness.config import ExperimentConfig, default_config, load_config
from .harness.report import emit_report, runs_csv
from .harness.sweep import (
    UpperBoundCache,
    make_scenario,
    run_policy,
    run_sweep,
    solve_upper_bound,
)
from .optimizer.formulations import build_upper_bound
from .optimizer.lpfile import export_lp
from .policies import PolicyConfig, Setting
from .scenario import Scenario, load_scenario, save_scenario

log = logging.getLogger("dlsdc")


def _config(path: Optional[str]) -> ExperimentConfig:
    return load_config(path) if path else default_config()


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _scenario_setting(config: ExperimentConfig, scenario: Scenario, prices: Optional[str],
                      dc_price: Optional[float]) -> Setting:
    """Setting for a stored scenario: its own horizon length and, if it
    carries one, its own price series."""
    h = config.horizon
    if scenario.horizon != h.horizon:
        w = min(h.rolling_window, scenario.horizon)
        h = replace(h, horizon=scenario.horizon, rolling_window=w)
        config = ExperimentConfig({**config.raw, "horizon": {**config.raw["horizon"],
                                                            "horizon": h.horizon, "rolling_window": w}},
                                  config.source)
    if scenario.prices and prices is None:
        p = config.raw["prices"]
        price_cfg = PriceConfig(float(p["reward_price"]), tuple(scenario.prices), float(p["penalty_price"]))
        setting = Setting(h, config.facility, price_cfg, config.tariff, config.arrival, config.limits)
    else:
        setting = config.setting(prices)
    if dc_price is not None:
        setting = setting.with_demand_charge(dc_price)
    scenario.validate(setting.facility.charger_count)
    return setting


def cmd_simulate(args) -> dict:
    config = _config(args.config)
    policy = config.policy
    overrides = {}
    if args.policy:
        overrides["kind"] = args.policy
    if args.forecast:
        overrides["forecast_mode"] = args.forecast
    if args.initial_peak:
        overrides["initial_peak"] = args.initial_peak
    if overrides:
        policy = PolicyConfig(**{**config.raw["policy"], **overrides})
    if args.scenario:
        scenario = load_scenario(args.scenario)
        setting = _scenario_setting(config, scenario, args.prices, args.dc_price)
    else:
        setting = config.setting(args.prices)
        if args.dc_price is not None:
            setting = setting.with_demand_charge(args.dc_price)
        scenario = make_scenario(args.seed, setting, f"seed{args.seed}")
    history = []
    if policy.initial_peak == "historical":
        seeds = config.sweep(args.prices).history_seeds()
        history = [make_scenario(h, setting, f"h{k:03d}") for k, h in enumerate(seeds)]
    trace, report = run_policy(policy, scenario, setting, UpperBoundCache(), history)
    if not args.timing:
        report = replace(report, runtime_ms=None)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "runs.csv").write_text(runs_csv([report]))
    with open(out / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stage", "consumption_kw", "phi_kw", "service", "energy", "penalty", "controls"])
        for r in trace.records:
            w.writerow([r.t, f"{r.consumption:.6f}", f"{r.phi:.6f}", f"{r.reward.service:.6f}",
                        f"{r.reward.energy:.6f}", f"{r.reward.penalty:.6f}", "".join(map(str, r.controls))])
    return {"status": "ok", "policy": report.policy, "total_reward": report.total_reward,
            "peak_kw": report.peak_kw, "gap_pct": report.gap_pct, "gap_flag": report.gap_flag, "out": str(out)}


def cmd_sweep(args) -> dict:
    config = _config(args.config)
    sweep = config.sweep(args.prices, dc_prices=args.dc_prices, scenarios=args.scenarios,
                         base_seed=args.seed, workers=args.workers,
                         record_timing=True if args.timing else None)

    def progress(done: int, total: int) -> None:
        log.info("scenario %d/%d done", done, total)

    result = run_sweep(sweep, progress)
    paths = emit_report(result, args.out)
    return {"status": "ok", "runs": len(result.runs), "failures": len(result.failures),
            "files": [str(p) for p in paths]}


def cmd_upper_bound(args) -> dict:
    config = _config(args.config)
    scenario = load_scenario(args.scenario)
    setting = _scenario_setting(config, scenario, args.prices, args.dc_price)
    ub = solve_upper_bound(scenario, setting)
    return {"status": ub.status.value, "objective": ub.objective, "bound": ub.bound,
            "peak_kw": ub.peak_kw, "nodes": ub.nodes}


def cmd_export_lp(args) -> dict:
    config = _config(args.config)
    scenario = load_scenario(args.scenario)
    setting = _scenario_setting(config, scenario, args.prices, args.dc_price)
    problem = build_upper_bound(scenario, setting.facility, setting.prices, setting.horizon, setting.tariff)
    export_lp(problem, args.out)
    return {"status": "ok", "variables": problem.num_variables, "integers": problem.num_integers,
            "constraints": len(problem.constraints), "out": args.out}


def cmd_generate(args) -> dict:
    config = _config(args.config)
    setting = config.setting(args.prices)
    scenario = make_scenario(args.seed, setting, args.id or f"seed{args.seed}")
    save_scenario(scenario, args.out)
    return {"status": "ok", "arrivals": len(scenario.events), "rejected": scenario.rejected, "out": args.out}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dlsdc", description="EV charging under a demand charge.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML or JSON experiment config (defaults if omitted)")
        p.add_argument("--prices", help="hourly energy price CSV ($/MWh)")

    p = sub.add_parser("simulate", help="simulate one policy on one scenario")
    common(p)
    p.add_argument("--policy", choices=["bmpc", "nmpc", "empc", "edf", "llf-ld"])
    p.add_argument("--forecast", choices=["perfect", "mean"])
    p.add_argument("--initial-peak", help="zero, hindsight, historical or a value in kW (BMPC only)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenario", help="stored scenario file instead of --seed")
    p.add_argument("--dc-price", type=float)
    p.add_argument("--timing", action="store_true", help="record wall time (breaks byte-stability)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run every policy over a grid of demand-charge prices")
    common(p)
    p.add_argument("--dc-prices", type=_float_list)
    p.add_argument("--scenarios", type=int)
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--workers", type=int)
    p.add_argument("--timing", action="store_true", help="record wall time (breaks byte-stability)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("upper-bound", help="solve the hindsight problem for a stored scenario")
    common(p)
    p.add_argument("--scenario", required=True)
    p.add_argument("--dc-price", type=float, default=0.0)
    p.set_defaults(func=cmd_upper_bound)

    p = sub.add_parser("export-lp", help="write the hindsight problem as an LP file")
    common(p)
    p.add_argument("--scenario", required=True)
    p.add_argument("--dc-price", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("generate-scenario", help="sample a scenario and store it")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--id", default="")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = args.func(args)
    except (InvalidInputError, FileNotFoundError, ValueError) as exc:
        print(json.dumps({"status": "error", "type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    except Exception as exc:
        print(json.dumps({"status": "error", "type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps(result, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
