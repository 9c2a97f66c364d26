"""Experiment configuration files (YAML or JSON).

Every section is optional; missing values fall back to the desk-scale
defaults (one day of 5-minute stages, 15-minute windows, 10 chargers).
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import yaml

from ..core import HorizonConfig, InvalidInputError, TariffConfig
from ..ev_model import FacilityConfig, PriceConfig
from ..optimizer.solver import SolveLimits
from ..policies import PolicyConfig, Setting
from ..scenario import ArrivalConfig, load_prices, sample_prices_path
from .sweep import SweepConfig

DEFAULTS: dict[str, Any] = {
    "horizon": {"stage_length_minutes": 5, "window_size": 3, "rolling_window": 12, "horizon": 288},
    "facility": {"charger_count": 10, "charging_rate": 240.0, "max_simultaneous": 5},
    "prices": {"reward_price": 0.35, "penalty_price": 0.3, "energy_price": None, "energy_price_csv": None},
    "arrival": {"arrival_rate": 1.0, "max_demand": 120.0, "max_deadline": 60.0, "alt_bernoulli_p": None},
    "tariff": {"demand_charge_price": 0.0, "terminal_cost_kind": "incremental", "initial_peak": 0.0},
    "solver": {"gap": 1e-6, "time_limit": None, "node_limit": None, "max_integers": 5000},
    "policy": {"kind": "bmpc", "forecast_mode": "perfect", "terminal_cost_kind": "incremental",
               "empc_reference": "realized-optimal", "initial_peak": "zero"},
    "policies": [
        {"kind": "bmpc", "forecast_mode": "perfect", "initial_peak": "hindsight"},
        {"kind": "nmpc", "forecast_mode": "perfect"},
        {"kind": "edf"},
        {"kind": "llf-ld"},
    ],
    "sweep": {"dc_prices": [0, 6, 9, 12, 15, 18, 21], "scenarios": 20, "base_seed": 0, "history": 5,
              "workers": 1, "record_timing": False},
}


def _merge(base: dict, override: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise InvalidInputError(f"unknown config key {where}{key!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, f"{where}{key}.")
        else:
            out[key] = value
    return out


def _section(raw: dict, name: str, cls):
    try:
        return cls(**raw[name])
    except TypeError as exc:
        raise InvalidInputError(f"config section {name!r}: {exc}") from None


@dataclass
class ExperimentConfig:
    raw: dict
    source: Optional[Path] = None

    @property
    def horizon(self) -> HorizonConfig:
        return _section(self.raw, "horizon", HorizonConfig)

    @property
    def facility(self) -> FacilityConfig:
        return _section(self.raw, "facility", FacilityConfig)

    @property
    def arrival(self) -> ArrivalConfig:
        return _section(self.raw, "arrival", ArrivalConfig)

    @property
    def limits(self) -> SolveLimits:
        return _section(self.raw, "solver", SolveLimits)

    @property
    def tariff(self) -> TariffConfig:
        return _section(self.raw, "tariff", TariffConfig)

    def energy_prices(self, prices_csv: Optional[str | Path] = None) -> tuple[float, ...]:
        """Per-stage energy prices: an explicit CSV wins, then the config's
        CSV, then a constant price, then the bundled sample series."""
        p = self.raw["prices"]
        h = self.horizon
        if prices_csv is not None:
            return load_prices(prices_csv, h)
        if p["energy_price_csv"]:
            path = Path(p["energy_price_csv"])
            if not path.is_absolute() and self.source is not None:
                path = self.source.parent / path
            return load_prices(path, h)
        if p["energy_price"] is not None:
            return (float(p["energy_price"]),) * h.horizon
        return load_prices(sample_prices_path(), h)

    def price_config(self, prices_csv: Optional[str | Path] = None) -> PriceConfig:
        p = self.raw["prices"]
        return PriceConfig(float(p["reward_price"]), self.energy_prices(prices_csv), float(p["penalty_price"]))

    def setting(self, prices_csv: Optional[str | Path] = None) -> Setting:
        return Setting(self.horizon, self.facility, self.price_config(prices_csv), self.tariff,
                       self.arrival, self.limits)

    @property
    def policy(self) -> PolicyConfig:
        return PolicyConfig(**self.raw["policy"])

    @property
    def policies(self) -> tuple[PolicyConfig, ...]:
        try:
            return tuple(PolicyConfig(**p) for p in self.raw["policies"])
        except TypeError as exc:
            raise InvalidInputError(f"config section 'policies': {exc}") from None

    def sweep(self, prices_csv: Optional[str | Path] = None, **overrides) -> SweepConfig:
        s = dict(self.raw["sweep"])
        s.update({k: v for k, v in overrides.items() if v is not None})
        return SweepConfig(
            setting=self.setting(prices_csv),
            policies=self.policies,
            dc_prices=tuple(float(v) for v in s["dc_prices"]),
            scenarios=int(s["scenarios"]),
            base_seed=int(s["base_seed"]),
            history=int(s["history"]),
            workers=int(s["workers"]),
            record_timing=bool(s["record_timing"]),
        )


def default_config() -> ExperimentConfig:
    return ExperimentConfig(copy.deepcopy(DEFAULTS))


def parse_config(data: dict, source: Optional[Path] = None) -> ExperimentConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise InvalidInputError("config must be a mapping at top level")
    raw = _merge(DEFAULTS, data)
    config = ExperimentConfig(raw, source)
    # build everything once so bad values are reported at load time
    config.horizon, config.facility, config.arrival, config.limits, config.tariff
    config.policy, config.policies
    return config


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        data = json.loads(text)
    else:
        data = yaml.safe_load(text)
    return parse_config(data, path)
