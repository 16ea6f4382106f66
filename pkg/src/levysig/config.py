"""YAML run configuration for the command line front end."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .calculus import SigModelParams, SigPayoff
from .levy import LevyTriplet, primary_process_triplet
from .market import MeasureChangeSpec
from .tensor import WordCombination, parse_word


class ConfigError(ValueError):
    pass


def _words_table(table: dict | None) -> dict:
    return {parse_word(str(k)): float(v) for k, v in (table or {}).items()}


@dataclass(frozen=True)
class MarketConfig:
    atoms: tuple = ()
    K: int = 2
    level: int = 2
    triplet: dict | None = None  # optional general triplet for expected-sig

    def primary_triplet(self) -> LevyTriplet:
        return primary_process_triplet([tuple(a) for a in self.atoms], self.K)

    def levy_triplet(self) -> LevyTriplet:
        if self.triplet is None:
            return self.primary_triplet()
        t = self.triplet
        drift = np.asarray(t["drift"], dtype=float)
        letters = tuple(t.get("letters", range(1, len(drift) + 1)))
        atoms = tuple((np.asarray(x, dtype=float), float(lam)) for x, lam in t.get("atoms", []))
        return LevyTriplet(letters, drift, np.asarray(t["covariance"], dtype=float), atoms)


@dataclass(frozen=True)
class SimulationConfig:
    horizon: float = 1.0
    steps: int = 100
    seed: int = 0
    paths: int = 0
    brownian: bool = True
    shard_size: int = 2000


@dataclass(frozen=True)
class RunConfig:
    market: MarketConfig
    simulation: SimulationConfig
    model: dict | None = None
    task: dict = field(default_factory=dict)

    def params(self) -> SigModelParams:
        if self.model is None:
            raise ConfigError("this command needs a 'model' block")
        m = self.model
        return SigModelParams(
            s0=float(m.get("s0", 1.0)),
            ell_w=_words_table(m.get("ell_w")),
            ell_nu=_words_table(m.get("ell_nu")),
            K=self.market.K,
            n=m.get("n"),
            d=m.get("d"),
        )

    def payoffs(self) -> dict:
        """Named payoffs from ``task.payoffs``: a mapping id -> word table, or a list of words."""
        raw = self.task.get("payoffs", {})
        if isinstance(raw, list):
            return {str(w): SigPayoff({parse_word(str(w)): 1.0}) for w in raw}
        return {str(k): SigPayoff(_words_table(v)) for k, v in raw.items()}

    def measure_change(self) -> MeasureChangeSpec | None:
        mc = self.task.get("measure_change")
        if not mc:
            return None
        return MeasureChangeSpec(
            WordCombination(_words_table(mc.get("f"))),
            tuple(mc.get("g", ())),
            bool(mc.get("allow_jump_letter", False)),
        )


def _section(raw: dict, name: str, cls):
    block = raw.get(name) or {}
    if not isinstance(block, dict):
        raise ConfigError(f"'{name}' must be a mapping")
    known = set(cls.__dataclass_fields__)
    extra = set(block) - known
    if extra:
        raise ConfigError(f"unknown keys in '{name}': {sorted(extra)}")
    return cls(**block)


def config_from_dict(raw: dict[str, Any]) -> RunConfig:
    extra = set(raw) - {"market", "simulation", "model", "task"}
    if extra:
        raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
    market = _section(raw, "market", MarketConfig)
    market = MarketConfig(tuple(tuple(a) for a in market.atoms), int(market.K), int(market.level), market.triplet)
    return RunConfig(market, _section(raw, "simulation", SimulationConfig), raw.get("model"), raw.get("task") or {})


def load_config(path: str | Path) -> RunConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    return config_from_dict(raw)
