"""Scenario configuration documents and the objects they build."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .dynamics import StrategySpec, TimeGrid, equilibrium_grid
from .errors import ConfigError, InsiderLabError
from .model import ModelParams, PayoffSpec, VolatilitySpec, WeightingFunction, construct_weighting
from .pricing import PricingRule


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PayoffBlock(_Block):
    family: Literal["identity", "affine", "cubic", "exponential", "table"] = "identity"
    params: dict = Field(default_factory=dict)


class ModelBlock(_Block):
    sigma: float
    vol_knots: list[tuple[float, float]]
    payoff: PayoffBlock = Field(default_factory=PayoffBlock)


class PricingBlock(_Block):
    kind: Literal["markovian", "weighted"] = "markovian"
    nodes: int = Field(64, ge=2)


class WeightingBlock(_Block):
    partition: list[float]
    weights: Union[Literal["construct"], list[float]] = "construct"


class GridBlock(_Block):
    mode: Literal["geometric", "uniform"] = "geometric"
    size: int = Field(4096, ge=2)
    octaves: int = Field(12, ge=0)
    min_step: float = Field(2.0 ** -26, gt=0)


class RunBlock(_Block):
    n_paths: int = Field(10000, ge=2)
    base_seed: int = Field(0, ge=0, lt=2 ** 64)
    strategies: list[str] = Field(default_factory=lambda: ["equilibrium"])
    probe_times: list[float] = Field(default_factory=lambda: [0.5, 0.9, 0.99])
    record_paths: int = Field(4, ge=1)
    workers: int = Field(1, ge=1)


class ScenarioConfig(_Block):
    name: str = "scenario"
    model: ModelBlock
    pricing: PricingBlock = Field(default_factory=PricingBlock)
    weighting: WeightingBlock | None = None
    grid: GridBlock = Field(default_factory=GridBlock)
    run: RunBlock = Field(default_factory=RunBlock)

    @model_validator(mode="after")
    def _consistent(self):
        if self.pricing.kind == "weighted" and self.weighting is None:
            raise ValueError("weighted pricing requires a weighting block")
        for t in self.run.probe_times:
            if not 0.0 <= t < 1.0:
                raise ValueError("probe times must lie in [0, 1)")
        return self

    def canonical_json(self):
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def sha256(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def _field_of(err: ValidationError):
    e = err.errors()[0]
    loc = ".".join(str(x) for x in e["loc"]) or "(document)"
    return loc, e["msg"]


def parse_config(text: str) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate_json(text)
    except ValidationError as err:
        loc, msg = _field_of(err)
        raise ConfigError(f"config field {loc}: {msg}", field=loc) from None


def load_config(path) -> ScenarioConfig:
    """Read and validate a config; I/O errors propagate as OSError."""
    return parse_config(Path(path).read_text(encoding="utf-8"))


def build_params(cfg: ScenarioConfig) -> ModelParams:
    m = cfg.model
    try:
        vol = VolatilitySpec([list(k) for k in m.vol_knots])
        payoff = PayoffSpec(m.payoff.family, m.payoff.params)
        return ModelParams(m.sigma, vol, payoff)
    except InsiderLabError as err:
        raise ConfigError(f"config field model: {err}", field="model") from None


def build_weighting(cfg: ScenarioConfig, params: ModelParams) -> WeightingFunction | None:
    """The weighting of the config, constructed from the model when asked to.

    Construction failures propagate so that ``check`` can report them.
    """
    wb = cfg.weighting
    if wb is None:
        return None
    if wb.weights == "construct":
        return construct_weighting(params, wb.partition)
    try:
        return WeightingFunction(wb.partition, wb.weights)
    except InsiderLabError as err:
        raise ConfigError(f"config field weighting: {err}", field="weighting") from None


def build_rule(cfg: ScenarioConfig, params: ModelParams, w: WeightingFunction | None) -> PricingRule:
    if cfg.pricing.kind == "markovian":
        return PricingRule.markov(params.payoff, cfg.pricing.nodes)
    return PricingRule.weighted(params.payoff, w, cfg.pricing.nodes)


def build_grid(cfg: ScenarioConfig, params: ModelParams, rule: PricingRule, size=None, extra=()) -> TimeGrid:
    g = cfg.grid
    m = int(size or g.size)
    if g.mode == "uniform":
        knots = [k[0] for k in params.vol.knots] + list(rule.breakpoints) + list(extra)
        return TimeGrid.uniform(m, extra=knots)
    return equilibrium_grid(params, rule, m, g.octaves, g.min_step, extra=extra)


def build_strategies(cfg: ScenarioConfig, rule: PricingRule):
    """Strategy specs; ``equilibrium`` picks the variant matching the pricing rule."""
    out = []
    for text in cfg.run.strategies:
        if text == "equilibrium":
            text = "equilibrium_markov" if rule.is_markov else "equilibrium_nonmarkov"
        try:
            out.append(StrategySpec.parse(text, rule.weighting))
        except (InsiderLabError, ValueError, IndexError) as err:
            raise ConfigError(f"config field run.strategies: {err}", field="run.strategies") from None
    return out
