"""Reference scenarios used throughout the tests and the CLI defaults."""

from __future__ import annotations

from .model import ModelParams, PayoffSpec, VolatilitySpec

S2_PARTITION = (0.0, 0.5, 1.0)


def s0(payoff: PayoffSpec | None = None) -> ModelParams:
    """No firm-value noise: sigma_z = 0, sigma = 1."""
    return ModelParams(1.0, VolatilitySpec.constant(0.0), payoff)


def s1(payoff: PayoffSpec | None = None, c: float = 0.5) -> ModelParams:
    """Constant sigma_z^2 = c with sigma^2 = 1 - c."""
    return ModelParams.normalized(VolatilitySpec.constant(c), payoff)


def s2(payoff: PayoffSpec | None = None) -> ModelParams:
    """Volatility jumping upward at t = 0.5; only a weighted equilibrium exists."""
    vol = VolatilitySpec([(0.0, 0.6), (0.5, 0.4), (0.5, 1.4), (1.0, 1.2)])
    return ModelParams.normalized(vol, payoff)


SCENARIOS = {"S0": s0, "S1": s1, "S2": s2}
