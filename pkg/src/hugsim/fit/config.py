"""Configuration for the fitting loops."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import ConfigError

DEFAULT_LEARNING_RATES = {
    "mu": 1.6e-3,
    "quat": 1e-3,
    "scale": 5e-3,
    "opacity": 0.05,
    "sh": 2.5e-3,
    "sem_logits": 0.01,
    "exposure": 1e-3,
    "trajectory": 0.05,
}


@dataclass
class FitConfig:
    iterations: int = 1000
    learning_rates: dict = field(default_factory=lambda: dict(DEFAULT_LEARNING_RATES))
    mu_lr_decay: float = 0.01  # final mu lr as a fraction of the initial
    densify_interval: int = 0  # 0 disables density control
    densify_grad_threshold: float = 2e-4
    densify_until: int = 0  # last iteration (exclusive) at which to densify
    prune_opacity: float = 0.005
    seed: int = 0

    def __post_init__(self):
        if self.iterations <= 0:
            raise ConfigError("iterations must be positive")
        lrs = dict(DEFAULT_LEARNING_RATES)
        lrs.update(self.learning_rates)
        self.learning_rates = lrs

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "FitConfig":
        return FitConfig(**json.loads(text))
