"""Run configuration dataclasses."""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidConfig
from .losses import LossWeights


@dataclass(frozen=True)
class ModelConfig:
    """Architecture sizes for the denoiser, the footwork adaptor, and sampling."""

    dancers: int
    width: int = 64
    layers: int = 2
    heads: int = 8
    fa_blocks: int = 3
    fa_hidden: int = 64
    timesteps: int = 50
    schedule: str = "cosine"

    def __post_init__(self):
        if self.dancers < 1:
            raise InvalidConfig("need at least one dancer")
        if self.width < self.heads or self.width % self.heads:
            raise InvalidConfig("width must be a positive multiple of heads")
        if self.layers < 1 or self.fa_blocks < 1 or self.fa_hidden < 1:
            raise InvalidConfig("layer/block counts must be positive")
        if self.timesteps < 1:
            raise InvalidConfig("need at least one diffusion step")


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and loop settings; weights default to the tuned objective mix."""

    learning_rate: float = 5e-5
    steps: int = 2000
    batch_size: int = 4
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidConfig("learning rate must be positive")
        if self.steps < 0:
            raise InvalidConfig("step budget must be nonnegative")
        if self.batch_size < 1:
            raise InvalidConfig("batch size must be positive")
