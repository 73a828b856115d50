"""
Training configuration models.

Usage:
    from illumcomp.training.config import TrainConfig

    cfg = TrainConfig(steps=200, seed=3)
    cfg.loss_weights.lambda_G_idt  # 5.0
"""

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from illumcomp.filters.guided_filter import FilterConfig
from illumcomp.models.networks import AblationConfig, NetworkConfig


class LossWeights(BaseModel):
    """Weights of the combined generator and critic objectives."""

    model_config = ConfigDict(extra="forbid")

    lambda_G: float = Field(default=1.0, ge=0.0, description="Global adversarial weight (generator)")
    lambda_G_idt: float = Field(default=5.0, ge=0.0, description="Identity loss weight (generator)")
    lambda_D_G: float = Field(default=1.0, ge=0.0, description="Global adversarial weight (critics)")
    clip_c: float = Field(default=0.01, gt=0.0, description="Critic weight clipping bound")
    d_steps_per_g: int = Field(default=5, ge=1, description="Critic updates per generator update")


class TrainConfig(BaseModel):
    """Everything a training run depends on besides the corpus contents."""

    model_config = ConfigDict(extra="forbid")

    image_size: int = Field(default=64, ge=8, description="Global image size N")
    local_size: int = Field(default=32, ge=8, description="Local image size n")
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    filter: FilterConfig = Field(default_factory=FilterConfig)
    loss_weights: LossWeights = Field(default_factory=LossWeights)
    ablation: AblationConfig = Field(default_factory=AblationConfig)

    learning_rate: float = Field(default=1.0, ge=0.0, description="Adadelta step multiplier")
    rho: float = Field(default=0.95, gt=0.0, lt=1.0, description="Adadelta decay")
    adadelta_eps: float = Field(default=1e-6, gt=0.0)
    batch_size: int = Field(default=4, ge=1)
    steps: int = Field(default=100, ge=0)
    seed: int = Field(default=0, ge=0)
    corpus: Optional[str] = Field(default=None, description="Corpus directory")
    log_every: int = Field(default=10, ge=1)

    @model_validator(mode="after")
    def _sizes(self) -> "TrainConfig":
        if self.local_size % self.network.downsample:
            raise ValueError(f"local_size must be divisible by {self.network.downsample}")
        if self.local_size > self.image_size:
            raise ValueError("local_size must not exceed image_size")
        return self

    @property
    def sh_degree(self) -> int:
        return self.network.sh_degree
