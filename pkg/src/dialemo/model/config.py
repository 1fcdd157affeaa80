"""Transformer encoder hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from dialemo.errors import ConfigError


@dataclass(frozen=True)
class ModelConfig:
    """Shapes and rates for the miniature encoder.

    The desk-scale defaults stand in for the full-size pre-trained encoders
    the experiments were built on, which are far beyond desk compute.
    ``dropout_head`` is the drop probability applied to the pooled vector
    before the classification head, in training mode only.
    """

    vocab_size: int
    max_len: int
    n_labels: int = 4
    d_model: int = 128
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 512
    dropout_head: float = 0.75

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}"
            )
        if not 0.0 <= self.dropout_head < 1.0:
            raise ConfigError(f"dropout_head={self.dropout_head} outside [0, 1)")
        if min(self.vocab_size, self.max_len, self.n_labels, self.d_ff, self.n_layers) < 1:
            raise ConfigError("all size fields must be positive")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)
