"""Model configuration for the hybrid decoder and its full-attention baseline."""

from __future__ import annotations

import dataclasses

BLOCK_RECURRENT = "recurrent"
BLOCK_LOCAL_ATTENTION = "local_attention"
BLOCK_FULL_ATTENTION = "attention"

_VALID_KINDS = (BLOCK_RECURRENT, BLOCK_LOCAL_ATTENTION, BLOCK_FULL_ATTENTION)

# Two gated-recurrence blocks then one windowed multi-query attention block,
# repeated per superblock.
DEFAULT_PATTERN = (BLOCK_RECURRENT, BLOCK_RECURRENT, BLOCK_LOCAL_ATTENTION)


@dataclasses.dataclass(frozen=True)
class ModelConfig:
    vocab_size: int = 32768
    model_dim: int = 256
    num_superblocks: int = 4
    pattern: tuple[str, ...] = DEFAULT_PATTERN
    attention_window: int = 2048
    num_query_heads: int = 4
    head_dim: int = 64
    conv_width: int = 4
    recurrence_gate_constant: float = 8.0
    mlp_expansion: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be at least 2")
        if self.model_dim < 1 or self.num_superblocks < 1:
            raise ValueError("model_dim and num_superblocks must be positive")
        if self.attention_window < 1:
            raise ValueError("attention_window must be at least 1")
        if self.num_query_heads < 1 or self.model_dim % self.num_query_heads != 0:
            raise ValueError(
                f"model_dim {self.model_dim} must divide evenly into "
                f"{self.num_query_heads} query heads"
            )
        if self.head_dim < 1 or self.conv_width < 1:
            raise ValueError("head_dim and conv_width must be positive")
        if self.mlp_expansion <= 0:
            raise ValueError("mlp_expansion must be positive")
        pattern = tuple(self.pattern)
        for kind in pattern:
            if kind not in _VALID_KINDS:
                raise ValueError(f"unknown block kind {kind!r}")
        object.__setattr__(self, "pattern", pattern)

    @property
    def recurrence_dim(self) -> int:
        return self.model_dim

    @property
    def mlp_hidden(self) -> int:
        return int(round(self.model_dim * self.mlp_expansion))

    @property
    def block_kinds(self) -> tuple[str, ...]:
        """Flattened block kinds across all superblocks."""
        return self.pattern * self.num_superblocks

    @property
    def has_unbounded_attention(self) -> bool:
        return BLOCK_FULL_ATTENTION in self.pattern

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["pattern"] = list(self.pattern)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if "pattern" in d:
            d["pattern"] = tuple(d["pattern"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ValueError(f"bad model config: {exc}") from exc


def desk_config(**overrides) -> ModelConfig:
    """CI-speed default: 256-dim, 4 superblocks (12 temporal blocks), window 128."""
    base = dict(
        vocab_size=32768,
        model_dim=256,
        num_superblocks=4,
        attention_window=128,
        num_query_heads=4,
        head_dim=64,
    )
    base.update(overrides)
    return ModelConfig(**base)


def transformer_config(base: ModelConfig) -> ModelConfig:
    """Full-attention baseline matched to `base`: every temporal block is
    unwindowed causal attention over an unbounded KV cache."""
    return dataclasses.replace(base, pattern=(BLOCK_FULL_ATTENTION,) * len(base.pattern))
