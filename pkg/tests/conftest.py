import numpy as np
import pytest

from longgen import ModelConfig


def tiny_config(**overrides) -> ModelConfig:
    """Smallest config that still exercises every block kind."""
    base = dict(
        vocab_size=32,
        model_dim=16,
        num_superblocks=1,
        attention_window=8,
        num_query_heads=2,
        head_dim=8,
        conv_width=4,
    )
    base.update(overrides)
    return ModelConfig(**base)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
