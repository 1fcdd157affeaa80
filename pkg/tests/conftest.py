import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dialemo.model import Model, ModelConfig, init_params
from dialemo.tokenizer import build_vocab

TINY_CORPUS = [
    "hello world this is a test",
    "the quick brown fox jumps over the lazy dog",
    "playing played plays play",
    "what's wrong with you",
    "nothing is wrong okay",
]


@pytest.fixture(scope="session")
def tiny_vocab():
    return build_vocab(TINY_CORPUS, min_freq=1, size_cap=200, lowercase=True)


@pytest.fixture
def tiny_cfg(tiny_vocab):
    return ModelConfig(
        vocab_size=len(tiny_vocab),
        max_len=12,
        n_labels=4,
        d_model=16,
        n_heads=2,
        n_layers=2,
        d_ff=24,
        dropout_head=0.0,
    )


@pytest.fixture
def tiny_model(tiny_cfg):
    return Model(tiny_cfg, init_params(tiny_cfg, np.random.default_rng(7)))
