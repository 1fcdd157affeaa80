"""Operator-facing run configuration.

A flat key-value config file (section-dotted keys, "#" comments) layered as
defaults < dataset preset < config file < command-line flags.  The two
dataset presets pin the documented experimental setups: friends (max_len
113, batch 8, 3 epochs, uncased, personality tokens) and emotionpush
(max_len 249, batch 4, 2 epochs, cased, chat normalization).
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path

from dialemo.errors import ConfigError
from dialemo.model import ModelConfig
from dialemo.train import TrainConfig

CONFIG_ENV_VAR = "DIALEMO_CONFIG"


@dataclass
class RunConfig:
    dataset: str = "friends"
    # paths
    train_file: str | None = None
    pretrain_corpus: str | None = None
    tweet_file: str | None = None
    checkpoint_dir: str = "checkpoints"
    # model (desk-scale defaults)
    d_model: int = 128
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 512
    max_len: int = 113
    dropout_head: float = 0.75
    # training
    batch_size: int = 8
    learning_rate: float = 2.5e-6
    n_epochs: int = 3
    seed: int = 13
    warm_first_epoch: bool = True
    # preprocessing switches
    personality_tokens: bool = True
    chat_normalize: bool = False
    lowercase: bool = True
    # vocabulary build
    vocab_min_freq: int = 1
    vocab_size_cap: int = 30000
    # corpus split
    n_train: int = 800

    def model_config(self, vocab_size: int, n_labels: int = 4) -> ModelConfig:
        return ModelConfig(
            vocab_size=vocab_size,
            max_len=self.max_len,
            n_labels=n_labels,
            d_model=self.d_model,
            n_heads=self.n_heads,
            n_layers=self.n_layers,
            d_ff=self.d_ff,
            dropout_head=self.dropout_head,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            n_epochs=self.n_epochs,
            seed=self.seed,
            warm_first_epoch=self.warm_first_epoch,
        )


PRESETS: dict[str, dict] = {
    "friends": {
        "max_len": 113,
        "batch_size": 8,
        "n_epochs": 3,
        "lowercase": True,
        "personality_tokens": True,
        "chat_normalize": False,
    },
    "emotionpush": {
        "max_len": 249,
        "batch_size": 4,
        "n_epochs": 2,
        "lowercase": False,
        "personality_tokens": False,
        "chat_normalize": True,
    },
}

# config-file key -> RunConfig field
KEY_MAP: dict[str, str] = {
    "dataset": "dataset",
    "paths.train_file": "train_file",
    "paths.pretrain_corpus": "pretrain_corpus",
    "paths.tweet_file": "tweet_file",
    "paths.checkpoint_dir": "checkpoint_dir",
    "model.d_model": "d_model",
    "model.n_heads": "n_heads",
    "model.n_layers": "n_layers",
    "model.d_ff": "d_ff",
    "model.max_len": "max_len",
    "model.dropout_head": "dropout_head",
    "train.batch_size": "batch_size",
    "train.learning_rate": "learning_rate",
    "train.n_epochs": "n_epochs",
    "train.seed": "seed",
    "train.warm_first_epoch": "warm_first_epoch",
    "prep.personality_tokens": "personality_tokens",
    "prep.chat_normalize": "chat_normalize",
    "prep.lowercase": "lowercase",
    "vocab.min_freq": "vocab_min_freq",
    "vocab.size_cap": "vocab_size_cap",
    "split.n_train": "n_train",
}

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(field_name: str, raw: str):
    ftype = _FIELD_TYPES[field_name]
    raw = raw.strip()
    if ftype == "bool":
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{field_name}: expected a boolean, got {raw!r}")
    try:
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{field_name}: {exc}") from exc
    return raw


def parse_config_file(path: str | Path) -> dict[str, object]:
    """Flat "key = value" lines; returns RunConfig field overrides."""
    overrides: dict[str, object] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = line.partition("=")
            if not eq:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key = key.strip()
            field_name = KEY_MAP.get(key)
            if field_name is None:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            overrides[field_name] = _coerce(field_name, value)
    return overrides


def resolve_run_config(
    config_path: str | None = None,
    dataset: str | None = None,
    flag_overrides: dict[str, object] | None = None,
) -> RunConfig:
    """Layer defaults, preset, config file, and flags (flags win)."""
    if config_path is None:
        config_path = os.environ.get(CONFIG_ENV_VAR) or None
    file_overrides = parse_config_file(config_path) if config_path else {}

    chosen = dataset or file_overrides.get("dataset") or RunConfig.dataset
    if chosen not in PRESETS:
        raise ConfigError(f"unknown dataset {chosen!r}; expected one of {sorted(PRESETS)}")

    merged: dict[str, object] = {"dataset": chosen}
    merged.update(PRESETS[chosen])
    merged.update(file_overrides)
    if flag_overrides:
        merged.update({k: v for k, v in flag_overrides.items() if v is not None})
    merged["dataset"] = chosen
    return RunConfig(**merged)
