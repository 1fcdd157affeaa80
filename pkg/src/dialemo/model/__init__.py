from dialemo.model.backward import backward, backward_from_hidden, dropout_backward, head_backward
from dialemo.model.checkpoint import (
    Model,
    checkpoint_bytes,
    load_checkpoint,
    load_checkpoint_file,
    save_checkpoint,
    save_checkpoint_file,
    vocab_checksum,
)
from dialemo.model.config import ModelConfig
from dialemo.model.encoder import (
    ForwardTrace,
    batch_arrays,
    classify,
    encoder_forward,
    forward_batch,
    multi_head_attention,
    scaled_dot_attention,
    softmax,
)
from dialemo.model.params import ModelParams, init_params, param_shapes

__all__ = [
    "Model",
    "ModelConfig",
    "ModelParams",
    "ForwardTrace",
    "backward",
    "backward_from_hidden",
    "batch_arrays",
    "checkpoint_bytes",
    "classify",
    "dropout_backward",
    "encoder_forward",
    "forward_batch",
    "head_backward",
    "init_params",
    "load_checkpoint",
    "load_checkpoint_file",
    "multi_head_attention",
    "param_shapes",
    "save_checkpoint",
    "save_checkpoint_file",
    "scaled_dot_attention",
    "softmax",
    "vocab_checksum",
]
