from dialemo.train.loop import (
    EpochMetrics,
    TrainConfig,
    predict_labels,
    reinit_head,
    train_classifier,
)
from dialemo.train.losses import (
    class_weights,
    nll_loss,
    nll_loss_grad,
    weighted_nll_loss,
    weighted_nll_loss_grad,
)
from dialemo.train.optim import AdamState, adam_step
from dialemo.train.pretrain import (
    PretrainEpochMetrics,
    init_pretrain_heads,
    pretrain_batch_losses,
    pretrain_mlm_nsp,
)
from dialemo.train.tweets import (
    HASHTAG_EMOTION,
    TWEET_EMOTIONS,
    TweetRecord,
    filter_tweets,
    pretrain_emotion_hashtags,
    read_tweets_file,
)

__all__ = [
    "AdamState",
    "EpochMetrics",
    "HASHTAG_EMOTION",
    "PretrainEpochMetrics",
    "TWEET_EMOTIONS",
    "TrainConfig",
    "TweetRecord",
    "adam_step",
    "class_weights",
    "filter_tweets",
    "init_pretrain_heads",
    "nll_loss",
    "nll_loss_grad",
    "predict_labels",
    "pretrain_batch_losses",
    "pretrain_emotion_hashtags",
    "pretrain_mlm_nsp",
    "read_tweets_file",
    "reinit_head",
    "train_classifier",
    "weighted_nll_loss",
    "weighted_nll_loss_grad",
]
