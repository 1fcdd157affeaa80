"""Hashtag-labeled tweets as an emotion-classification pre-training corpus.

A tweet qualifies only if a recognized emotion hashtag is its final token;
the hashtag becomes the label and is stripped from the text.  Exact-text
duplicates are dropped (first occurrence wins).  The eight tweet emotions
are their own label space, distinct from the dialogue annotation labels.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, TextIO

import numpy as np

from dialemo.errors import DataError
from dialemo.model import Model
from dialemo.textprep import NONE_SENTINEL, CausalPair
from dialemo.tokenizer import Vocab, encode_pair
from dialemo.train.loop import EpochMetrics, TrainConfig, reinit_head, train_classifier

TWEET_EMOTIONS: tuple[str, ...] = (
    "anger",
    "anticipation",
    "disgust",
    "fear",
    "joy",
    "sadness",
    "surprise",
    "trust",
)

HASHTAG_EMOTION: dict[str, str] = {
    "#mad": "anger",
    "#pissed": "anger",
    "#pumped": "anticipation",
    "#ready": "anticipation",
    "#awful": "disgust",
    "#eww": "disgust",
    "#fear": "fear",
    "#worried": "fear",
    "#fun": "joy",
    "#joy": "joy",
    "#depressed": "sadness",
    "#grief": "sadness",
    "#strange": "surprise",
    "#surprise": "surprise",
    "#hope": "trust",
    "#secure": "trust",
}


@dataclass(frozen=True)
class TweetRecord:
    text: str
    hashtags: tuple[str, ...] = ()
    label: str | None = None


def read_tweets_file(fh: TextIO) -> list[TweetRecord]:
    """One record per line: text, then an optional TAB and space-separated hashtags.

    Without the second field, hashtags are collected from the text tokens.
    """
    records = []
    for line in fh:
        line = line.rstrip("\n")
        if not line.strip():
            continue
        text, _, tags = line.partition("\t")
        if tags:
            hashtags = tuple(tags.split())
        else:
            hashtags = tuple(tok for tok in text.split() if tok.startswith("#"))
        records.append(TweetRecord(text=text, hashtags=hashtags))
    return records


def filter_tweets(raw: Iterable[TweetRecord]) -> list[TweetRecord]:
    """Dedup, require the emotion hashtag in final position, assign labels."""
    seen: set[str] = set()
    out = []
    for rec in raw:
        if rec.text in seen:
            continue
        seen.add(rec.text)
        tokens = rec.text.split()
        if not tokens:
            continue
        emotion = HASHTAG_EMOTION.get(tokens[-1].lower())
        if emotion is None or len(tokens) == 1:
            continue
        out.append(replace(rec, text=rec.text.rsplit(None, 1)[0], label=emotion))
    return out


def pretrain_emotion_hashtags(
    model: Model,
    tweets: list[TweetRecord],
    cfg: TrainConfig,
    vocab: Vocab,
) -> tuple[Model, list[EpochMetrics]]:
    """Single-sentence emotion classification over the 8 tweet labels.

    The context slot holds the [None] sentinel.  The resulting 8-way head is
    meant to be discarded (reinit_head) before fine-tuning on the 4
    evaluation labels.
    """
    if not tweets:
        raise ValueError("tweet list is empty")
    if any(t.label is None for t in tweets):
        raise DataError("tweets must be filtered (labeled) before pre-training")
    rng = np.random.default_rng(cfg.seed)
    if model.cfg.n_labels != len(TWEET_EMOTIONS):
        model = reinit_head(model, len(TWEET_EMOTIONS), rng)
    data = [
        encode_pair(
            CausalPair(target_text=t.text, context_text=NONE_SENTINEL, label=None),
            vocab,
            model.cfg.max_len,
            label=TWEET_EMOTIONS.index(t.label),
        )
        for t in tweets
    ]
    return train_classifier(model, data, [], cfg, weights=None)
