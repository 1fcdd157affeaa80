"""Emotion label space for the EmotionLines-style corpora.

Each utterance carries one of eight annotation outcomes: Ekman's six basic
emotions, neutral, or non-neutral (no emotion reached a majority vote).
Only four labels are scored during evaluation.
"""

from __future__ import annotations

import enum


class EmotionLabel(enum.Enum):
    ANGER = "anger"
    DISGUST = "disgust"
    FEAR = "fear"
    JOY = "joy"
    SADNESS = "sadness"
    SURPRISE = "surprise"
    NEUTRAL = "neutral"
    NON_NEUTRAL = "non-neutral"

    def __str__(self) -> str:
        return self.value


# Report ordering is fixed: anger, joy, neutral, sadness.
EVAL_LABELS: tuple[EmotionLabel, ...] = (
    EmotionLabel.ANGER,
    EmotionLabel.JOY,
    EmotionLabel.NEUTRAL,
    EmotionLabel.SADNESS,
)

# Class index of each evaluation label, used by the 4-way classifier head.
EVAL_LABEL_INDEX: dict[EmotionLabel, int] = {lab: i for i, lab in enumerate(EVAL_LABELS)}

_CANONICAL = {lab.value: lab for lab in EmotionLabel}
# Dataset files vary in spelling of the no-majority outcome.
_ALIASES = {"non_neutral": EmotionLabel.NON_NEUTRAL, "nonneutral": EmotionLabel.NON_NEUTRAL}


def parse_emotion(raw: str) -> EmotionLabel:
    """Parse an emotion string case-insensitively to its canonical label.

    Raises ValueError for strings outside the eight annotation outcomes.
    """
    key = raw.strip().lower()
    label = _CANONICAL.get(key) or _ALIASES.get(key)
    if label is None:
        raise ValueError(f"unknown emotion label: {raw!r}")
    return label
