"""EmotionLines-format corpus ingestion, splitting, and label statistics.

The input layout is a JSON array of dialogues, each dialogue an array of
objects with string fields "speaker", "utterance", and "emotion" (extra keys
such as "annotation" are ignored).  File order is authoritative: the
train/validation split takes the top N dialogues for training and the rest
for validation.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Iterator

from dialemo.errors import DataError, ParseError
from dialemo.labels import EmotionLabel, parse_emotion

if TYPE_CHECKING:
    from dialemo.textprep import CausalPair


class Source(Enum):
    FRIENDS = "friends"
    EMOTIONPUSH = "emotionpush"


@dataclass(frozen=True)
class Utterance:
    """One speaker turn: the unit of emotion labeling.

    ``emotion`` is None only for unlabeled prediction inputs.
    """

    speaker: str
    text: str
    emotion: EmotionLabel | None
    dialogue_index: int


@dataclass(frozen=True)
class Dialogue:
    utterances: tuple[Utterance, ...]
    source: Source

    def __len__(self) -> int:
        return len(self.utterances)


@dataclass(frozen=True)
class DialogueSet:
    """An ordered collection of dialogues; order is exactly the file order."""

    dialogues: tuple[Dialogue, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.dialogues)

    def __iter__(self) -> Iterator[Dialogue]:
        return iter(self.dialogues)

    @property
    def n_utterances(self) -> int:
        return sum(len(d) for d in self.dialogues)


def parse_dialogues(raw: str, source: Source, require_emotion: bool = True) -> DialogueSet:
    """Parse EmotionLines-layout JSON text into a DialogueSet.

    Utterance order within each dialogue and dialogue order within the file
    are preserved.  Unknown emotion strings are rejected; with
    ``require_emotion=False`` a missing "emotion" key is allowed (for
    prediction inputs) and stored as None.
    """
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}", offset=exc.pos) from exc

    if not isinstance(data, list):
        raise ParseError("top-level JSON value must be an array of dialogues")

    dialogues = []
    for d_idx, entry in enumerate(data):
        if not isinstance(entry, list):
            raise ParseError(f"dialogue {d_idx} is not an array")
        utterances = []
        for u_idx, obj in enumerate(entry):
            if not isinstance(obj, dict):
                raise ParseError(f"dialogue {d_idx}, utterance {u_idx}: not an object")
            try:
                speaker = obj["speaker"]
                text = obj["utterance"]
            except KeyError as exc:
                raise ParseError(
                    f"dialogue {d_idx}, utterance {u_idx}: missing key {exc.args[0]!r}"
                ) from exc
            if not isinstance(speaker, str) or not isinstance(text, str):
                raise ParseError(
                    f"dialogue {d_idx}, utterance {u_idx}: speaker/utterance must be strings"
                )
            emotion = None
            if "emotion" in obj:
                try:
                    emotion = parse_emotion(obj["emotion"])
                except ValueError as exc:
                    raise DataError(f"dialogue {d_idx}: {exc}") from exc
            elif require_emotion:
                raise ParseError(f"dialogue {d_idx}, utterance {u_idx}: missing key 'emotion'")
            utterances.append(Utterance(speaker, text, emotion, dialogue_index=u_idx))
        dialogues.append(Dialogue(tuple(utterances), source))
    return DialogueSet(tuple(dialogues))


def serialize_dialogues(ds: DialogueSet) -> str:
    """Inverse of parse_dialogues; speaker/text/emotion survive byte-exactly."""
    out = []
    for d in ds:
        out.append(
            [
                {"speaker": u.speaker, "utterance": u.text}
                | ({"emotion": u.emotion.value} if u.emotion is not None else {})
                for u in d.utterances
            ]
        )
    return json.dumps(out, ensure_ascii=False, indent=1)


def split_train_val(ds: DialogueSet, n_train: int) -> tuple[DialogueSet, DialogueSet]:
    """Split into the top ``n_train`` dialogues and the remainder, in order."""
    if n_train > len(ds):
        raise ValueError(f"n_train={n_train} exceeds the {len(ds)} available dialogues")
    if n_train < 0:
        raise ValueError("n_train must be non-negative")
    return DialogueSet(ds.dialogues[:n_train]), DialogueSet(ds.dialogues[n_train:])


def filter_labels(pairs: Iterable[CausalPair], keep: set[EmotionLabel]) -> list[CausalPair]:
    """Keep only the pairs whose target label is in ``keep``.

    Filtering happens after pair construction, so an utterance with a
    discarded label still serves as context for its successor.
    """
    if not keep:
        raise ValueError("keep set must be non-empty")
    return [p for p in pairs if p.label in keep]


def label_distribution(pairs: Iterable[CausalPair]) -> dict[EmotionLabel, int]:
    """Count pairs by target label."""
    return dict(Counter(p.label for p in pairs))
