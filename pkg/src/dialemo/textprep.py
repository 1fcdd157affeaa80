"""Causal utterance pairing and per-dataset text preparation.

Every utterance becomes one training example pairing it (the target,
sentence A) with the utterance spoken just before it (the context,
sentence B).  The first utterance of a dialogue has no causal context and
receives the literal sentinel ``[None]``.

Friends utterances spoken by one of the six main characters are prefixed
with personality tokens ("[Name] [says]"); EmotionPush chat text gets its
hyperlinks, empty utterances, and anonymized name entities unified into
sentinel tokens while all other informal content (emoji, repeats,
capitalization) is preserved byte-exactly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, TextIO

from dialemo.corpus import Dialogue, Source
from dialemo.errors import DataError
from dialemo.labels import EmotionLabel, parse_emotion

NONE_SENTINEL = "[None]"
SAYS_TOKEN = "[says]"

MAIN_SPEAKERS = ("Rachel", "Monica", "Phoebe", "Joey", "Chandler", "Ross")


@dataclass(frozen=True)
class CausalPair:
    """A target utterance plus its causal context: one training example."""

    target_text: str
    context_text: str
    label: EmotionLabel | None
    target_speaker: str = ""
    context_speaker: str | None = None


@dataclass(frozen=True)
class SpeakerTokenPolicy:
    """Which speakers receive personality tokens, and the token spellings."""

    main_speakers: tuple[str, ...] = MAIN_SPEAKERS
    says_token: str = SAYS_TOKEN

    def token_for(self, speaker: str | None) -> str | None:
        """Bracketed speaker token, or None when the speaker gets no tokens.

        Matching is a case-insensitive exact match on the whole speaker
        field; multi-word speaker fields never match.
        """
        if speaker is None:
            return None
        for name in self.main_speakers:
            if speaker.lower() == name.lower():
                return f"[{name}]"
        return None

    def speaker_tokens(self) -> tuple[str, ...]:
        return tuple(f"[{name}]" for name in self.main_speakers)


def build_causal_pairs(d: Dialogue) -> list[CausalPair]:
    """One pair per utterance: target u_t, context u_{t-1} (or the sentinel)."""
    if len(d) == 0:
        raise ValueError("dialogue is empty")
    pairs = []
    prev = None
    for utt in d.utterances:
        pairs.append(
            CausalPair(
                target_text=utt.text,
                context_text=prev.text if prev is not None else NONE_SENTINEL,
                label=utt.emotion,
                target_speaker=utt.speaker,
                context_speaker=prev.speaker if prev is not None else None,
            )
        )
        prev = utt
    return pairs


def apply_personality_tokens(p: CausalPair, policy: SpeakerTokenPolicy) -> CausalPair:
    """Prefix main-speaker sides with "[Name] [says] "; idempotent."""

    def prefixed(text: str, speaker: str | None) -> str:
        token = policy.token_for(speaker)
        if token is None or text == NONE_SENTINEL:
            return text
        prefix = f"{token} {policy.says_token} "
        if text.startswith(prefix):
            return text
        return prefix + text

    return replace(
        p,
        target_text=prefixed(p.target_text, p.target_speaker),
        context_text=prefixed(p.context_text, p.context_speaker),
    )


_URL_PREFIXES = ("http://", "https://", "www.")
_ENTITY_RE = re.compile(r"(person|organization|time)_\d+\Z")
_ENTITY_TOKEN = {"person": "[PERSON]", "organization": "[ORG]", "time": "[TIME]"}


def normalize_chat_text(t: str) -> str:
    """Unify hyperlinks, empty utterances, and anonymized entities.

    Everything else, including emoticons and informal spelling, is kept
    byte-exactly; idempotent.
    """
    if t.strip() == "":
        return "[EMPTY]"
    parts = re.split(r"(\s+)", t)
    for i, tok in enumerate(parts):
        if not tok or tok.isspace():
            continue
        if tok.startswith(_URL_PREFIXES):
            parts[i] = "[URL]"
            continue
        m = _ENTITY_RE.fullmatch(tok)
        if m:
            parts[i] = _ENTITY_TOKEN[m.group(1)]
    return "".join(parts)


def normalize_pair(p: CausalPair) -> CausalPair:
    """normalize_chat_text applied to both sides (sentinel passes through)."""
    return replace(
        p,
        target_text=normalize_chat_text(p.target_text),
        context_text=p.context_text
        if p.context_text == NONE_SENTINEL
        else normalize_chat_text(p.context_text),
    )


def render_pair(p: CausalPair) -> str:
    """The two-sentence surface form: "[CLS] target [SEP] context [SEP]"."""
    return f"[CLS] {p.target_text} [SEP] {p.context_text} [SEP]"


def prepare_dialogue(
    d: Dialogue,
    personality_tokens: bool | None = None,
    chat_normalize: bool | None = None,
    policy: SpeakerTokenPolicy = SpeakerTokenPolicy(),
) -> list[CausalPair]:
    """Pair a dialogue and apply its source's preprocessing strategy.

    By default personality tokens apply only to Friends and chat
    normalization only to EmotionPush; pass explicit flags to override.
    """
    if personality_tokens is None:
        personality_tokens = d.source is Source.FRIENDS
    if chat_normalize is None:
        chat_normalize = d.source is Source.EMOTIONPUSH
    pairs = build_causal_pairs(d)
    if chat_normalize:
        pairs = [normalize_pair(p) for p in pairs]
    if personality_tokens:
        pairs = [apply_personality_tokens(p, policy) for p in pairs]
    return pairs


# ---------------------------------------------------------------- pairs file

def write_pairs_file(pairs: Iterable[CausalPair], source: Source, fh: TextIO) -> None:
    """One JSON record per line: {target, context, label, source}."""
    for p in pairs:
        record = {
            "target": p.target_text,
            "context": p.context_text,
            "label": p.label.value if p.label is not None else None,
            "source": source.value,
        }
        fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_pairs_file(fh: TextIO) -> tuple[list[CausalPair], Source | None]:
    """Read a pairs file; speaker fields are not stored and come back empty."""
    pairs = []
    source = None
    for lineno, line in enumerate(fh, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
            label = record["label"]
            pairs.append(
                CausalPair(
                    target_text=record["target"],
                    context_text=record["context"],
                    label=parse_emotion(label) if label is not None else None,
                )
            )
            source = Source(record["source"]) if record.get("source") else source
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise DataError(f"pairs file line {lineno}: {exc}") from exc
    return pairs, source
