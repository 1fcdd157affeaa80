"""Vocabulary, WordPiece-style tokenization, and pre-training example generation.

The vocabulary reserves ids for the structural tokens ([PAD], [UNK], [CLS],
[SEP], [MASK]), the preprocessing sentinels ([None], [URL], [EMPTY],
[PERSON], [ORG], [TIME]), and the personality tokens ([says] plus one token
per main speaker).  Remaining slots hold whole words and then "##" suffix
pieces, ordered by descending corpus frequency with lexicographic
tie-breaking, so builds are deterministic.

Tokenization is greedy longest-match-first within each whitespace- and
punctuation-split word; reserved bracketed tokens are matched atomically
before any splitting or lowercasing.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from dialemo.errors import ConfigError, DataError
from dialemo.textprep import MAIN_SPEAKERS, NONE_SENTINEL, SAYS_TOKEN, CausalPair

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"

RESERVED_TOKENS: tuple[str, ...] = (
    PAD,
    UNK,
    CLS,
    SEP,
    MASK,
    NONE_SENTINEL,
    "[URL]",
    "[EMPTY]",
    "[PERSON]",
    "[ORG]",
    "[TIME]",
    SAYS_TOKEN,
    *(f"[{name}]" for name in MAIN_SPEAKERS),
)

CONTINUATION = "##"


def _is_punct(ch: str) -> bool:
    return not ch.isalnum() and not ch.isspace()


def _split_word(chunk: str) -> list[str]:
    """Split a whitespace-free chunk on punctuation; each punct char stands alone."""
    words = []
    buf = []
    for ch in chunk:
        if _is_punct(ch):
            if buf:
                words.append("".join(buf))
                buf = []
            words.append(ch)
        else:
            buf.append(ch)
    if buf:
        words.append("".join(buf))
    return words


def pretokenize(text: str, lowercase: bool = False) -> list[str]:
    """Whitespace/punctuation word split with atomic reserved tokens."""
    out = []
    for chunk in text.split():
        if chunk in _RESERVED_SET:
            out.append(chunk)
            continue
        out.extend(_split_word(chunk.lower() if lowercase else chunk))
    return out


_RESERVED_SET = frozenset(RESERVED_TOKENS)


@dataclass
class Vocab:
    """token <-> id mapping; ids are dense from 0 in file order."""

    tokens: list[str]
    lowercase: bool = False
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise DataError("vocabulary contains duplicate tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def id(self, token: str) -> int:
        return self.index.get(token, self.index[UNK])

    @property
    def pad_id(self) -> int:
        return self.index[PAD]

    @property
    def cls_id(self) -> int:
        return self.index[CLS]

    @property
    def sep_id(self) -> int:
        return self.index[SEP]

    @property
    def mask_id(self) -> int:
        return self.index[MASK]

    @property
    def n_reserved(self) -> int:
        return len(RESERVED_TOKENS)

    def special_ids(self) -> frozenset[int]:
        """Ids never selected for MLM corruption: [CLS], [SEP], [PAD]."""
        return frozenset((self.pad_id, self.cls_id, self.sep_id))


def build_vocab(
    corpus: Iterable[str],
    min_freq: int = 1,
    size_cap: int = 30000,
    lowercase: bool = False,
) -> Vocab:
    """Count whole words, then suffix pieces, and keep the most frequent.

    Reserved tokens always survive.  Ties are broken lexicographically so the
    result depends only on the corpus content.
    """
    if size_cap < len(RESERVED_TOKENS):
        raise ConfigError(
            f"size_cap={size_cap} is below the {len(RESERVED_TOKENS)} reserved tokens"
        )
    word_freq: Counter[str] = Counter()
    n_texts = 0
    for text in corpus:
        n_texts += 1
        for word in pretokenize(text, lowercase=lowercase):
            if word not in _RESERVED_SET:
                word_freq[word] += 1
    if n_texts == 0:
        raise ValueError("corpus is empty")

    tokens = list(RESERVED_TOKENS)
    room = size_cap - len(tokens)
    whole = sorted(
        (w for w, c in word_freq.items() if c >= min_freq),
        key=lambda w: (-word_freq[w], w),
    )
    tokens.extend(whole[:room])
    room -= min(len(whole), room)

    if room > 0:
        piece_freq: Counter[str] = Counter()
        for word, c in word_freq.items():
            for i in range(1, len(word)):
                piece_freq[CONTINUATION + word[i:]] += c
        pieces = sorted(
            (p for p, c in piece_freq.items() if c >= min_freq),
            key=lambda p: (-piece_freq[p], p),
        )
        tokens.extend(pieces[:room])
    return Vocab(tokens, lowercase=lowercase)


def save_vocab(v: Vocab, fh: TextIO) -> None:
    """One token per line; the line number (from 0) is the id."""
    for tok in v.tokens:
        fh.write(tok + "\n")


def load_vocab(fh: TextIO, lowercase: bool = False) -> Vocab:
    tokens = [line.rstrip("\n") for line in fh if line.rstrip("\n")]
    for tok in RESERVED_TOKENS:
        if tok not in tokens:
            raise DataError(f"vocabulary file is missing reserved token {tok}")
    return Vocab(tokens, lowercase=lowercase)


def wordpiece_tokenize(t: str, v: Vocab) -> list[str]:
    """Greedy longest-match-first subword split; unmatched words become [UNK]."""
    out = []
    for word in pretokenize(t, lowercase=v.lowercase):
        if word in _RESERVED_SET:
            out.append(word)
            continue
        pieces = []
        start = 0
        while start < len(word):
            end = len(word)
            match = None
            while start < end:
                sub = word[start:end]
                if start > 0:
                    sub = CONTINUATION + sub
                if sub in v.index:
                    match = sub
                    break
                end -= 1
            if match is None:
                pieces = [UNK]
                break
            pieces.append(match)
            start = end
        out.extend(pieces)
    return out


# --------------------------------------------------------------- encoding

@dataclass(frozen=True)
class EncodedSequence:
    """A fixed-length encoder input.

    ``label`` is the class index for the attached classification head (the
    evaluation labels for fine-tuning, the tweet emotions for hashtag
    pre-training), or None when unlabeled.
    """

    ids: tuple[int, ...]
    segments: tuple[int, ...]
    attention_mask: tuple[int, ...]
    label: int | None = None

    @property
    def max_len(self) -> int:
        return len(self.ids)

    def n_real(self) -> int:
        return sum(self.attention_mask)


def encode_texts(target: str, context: str, v: Vocab, max_len: int) -> EncodedSequence:
    """Encode two sentences as [CLS] A [SEP] B [SEP] [PAD]...

    Over-length inputs are truncated from the end of the context first, then
    from the end of the target (the target carries the label).
    """
    if max_len < 8:
        raise ConfigError(f"max_len={max_len} is below the minimum of 8")
    tokens_a = wordpiece_tokenize(target, v)
    tokens_b = wordpiece_tokenize(context, v)
    capacity = max_len - 3
    if len(tokens_b) > max(capacity - len(tokens_a), 0):
        tokens_b = tokens_b[: max(capacity - len(tokens_a), 0)]
    if len(tokens_a) > capacity:
        tokens_a = tokens_a[:capacity]
    if not tokens_a:
        raise DataError(f"target utterance encodes to no tokens: {target!r}")

    ids = (
        [v.cls_id]
        + [v.id(tok) for tok in tokens_a]
        + [v.sep_id]
        + [v.id(tok) for tok in tokens_b]
        + [v.sep_id]
    )
    n_real = len(ids)
    segments = [0] * (len(tokens_a) + 2) + [1] * (len(tokens_b) + 1)
    pad = max_len - n_real
    return EncodedSequence(
        ids=tuple(ids + [v.pad_id] * pad),
        segments=tuple(segments + [0] * pad),
        attention_mask=tuple([1] * n_real + [0] * pad),
    )


def encode_pair(p: CausalPair, v: Vocab, max_len: int, label: int | None = None) -> EncodedSequence:
    """Encode a causal pair: target as sentence A, context as sentence B."""
    enc = encode_texts(p.target_text, p.context_text, v, max_len)
    return EncodedSequence(enc.ids, enc.segments, enc.attention_mask, label=label)


def decode_ids(ids: Sequence[int], v: Vocab, keep_pad: bool = False) -> list[str]:
    toks = [v.tokens[i] for i in ids]
    return toks if keep_pad else [t for t in toks if t != PAD]


# ----------------------------------------------------------- pre-training

@dataclass(frozen=True)
class MLMExample:
    """A corrupted sequence plus the original ids at each corrupted position."""

    corrupted: EncodedSequence
    targets: dict[int, int]


@dataclass(frozen=True)
class NSPExample:
    encoded: EncodedSequence
    is_next: bool


def mask_for_mlm(
    e: EncodedSequence,
    rate: float = 0.15,
    rng: np.random.Generator | None = None,
    mask_frac: float = 0.8,
    random_frac: float = 0.1,
    vocab: Vocab | None = None,
) -> MLMExample:
    """Corrupt non-special real tokens for the cloze task.

    Each candidate is selected independently with probability ``rate``;
    selected tokens become [MASK] with probability ``mask_frac``, a random
    non-reserved vocabulary id with probability ``random_frac``, and stay
    unchanged otherwise.  Positions holding [CLS], [SEP], or [PAD] are never
    selected.  Draw order is fixed (ascending position), so a seeded
    generator reproduces the corruption bit-exactly.
    """
    if rng is None:
        rng = np.random.default_rng()
    if vocab is None:
        raise ValueError("mask_for_mlm requires the vocabulary for replacements")
    special = vocab.special_ids()
    candidates = [
        pos
        for pos, (tok, real) in enumerate(zip(e.ids, e.attention_mask))
        if real and tok not in special
    ]
    if not candidates:
        raise ValueError("sequence has no maskable tokens")
    n_random_pool = len(vocab) - vocab.n_reserved

    ids = list(e.ids)
    targets: dict[int, int] = {}
    for pos in candidates:
        if rng.random() >= rate:
            continue
        targets[pos] = ids[pos]
        u = rng.random()
        if u < mask_frac:
            ids[pos] = vocab.mask_id
        elif u < mask_frac + random_frac and n_random_pool > 0:
            ids[pos] = vocab.n_reserved + int(rng.integers(n_random_pool))
    corrupted = EncodedSequence(tuple(ids), e.segments, e.attention_mask, label=e.label)
    return MLMExample(corrupted=corrupted, targets=targets)


def sample_nsp_pairs(
    scenes: Sequence[Sequence[str]],
    n: int,
    rng: np.random.Generator,
    vocab: Vocab,
    max_len: int,
) -> list[NSPExample]:
    """Draw next-sentence-prediction examples from scene-segmented text.

    Positives take two consecutive utterances from one scene; negatives pair
    sentence A with a uniformly random utterance from a different scene.
    The expected positive fraction is 0.5.
    """
    if len(scenes) < 2:
        raise ValueError("need at least two scenes for negative sampling")
    for i, scene in enumerate(scenes):
        if len(scene) < 2:
            raise ValueError(f"scene {i} has fewer than two utterances")
    out = []
    for _ in range(n):
        is_next = bool(rng.random() < 0.5)
        s = int(rng.integers(len(scenes)))
        t = int(rng.integers(len(scenes[s]) - 1))
        sent_a = scenes[s][t]
        if is_next:
            sent_b = scenes[s][t + 1]
        else:
            other = int(rng.integers(len(scenes) - 1))
            if other >= s:
                other += 1
            sent_b = scenes[other][int(rng.integers(len(scenes[other])))]
        out.append(NSPExample(encode_texts(sent_a, sent_b, vocab, max_len), is_next))
    return out


# ------------------------------------------------------------ scene files

def read_scenes(fh: TextIO) -> list[list[str]]:
    """Pre-training corpus: one utterance per line, blank line between scenes."""
    scenes: list[list[str]] = []
    current: list[str] = []
    for line in fh:
        line = line.rstrip("\n")
        if line.strip() == "":
            if current:
                scenes.append(current)
                current = []
        else:
            current.append(line)
    if current:
        scenes.append(current)
    return scenes


def write_scenes(scenes: Iterable[Iterable[str]], fh: TextIO) -> None:
    for i, scene in enumerate(scenes):
        if i:
            fh.write("\n")
        for utt in scene:
            fh.write(utt + "\n")
