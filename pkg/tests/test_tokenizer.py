import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialemo.errors import ConfigError, DataError
from dialemo.textprep import CausalPair
from dialemo.tokenizer import (
    CLS,
    PAD,
    RESERVED_TOKENS,
    SEP,
    UNK,
    EncodedSequence,
    Vocab,
    build_vocab,
    decode_ids,
    encode_pair,
    encode_texts,
    load_vocab,
    mask_for_mlm,
    pretokenize,
    read_scenes,
    sample_nsp_pairs,
    save_vocab,
    wordpiece_tokenize,
    write_scenes,
)


class TestBuildVocab:
    def test_whole_words_present(self):
        v = build_vocab(["aa aa", "aa b"], min_freq=1, size_cap=100)
        assert "aa" in v and "b" in v
        for tok in RESERVED_TOKENS:
            assert tok in v

    def test_reserved_only_for_empty_strings(self):
        v = build_vocab(["", "   "], min_freq=1, size_cap=100)
        assert v.tokens == list(RESERVED_TOKENS)

    def test_min_freq_prunes_rare(self):
        v = build_vocab(["rare word word word", "rare"], min_freq=3, size_cap=100)
        assert "rare" not in v
        assert "word" in v

    def test_reserved_never_pruned(self):
        v = build_vocab(["x"], min_freq=5, size_cap=len(RESERVED_TOKENS))
        assert v.tokens == list(RESERVED_TOKENS)

    def test_size_cap_below_reserved_rejected(self):
        with pytest.raises(ConfigError):
            build_vocab(["x"], size_cap=3)

    def test_frequency_then_lexicographic_order(self):
        v = build_vocab(["b b a a c"], min_freq=1, size_cap=len(RESERVED_TOKENS) + 3)
        added = v.tokens[len(RESERVED_TOKENS):]
        assert added == ["a", "b", "c"]

    def test_deterministic(self):
        corpus = ["some words appear here", "words appear twice appear"]
        assert build_vocab(corpus).tokens == build_vocab(corpus).tokens

    def test_suffix_pieces_fill_remaining_room(self):
        v = build_vocab(["playing playing sing"], min_freq=1, size_cap=100)
        assert "##ing" in v
        assert "##g" in v

    def test_ids_dense_from_zero(self):
        v = build_vocab(["a b c"], size_cap=100)
        assert sorted(v.index.values()) == list(range(len(v)))


class TestPretokenize:
    def test_punctuation_split(self):
        assert pretokenize("What's wrong?") == ["What", "'", "s", "wrong", "?"]

    def test_lowercase_switch(self):
        assert pretokenize("Hello WORLD", lowercase=True) == ["hello", "world"]

    def test_reserved_atomic_and_uncased(self):
        got = pretokenize("[Chandler] [says] Hi", lowercase=True)
        assert got == ["[Chandler]", "[says]", "hi"]


class TestWordpiece:
    def test_reserved_tokens_atomic(self):
        v = build_vocab(["hi"], size_cap=100)
        assert wordpiece_tokenize("[Chandler] [says] hi", v) == ["[Chandler]", "[says]", "hi"]

    def test_greedy_longest_match(self):
        v = Vocab(list(RESERVED_TOKENS) + ["play", "##ing"])
        assert wordpiece_tokenize("playing", v) == ["play", "##ing"]

    def test_unmatched_word_is_unk(self):
        v = Vocab(list(RESERVED_TOKENS) + ["play"])
        assert wordpiece_tokenize("zzz", v) == [UNK]

    def test_no_continuation_start_is_unk(self):
        # "ing" alone cannot start a word even though ##ing exists.
        v = Vocab(list(RESERVED_TOKENS) + ["##ing"])
        assert wordpiece_tokenize("ing", v) == [UNK]

    @given(st.text(alphabet="abcd ", max_size=40))
    @settings(max_examples=50)
    def test_round_trip_reassembly(self, text):
        v = build_vocab([text, "a b c d ab cd abc"], min_freq=1, size_cap=500)
        toks = wordpiece_tokenize(text, v)
        rebuilt = "".join(t[2:] if t.startswith("##") else " " + t for t in toks).split()
        assert rebuilt == pretokenize(text)


class TestEncode:
    def test_minimal_layout(self, tiny_vocab):
        v = build_vocab(["a"], size_cap=100)
        e = encode_pair(CausalPair("a", "[None]", None), v, 8)
        a = v.id("a")
        assert e.ids == (v.cls_id, a, v.sep_id, v.index["[None]"], v.sep_id, 0, 0, 0)
        assert e.segments == (0, 0, 0, 1, 1, 0, 0, 0)
        assert e.attention_mask == (1, 1, 1, 1, 1, 0, 0, 0)

    def test_context_truncated_first(self):
        v = build_vocab(["t1 t2 t3 c1 c2 c3 c4 c5 c6 c7 c8 c9 ca"], size_cap=100)
        # capacity for B = max_len - len(A) - 3 = 10 - 3 - 3 = 4
        e = encode_texts("t1 t2 t3", "c1 c2 c3 c4 c5 c6 c7 c8 c9 ca", v, 10)
        toks = decode_ids(e.ids, v)
        assert toks == [CLS, "t1", "t2", "t3", SEP, "c1", "c2", "c3", "c4", SEP]

    def test_target_truncated_after_context_exhausted(self):
        v = build_vocab(["t1 t2 t3 t4 t5 t6 t7 t8 t9 c1"], size_cap=100)
        e = encode_texts("t1 t2 t3 t4 t5 t6 t7 t8 t9", "c1", v, 8)
        toks = decode_ids(e.ids, v)
        assert toks == [CLS, "t1", "t2", "t3", "t4", "t5", SEP, SEP]

    def test_max_len_minimum(self, tiny_vocab):
        with pytest.raises(ConfigError):
            encode_texts("a", "b", tiny_vocab, 7)

    def test_empty_target_rejected(self, tiny_vocab):
        with pytest.raises(DataError):
            encode_texts("", "context", tiny_vocab, 8)

    def test_label_attached(self, tiny_vocab):
        e = encode_pair(CausalPair("hello", "world", None), tiny_vocab, 12, label=2)
        assert e.label == 2

    @given(
        a=st.text(alphabet="abc ", min_size=1, max_size=30).filter(str.strip),
        b=st.text(alphabet="abc ", max_size=30),
        max_len=st.integers(8, 20),
    )
    @settings(max_examples=60)
    def test_layout_invariants(self, a, b, max_len):
        v = build_vocab(["a b c ab bc abc"], size_cap=200)
        e = encode_texts(a, b, v, max_len)
        assert len(e.ids) == len(e.segments) == len(e.attention_mask) == max_len
        assert e.ids[0] == v.cls_id
        real = [i for i, m in zip(e.ids, e.attention_mask) if m]
        assert sum(1 for i in real if i == v.sep_id) == 2
        # mask is a prefix of ones
        n = sum(e.attention_mask)
        assert e.attention_mask == tuple([1] * n + [0] * (max_len - n))
        # segments: 0 through the first SEP, 1 after it for real tokens
        first_sep = e.ids.index(v.sep_id)
        for pos in range(max_len):
            if pos <= first_sep:
                assert e.segments[pos] == 0
            elif e.attention_mask[pos]:
                assert e.segments[pos] == 1
            else:
                assert e.segments[pos] == 0


class TestVocabFile:
    def test_round_trip(self, tiny_vocab):
        buf = io.StringIO()
        save_vocab(tiny_vocab, buf)
        buf.seek(0)
        again = load_vocab(buf, lowercase=tiny_vocab.lowercase)
        assert again.tokens == tiny_vocab.tokens

    def test_line_number_is_id(self, tiny_vocab):
        buf = io.StringIO()
        save_vocab(tiny_vocab, buf)
        lines = buf.getvalue().splitlines()
        assert lines[tiny_vocab.id("hello")] == "hello"

    def test_missing_reserved_rejected(self):
        with pytest.raises(DataError):
            load_vocab(io.StringIO("hello\nworld\n"))


class TestMaskForMLM:
    def _encoded(self, v, n_tokens=60):
        words = " ".join(f"w{i % 7}" for i in range(n_tokens))
        return encode_texts(words, "w0 w1", v, n_tokens + 10)

    @pytest.fixture()
    def v(self):
        return build_vocab(["w0 w1 w2 w3 w4 w5 w6"], size_cap=100)

    def test_rate_zero_no_corruption(self, v):
        e = self._encoded(v)
        ex = mask_for_mlm(e, rate=0.0, rng=np.random.default_rng(0), vocab=v)
        assert ex.targets == {}
        assert ex.corrupted.ids == e.ids

    def test_rate_one_forced_mask(self, v):
        e = self._encoded(v)
        ex = mask_for_mlm(
            e, rate=1.0, rng=np.random.default_rng(0), mask_frac=1.0, random_frac=0.0, vocab=v
        )
        special = v.special_ids()
        candidates = [
            pos for pos, (tok, m) in enumerate(zip(e.ids, e.attention_mask))
            if m and tok not in special
        ]
        assert sorted(ex.targets) == candidates
        assert all(ex.corrupted.ids[pos] == v.mask_id for pos in ex.targets)

    def test_specials_never_selected(self, v):
        e = self._encoded(v)
        ex = mask_for_mlm(e, rate=1.0, rng=np.random.default_rng(1), vocab=v)
        for pos in ex.targets:
            assert e.ids[pos] not in v.special_ids()
            assert e.attention_mask[pos] == 1

    def test_selected_fraction_binomial_interval(self, v):
        # 10,000 candidate tokens at rate 0.15: the 99.9% interval is well
        # inside [0.13, 0.17].
        rng = np.random.default_rng(123)
        total = selected = 0
        for _ in range(170):
            e = self._encoded(v)
            ex = mask_for_mlm(e, rate=0.15, rng=rng, vocab=v)
            total += 62  # 60 target + 2 context tokens
            selected += len(ex.targets)
        assert total >= 10000
        assert 0.13 <= selected / total <= 0.17

    def test_corruption_category_frequencies(self, v):
        rng = np.random.default_rng(7)
        n_mask = n_keep = n_rand = 0
        for _ in range(120):
            e = self._encoded(v)
            ex = mask_for_mlm(e, rate=1.0, rng=rng, vocab=v)
            for pos, orig in ex.targets.items():
                got = ex.corrupted.ids[pos]
                if got == v.mask_id:
                    n_mask += 1
                elif got == orig:
                    n_keep += 1
                else:
                    n_rand += 1
        total = n_mask + n_keep + n_rand
        assert abs(n_mask / total - 0.8) < 0.02
        # random replacement can coincide with the original id, so the
        # observed unchanged fraction sits slightly above 0.1
        assert abs(n_keep / total - 0.1) < 0.03
        assert n_rand / total > 0.05

    def test_same_seed_bit_identical(self, v):
        e = self._encoded(v)
        a = mask_for_mlm(e, rng=np.random.default_rng(99), vocab=v)
        b = mask_for_mlm(e, rng=np.random.default_rng(99), vocab=v)
        assert a.corrupted.ids == b.corrupted.ids
        assert a.targets == b.targets

    def test_no_maskable_tokens_rejected(self, v):
        e = EncodedSequence(
            ids=(v.cls_id, v.sep_id, v.sep_id, v.pad_id),
            segments=(0, 0, 1, 0),
            attention_mask=(1, 1, 1, 0),
        )
        with pytest.raises(ValueError):
            mask_for_mlm(e, rng=np.random.default_rng(0), vocab=v)


SCENES = [["alpha one", "alpha two", "alpha three"], ["beta one", "beta two"]]


class TestSampleNSP:
    @pytest.fixture()
    def v(self):
        return build_vocab([u for s in SCENES for u in s], size_cap=100)

    def test_n_zero_empty(self, v):
        assert sample_nsp_pairs(SCENES, 0, np.random.default_rng(0), v, 10) == []

    def test_golden_frozen_from_first_run(self, v):
        out = sample_nsp_pairs(SCENES, 6, np.random.default_rng(42), v, 10)
        got = [(ex.is_next, decode_ids(ex.encoded.ids, v)) for ex in out]
        assert got == [
            (False, [CLS, "beta", "one", SEP, "alpha", "two", SEP]),
            (False, [CLS, "alpha", "two", SEP, "beta", "one", SEP]),
            (False, [CLS, "alpha", "two", SEP, "beta", "two", SEP]),
            (False, [CLS, "beta", "one", SEP, "alpha", "one", SEP]),
            (True, [CLS, "beta", "one", SEP, "beta", "two", SEP]),
            (False, [CLS, "alpha", "two", SEP, "beta", "two", SEP]),
        ]

    def test_positive_fraction_interval(self, v):
        out = sample_nsp_pairs(SCENES, 10000, np.random.default_rng(5), v, 10)
        frac = sum(ex.is_next for ex in out) / len(out)
        assert 0.47 <= frac <= 0.53

    def test_positives_consecutive_negatives_cross_scene(self, v):
        utt_scene = {}
        nexts = {}
        for si, scene in enumerate(SCENES):
            for t, u in enumerate(scene):
                utt_scene[u] = si
                if t + 1 < len(scene):
                    nexts[u] = scene[t + 1]
        out = sample_nsp_pairs(SCENES, 300, np.random.default_rng(3), v, 10)
        for ex in out:
            toks = decode_ids(ex.encoded.ids, v)
            sep1 = toks.index(SEP)
            a = " ".join(toks[1:sep1])
            b = " ".join(toks[sep1 + 1 : -1])
            if ex.is_next:
                assert nexts[a] == b
            else:
                assert utt_scene[a] != utt_scene[b]

    def test_preconditions(self, v):
        with pytest.raises(ValueError):
            sample_nsp_pairs([SCENES[0]], 1, np.random.default_rng(0), v, 10)
        with pytest.raises(ValueError):
            sample_nsp_pairs([["solo"], SCENES[1]], 1, np.random.default_rng(0), v, 10)


def test_scene_file_round_trip():
    buf = io.StringIO()
    write_scenes(SCENES, buf)
    buf.seek(0)
    assert read_scenes(buf) == SCENES
