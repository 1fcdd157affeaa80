import math

import numpy as np
import pytest

from dialemo.model import Model, ModelConfig, init_params
from dialemo.tokenizer import build_vocab, mask_for_mlm, sample_nsp_pairs
from dialemo.train import TrainConfig, init_pretrain_heads, pretrain_batch_losses, pretrain_mlm_nsp
from dialemo.train.pretrain import _pretrain_batch_grads

WORDS = [f"w{i}" for i in range(120)]

# Ten disjoint word families; a scene draws only from its family, so masked
# tokens are inferable from their neighbours and cross-scene NSP negatives
# are detectably off-topic: the toy loss has real signal to descend.
FAMILIES = [[f"f{k}t{j}" for j in range(8)] for k in range(10)]


def _scene_corpus(n_scenes=20, utt_per_scene=5, seed=0, structured=False):
    rng = np.random.default_rng(seed)
    scenes = []
    for si in range(n_scenes):
        pool = FAMILIES[si % len(FAMILIES)] if structured else WORDS
        scene = []
        for _ in range(utt_per_scene):
            ws = [pool[int(rng.integers(len(pool)))] for _ in range(5)]
            scene.append(" ".join(ws))
        scenes.append(scene)
    return scenes


def _setup(n_scenes=20, d_model=16, dropout=0.0, seed=1, structured=False):
    scenes = _scene_corpus(n_scenes, structured=structured)
    vocab = build_vocab([u for s in scenes for u in s], min_freq=1, size_cap=400)
    cfg = ModelConfig(
        vocab_size=len(vocab), max_len=16, n_labels=4,
        d_model=d_model, n_heads=2, n_layers=2, d_ff=32, dropout_head=dropout,
    )
    model = Model(cfg, init_params(cfg, np.random.default_rng(seed)))
    return scenes, vocab, model


def _batch(scenes, vocab, model, n, rate, rng):
    nsp = sample_nsp_pairs(scenes, n, rng, vocab, model.cfg.max_len)
    examples = [mask_for_mlm(e.encoded, rate=rate, rng=rng, vocab=vocab) for e in nsp]
    labels = np.array([int(e.is_next) for e in nsp])
    return examples, labels


class TestInitialLosses:
    def test_nsp_loss_near_ln2_at_init(self):
        scenes, vocab, model = _setup()
        rng = np.random.default_rng(3)
        heads = init_pretrain_heads(model, rng)
        examples, labels = _batch(scenes, vocab, model, 256, rate=0.0, rng=rng)
        mlm_loss, nsp_loss, _, _ = pretrain_batch_losses(model, heads, examples, labels)
        assert mlm_loss == 0.0
        assert abs(nsp_loss - math.log(2)) / math.log(2) < 0.05

    def test_mlm_loss_near_log_vocab_at_init(self):
        scenes, vocab, model = _setup()
        rng = np.random.default_rng(4)
        heads = init_pretrain_heads(model, rng)
        examples, labels = _batch(scenes, vocab, model, 256, rate=0.15, rng=rng)
        mlm_loss, _, _, _ = pretrain_batch_losses(model, heads, examples, labels)
        want = math.log(len(vocab))
        assert abs(mlm_loss - want) / want < 0.05


class TestPretrainGradients:
    def test_tied_embedding_gradient_against_finite_difference(self):
        scenes, vocab, model = _setup(n_scenes=4, d_model=8)
        rng = np.random.default_rng(5)
        heads = init_pretrain_heads(model, rng)
        examples, labels = _batch(scenes, vocab, model, 6, rate=0.4, rng=rng)

        def loss_fn():
            m, n, _, _ = pretrain_batch_losses(model, heads, examples, labels)
            return m + n

        _, _, trace, caches = pretrain_batch_losses(model, heads, examples, labels)
        grads = _pretrain_batch_grads(model, heads, trace, labels, caches)

        # token_emb picks up both the input lookup and the tied MLM output.
        tensors = {"token_emb": model.params["token_emb"],
                   "mlm.bias": heads["mlm.bias"],
                   "nsp.w": heads["nsp.w"]}
        check_rng = np.random.default_rng(0)
        h = 1e-4
        for name, tensor in tensors.items():
            flat = tensor.reshape(-1)
            gflat = grads[name].reshape(-1)
            idx = check_rng.choice(tensor.size, size=12, replace=False)
            for i in idx:
                orig = flat[i]
                flat[i] = orig + h
                lp = loss_fn()
                flat[i] = orig - h
                lm = loss_fn()
                flat[i] = orig
                num = (lp - lm) / (2 * h)
                assert gflat[i] == pytest.approx(num, rel=2e-3, abs=1e-7), name

    def test_classifier_head_untouched(self):
        scenes, vocab, model = _setup(n_scenes=4, d_model=8)
        rng = np.random.default_rng(6)
        heads = init_pretrain_heads(model, rng)
        examples, labels = _batch(scenes, vocab, model, 4, rate=0.3, rng=rng)
        _, _, trace, caches = pretrain_batch_losses(model, heads, examples, labels)
        grads = _pretrain_batch_grads(model, heads, trace, labels, caches)
        assert "head.w" not in grads and "head.b" not in grads


class TestPretrainLoop:
    def test_loss_decreases_over_ten_epochs(self):
        scenes, vocab, model = _setup(n_scenes=100, d_model=32, structured=True)
        tc = TrainConfig(batch_size=32, learning_rate=1.5e-3, n_epochs=10, seed=2)
        model, metrics = pretrain_mlm_nsp(model, scenes, tc, vocab)
        totals = [m.total for m in metrics]
        assert len(totals) == 10
        assert all(b < a for a, b in zip(totals, totals[1:])), totals

    def test_deterministic_under_seed(self):
        scenes, vocab, _ = _setup(n_scenes=6, d_model=8)

        def run():
            cfg = ModelConfig(vocab_size=len(vocab), max_len=16, d_model=8,
                              n_heads=2, n_layers=1, d_ff=16, dropout_head=0.5)
            model = Model(cfg, init_params(cfg, np.random.default_rng(1)))
            tc = TrainConfig(batch_size=8, learning_rate=1e-3, n_epochs=2, seed=4)
            _, metrics = pretrain_mlm_nsp(model, scenes, tc, vocab)
            return [(m.mlm_loss, m.nsp_loss) for m in metrics]

        assert run() == run()

    def test_requires_two_scenes(self):
        scenes, vocab, model = _setup(n_scenes=2)
        tc = TrainConfig(batch_size=8, learning_rate=1e-3, n_epochs=1, seed=0)
        with pytest.raises(ValueError):
            pretrain_mlm_nsp(model, scenes[:1], tc, vocab)
