import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialemo.labels import EmotionLabel
from dialemo.train import (
    AdamState,
    adam_step,
    class_weights,
    nll_loss,
    nll_loss_grad,
    weighted_nll_loss,
    weighted_nll_loss_grad,
)
from dialemo.train.losses import clamp_count

FRIENDS_TRAIN_COUNTS = {
    EmotionLabel.ANGER: 598,
    EmotionLabel.JOY: 1406,
    EmotionLabel.NEUTRAL: 5243,
    EmotionLabel.SADNESS: 413,
}


class TestClassWeights:
    def test_friends_counts_against_division_oracle(self):
        w = class_weights(FRIENDS_TRAIN_COUNTS)
        # oracle: straight division by hand
        assert w[EmotionLabel.ANGER] == pytest.approx(413 / 598, abs=1e-12)
        assert w[EmotionLabel.JOY] == pytest.approx(413 / 1406, abs=1e-12)
        assert w[EmotionLabel.NEUTRAL] == pytest.approx(413 / 5243, abs=1e-12)
        assert w[EmotionLabel.SADNESS] == 1.0
        # frozen decimals
        assert w[EmotionLabel.ANGER] == pytest.approx(0.690635, abs=1e-6)
        assert w[EmotionLabel.JOY] == pytest.approx(0.293741, abs=1e-6)
        assert w[EmotionLabel.NEUTRAL] == pytest.approx(0.078772, abs=1e-6)

    def test_equal_counts_all_one(self):
        assert class_weights({"a": 7, "b": 7}) == {"a": 1.0, "b": 1.0}

    def test_two_class_direct(self):
        assert class_weights({"a": 1, "b": 2}) == {"a": 1.0, "b": 0.5}

    def test_zero_count_rejected(self):
        with pytest.raises(ValueError):
            class_weights({"a": 0, "b": 2})

    def test_exactly_one_weight_attains_one(self):
        w = class_weights(FRIENDS_TRAIN_COUNTS)
        assert sum(1 for x in w.values() if x == 1.0) == 1
        assert all(0 < x <= 1 for x in w.values())

    @given(st.dictionaries(st.text("abcd", min_size=1, max_size=3),
                           st.integers(1, 10_000), min_size=1, max_size=6),
           st.integers(2, 50))
    def test_scale_invariance(self, counts, k):
        w1 = class_weights(counts)
        w2 = class_weights({lab: c * k for lab, c in counts.items()})
        for lab in counts:
            assert w1[lab] == pytest.approx(w2[lab], rel=1e-12)


class TestNLL:
    def test_perfect_predictions_zero(self):
        P = np.eye(4)[[0, 1, 2, 3]]
        assert nll_loss(P, np.arange(4)) == pytest.approx(0.0, abs=1e-12)

    def test_uniform_is_ln4(self):
        P = np.full((5, 4), 0.25)
        assert nll_loss(P, np.zeros(5, dtype=int)) == pytest.approx(math.log(4), abs=1e-9)

    def test_two_example_hand_value(self):
        P = np.array([[0.5, 0.5, 0.0, 0.0], [0.25, 0.25, 0.25, 0.25]])
        want = (math.log(2) + math.log(4)) / 2  # = 1.039721 by hand
        assert want == pytest.approx(1.039721, abs=1e-6)
        assert nll_loss(P, np.array([0, 1])) == pytest.approx(want, abs=1e-12)

    def test_zero_probability_clamped_with_counter(self):
        before = clamp_count()
        P = np.array([[1.0, 0.0, 0.0, 0.0]])
        loss = nll_loss(P, np.array([1]))
        assert loss == pytest.approx(-math.log(1e-12), rel=1e-9)
        assert clamp_count() == before + 1

    def test_grad_is_p_minus_onehot_over_n(self):
        P = np.array([[0.7, 0.1, 0.1, 0.1], [0.25, 0.25, 0.25, 0.25]])
        g = nll_loss_grad(P, np.array([0, 2]))
        want = P.copy()
        want[0, 0] -= 1
        want[1, 2] -= 1
        np.testing.assert_allclose(g, want / 2, atol=1e-15)


class TestWeightedNLL:
    def test_single_example_hand_value(self):
        # -log(0.5 * 0.5) / 0.5 = 2.772589
        P = np.array([[0.5, 0.5]])
        w = np.array([0.5, 1.0])
        got = weighted_nll_loss(P, np.array([0]), w)
        assert got == pytest.approx(-math.log(0.25) / 0.5, abs=1e-12)
        assert got == pytest.approx(2.772589, abs=1e-6)

    def test_uniform_weights_reduce_to_nll(self):
        rng = np.random.default_rng(0)
        P = rng.dirichlet(np.ones(4), size=16)
        gold = rng.integers(0, 4, size=16)
        w = np.ones(4)
        assert weighted_nll_loss(P, gold, w) == pytest.approx(
            nll_loss(P, gold), abs=1e-12
        )

    @given(seed=st.integers(0, 10_000), n=st.integers(1, 32))
    @settings(max_examples=100, deadline=None)
    def test_uniform_weight_identity_property(self, seed, n):
        rng = np.random.default_rng(seed)
        P = rng.dirichlet(np.ones(4), size=n)
        gold = rng.integers(0, 4, size=n)
        a = weighted_nll_loss(P, gold, np.ones(4))
        b = nll_loss(P, gold)
        assert abs(a - b) < 1e-12

    def test_grad_normalizer(self):
        P = np.array([[0.5, 0.5], [0.9, 0.1]])
        gold = np.array([0, 1])
        w = np.array([0.5, 0.25])
        g = weighted_nll_loss_grad(P, gold, w)
        want = P.copy()
        want[0, 0] -= 1
        want[1, 1] -= 1
        np.testing.assert_allclose(g, want / 0.75, atol=1e-15)


class TestAdam:
    def test_zero_gradient_no_move(self):
        params = {"w": np.array([1.0, 2.0])}
        state = AdamState()
        adam_step(params, {"w": np.zeros(2)}, state, lr=0.1)
        np.testing.assert_array_equal(params["w"], [1.0, 2.0])
        assert state.step == 1

    def test_first_step_magnitude_about_lr(self):
        g = np.array([0.3, -2.0, 1e-4])
        params = {"w": np.zeros(3)}
        adam_step(params, {"w": g.copy()}, AdamState(), lr=0.01)
        # bias-corrected first step is -lr * g / (|g| + eps') ~ -lr * sign(g)
        np.testing.assert_allclose(params["w"], -0.01 * np.sign(g), rtol=1e-2)

    def test_two_runs_bit_identical(self):
        rng = np.random.default_rng(4)
        g1 = rng.normal(size=5)
        g2 = rng.normal(size=5)

        def run():
            params = {"w": np.ones(5)}
            state = AdamState()
            adam_step(params, {"w": g1.copy()}, state, lr=0.05)
            adam_step(params, {"w": g2.copy()}, state, lr=0.05)
            return params["w"]

        np.testing.assert_array_equal(run(), run())

    def test_state_tracks_moments(self):
        state = AdamState()
        params = {"w": np.zeros(1)}
        adam_step(params, {"w": np.array([2.0])}, state, lr=0.1, beta1=0.9, beta2=0.999)
        np.testing.assert_allclose(state.m["w"], [0.2], atol=1e-15)
        np.testing.assert_allclose(state.v["w"], [0.004], atol=1e-15)
