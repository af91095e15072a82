import numpy as np
import pytest

from conftest import make_model
from revparams.audio_io import AudioBuffer
from revparams.estimator import decide, estimate_utterance, frame_posteriors, temporal_average
from revparams.frontend import FrameParams
from revparams.gabor import build_diagonal_filterbank
from revparams.grid import ClassGrid, ClassVocabulary, center_of

GRID = ClassGrid()
VOCAB = ClassVocabulary(((0, 0), (1, 2), (2, 4), (3, 6), (4, 8), (5, 10), (6, 12), (7, 14)))
PARAMS = FrameParams()
BANK = build_diagonal_filterbank()


def full_model(seed=0):
    return make_model(d=600, h=16, c=len(VOCAB), seed=seed, vocabulary=VOCAB, grid=GRID)


class TestTemporalAverage:
    def test_identical_rows_average_to_that_row(self):
        row = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(temporal_average(np.tile(row, (9, 1))), row, atol=1e-15)

    def test_frame_permutation_invariance(self, rng):
        post = rng.random((30, 8))
        perm = rng.permutation(30)
        np.testing.assert_allclose(temporal_average(post), temporal_average(post[perm]), atol=1e-12)

    def test_two_one_hot_rows(self):
        post = np.zeros((2, 4))
        post[0, 1] = 1.0
        post[1, 3] = 1.0
        np.testing.assert_allclose(temporal_average(post), [0.0, 0.5, 0.0, 0.5])

    def test_zero_frames_raises(self):
        with pytest.raises(ValueError):
            temporal_average(np.zeros((0, 4)))


class TestDecide:
    def test_one_hot_selects_that_class(self):
        mean = np.zeros(len(VOCAB))
        mean[5] = 1.0
        class_id, t60, drr = decide(mean, VOCAB, GRID)
        assert class_id == 5
        assert (t60, drr) == center_of(GRID, VOCAB.cells[5])

    def test_exact_tie_breaks_to_lowest_index(self):
        mean = np.zeros(len(VOCAB))
        mean[2] = mean[7] = 0.5
        assert decide(mean, VOCAB, GRID)[0] == 2

    def test_positive_scaling_invariance(self, rng):
        mean = rng.random(len(VOCAB))
        assert decide(mean, VOCAB, GRID)[0] == decide(42.0 * mean, VOCAB, GRID)[0]

    def test_dominating_class_always_wins(self, rng):
        post = rng.random((25, len(VOCAB)))
        post[:, 3] = post.max(axis=1) + 0.1  # class 3 dominates every frame
        assert decide(temporal_average(post), VOCAB, GRID)[0] == 3

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            decide(np.ones(3), VOCAB, GRID)


class TestEstimateUtterance:
    def test_deterministic(self, rng):
        model = full_model()
        audio = AudioBuffer(0.1 * rng.standard_normal(16000))
        e1 = estimate_utterance(audio, model, BANK, PARAMS)
        e2 = estimate_utterance(audio, model, BANK, PARAMS)
        assert e1.class_id == e2.class_id
        np.testing.assert_array_equal(e1.mean_posterior, e2.mean_posterior)

    def test_estimate_fields_consistent(self, rng):
        model = full_model()
        audio = AudioBuffer(0.1 * rng.standard_normal(12000))
        est = estimate_utterance(audio, model, BANK, PARAMS)
        assert est.n_frames == (12000 - 400) // 160 + 1
        assert (est.t60_hat, est.drr_hat) == center_of(GRID, VOCAB.cells[est.class_id])
        assert est.mean_posterior.sum() == pytest.approx(1.0, abs=1e-9)
        assert GRID.t60_min <= est.t60_hat <= GRID.t60_max
        assert GRID.drr_min <= est.drr_hat <= GRID.drr_max

    def test_self_concatenation_preserves_interior_mean(self, rng):
        model = full_model(seed=3)
        x = 0.1 * rng.standard_normal(3 * 16000)
        single = frame_posteriors(AudioBuffer(x), model, BANK, PARAMS)
        double = frame_posteriors(AudioBuffer(np.concatenate([x, x])), model, BANK, PARAMS)
        t = single.shape[0]
        margin = 60  # beyond the widest temporal filter half-extent
        a = single[margin : t - margin].mean(axis=0)
        b = double[margin : t - margin].mean(axis=0)
        np.testing.assert_allclose(a, b, atol=1e-6)

    def test_too_short_input_propagates(self):
        with pytest.raises(ValueError, match="input too short"):
            estimate_utterance(AudioBuffer(np.zeros(100)), full_model(), BANK, PARAMS)

    def test_feature_dim_mismatch_raises(self, rng):
        model = make_model(d=10, h=4, c=len(VOCAB), vocabulary=VOCAB)
        with pytest.raises(ValueError, match="feature dim"):
            estimate_utterance(AudioBuffer(np.zeros(16000)), model, BANK, PARAMS)

    def test_timings_recorded(self, rng):
        timings = {}
        estimate_utterance(AudioBuffer(0.1 * rng.standard_normal(8000)), full_model(), BANK, PARAMS, timings)
        assert timings["features_s"] > 0.0
        assert timings["mlp_s"] > 0.0
