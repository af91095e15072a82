"""End-to-end blind (T60, DRR) estimation.

Pipeline: audio -> log-mel spectrogram -> Gabor features -> per-frame class
posteriors -> temporal average over the utterance -> winner-takes-all ->
cell-center (T60, DRR) estimate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .audio_io import AudioBuffer
from .frontend import FrameParams, log_mel_spectrogram
from .gabor import GaborFilterbank, build_diagonal_filterbank, extract_features
from .grid import ClassGrid, ClassVocabulary, center_of
from .mlp import MlpModel, forward


@dataclass
class Estimate:
    t60_hat: float
    drr_hat: float
    class_id: int
    mean_posterior: np.ndarray
    n_frames: int


def temporal_average(posteriors: np.ndarray) -> np.ndarray:
    """Arithmetic mean of per-frame posteriors over the utterance."""
    posteriors = np.atleast_2d(np.asarray(posteriors, dtype=np.float64))
    if posteriors.shape[0] < 1 or posteriors.size == 0:
        raise ValueError("need at least one frame of posteriors")
    return posteriors.mean(axis=0)


def decide(mean_posterior: np.ndarray, vocabulary: ClassVocabulary, grid: ClassGrid) -> tuple:
    """Winner-takes-all: (class_id, t60_hat, drr_hat) of the highest mean
    activation; exact ties break toward the lowest class index."""
    mean_posterior = np.asarray(mean_posterior)
    if mean_posterior.ndim != 1 or len(mean_posterior) != len(vocabulary):
        raise ValueError(f"posterior length {mean_posterior.shape} != vocabulary size {len(vocabulary)}")
    class_id = int(np.argmax(mean_posterior))
    t60_hat, drr_hat = center_of(grid, vocabulary.cells[class_id])
    return class_id, t60_hat, drr_hat


def pipeline_for(model: MlpModel) -> tuple:
    """(filterbank, frame params) matching a model's embedded configuration."""
    params = model.frame_params
    bank = build_diagonal_filterbank(params.n_mels, params.frame_rate())
    return bank, params


def frame_posteriors(
    audio: AudioBuffer,
    model: MlpModel,
    bank: GaborFilterbank,
    params: FrameParams,
    timings: dict | None = None,
) -> np.ndarray:
    """Per-frame class posteriors (T x C). Optionally records wall-clock
    seconds per stage into ``timings`` as 'features_s' and 'mlp_s'."""
    t0 = time.perf_counter()
    spec = log_mel_spectrogram(audio, params)
    feats = extract_features(spec, bank)
    t1 = time.perf_counter()
    post = forward(model, feats.values)
    t2 = time.perf_counter()
    if timings is not None:
        timings["features_s"] = t1 - t0
        timings["mlp_s"] = t2 - t1
    return post


def estimate_utterance(
    audio: AudioBuffer,
    model: MlpModel,
    bank: GaborFilterbank | None = None,
    params: FrameParams | None = None,
    timings: dict | None = None,
) -> Estimate:
    """Blind (T60, DRR) estimate for one utterance.

    Deterministic for fixed inputs; raises "input too short" for audio
    below one frame.
    """
    if bank is None or params is None:
        default_bank, default_params = pipeline_for(model)
        bank = bank or default_bank
        params = params or default_params
    if bank.feature_dim != model.d:
        raise ValueError(f"filterbank feature dim {bank.feature_dim} != model input dim {model.d}")
    post = frame_posteriors(audio, model, bank, params, timings)
    mean_post = temporal_average(post)
    class_id, t60_hat, drr_hat = decide(mean_post, model.vocabulary, model.grid)
    return Estimate(t60_hat, drr_hat, class_id, mean_post, post.shape[0])
