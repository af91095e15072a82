"""2D Gabor filterbank for spectro-temporal modulation features.

Each filter is a complex sinusoidal carrier under a separable 2D Hann
envelope, tuned to one (spectral, temporal) modulation frequency pair.
The bank holds only the diagonal filters: 6 temporal modulation
frequencies (2.4 .. 25 Hz) crossed with 8 signed spectral modulation
frequencies (+-0.03125 .. +-0.25 cycles/channel), 48 filters total.

A filter's output is sampled at a per-filter subset of mel channels
("representative channels", stride 1/(4|f_s|)); concatenated over the
default 26-channel bank this yields exactly 600 features per frame.

Filter real parts have exactly zero coefficient sum, and the spectrogram
is edge-replicated before correlation, so the features reject any
constant offset of the log-mel spectrogram (e.g. per-utterance gain).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.signal import correlate

from .frontend import LogMelSpectrogram

TEMPORAL_MOD_HZ = (2.4, 3.9, 6.2, 9.9, 15.7, 25.0)
SPECTRAL_MOD_CYC = (0.03125, 0.0625, 0.125, 0.25)

# Envelope spans this many carrier half-periods per axis, capped so the
# support stays commensurate with desk-scale spectrograms.
ENVELOPE_HALF_WAVES = 3.5
MAX_TEMPORAL_EXTENT = 99
MAX_SPECTRAL_EXTENT = 25


@dataclass(frozen=True)
class GaborFilterSpec:
    """Carrier frequencies (radians per channel/frame) and envelope lengths."""

    omega_m: float
    omega_l: float
    w_m: int
    w_l: int

    def __post_init__(self):
        if self.w_m < 1 or self.w_l < 1:
            raise ValueError("envelope lengths must be >= 1")


@dataclass(frozen=True)
class GaborFilter:
    spec: GaborFilterSpec
    coeffs: np.ndarray  # complex, (w_m + 2) x (w_l + 2), spectral axis first
    representative_channels: tuple

    @property
    def real(self) -> np.ndarray:
        return self.coeffs.real


@dataclass(frozen=True)
class GaborFilterbank:
    filters: tuple
    n_mels: int
    frame_rate: float

    @property
    def feature_dim(self) -> int:
        return sum(len(f.representative_channels) for f in self.filters)


@dataclass
class FeatureMatrix:
    """T x feature_dim matrix of Gabor filter responses."""

    values: np.ndarray
    frame_rate: float

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


def hann_product_envelope(w_m: int, w_l: int) -> np.ndarray:
    """Separable product of two Hann windows on support [0, W+1] per axis.

    h(n; W) = 0.5 - 0.5*cos(2*pi*n/(W+1)); zero along all edges, unit peak
    at n = (W+1)/2 on each axis when W is odd.
    """
    if w_m < 1 or w_l < 1:
        raise ValueError("envelope lengths must be >= 1")

    def hann(w):
        n = np.arange(w + 2)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / (w + 1))

    return np.outer(hann(w_m), hann(w_l))


def make_gabor_filter(spec: GaborFilterSpec, representative_channels: tuple = ()) -> GaborFilter:
    """Build one complex Gabor filter: carrier times envelope, with the real
    part made zero-sum and scaled to unit Frobenius norm.

    The carrier phase reference sits at the envelope peak (W+1)/2 on each
    axis, so real parts are even around the peak.
    """
    env = hann_product_envelope(spec.w_m, spec.w_l)
    a = np.arange(spec.w_m + 2)[:, None] - (spec.w_m + 1) / 2.0
    b = np.arange(spec.w_l + 2)[None, :] - (spec.w_l + 1) / 2.0
    carrier = np.exp(1j * (spec.omega_m * a + spec.omega_l * b))
    coeffs = carrier * env

    # Zero the plain coefficient sum of the real part so correlation rejects
    # constant inputs exactly, then normalize the real part's energy.
    real = coeffs.real - env * (coeffs.real.sum() / env.sum())
    norm = np.linalg.norm(real)
    coeffs = (real + 1j * coeffs.imag) / norm
    return GaborFilter(spec, coeffs, tuple(representative_channels))


def _envelope_length(mod_freq: float, cap: int) -> int:
    """Half-wave rule: the envelope spans ENVELOPE_HALF_WAVES carrier
    half-periods, W = round(nu / (2 f)) - 1, capped."""
    w = int(np.floor(ENVELOPE_HALF_WAVES / (2.0 * mod_freq) + 0.5)) - 1
    return min(w, cap)


def representative_channel_stride(f_s: float) -> int:
    """Channel sampling stride for spectral modulation magnitude |f_s|."""
    return int(round(1.0 / (4.0 * abs(f_s))))


def build_diagonal_filterbank(n_mels: int = 26, frame_rate: float = 100.0) -> GaborFilterbank:
    """Construct the 48-filter diagonal bank (600 features at 26 channels).

    Ordering: temporal frequency ascending, spectral frequency ascending
    (-0.25 .. -0.03125, then +0.03125 .. +0.25) within each temporal block.
    """
    if n_mels < 8:
        raise ValueError("need at least 8 mel channels")
    signed_spectral = sorted([-f for f in SPECTRAL_MOD_CYC] + list(SPECTRAL_MOD_CYC))
    filters = []
    for f_t in TEMPORAL_MOD_HZ:
        f_t_per_frame = f_t / frame_rate
        w_l = _envelope_length(f_t_per_frame, MAX_TEMPORAL_EXTENT)
        for f_s in signed_spectral:
            w_m = _envelope_length(abs(f_s), MAX_SPECTRAL_EXTENT)
            spec = GaborFilterSpec(
                omega_m=2.0 * np.pi * f_s,
                omega_l=2.0 * np.pi * f_t_per_frame,
                w_m=w_m,
                w_l=w_l,
            )
            channels = tuple(range(0, n_mels, representative_channel_stride(f_s)))
            filters.append(make_gabor_filter(spec, channels))
    return GaborFilterbank(tuple(filters), n_mels, frame_rate)


def _alignment(w: int) -> int:
    """Integer index of the envelope peak (floor for even-length supports)."""
    return (w + 1) // 2


def filter_response(values: np.ndarray, filt: GaborFilter) -> np.ndarray:
    """Same-size 2D correlation of a T x n_mels matrix with the filter's
    real part, output aligned to the envelope peak, edges replicated."""
    kernel = filt.real.T  # (time, channel)
    b_c, a_c = _alignment(filt.spec.w_l), _alignment(filt.spec.w_m)
    pad_t = (b_c, kernel.shape[0] - 1 - b_c)
    pad_m = (a_c, kernel.shape[1] - 1 - a_c)
    padded = np.pad(values, (pad_t, pad_m), mode="edge")
    return correlate(padded, kernel, mode="valid", method="auto")


def extract_features(spec: LogMelSpectrogram, bank: GaborFilterbank) -> FeatureMatrix:
    """Filter a log-mel spectrogram with every filter in the bank and sample
    each response at that filter's representative channels.

    Returns one row per spectrogram frame, columns concatenated in
    filterbank order.
    """
    values = spec.values if isinstance(spec, LogMelSpectrogram) else np.asarray(spec)
    if values.shape[1] != bank.n_mels:
        raise ValueError(f"spectrogram has {values.shape[1]} channels, filterbank expects {bank.n_mels}")
    columns = []
    for filt in bank.filters:
        response = filter_response(values, filt)
        columns.append(response[:, list(filt.representative_channels)])
    frame_rate = spec.frame_rate if isinstance(spec, LogMelSpectrogram) else bank.frame_rate
    return FeatureMatrix(np.concatenate(columns, axis=1), frame_rate)


def export_filterbank(bank: GaborFilterbank, out_dir) -> None:
    """Dump each filter's real part as a plain-text matrix (row = spectral
    axis) plus a manifest line per filter for debugging."""
    os.makedirs(out_dir, exist_ok=True)
    lines = []
    for i, filt in enumerate(bank.filters):
        np.savetxt(os.path.join(out_dir, f"filter_{i:02d}.txt"), filt.real)
        f_t = filt.spec.omega_l * bank.frame_rate / (2.0 * np.pi)
        f_s = filt.spec.omega_m / (2.0 * np.pi)
        chans = ",".join(str(c) for c in filt.representative_channels)
        lines.append(f"{i}\t{f_t:.6g}\t{f_s:.6g}\t{filt.spec.w_l}\t{filt.spec.w_m}\t{chans}")
    with open(os.path.join(out_dir, "manifest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
